#pragma once

#include <span>
#include <vector>

namespace memfuse::stats {

struct RankedSeries {
    std::vector<double> values;
    std::vector<double> ranks;  // 1-based, ties share their average rank
};

RankedSeries rank(std::span<const double> values);

/// Population-form Pearson correlation. Throws UndefinedStatisticError for a
/// constant series, DimensionError for length mismatch or n < 2.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks. Requires n >= 3.
double spearman(std::span<const double> x, std::span<const double> y);

double mse(std::span<const double> prediction, std::span<const double> truth);

double mean(std::span<const double> x);
/// Sample variance (n - 1 denominator). Requires n >= 2.
double sample_variance(std::span<const double> x);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// P(F > f) for an F(d1, d2) variable.
double f_survival(double f, double d1, double d2);

/// Two-sided P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double t_two_sided_p(double t, double df);

struct AnovaResult {
    double f_statistic = 0.0;
    int df_between = 0;
    int df_within = 0;
    double p_value = 1.0;
    bool infinite = false;  // zero within-group variance, nonzero between
};

AnovaResult one_way_anova(std::span<const std::vector<double>> groups);

enum class TTestVariant { welch, pooled };

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    bool infinite = false;  // both groups constant with different means
};

TTestResult t_test(std::span<const double> a, std::span<const double> b, TTestVariant variant = TTestVariant::welch);

}  // namespace memfuse::stats
