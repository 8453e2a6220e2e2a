#include "memfuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "memfuse/errors.hpp"

namespace memfuse::stats {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n, const char* what) {
    if (x.size() != y.size()) {
        throw DimensionError(std::string(what) + ": length mismatch " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    }
    if (x.size() < min_n) {
        throw DimensionError(std::string(what) + ": needs at least " + std::to_string(min_n) + " points, got " +
                             std::to_string(x.size()));
    }
}

double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    return h;
}

}  // namespace

RankedSeries rank(std::span<const double> values) {
    RankedSeries out{std::vector<double>(values.begin(), values.end()), std::vector<double>(values.size())};
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i + 1;
        while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
        // positions i..j-1 hold ranks i+1..j
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) out.ranks[idx[k]] = avg;
        i = j;
    }
    return out;
}

double mean(std::span<const double> x) {
    if (x.empty()) throw DimensionError("mean of an empty series");
    const double x0 = x.front();
    double s = 0.0;
    for (double v : x) s += v - x0;
    return x0 + s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    if (x.size() < 2) throw DimensionError("sample variance needs at least 2 points");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, 2, "pearson");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedStatisticError("correlation is undefined for a constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, 3, "spearman");
    const auto rx = rank(x);
    const auto ry = rank(y);
    return pearson(rx.ranks, ry.ranks);
}

double mse(std::span<const double> prediction, std::span<const double> truth) {
    check_pair(prediction, truth, 1, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - truth[i];
        s += d * d;
    }
    return s / static_cast<double>(prediction.size());
}

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw RangeError("incomplete beta needs a > 0 and b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw RangeError("incomplete beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw RangeError("F distribution needs positive degrees of freedom");
    if (std::isinf(f)) return 0.0;
    if (!(f > 0.0)) return 1.0;
    return std::clamp(incomplete_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f)), 0.0, 1.0);
}

double t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw RangeError("t distribution needs positive degrees of freedom");
    if (std::isinf(t)) return 0.0;
    if (t == 0.0) return 1.0;
    return std::clamp(incomplete_beta(0.5 * df, 0.5, df / (df + t * t)), 0.0, 1.0);
}

AnovaResult one_way_anova(std::span<const std::vector<double>> groups) {
    if (groups.size() < 2) throw DimensionError("ANOVA needs at least 2 groups");
    std::size_t total = 0;
    std::vector<double> means;
    for (const auto& g : groups) {
        if (g.size() < 2) throw DimensionError("every ANOVA group needs at least 2 points");
        total += g.size();
        means.push_back(mean(g));
    }
    if (total <= groups.size()) throw DimensionError("ANOVA needs more points than groups");

    double grand = 0.0;
    for (const auto& g : groups)
        for (double v : g) grand += v;
    grand /= static_cast<double>(total);

    const bool equal_means = std::all_of(means.begin(), means.end(), [&](double m) { return m == means.front(); });
    double ssb = 0.0, ssw = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (!equal_means) ssb += static_cast<double>(groups[i].size()) * (means[i] - grand) * (means[i] - grand);
        for (double v : groups[i]) ssw += (v - means[i]) * (v - means[i]);
    }

    AnovaResult r;
    r.df_between = static_cast<int>(groups.size() - 1);
    r.df_within = static_cast<int>(total - groups.size());
    if (ssb == 0.0) {
        r.f_statistic = 0.0;
        r.p_value = 1.0;
        return r;
    }
    if (ssw == 0.0) {
        r.f_statistic = std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        r.infinite = true;
        return r;
    }
    r.f_statistic = (ssb / r.df_between) / (ssw / r.df_within);
    r.p_value = f_survival(r.f_statistic, r.df_between, r.df_within);
    return r;
}

TTestResult t_test(std::span<const double> a, std::span<const double> b, TTestVariant variant) {
    if (a.size() < 2 || b.size() < 2) throw DimensionError("t-test needs at least 2 points per group");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = mean(a), mb = mean(b);
    const double va = sample_variance(a), vb = sample_variance(b);

    TTestResult r;
    if (va == 0.0 && vb == 0.0) {
        r.df = na + nb - 2.0;
        if (ma == mb) return r;
        r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        r.infinite = true;
        return r;
    }
    if (variant == TTestVariant::pooled) {
        const double sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
        r.t = (ma - mb) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
        r.df = na + nb - 2.0;
    } else {
        const double sa = va / na, sb = vb / nb;
        r.t = (ma - mb) / std::sqrt(sa + sb);
        r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    }
    r.p_value = t_two_sided_p(r.t, r.df);
    return r;
}

}  // namespace memfuse::stats
