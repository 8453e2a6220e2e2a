#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "memfuse/errors.hpp"
#include "memfuse/stats.hpp"
#include "stat_oracles.hpp"

using namespace memfuse;
using namespace memfuse::stats;

TEST(Spearman, Examples) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> rev(x.rbegin(), x.rend());
    EXPECT_EQ(spearman(x, x), 1.0);
    EXPECT_EQ(spearman(x, rev), -1.0);
    EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 1, 2}), -0.5);
}

TEST(Spearman, Errors) {
    const std::vector<double> c{2, 2, 2, 2};
    const std::vector<double> x{1, 2, 3, 4};
    EXPECT_THROW(spearman(c, x), UndefinedStatisticError);
    EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{2, 1}), DimensionError);
    EXPECT_THROW(spearman(x, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Spearman, TieFreeListsMatchRankOracleExactly) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 4);
        const auto x = oracle::distinct_values(n, rng);
        const auto y = oracle::distinct_values(n, rng);
        EXPECT_EQ(spearman(x, y), oracle::spearman_tie_free(x, y)) << "trial " << trial;
    }
}

TEST(Spearman, TiedListsMatchAverageRankOracle) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> small(0, 3);
    int checked = 0;
    while (checked < 500) {
        const std::size_t n = 3 + static_cast<std::size_t>(checked % 6);
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = small(rng);
        for (auto& v : y) v = small(rng);
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
        if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) continue;
        EXPECT_NEAR(spearman(x, y), oracle::pearson(oracle::average_ranks(x), oracle::average_ranks(y)), 1e-12);
        ++checked;
    }
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(12), y(12);
        for (auto& v : x) v = std::round(n(rng) * 3);  // some ties
        for (auto& v : y) v = n(rng);
        std::vector<double> fx, gy;
        for (double v : x) fx.push_back(std::exp(v / 4) + 7);
        for (double v : y) gy.push_back(-std::atan(v) * 3);
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
        EXPECT_EQ(spearman(fx, gy), -spearman(x, y));
    }
}

TEST(Rank, AverageRanksAndSum) {
    const std::vector<double> v{10, 20, 20, 5, 20};
    const auto r = rank(v);
    EXPECT_EQ(r.ranks, (std::vector<double>{2, 4, 4, 1, 4}));
    EXPECT_EQ(r.values, v);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> d(0, 5);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(17);
        for (auto& e : x) e = d(rng);
        const auto rr = rank(x);
        EXPECT_EQ(std::accumulate(rr.ranks.begin(), rr.ranks.end(), 0.0), 17.0 * 18.0 / 2.0);
        EXPECT_EQ(rr.ranks, oracle::average_ranks(x));
    }
}

TEST(Pearson, Examples) {
    const std::vector<double> x{0.5, 1, 2, 3.25, 7};
    std::vector<double> aff, neg;
    for (double v : x) {
        aff.push_back(2 * v + 1);
        neg.push_back(-v);
    }
    EXPECT_NEAR(pearson(x, aff), 1.0, 1e-12);
    EXPECT_NEAR(pearson(x, neg), -1.0, 1e-12);
    const std::vector<double> a{1, 2, 4}, b{1, 3, 3};
    // means 7/3, 7/3; Sxy = 8/3, Sxx = 14/3, Syy = 8/3
    EXPECT_NEAR(pearson(a, b), (8.0 / 3) / std::sqrt(14.0 / 3 * 8.0 / 3), 1e-12);
    EXPECT_THROW(pearson(a, std::vector<double>{1, 1, 1}), UndefinedStatisticError);
}

TEST(Mse, Examples) {
    const std::vector<double> a{0.1, 0.9, 0.3};
    EXPECT_EQ(mse(a, a), 0.0);
    EXPECT_EQ(mse(std::vector<double>{0}, std::vector<double>{1}), 1.0);
    EXPECT_DOUBLE_EQ(mse(std::vector<double>{0.2, 0.4}, std::vector<double>{0.7, 0.4}), 0.125);
    EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), DimensionError);
}

TEST(IncompleteBeta, MatchesSeriesOracle) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> shape(0.3, 12.0), xs(0.01, 0.99);
    for (int t = 0; t < 300; ++t) {
        const double a = shape(rng), b = shape(rng), x = xs(rng);
        EXPECT_NEAR(incomplete_beta(a, b, x), oracle::incomplete_beta_series(a, b, x), 1e-10)
            << a << " " << b << " " << x;
    }
    EXPECT_EQ(incomplete_beta(2, 3, 0.0), 0.0);
    EXPECT_EQ(incomplete_beta(2, 3, 1.0), 1.0);
    EXPECT_NEAR(incomplete_beta(1, 1, 0.37), 0.37, 1e-15);
    EXPECT_THROW(incomplete_beta(-1, 2, 0.5), RangeError);
    EXPECT_THROW(incomplete_beta(1, 2, 1.5), RangeError);
}

TEST(IncompleteBeta, ReflectionIdentity) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> shape(0.2, 40.0), xs(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        const double a = shape(rng), b = shape(rng), x = xs(rng);
        EXPECT_NEAR(incomplete_beta(a, b, x), 1.0 - incomplete_beta(b, a, 1.0 - x), 1e-12);
    }
}

TEST(Anova, HandComputedCase) {
    const std::vector<std::vector<double>> groups{{1, 2, 3}, {2, 3, 4}};
    const auto r = one_way_anova(groups);
    // SSB = 3·0.25·2 = 1.5, SSW = 2 + 2 = 4
    EXPECT_NEAR(r.f_statistic, 1.5, 1e-12);
    EXPECT_EQ(r.df_between, 1);
    EXPECT_EQ(r.df_within, 4);
    EXPECT_NEAR(r.p_value, 0.2878641347266907, 1e-12);
    EXPECT_NEAR(r.p_value, oracle::t4_two_sided(std::sqrt(1.5)), 1e-12);
    EXPECT_NEAR(r.p_value, oracle::incomplete_beta_series(2.0, 0.5, 4.0 / 5.5), 1e-8);
}

TEST(Anova, IdenticalGroups) {
    const std::vector<std::vector<double>> groups{{1, 5, 2}, {1, 5, 2}, {1, 5, 2}};
    const auto r = one_way_anova(groups);
    EXPECT_EQ(r.f_statistic, 0.0);
    EXPECT_EQ(r.p_value, 1.0);
}

TEST(Anova, ZeroWithinVariance) {
    const std::vector<std::vector<double>> groups{{1, 1}, {2, 2}};
    const auto r = one_way_anova(groups);
    EXPECT_TRUE(r.infinite);
    EXPECT_EQ(r.p_value, 0.0);
}

TEST(Anova, Preconditions) {
    EXPECT_THROW(one_way_anova(std::vector<std::vector<double>>{{1, 2, 3}}), Error);
    EXPECT_THROW(one_way_anova(std::vector<std::vector<double>>{{1, 2, 3}, {4}}), Error);
}

TEST(Anova, FEqualsSquaredPooledT) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> n(0, 1);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> a(2 + t % 7), b(3 + t % 5);
        for (auto& v : a) v = n(rng);
        for (auto& v : b) v = n(rng) + 0.5;
        const std::vector<std::vector<double>> g{a, b};
        const auto f = one_way_anova(g);
        const auto tt = t_test(a, b, TTestVariant::pooled);
        EXPECT_NEAR(f.f_statistic, tt.t * tt.t, 1e-10 * std::max(1.0, f.f_statistic));
        EXPECT_NEAR(f.p_value, tt.p_value, 1e-10);
    }
}

TEST(Anova, OutputInvariants) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 1);
    for (int t = 0; t < 100; ++t) {
        std::vector<std::vector<double>> g(2 + t % 4);
        for (auto& grp : g) {
            grp.resize(2 + t % 3);
            for (auto& v : grp) v = n(rng);
        }
        const auto r = one_way_anova(g);
        EXPECT_GE(r.f_statistic, 0.0);
        EXPECT_GE(r.p_value, 0.0);
        EXPECT_LE(r.p_value, 1.0);
        EXPECT_GT(r.df_between, 0);
        EXPECT_GT(r.df_within, 0);
    }
}

TEST(TTest, Examples) {
    const std::vector<double> a{1, 2, 3};
    const auto same = t_test(a, a);
    EXPECT_EQ(same.t, 0.0);
    EXPECT_EQ(same.p_value, 1.0);
    EXPECT_LT(t_test(a, std::vector<double>{11, 12, 13}).p_value, 0.01);

    const auto pooled = t_test(std::vector<double>{1, 2}, std::vector<double>{2, 3}, TTestVariant::pooled);
    // sp² = 0.5, se = √(0.5·(1/2 + 1/2)), t = −1/√0.5
    EXPECT_NEAR(pooled.t, -std::sqrt(2.0), 1e-10);
    EXPECT_EQ(pooled.df, 2.0);
    // t with 2 df: p = 1 − |t|/√(t² + 2)
    EXPECT_NEAR(pooled.p_value, 1.0 - std::sqrt(2.0) / 2.0, 1e-10);
}

TEST(TTest, WelchMatchesHandFormula) {
    const std::vector<double> a{1.0, 2.5, 2.0, 4.0}, b{3.0, 6.0, 5.5};
    const double va = oracle::sample_var(a), vb = oracle::sample_var(b);
    const double se2 = va / 4 + vb / 3;
    const double t = (oracle::mean(a) - oracle::mean(b)) / std::sqrt(se2);
    const double df = se2 * se2 / ((va / 4) * (va / 4) / 3 + (vb / 3) * (vb / 3) / 2);
    const auto r = t_test(a, b);
    EXPECT_NEAR(r.t, t, 1e-12);
    EXPECT_NEAR(r.df, df, 1e-12);
    EXPECT_NEAR(r.p_value, oracle::incomplete_beta_series(df / 2, 0.5, df / (df + t * t)), 1e-9);
}

TEST(TTest, ConstantGroups) {
    const auto r = t_test(std::vector<double>{1, 1, 1}, std::vector<double>{2, 2});
    EXPECT_TRUE(r.infinite);
    EXPECT_EQ(r.p_value, 0.0);
    const auto z = t_test(std::vector<double>{3, 3}, std::vector<double>{3, 3, 3});
    EXPECT_EQ(z.t, 0.0);
    EXPECT_EQ(z.p_value, 1.0);
    EXPECT_THROW(t_test(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST(Distributions, SurvivalFunctions) {
    EXPECT_NEAR(f_survival(1.5, 1, 4), 0.2878641347266907, 1e-12);
    EXPECT_EQ(f_survival(0.0, 3, 7), 1.0);
    for (double t : {0.1, 0.5, 1.0, 2.0, 5.0})
        EXPECT_NEAR(t_two_sided_p(t, 4), oracle::t4_two_sided(t), 1e-12) << t;
    // Cauchy: p = 1 − 2·atan(|t|)/π
    for (double t : {0.3, 1.0, 9.0})
        EXPECT_NEAR(t_two_sided_p(-t, 1), 1.0 - 2.0 * std::atan(t) / M_PI, 1e-12) << t;
}

TEST(Moments, MeanAndVariance) {
    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    EXPECT_EQ(mean(v), 5.0);
    EXPECT_NEAR(sample_variance(v), 32.0 / 7.0, 1e-15);
    EXPECT_THROW(sample_variance(std::vector<double>{1}), Error);
}
