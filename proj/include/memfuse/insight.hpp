#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "memfuse/model.hpp"
#include "memfuse/sample.hpp"

namespace memfuse::insight {

enum class Format { csv, json, markdown };

Format parse_format(std::string_view s);

// ---- factor analysis --------------------------------------------------------

enum class FactorStatus { ok, degenerate, skipped };

std::string_view to_string(FactorStatus s);

struct GroupSummary {
    std::string name;
    std::size_t n = 0;
    std::optional<double> mean;
    std::optional<double> sd;  // sample standard deviation
    bool included = true;      // false for groups reported but left out of the test

    friend bool operator==(const GroupSummary&, const GroupSummary&) = default;
};

struct FactorResult {
    std::string factor;  // pace, scene_count, orientation, emotion_count, duration, color_theme_count
    std::string test;    // anova, welch_t, spearman_permutation
    FactorStatus status = FactorStatus::ok;
    std::string notice;
    std::vector<GroupSummary> groups;
    std::optional<double> statistic;  // F, t or ρ; empty when undefined or infinite
    bool infinite = false;
    std::optional<double> df1;
    std::optional<double> df2;
    std::optional<double> p_value;
    std::size_t n_used = 0;
    std::size_t n_unknown = 0;

    friend bool operator==(const FactorResult&, const FactorResult&) = default;
};

struct FactorReport {
    std::size_t n_samples = 0;
    std::size_t permutations = 0;
    std::uint64_t seed = 0;
    std::vector<FactorResult> factors;

    friend bool operator==(const FactorReport&, const FactorReport&) = default;
};

struct FactorOptions {
    std::size_t permutations = 10000;
    std::uint64_t seed = 0;
    std::size_t min_continuous = 10;
};

/// Relates `scores[i]` to the content factors of `samples[i]`:
///   pace (slow vs fast, medium reported only) and scene-count terciles by
///   one-way ANOVA, orientation by Welch t-test, and emotion count, duration
///   and color-theme count by Spearman ρ with a seeded permutation p-value,
///   p = (1 + #{|ρ_perm| >= |ρ|}) / (1 + permutations).
/// Unknown values (enum unknown, or 0 for counts and duration) are excluded
/// per factor and counted. The result does not depend on sample order.
FactorReport factor_analysis(std::span<const Sample> samples, std::span<const double> scores,
                             const FactorOptions& options = {});

// ---- reranking --------------------------------------------------------------

enum class Category { low, medium, high };

std::string_view to_string(Category c);
/// low: s <= 0.5, medium: 0.5 < s < 0.7, high: s >= 0.7.
Category categorize(double score);

struct ScoredItem {
    std::string id;
    double original_score = 0.0;
    std::vector<std::pair<std::string, double>> candidates;  // (id, score)
};

struct RerankItem {
    std::string id;
    Category category = Category::low;
    double original_score = 0.0;
    double best_score = 0.0;
    std::string chosen;
    std::optional<double> improvement_pct;

    friend bool operator==(const RerankItem&, const RerankItem&) = default;
};

struct CategorySummary {
    std::string category;  // low, medium, high, overall
    std::size_t n = 0;
    std::optional<double> original_mean;
    std::optional<double> original_sd;
    std::optional<double> best_mean;
    std::optional<double> best_sd;
    std::optional<double> improvement_pct;

    friend bool operator==(const CategorySummary&, const CategorySummary&) = default;
};

struct RerankReport {
    std::vector<RerankItem> items;
    std::vector<CategorySummary> categories;  // low, medium, high, overall

    friend bool operator==(const RerankReport&, const RerankReport&) = default;
};

/// Picks each item's best candidate (largest score; ties go to the
/// lexicographically smallest candidate id) and aggregates per category of
/// the original score. Throws ValidationError for an item without candidates.
RerankReport build_rerank_report(std::span<const ScoredItem> items);

/// Scores every sample that lists candidates, and the candidates themselves
/// (looked up by id in `pool`), with the eval-mode predictor.
RerankReport rerank(std::span<const Sample> pool, const ModelParams& params, const ModelConfig& config);

// ---- rendering --------------------------------------------------------------

std::string render(const FactorReport& report, Format format);
std::string render(const RerankReport& report, Format format);

nlohmann::ordered_json to_json(const FactorReport& report);
nlohmann::ordered_json to_json(const RerankReport& report);
FactorReport factor_report_from_json(const nlohmann::json& j);
RerankReport rerank_report_from_json(const nlohmann::json& j);

}  // namespace memfuse::insight
