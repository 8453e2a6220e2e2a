#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "memfuse/model.hpp"

namespace memfuse::train {

enum class Optimizer { adam, sgd };
enum class SelectionMetric { val_mse, val_spearman };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);
std::string_view to_string(SelectionMetric m);
SelectionMetric parse_selection_metric(std::string_view s);

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    std::size_t early_stop_patience = 10;
    SelectionMetric selection_metric = SelectionMetric::val_spearman;
    double clip_norm = 5.0;  // 0 disables clipping

    std::vector<std::string> violations() const;
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static TrainConfig from_json(const nlohmann::json& j);
};

// ---- optimizers -------------------------------------------------------------
//
// Adam, with g ← g + weight_decay·p and t counted from 1:
//   m ← β1·m + (1−β1)·g
//   v ← β2·v + (1−β2)·g²
//   p ← p − lr · (m / (1−β1ᵗ)) / (√(v / (1−β2ᵗ)) + ε)
// SGD with momentum μ:
//   u ← μ·u + g,  p ← p − lr·u

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    std::size_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState zeros_like(std::span<Tensor* const> params);
    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Throws DimensionError on shape mismatch, RangeError on non-finite grads
/// (leaving params and state untouched).
void adam_step(std::span<Tensor* const> params, std::span<const std::vector<double>> grads, AdamState& state,
               const AdamHyper& hyper);

struct SgdState {
    std::vector<std::vector<double>> velocity;

    static SgdState zeros_like(std::span<Tensor* const> params);
};

void sgd_step(std::span<Tensor* const> params, std::span<const std::vector<double>> grads, SgdState& state,
              double learning_rate, double momentum, double weight_decay);

/// Scales grads in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before scaling.
double clip_global_norm(std::span<std::vector<double>> grads, double max_norm);

// ---- training ---------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_mse = 0.0;
    std::optional<double> val_spearman;  // empty when predictions are constant
    double grad_norm_mean = 0.0;
    double grad_norm_max = 0.0;
    double wall_seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    bool stopped_early = false;

    std::size_t epochs_run() const { return epochs.size(); }
    const EpochRecord& best() const { return epochs.at(best_epoch - 1); }
    /// One JSON object per epoch. Wall time is left out when
    /// `include_timing` is false, giving a reproducible byte stream.
    std::string to_jsonl(bool include_timing = true) const;
};

struct TrainResult {
    ModelParams best_params;
    TrainLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training with seeded shuffling and dropout, model selection on
/// the validation set, and early stopping after `early_stop_patience` epochs
/// without improvement. Throws ValidationError for bad configs or overlapping
/// ids, DivergenceError for a non-finite loss or gradient.
TrainResult train(const ModelConfig& config, ModelParams params, std::span<const Sample> train_set,
                  std::span<const Sample> validation_set, const TrainConfig& tc, const EpochCallback& on_epoch = {});

struct Metrics {
    std::optional<double> spearman;
    double mse = 0.0;
    std::size_t n = 0;
};

/// Eval-mode metrics over labeled samples.
Metrics evaluate(const ModelParams& params, const ModelConfig& config, std::span<const Sample> samples);

// ---- ablations --------------------------------------------------------------

struct Variant {
    std::string name;  // "modality:video+text", "attention:average_only", ...
    ModelConfig config;
};

/// The 7 modality subsets followed by the 5 attention modes on all three
/// modalities. Single-modality variants use the cross-free counterpart of the
/// base attention mode.
std::vector<Variant> ablation_variants(const ModelConfig& base);

struct AblationRow {
    std::string variant;
    std::optional<double> spearman_rho;
    double mse = 0.0;
    std::size_t epochs_run = 0;
    std::uint64_t seed = 0;
};

/// Trains every variant (OpenMP-parallel over variants) with the same seed
/// and budget and reports validation metrics of the selected parameters.
/// `only`, when non-empty, restricts the run to the named variants.
std::vector<AblationRow> ablation_suite(const ModelConfig& base, std::span<const Sample> train_set,
                                        std::span<const Sample> validation_set, const TrainConfig& tc,
                                        const std::vector<std::string>& only = {});

std::string ablation_csv(std::span<const AblationRow> rows);
std::string ablation_markdown(std::span<const AblationRow> rows);

}  // namespace memfuse::train
