#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "memfuse/autograd.hpp"
#include "memfuse/layers.hpp"
#include "memfuse/sample.hpp"

namespace memfuse {

/// How each modality's sequence is reduced and whether pooled vectors
/// cross-attend to each other.
enum class AttentionMode { self_and_cross, self_only, cross_with_average, average_only, max_only };

/// `mlp`: Linear -> ReLU -> Dropout -> Linear -> Sigmoid.
/// `literal`: Sigmoid(Linear(ReLU(Dropout(f)))) with a single linear map.
enum class FusionHead { mlp, literal };

inline constexpr std::array<AttentionMode, 5> kAllAttentionModes = {
    AttentionMode::self_and_cross, AttentionMode::self_only, AttentionMode::cross_with_average,
    AttentionMode::average_only, AttentionMode::max_only};

std::string_view to_string(AttentionMode m);
AttentionMode parse_attention_mode(std::string_view s);
std::string_view to_string(FusionHead h);
FusionHead parse_fusion_head(std::string_view s);

struct ModelConfig {
    std::vector<Modality> modalities{Modality::video, Modality::audio, Modality::text};
    std::map<Modality, std::size_t> input_dims;
    std::size_t latent_dim = 1024;
    std::size_t num_heads = 8;
    double dropout_rate = 0.1;
    AttentionMode attention_mode = AttentionMode::self_and_cross;
    std::size_t fusion_hidden_dim = 512;
    FusionHead fusion_head = FusionHead::mlp;
    double layer_norm_epsilon = 1e-5;

    /// Every broken invariant, empty when the config is valid.
    std::vector<std::string> violations() const;
    /// Throws ValidationError listing all violations.
    void validate() const;

    bool uses_self_attention() const;
    bool uses_cross_attention() const;
    nn::PoolMode pool_mode() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    /// Compact JSON with sorted keys; identical configs give identical bytes.
    std::string canonical_json() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModalityBranch {
    Modality modality = Modality::video;
    nn::Linear projection;
    nn::LayerNorm norm;
    std::optional<nn::MultiHeadAttention> self_attention;
    std::optional<nn::MultiHeadAttention> cross_attention;
};

/// Learned weights. Tensor enumeration order (used by checkpoints):
/// per branch in config modality order -- projection.weight, projection.bias,
/// norm.gain, norm.shift, then self- and cross-attention blocks when present
/// (query, key, value, output; weight before bias) -- then fusion_hidden
/// (mlp head only) and fusion_output.
struct ModelParams {
    std::vector<ModalityBranch> branches;
    std::optional<nn::Linear> fusion_hidden;
    nn::Linear fusion_output;

    void for_each(const std::function<void(const std::string& name, Tensor&)>& fn);
    void for_each(const std::function<void(const std::string& name, const Tensor&)>& fn) const;
    std::size_t parameter_count() const;
    std::size_t tensor_count() const;
    void zero_grad();
    bool all_finite() const;
};

/// Closed-form parameter count for a config (see README for the formula).
std::size_t parameter_census(const ModelConfig& config);

/// Deterministic initialization: identical (config, seed) gives bitwise-identical
/// parameters. Validates the config first.
ModelParams build(const ModelConfig& config, std::uint64_t seed);

/// A modality's rows plus an optional validity mask over them.
struct SequenceInput {
    Tensor rows;  // [L×d]
    Mask mask;    // length L, empty = all rows valid
};

using ModelInput = std::map<Modality, SequenceInput>;

/// Unpadded model input from a sample, for the config's modalities only.
/// Throws Error naming the sample when a required modality is missing.
ModelInput to_model_input(const Sample& sample, const ModelConfig& config);

/// Records the full pipeline onto `tape` and returns the [1] prediction in (0,1).
/// `rng` is needed only in train mode with nonzero dropout.
Var forward(Tape& tape, const ModelParams& params, const ModelConfig& config, const ModelInput& input, Mode mode,
            Rng* rng);

/// Eval-mode prediction. Pure function of (params, input); safe to call
/// concurrently.
double predict(const ModelParams& params, const ModelConfig& config, const ModelInput& input);
double predict(const ModelParams& params, const ModelConfig& config, const Sample& sample);
/// Eval-mode predictions for many samples, OpenMP-parallel over samples.
std::vector<double> predict_all(const ModelParams& params, const ModelConfig& config,
                                std::span<const Sample> samples);

/// (prediction - label)². Throws RangeError when the label is outside [0,1].
Var squared_error(const Var& prediction, double label);
double squared_error(double prediction, double label);

}  // namespace memfuse
