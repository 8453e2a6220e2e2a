#include "memfuse/model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>

#include "memfuse/errors.hpp"

namespace memfuse {

// ---- enum names -------------------------------------------------------------

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::video: return "video";
        case Modality::audio: return "audio";
        case Modality::text: return "text";
    }
    return "?";
}

Modality parse_modality(std::string_view s) {
    if (s == "video" || s == "v") return Modality::video;
    if (s == "audio" || s == "a") return Modality::audio;
    if (s == "text" || s == "t") return Modality::text;
    throw RangeError("unknown modality '" + std::string(s) + "'");
}

std::string_view to_string(AttentionMode m) {
    switch (m) {
        case AttentionMode::self_and_cross: return "self_and_cross";
        case AttentionMode::self_only: return "self_only";
        case AttentionMode::cross_with_average: return "cross_with_average";
        case AttentionMode::average_only: return "average_only";
        case AttentionMode::max_only: return "max_only";
    }
    return "?";
}

AttentionMode parse_attention_mode(std::string_view s) {
    for (auto m : kAllAttentionModes) {
        if (to_string(m) == s) return m;
    }
    throw RangeError("unknown attention mode '" + std::string(s) + "'");
}

std::string_view to_string(FusionHead h) {
    return h == FusionHead::mlp ? "mlp" : "literal";
}

FusionHead parse_fusion_head(std::string_view s) {
    if (s == "mlp") return FusionHead::mlp;
    if (s == "literal") return FusionHead::literal;
    throw RangeError("unknown fusion head '" + std::string(s) + "'");
}

// ---- ModelConfig ------------------------------------------------------------

bool ModelConfig::uses_self_attention() const {
    return attention_mode == AttentionMode::self_and_cross || attention_mode == AttentionMode::self_only;
}

bool ModelConfig::uses_cross_attention() const {
    return attention_mode == AttentionMode::self_and_cross || attention_mode == AttentionMode::cross_with_average;
}

nn::PoolMode ModelConfig::pool_mode() const {
    switch (attention_mode) {
        case AttentionMode::self_and_cross:
        case AttentionMode::self_only: return nn::PoolMode::self_attention;
        case AttentionMode::cross_with_average:
        case AttentionMode::average_only: return nn::PoolMode::average;
        case AttentionMode::max_only: return nn::PoolMode::max;
    }
    return nn::PoolMode::average;
}

std::vector<std::string> ModelConfig::violations() const {
    std::vector<std::string> v;
    if (modalities.empty()) v.emplace_back("modalities must be a non-empty subset of {video, audio, text}");
    std::set<Modality> seen;
    for (auto m : modalities) {
        if (!seen.insert(m).second) v.push_back("modality '" + std::string(to_string(m)) + "' listed twice");
    }
    for (auto m : seen) {
        auto it = input_dims.find(m);
        if (it == input_dims.end()) {
            v.push_back("input_dims missing for modality '" + std::string(to_string(m)) + "'");
        } else if (it->second == 0) {
            v.push_back("input_dims for '" + std::string(to_string(m)) + "' must be positive");
        }
    }
    for (const auto& [m, d] : input_dims) {
        if (!seen.count(m)) v.push_back("input_dims given for unused modality '" + std::string(to_string(m)) + "'");
    }
    if (latent_dim == 0) v.emplace_back("latent_dim must be positive");
    if (num_heads == 0) {
        v.emplace_back("num_heads must be positive");
    } else if (latent_dim % num_heads != 0) {
        v.push_back("latent_dim " + std::to_string(latent_dim) + " is not divisible by num_heads " +
                    std::to_string(num_heads));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) v.emplace_back("dropout_rate must lie in [0, 1)");
    if (uses_cross_attention() && seen.size() < 2) {
        v.push_back("attention_mode " + std::string(to_string(attention_mode)) + " needs at least 2 modalities");
    }
    if (fusion_head == FusionHead::mlp && fusion_hidden_dim == 0) v.emplace_back("fusion_hidden_dim must be positive");
    if (!(layer_norm_epsilon > 0.0)) v.emplace_back("layer_norm_epsilon must be positive");
    return v;
}

void ModelConfig::validate() const {
    auto v = violations();
    if (!v.empty()) throw ValidationError(std::move(v));
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j;
    j["modalities"] = nlohmann::json::array();
    for (auto m : modalities) j["modalities"].push_back(std::string(to_string(m)));
    j["input_dims"] = nlohmann::json::object();
    for (const auto& [m, d] : input_dims) j["input_dims"][std::string(to_string(m))] = d;
    j["latent_dim"] = latent_dim;
    j["num_heads"] = num_heads;
    j["dropout_rate"] = dropout_rate;
    j["attention_mode"] = std::string(to_string(attention_mode));
    j["fusion_hidden_dim"] = fusion_hidden_dim;
    j["fusion_head"] = std::string(to_string(fusion_head));
    j["layer_norm_epsilon"] = layer_norm_epsilon;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError({"model config must be a JSON object"});
    static const std::set<std::string> known = {"modalities",     "input_dims",        "latent_dim",
                                                "num_heads",      "dropout_rate",      "attention_mode",
                                                "fusion_hidden_dim", "fusion_head",    "layer_norm_epsilon"};
    std::vector<std::string> unknown;
    for (const auto& [k, _] : j.items()) {
        if (!known.count(k)) unknown.push_back("unknown model config key '" + k + "'");
    }
    if (!unknown.empty()) throw ValidationError(std::move(unknown));

    ModelConfig c;
    try {
        if (j.contains("modalities")) {
            c.modalities.clear();
            for (const auto& m : j.at("modalities")) c.modalities.push_back(parse_modality(m.get<std::string>()));
            std::sort(c.modalities.begin(), c.modalities.end());
        }
        if (j.contains("input_dims")) {
            for (const auto& [k, d] : j.at("input_dims").items()) {
                c.input_dims[parse_modality(k)] = d.get<std::size_t>();
            }
        }
        if (j.contains("latent_dim")) c.latent_dim = j.at("latent_dim").get<std::size_t>();
        if (j.contains("num_heads")) c.num_heads = j.at("num_heads").get<std::size_t>();
        if (j.contains("dropout_rate")) c.dropout_rate = j.at("dropout_rate").get<double>();
        if (j.contains("attention_mode")) c.attention_mode = parse_attention_mode(j.at("attention_mode").get<std::string>());
        if (j.contains("fusion_hidden_dim")) c.fusion_hidden_dim = j.at("fusion_hidden_dim").get<std::size_t>();
        if (j.contains("fusion_head")) c.fusion_head = parse_fusion_head(j.at("fusion_head").get<std::string>());
        if (j.contains("layer_norm_epsilon")) c.layer_norm_epsilon = j.at("layer_norm_epsilon").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError({std::string("model config: ") + e.what()});
    } catch (const RangeError& e) {
        throw ValidationError({e.what()});
    }
    return c;
}

std::string ModelConfig::canonical_json() const {
    // nlohmann::json objects are std::map backed, so keys come out sorted.
    return to_json().dump();
}

// ---- ModelParams ------------------------------------------------------------

namespace {

template <typename Params, typename Fn>
void visit_params(Params& p, Fn&& fn) {
    auto linear = [&](const std::string& name, auto& l) {
        fn(name + ".weight", l.weight);
        fn(name + ".bias", l.bias);
    };
    auto attention = [&](const std::string& name, auto& a) {
        linear(name + ".query", a.query);
        linear(name + ".key", a.key);
        linear(name + ".value", a.value);
        linear(name + ".output", a.output);
    };
    for (auto& b : p.branches) {
        const std::string prefix(to_string(b.modality));
        linear(prefix + ".projection", b.projection);
        fn(prefix + ".norm.gain", b.norm.gain);
        fn(prefix + ".norm.shift", b.norm.shift);
        if (b.self_attention) attention(prefix + ".self_attention", *b.self_attention);
        if (b.cross_attention) attention(prefix + ".cross_attention", *b.cross_attention);
    }
    if (p.fusion_hidden) linear("fusion.hidden", *p.fusion_hidden);
    linear("fusion.output", p.fusion_output);
}

}  // namespace

void ModelParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
    visit_params(*this, fn);
}

void ModelParams::for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    visit_params(*this, fn);
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor& t) { n += t.numel(); });
    return n;
}

std::size_t ModelParams::tensor_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor&) { ++n; });
    return n;
}

void ModelParams::zero_grad() {
    for_each([](const std::string&, Tensor& t) { t.zero_grad(); });
}

bool ModelParams::all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const Tensor& t) { ok = ok && t.all_finite(); });
    return ok;
}

std::size_t parameter_census(const ModelConfig& c) {
    const std::size_t D = c.latent_dim;
    const std::size_t k = c.modalities.size();
    const std::size_t attention_block = 4 * (D * D + D);
    std::size_t n = 0;
    for (auto m : c.modalities) {
        n += c.input_dims.at(m) * D + D;  // projection
        n += 2 * D;                       // layer norm
    }
    if (c.uses_self_attention()) n += k * attention_block;
    if (c.uses_cross_attention()) n += k * attention_block;
    if (c.fusion_head == FusionHead::mlp) {
        n += k * D * c.fusion_hidden_dim + c.fusion_hidden_dim + c.fusion_hidden_dim + 1;
    } else {
        n += k * D + 1;
    }
    return n;
}

ModelParams build(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    ModelParams p;
    const std::size_t D = config.latent_dim;
    for (auto m : config.modalities) {
        ModalityBranch b;
        b.modality = m;
        b.projection = nn::Linear::init(config.input_dims.at(m), D, rng);
        b.norm = nn::LayerNorm::init(D, config.layer_norm_epsilon);
        if (config.uses_self_attention()) b.self_attention = nn::MultiHeadAttention::init(D, config.num_heads, rng);
        if (config.uses_cross_attention()) b.cross_attention = nn::MultiHeadAttention::init(D, config.num_heads, rng);
        p.branches.push_back(std::move(b));
    }
    const std::size_t fused = config.modalities.size() * D;
    if (config.fusion_head == FusionHead::mlp) {
        p.fusion_hidden = nn::Linear::init(fused, config.fusion_hidden_dim, rng);
        p.fusion_output = nn::Linear::init(config.fusion_hidden_dim, 1, rng);
    } else {
        p.fusion_output = nn::Linear::init(fused, 1, rng);
    }
    return p;
}

// ---- forward ----------------------------------------------------------------

ModelInput to_model_input(const Sample& sample, const ModelConfig& config) {
    ModelInput in;
    for (auto m : config.modalities) {
        auto it = sample.sequences.find(m);
        if (it == sample.sequences.end()) {
            throw Error("sample '" + sample.id + "' has no " + std::string(to_string(m)) + " embedding");
        }
        in.emplace(m, SequenceInput{it->second.rows, {}});
    }
    return in;
}

namespace {

void check_params_match(const ModelParams& params, const ModelConfig& config) {
    if (params.branches.size() != config.modalities.size()) {
        throw ConfigMismatchError("parameters have " + std::to_string(params.branches.size()) +
                                  " modality branches, config lists " + std::to_string(config.modalities.size()));
    }
}

}  // namespace

Var forward(Tape& tape, const ModelParams& params, const ModelConfig& config, const ModelInput& input, Mode mode,
            Rng* rng) {
    check_params_match(params, config);
    const nn::Dropout dropout(config.dropout_rate);
    const std::size_t D = config.latent_dim;
    const auto pool_mode = config.pool_mode();

    std::vector<Var> pooled;
    pooled.reserve(params.branches.size());
    for (const auto& branch : params.branches) {
        auto it = input.find(branch.modality);
        if (it == input.end()) {
            throw Error("input has no " + std::string(to_string(branch.modality)) + " sequence");
        }
        const auto& seq = it->second;
        const std::size_t want = config.input_dims.at(branch.modality);
        if (seq.rows.rank() != 2 || seq.rows.dim(1) != want) {
            throw DimensionError(std::string(to_string(branch.modality)) + " sequence " +
                                 shape_str(seq.rows.shape()) + " does not match input dim " + std::to_string(want));
        }
        const Var x = tape.constant(seq.rows);
        const Var projected = dropout.forward(branch.norm.forward(tape, branch.projection.forward(tape, x)), mode, rng);
        const nn::MultiHeadAttention* attn = branch.self_attention ? &*branch.self_attention : nullptr;
        pooled.push_back(nn::pool(tape, projected, seq.mask, pool_mode, attn));
    }

    std::vector<Var> fused_parts;
    fused_parts.reserve(pooled.size());
    if (config.uses_cross_attention()) {
        std::vector<Var> rows;
        for (const auto& p : pooled) rows.push_back(reshape(p, {1, D}));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::vector<Var> others;
            for (std::size_t j = 0; j < rows.size(); ++j) {
                if (j != i) others.push_back(rows[j]);
            }
            const Var context = others.size() == 1 ? others.front() : concat(others, 0);
            const Var attended = params.branches[i].cross_attention->forward(tape, rows[i], context);
            fused_parts.push_back(reshape(attended, {D}));
        }
    } else {
        fused_parts = pooled;
    }
    const Var fused = fused_parts.size() == 1 ? fused_parts.front() : concat(fused_parts, 0);

    Var logit;
    if (config.fusion_head == FusionHead::mlp) {
        const Var hidden = dropout.forward(relu(params.fusion_hidden->forward(tape, fused)), mode, rng);
        logit = params.fusion_output.forward(tape, hidden);
    } else {
        logit = params.fusion_output.forward(tape, relu(dropout.forward(fused, mode, rng)));
    }
    return sigmoid(logit);
}

double predict(const ModelParams& params, const ModelConfig& config, const ModelInput& input) {
    Tape tape(false);
    return forward(tape, params, config, input, Mode::eval, nullptr).value().item();
}

double predict(const ModelParams& params, const ModelConfig& config, const Sample& sample) {
    return predict(params, config, to_model_input(sample, config));
}

std::vector<double> predict_all(const ModelParams& params, const ModelConfig& config, std::span<const Sample> samples) {
    // Surface missing modalities before entering the parallel region.
    for (const auto& s : samples) {
        for (auto m : config.modalities) {
            if (!s.has(m)) {
                throw Error("sample '" + s.id + "' has no " + std::string(to_string(m)) + " embedding");
            }
        }
    }
    std::vector<double> out(samples.size());
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = predict(params, config, samples[i]);
        } catch (...) {
#pragma omp critical(memfuse_predict_all)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

Var squared_error(const Var& prediction, double label) {
    if (!(label >= 0.0 && label <= 1.0)) {
        throw RangeError("label " + std::to_string(label) + " outside [0, 1]");
    }
    const Var diff = sub(prediction, prediction.tape().constant(Tensor::filled(prediction.shape(), label)));
    return mul(diff, diff);
}

double squared_error(double prediction, double label) {
    if (!(label >= 0.0 && label <= 1.0)) {
        throw RangeError("label " + std::to_string(label) + " outside [0, 1]");
    }
    if (!(prediction >= 0.0 && prediction <= 1.0)) {
        throw RangeError("prediction " + std::to_string(prediction) + " outside [0, 1]");
    }
    const double d = prediction - label;
    return d * d;
}

}  // namespace memfuse
