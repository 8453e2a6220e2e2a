#include "memfuse/layers.hpp"

#include <cmath>

#include "memfuse/errors.hpp"

namespace memfuse::nn {

Linear Linear::init(std::size_t in_features, std::size_t out_features, Rng& rng) {
    Linear l{Tensor({out_features, in_features}), Tensor({out_features})};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : l.weight.data()) w = u(rng);
    return l;
}

Var Linear::forward(Tape& tape, const Var& x) const {
    return affine(x, tape.parameter(weight), tape.parameter(bias));
}

LayerNorm LayerNorm::init(std::size_t dim, double epsilon) {
    if (!(epsilon > 0.0)) throw RangeError("layer norm epsilon must be positive");
    return LayerNorm{Tensor::filled({dim}, 1.0), Tensor({dim}), epsilon};
}

Var LayerNorm::forward(Tape& tape, const Var& x) const {
    return layer_norm(x, tape.parameter(gain), tape.parameter(shift), epsilon);
}

Dropout::Dropout(double r) : rate(r) {
    if (!(r >= 0.0 && r < 1.0)) throw RangeError("dropout rate must lie in [0, 1), got " + std::to_string(r));
}

Var Dropout::forward(const Var& x, Mode mode, Rng* rng) const {
    if (mode == Mode::eval || rate == 0.0) return x;
    if (!rng) throw Error("dropout in train mode needs a random generator");
    Tensor keep(x.shape());
    std::bernoulli_distribution draw(1.0 - rate);
    const double kept_scale = 1.0 / (1.0 - rate);
    for (auto& k : keep.data()) k = draw(*rng) ? kept_scale : 0.0;
    return mul_constant(x, keep);
}

MultiHeadAttention MultiHeadAttention::init(std::size_t model_dim, std::size_t num_heads, Rng& rng) {
    if (num_heads == 0 || model_dim % num_heads != 0) {
        throw DimensionError("model_dim " + std::to_string(model_dim) + " is not divisible by num_heads " +
                             std::to_string(num_heads));
    }
    MultiHeadAttention m;
    m.num_heads = num_heads;
    m.query = Linear::init(model_dim, model_dim, rng);
    m.key = Linear::init(model_dim, model_dim, rng);
    m.value = Linear::init(model_dim, model_dim, rng);
    m.output = Linear::init(model_dim, model_dim, rng);
    return m;
}

Var MultiHeadAttention::forward(Tape& tape, const Var& query_seq, const Var& context_seq, const Mask& mask,
                                std::vector<Tensor>* weights) const {
    const std::size_t d = model_dim();
    if (query_seq.shape().size() != 2 || context_seq.shape().size() != 2 || query_seq.shape()[1] != d ||
        context_seq.shape()[1] != d) {
        throw DimensionError("attention expects [L×" + std::to_string(d) + "] inputs, got " +
                             shape_str(query_seq.shape()) + " and " + shape_str(context_seq.shape()));
    }
    const std::size_t lq = query_seq.shape()[0], lk = context_seq.shape()[0];
    if (!mask.empty() && mask.size() != lq * lk) {
        throw DimensionError("attention mask has " + std::to_string(mask.size()) + " entries, expected " +
                             std::to_string(lq * lk));
    }
    const Var q = query.forward(tape, query_seq);
    const Var k = key.forward(tape, context_seq);
    const Var v = value.forward(tape, context_seq);
    const std::size_t hd = head_dim();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Var> heads;
    heads.reserve(num_heads);
    if (weights) weights->clear();
    for (std::size_t h = 0; h < num_heads; ++h) {
        const Var qh = num_heads == 1 ? q : slice_columns(q, h * hd, hd);
        const Var kh = num_heads == 1 ? k : slice_columns(k, h * hd, hd);
        const Var vh = num_heads == 1 ? v : slice_columns(v, h * hd, hd);
        const Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        const Var attn = masked_softmax(scores, mask);
        if (weights) weights->push_back(attn.value());
        heads.push_back(matmul(attn, vh));
    }
    const Var merged = num_heads == 1 ? heads.front() : concat(heads, 1);
    return output.forward(tape, merged);
}

std::string_view to_string(PoolMode mode) {
    switch (mode) {
        case PoolMode::self_attention: return "self_attention";
        case PoolMode::average: return "average";
        case PoolMode::max: return "max";
    }
    return "?";
}

Var pool(Tape& tape, const Var& seq, const Mask& mask, PoolMode mode, const MultiHeadAttention* attention) {
    if (seq.shape().size() != 2) throw DimensionError("pool expects [L×d], got " + shape_str(seq.shape()));
    const std::size_t len = seq.shape()[0];
    if (!mask.empty() && mask.size() != len) {
        throw DimensionError("pool mask length " + std::to_string(mask.size()) + " vs sequence length " +
                             std::to_string(len));
    }
    bool any = mask.empty();
    for (auto m : mask) any = any || m;
    if (!any) throw DegenerateRowError("pool: sequence has no valid position");

    switch (mode) {
        case PoolMode::average: return mean_over_axis(seq, 0, mask);
        case PoolMode::max: return max_over_axis(seq, 0, mask);
        case PoolMode::self_attention: {
            if (!attention) throw Error("self-attention pooling requires an attention block");
            Mask key_mask;
            if (!mask.empty()) {
                key_mask.resize(len * len);
                for (std::size_t i = 0; i < len; ++i)
                    for (std::size_t j = 0; j < len; ++j) key_mask[i * len + j] = mask[j];
            }
            const Var attended = attention->forward(tape, seq, seq, key_mask);
            return mean_over_axis(attended, 0, mask);
        }
    }
    throw Error("unknown pool mode");
}

}  // namespace memfuse::nn
