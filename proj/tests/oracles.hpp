#pragma once

// Plain-loop reference evaluations of the layers and the full predictor.
// Nothing here touches the tape; they are the independent side of the
// equivalence tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "memfuse/layers.hpp"
#include "memfuse/model.hpp"

namespace memfuse::oracle {

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const Tensor& t) {
    Rows r(t.dim(0), std::vector<double>(t.dim(1)));
    for (std::size_t i = 0; i < t.dim(0); ++i)
        for (std::size_t j = 0; j < t.dim(1); ++j) r[i][j] = t.at(i, j);
    return r;
}

inline std::vector<double> linear(const nn::Linear& l, const std::vector<double>& x) {
    const std::size_t out = l.weight.dim(0), in = l.weight.dim(1);
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
        double s = l.bias[o];
        for (std::size_t i = 0; i < in; ++i) s += l.weight.at(o, i) * x[i];
        y[o] = s;
    }
    return y;
}

inline std::vector<double> layer_norm(const nn::LayerNorm& ln, const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = ln.gain[i] * (x[i] - mean) / std::sqrt(var + ln.epsilon) + ln.shift[i];
    return y;
}

/// softmax(Q_h K_hᵀ/√dh) V_h per head, concatenated, then W_O. `mask` is
/// [Lq·Lk] row-major or empty.
inline Rows attention(const nn::MultiHeadAttention& mha, const Rows& qs, const Rows& ks, const Mask& mask = {}) {
    const std::size_t d = mha.model_dim(), heads = mha.num_heads, hd = d / heads;
    const std::size_t lq = qs.size(), lk = ks.size();
    Rows q, k, v;
    for (const auto& r : qs) q.push_back(linear(mha.query, r));
    for (const auto& r : ks) {
        k.push_back(linear(mha.key, r));
        v.push_back(linear(mha.value, r));
    }
    Rows out;
    for (std::size_t i = 0; i < lq; ++i) {
        std::vector<double> merged(d, 0.0);
        for (std::size_t h = 0; h < heads; ++h) {
            std::vector<double> logit(lk);
            double mx = -HUGE_VAL;
            for (std::size_t j = 0; j < lk; ++j) {
                double dot = 0.0;
                for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) dot += q[i][c] * k[j][c];
                logit[j] = dot / std::sqrt(static_cast<double>(hd));
                if (mask.empty() || mask[i * lk + j]) mx = std::max(mx, logit[j]);
            }
            double z = 0.0;
            std::vector<double> w(lk, 0.0);
            for (std::size_t j = 0; j < lk; ++j) {
                if (!mask.empty() && !mask[i * lk + j]) continue;
                w[j] = std::exp(logit[j] - mx);
                z += w[j];
            }
            for (std::size_t j = 0; j < lk; ++j)
                for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) merged[c] += w[j] / z * v[j][c];
        }
        out.push_back(linear(mha.output, merged));
    }
    return out;
}

inline std::vector<double> masked_mean(const Rows& rows, const Mask& mask) {
    std::vector<double> acc(rows.front().size(), 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += rows[i][c];
        n += 1.0;
    }
    for (auto& a : acc) a /= n;
    return acc;
}

inline std::vector<double> masked_max(const Rows& rows, const Mask& mask) {
    std::vector<double> acc(rows.front().size(), -HUGE_VAL);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] = std::max(acc[c], rows[i][c]);
    }
    return acc;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Eval-mode prediction composed by hand from the per-step formulas.
inline double predict(const ModelParams& params, const ModelConfig& config, const ModelInput& input) {
    std::vector<std::vector<double>> pooled;
    for (const auto& b : params.branches) {
        const auto& in = input.at(b.modality);
        Rows h;
        for (const auto& row : to_rows(in.rows)) h.push_back(layer_norm(b.norm, linear(b.projection, row)));
        switch (config.attention_mode) {
            case AttentionMode::self_and_cross:
            case AttentionMode::self_only: {
                const std::size_t len = h.size();
                Mask key_mask;
                if (!in.mask.empty()) {
                    key_mask.resize(len * len);
                    for (std::size_t i = 0; i < len; ++i)
                        for (std::size_t j = 0; j < len; ++j) key_mask[i * len + j] = in.mask[j];
                }
                pooled.push_back(masked_mean(attention(*b.self_attention, h, h, key_mask), in.mask));
                break;
            }
            case AttentionMode::cross_with_average:
            case AttentionMode::average_only: pooled.push_back(masked_mean(h, in.mask)); break;
            case AttentionMode::max_only: pooled.push_back(masked_max(h, in.mask)); break;
        }
    }
    std::vector<double> fused;
    const bool cross = config.attention_mode == AttentionMode::self_and_cross ||
                       config.attention_mode == AttentionMode::cross_with_average;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        std::vector<double> part = pooled[i];
        if (cross) {
            Rows others;
            for (std::size_t j = 0; j < pooled.size(); ++j)
                if (j != i) others.push_back(pooled[j]);
            part = attention(*params.branches[i].cross_attention, Rows{pooled[i]}, others)[0];
        }
        fused.insert(fused.end(), part.begin(), part.end());
    }
    if (config.fusion_head == FusionHead::mlp) {
        auto hidden = linear(*params.fusion_hidden, fused);
        for (auto& v : hidden) v = std::max(v, 0.0);
        return sigmoid(linear(params.fusion_output, hidden)[0]);
    }
    for (auto& v : fused) v = std::max(v, 0.0);
    return sigmoid(linear(params.fusion_output, fused)[0]);
}

/// Parameter count from the block structure, written independently of the
/// library's census.
inline std::size_t census(const ModelConfig& c) {
    const std::size_t D = c.latent_dim, k = c.modalities.size(), H = c.fusion_hidden_dim;
    std::size_t projections = 0;
    for (auto m : c.modalities) projections += (c.input_dims.at(m) + 1) * D;
    const std::size_t norms = k * 2 * D;
    const std::size_t block = 4 * D * (D + 1);
    std::size_t blocks = 0;
    switch (c.attention_mode) {
        case AttentionMode::self_and_cross: blocks = 2 * k; break;
        case AttentionMode::self_only:
        case AttentionMode::cross_with_average: blocks = k; break;
        default: blocks = 0;
    }
    const std::size_t fusion = c.fusion_head == FusionHead::mlp ? (k * D + 1) * H + (H + 1) : k * D + 1;
    return projections + norms + blocks * block + fusion;
}

}  // namespace memfuse::oracle
