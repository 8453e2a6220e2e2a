#pragma once

#include <cstddef>
#include <random>
#include <string_view>

#include "memfuse/autograd.hpp"
#include "memfuse/tensor.hpp"

namespace memfuse {

using Rng = std::mt19937_64;

enum class Mode { train, eval };

namespace nn {

/// y = x·Wᵀ + b over the last axis. W is [out×in].
struct Linear {
    Tensor weight;
    Tensor bias;

    /// Weights ~ uniform(±1/√in), bias 0.
    static Linear init(std::size_t in_features, std::size_t out_features, Rng& rng);

    std::size_t in_features() const { return weight.dim(1); }
    std::size_t out_features() const { return weight.dim(0); }
    Var forward(Tape& tape, const Var& x) const;
};

/// Per-row normalization over the last axis followed by gain·ẑ + shift.
/// With d == 1 the normalized value is always 0 and the output is `shift`.
struct LayerNorm {
    Tensor gain;
    Tensor shift;
    double epsilon = 1e-5;

    static LayerNorm init(std::size_t dim, double epsilon = 1e-5);
    Var forward(Tape& tape, const Var& x) const;
};

/// Inverted dropout. Eval mode (and rate 0) is the identity and records no op.
struct Dropout {
    double rate = 0.1;

    explicit Dropout(double r = 0.1);
    Var forward(const Var& x, Mode mode, Rng* rng) const;
};

/// Multi-head scaled dot-product attention without residual or norm:
/// per head softmax(Q_h K_hᵀ/√head_dim) V_h, heads concatenated, then W_O.
struct MultiHeadAttention {
    std::size_t num_heads = 1;
    Linear query;
    Linear key;
    Linear value;
    Linear output;

    static MultiHeadAttention init(std::size_t model_dim, std::size_t num_heads, Rng& rng);

    std::size_t model_dim() const { return query.in_features(); }
    std::size_t head_dim() const { return model_dim() / num_heads; }

    /// query_seq [Lq×d], context_seq [Lk×d], mask [Lq·Lk] row-major (empty = all
    /// valid). When `weights` is non-null it receives one [Lq×Lk] attention
    /// matrix per head.
    Var forward(Tape& tape, const Var& query_seq, const Var& context_seq, const Mask& mask = {},
                std::vector<Tensor>* weights = nullptr) const;
};

enum class PoolMode { self_attention, average, max };

std::string_view to_string(PoolMode mode);

/// Reduces seq [L×d] to [d] over the rows where mask==1 (empty mask = all rows).
/// self_attention runs `attention` with the sequence as its own context and
/// key-side masking, then takes the masked mean of the attended rows.
Var pool(Tape& tape, const Var& seq, const Mask& mask, PoolMode mode, const MultiHeadAttention* attention);

}  // namespace nn
}  // namespace memfuse
