#pragma once

// Tape-based reverse-mode differentiation.
//
// Every op appends one node to the tape holding its value and, when any input
// requires a gradient, a closure that maps the node's output gradient onto its
// inputs. `Tape::backward` replays the closures in exact reverse order of
// execution. Parameters are bound by reference (`Tape::parameter`); their
// gradients are read back with `Tape::parameter_grad` or added into the
// tensor's own grad slot with `Tape::accumulate_into`.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "memfuse/tensor.hpp"

namespace memfuse {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives and
/// has not been reset.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t numel() const { return value().numel(); }
    bool requires_grad() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    /// Receives the gradient of the node's output and scatters it onto inputs
    /// through `Tape::grad_buffer`.
    using BackwardFn = std::function<void(Tape&, std::span<const double> out_grad)>;

    /// A tape built with `grad_enabled = false` records values only; use it
    /// for inference over frozen parameters.
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// Binds a parameter tensor. Binding the same tensor twice returns the
    /// same node, so contributions from every use are summed.
    Var parameter(const Tensor& param);

    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
    Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
    /// Throws TapeError on a non-scalar loss, a loss with no parameter
    /// dependency, a foreign Var, or a second call without reset().
    void backward(const Var& loss);
    void reset();

    std::size_t size() const noexcept { return nodes_.size(); }
    bool consumed() const noexcept { return consumed_; }
    bool grad_enabled() const noexcept { return grad_enabled_; }

    const Tensor& value(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient accumulator of a node; zero-allocated on first access.
    std::span<double> grad_buffer(const Var& v);
    /// Gradient of any node after backward (empty span if it received none).
    std::span<const double> grad(const Var& v) const;

    /// Gradient w.r.t. a bound parameter after backward. Parameters that did
    /// not influence the loss get an all-zero gradient.
    std::span<const double> parameter_grad(const Tensor& param) const;
    bool has_parameter(const Tensor& param) const;
    void accumulate_into(Tensor& param) const;

    /// Execution order of nodes visited by the last backward pass.
    const std::vector<std::size_t>& backward_order() const noexcept { return visited_; }

private:
    struct Node {
        Tensor value;
        const Tensor* param = nullptr;
        std::vector<double> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    const Node& node_of(const Var& v) const;

    std::vector<Node> nodes_;
    std::unordered_map<const Tensor*, std::size_t> param_index_;
    std::vector<std::size_t> visited_;
    bool consumed_ = false;
    bool grad_enabled_ = true;
};

// ---- differentiable operations ----------------------------------------------

/// [m×k] · [k×n] -> [m×n]
Var matmul(const Var& a, const Var& b);
/// [m×n] -> [n×m]
Var transpose(const Var& a);
/// x[..×in] · Wᵀ + b, W [out×in], b [out]
Var affine(const Var& x, const Var& weight, const Var& bias);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var relu(const Var& a);
Var sigmoid(const Var& a);
/// Elementwise product with a constant tensor of the same shape (dropout masks).
Var mul_constant(const Var& a, const Tensor& factor);

/// Softmax over the last axis restricted to mask==1 entries; masked entries
/// are exactly 0. An empty mask means every entry is valid.
Var masked_softmax(const Var& logits, const Mask& mask = {});

Var sum(const Var& a);
/// Mean over `axis`, optionally restricted to mask==1 positions along it.
Var mean_over_axis(const Var& a, std::size_t axis, const Mask& mask = {});
/// Max over `axis`, optionally restricted to mask==1 positions along it.
/// Ties route the gradient to the first maximal index.
Var max_over_axis(const Var& a, std::size_t axis, const Mask& mask = {});
/// Concatenates along `axis`; other extents must agree.
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var reshape(const Var& a, Shape shape);
/// Columns [begin, begin+count) of a 2-D tensor.
Var slice_columns(const Var& a, std::size_t begin, std::size_t count);
/// Normalizes each row over the last axis, then applies gain·ẑ + shift.
Var layer_norm(const Var& x, const Var& gain, const Var& shift, double epsilon);

}  // namespace memfuse
