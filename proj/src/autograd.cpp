#include "memfuse/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "memfuse/errors.hpp"
#include "memfuse/kernels.hpp"

namespace memfuse {

// ---- Var / Tape -------------------------------------------------------------

const Tensor& Var::value() const {
    if (!tape_) throw TapeError("use of an unbound Var");
    return tape_->value(id_);
}

bool Var::requires_grad() const {
    return tape_ && tape_->requires_grad(id_);
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Tensor& param) {
    if (auto it = param_index_.find(&param); it != param_index_.end()) return Var(this, it->second);
    Node n;
    n.param = &param;
    n.requires_grad = grad_enabled_;
    nodes_.push_back(std::move(n));
    param_index_.emplace(&param, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    if (consumed_) throw TapeError("cannot record onto a tape after backward(); call reset()");
    Node n;
    n.value = std::move(value);
    for (const auto& in : inputs) {
        if (in.tape_ != this) throw TapeError("operands belong to different tapes");
        n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node_of(const Var& v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw TapeError("Var does not belong to this tape");
    return nodes_[v.id_];
}

std::span<double> Tape::grad_buffer(const Var& v) {
    auto& n = nodes_[v.id_];
    if (n.grad.empty()) n.grad.assign(value(v.id_).numel(), 0.0);
    return n.grad;
}

std::span<const double> Tape::grad(const Var& v) const {
    return node_of(v).grad;
}

void Tape::backward(const Var& loss) {
    const auto& root = node_of(loss);
    if (consumed_) throw TapeError("backward() already ran on this tape; call reset() before reuse");
    if (value(loss.id_).numel() != 1) {
        throw TapeError("loss must be scalar, got shape " + shape_str(value(loss.id_).shape()));
    }
    if (!root.requires_grad) throw TapeError("detached graph: loss does not depend on any parameter");
    consumed_ = true;
    visited_.clear();
    nodes_[loss.id_].grad.assign(1, 1.0);
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (n.grad.empty()) continue;
        visited_.push_back(i);
        if (n.backward) {
            // The closure only touches the grads of earlier nodes.
            n.backward(*this, std::span<const double>(n.grad));
        }
    }
    for (auto& [param, idx] : param_index_) {
        auto& n = nodes_[idx];
        if (n.grad.empty()) n.grad.assign(param->numel(), 0.0);
    }
}

void Tape::reset() {
    nodes_.clear();
    param_index_.clear();
    visited_.clear();
    consumed_ = false;
}

bool Tape::has_parameter(const Tensor& param) const {
    return param_index_.count(&param) != 0;
}

std::span<const double> Tape::parameter_grad(const Tensor& param) const {
    auto it = param_index_.find(&param);
    if (it == param_index_.end()) throw TapeError("tensor was never bound to this tape");
    if (!consumed_) throw TapeError("parameter_grad() before backward()");
    return nodes_[it->second].grad;
}

void Tape::accumulate_into(Tensor& param) const {
    auto g = parameter_grad(param);
    auto dst = param.grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

// The value accessor has to see through parameter nodes.
const Tensor& Tape::value(std::size_t id) const {
    const auto& n = nodes_[id];
    return n.param ? *n.param : n.value;
}

// ---- helpers ----------------------------------------------------------------

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

void require_rank2(const Var& a, const char* op) {
    if (a.shape().size() != 2) {
        throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(a.shape()));
    }
}

void accumulate(std::span<double> dst, std::span<const double> src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t n = 1;
    std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
    }
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.n = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
    Shape out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != axis) out.push_back(shape[i]);
    }
    return out;
}

template <typename F>
Var unary(const Var& a, Tensor out, F backward_scale) {
    Tape& t = a.tape();
    return t.record(std::move(out), {a}, [a, backward_scale](Tape& tape, std::span<const double> g) {
        auto da = tape.grad_buffer(a);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * backward_scale(tape, i);
    });
}

}  // namespace

// ---- linear algebra ---------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) {
        throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    Tensor out({m, n});
    kernels::matmul(a.value().data(), b.value().data(), out.data(), {m, k, n});
    return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, std::span<const double> g) {
        if (t.requires_grad(a.id())) {
            std::vector<double> tmp(m * k);
            kernels::matmul_nt(g, t.value(b.id()).data(), tmp, {m, n, k});
            accumulate(t.grad_buffer(a), tmp);
        }
        if (t.requires_grad(b.id())) {
            std::vector<double> tmp(k * n);
            kernels::matmul_tn(t.value(a.id()).data(), g, tmp, {k, m, n});
            accumulate(t.grad_buffer(b), tmp);
        }
    });
}

Var transpose(const Var& a) {
    require_rank2(a, "transpose");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    Tensor out({c, r});
    const auto& v = a.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
    return a.tape().record(std::move(out), {a}, [a, r, c](Tape& t, std::span<const double> g) {
        auto da = t.grad_buffer(a);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) da[i * c + j] += g[j * r + i];
    });
}

Var affine(const Var& x, const Var& weight, const Var& bias) {
    require_rank2(weight, "affine");
    const std::size_t out_f = weight.shape()[0], in_f = weight.shape()[1];
    if (bias.shape() != Shape{out_f}) {
        throw DimensionError("affine: bias " + shape_str(bias.shape()) + " does not match weight " +
                             shape_str(weight.shape()));
    }
    if (x.shape().empty() || x.shape().back() != in_f) {
        throw DimensionError("affine: input " + shape_str(x.shape()) + " incompatible with weight " +
                             shape_str(weight.shape()));
    }
    const std::size_t rows = x.numel() / in_f;
    Shape out_shape = x.shape();
    out_shape.back() = out_f;
    Tensor out(out_shape);
    kernels::matmul_nt(x.value().data(), weight.value().data(), out.data(), {rows, in_f, out_f});
    const auto& b = bias.value();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < out_f; ++j) out[r * out_f + j] += b[j];
    return x.tape().record(
        std::move(out), {x, weight, bias}, [x, weight, bias, rows, in_f, out_f](Tape& t, std::span<const double> g) {
            if (t.requires_grad(x.id())) {
                std::vector<double> tmp(rows * in_f);
                kernels::matmul(g, t.value(weight.id()).data(), tmp, {rows, out_f, in_f});
                accumulate(t.grad_buffer(x), tmp);
            }
            if (t.requires_grad(weight.id())) {
                std::vector<double> tmp(out_f * in_f);
                kernels::matmul_tn(g, t.value(x.id()).data(), tmp, {out_f, rows, in_f});
                accumulate(t.grad_buffer(weight), tmp);
            }
            if (t.requires_grad(bias.id())) {
                auto db = t.grad_buffer(bias);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < out_f; ++j) db[j] += g[r * out_f + j];
            }
        });
}

// ---- elementwise ------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    out.clear_grad();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
        if (t.requires_grad(a.id())) accumulate(t.grad_buffer(a), g);
        if (t.requires_grad(b.id())) accumulate(t.grad_buffer(b), g);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    out.clear_grad();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
        if (t.requires_grad(a.id())) accumulate(t.grad_buffer(a), g);
        if (t.requires_grad(b.id())) {
            auto db = t.grad_buffer(b);
            for (std::size_t i = 0; i < db.size(); ++i) db[i] -= g[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    out.clear_grad();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
        if (t.requires_grad(a.id())) {
            auto da = t.grad_buffer(a);
            const auto& bv = t.value(b.id());
            for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * bv[i];
        }
        if (t.requires_grad(b.id())) {
            auto db = t.grad_buffer(b);
            const auto& av = t.value(a.id());
            for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[i] * av[i];
        }
    });
}

Var scale(const Var& a, double factor) {
    Tensor out = a.value();
    out.clear_grad();
    for (auto& v : out.data()) v *= factor;
    return unary(a, std::move(out), [factor](Tape&, std::size_t) { return factor; });
}

Var mul_constant(const Var& a, const Tensor& factor) {
    if (a.shape() != factor.shape()) {
        throw DimensionError("mul_constant: shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(factor.shape()));
    }
    Tensor out = a.value();
    out.clear_grad();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= factor[i];
    auto f = std::make_shared<const Tensor>(factor);
    return unary(a, std::move(out), [f](Tape&, std::size_t i) { return (*f)[i]; });
}

Var relu(const Var& a) {
    Tensor out = a.value();
    out.clear_grad();
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return unary(a, std::move(out), [a](Tape& t, std::size_t i) { return t.value(a.id())[i] > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
    Tensor out = a.value();
    out.clear_grad();
    for (auto& v : out.data()) {
        // Split by sign so exp never overflows.
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    auto saved = std::make_shared<const Tensor>(out);
    return a.tape().record(std::move(out), {a}, [a, saved](Tape& t, std::span<const double> g) {
        auto da = t.grad_buffer(a);
        const auto& s = *saved;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * s[i] * (1.0 - s[i]);
    });
}

// ---- softmax ----------------------------------------------------------------

Var masked_softmax(const Var& logits, const Mask& mask) {
    if (logits.shape().empty()) throw DimensionError("masked_softmax: scalar input");
    const std::size_t cols = logits.shape().back();
    const std::size_t rows = logits.numel() / cols;
    if (!mask.empty() && mask.size() != logits.numel()) {
        throw DimensionError("masked_softmax: mask has " + std::to_string(mask.size()) +
                             " entries for logits " + shape_str(logits.shape()));
    }
    Tensor out(logits.shape());
    const auto bad = kernels::masked_softmax_rows(logits.value().data(), mask, out.data(), rows, cols);
    if (bad != rows) {
        throw DegenerateRowError("masked_softmax: row " + std::to_string(bad) + " has no valid position");
    }
    Tensor probs = out;
    auto saved = std::make_shared<const Tensor>(std::move(probs));
    return logits.tape().record(std::move(out), {logits}, [logits, saved, rows, cols](Tape& t, std::span<const double> g) {
        auto dz = t.grad_buffer(logits);
        const auto& y = *saved;
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) dot += y[r * cols + j] * g[r * cols + j];
            for (std::size_t j = 0; j < cols; ++j) {
                const std::size_t i = r * cols + j;
                dz[i] += y[i] * (g[i] - dot);
            }
        }
    });
}

// ---- reductions -------------------------------------------------------------

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return a.tape().record(Tensor::scalar(s), {a}, [a](Tape& t, std::span<const double> g) {
        auto da = t.grad_buffer(a);
        for (auto& v : da) v += g[0];
    });
}

Var mean_over_axis(const Var& a, std::size_t axis, const Mask& mask) {
    const auto s = split_axis(a.shape(), axis);
    if (!mask.empty() && mask.size() != s.n) {
        throw DimensionError("mean_over_axis: mask length " + std::to_string(mask.size()) + " vs axis extent " +
                             std::to_string(s.n));
    }
    std::size_t count = 0;
    for (std::size_t j = 0; j < s.n; ++j) count += mask.empty() || mask[j];
    if (count == 0) throw DegenerateRowError("mean_over_axis: empty reduction axis (every position masked)");
    Tensor out(drop_axis(a.shape(), axis));
    const auto& v = a.value();
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < s.n; ++j) {
                if (!mask.empty() && !mask[j]) continue;
                acc += v[(o * s.n + j) * s.inner + i];
            }
            out[o * s.inner + i] = acc * inv;
        }
    }
    return a.tape().record(std::move(out), {a}, [a, s, mask, inv](Tape& t, std::span<const double> g) {
        auto da = t.grad_buffer(a);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t j = 0; j < s.n; ++j) {
                if (!mask.empty() && !mask[j]) continue;
                for (std::size_t i = 0; i < s.inner; ++i) da[(o * s.n + j) * s.inner + i] += g[o * s.inner + i] * inv;
            }
    });
}

Var max_over_axis(const Var& a, std::size_t axis, const Mask& mask) {
    const auto s = split_axis(a.shape(), axis);
    if (!mask.empty() && mask.size() != s.n) {
        throw DimensionError("max_over_axis: mask length " + std::to_string(mask.size()) + " vs axis extent " +
                             std::to_string(s.n));
    }
    std::size_t first_valid = s.n;
    for (std::size_t j = 0; j < s.n; ++j) {
        if (mask.empty() || mask[j]) {
            first_valid = j;
            break;
        }
    }
    if (first_valid == s.n) throw DegenerateRowError("max_over_axis: empty reduction axis (every position masked)");
    Tensor out(drop_axis(a.shape(), axis));
    std::vector<std::size_t> argmax(s.outer * s.inner);
    const auto& v = a.value();
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            std::size_t best = first_valid;
            double best_v = v[(o * s.n + best) * s.inner + i];
            for (std::size_t j = first_valid + 1; j < s.n; ++j) {
                if (!mask.empty() && !mask[j]) continue;
                const double x = v[(o * s.n + j) * s.inner + i];
                if (x > best_v) {
                    best_v = x;
                    best = j;
                }
            }
            out[o * s.inner + i] = best_v;
            argmax[o * s.inner + i] = best;
        }
    }
    return a.tape().record(std::move(out), {a}, [a, s, argmax = std::move(argmax)](Tape& t, std::span<const double> g) {
        auto da = t.grad_buffer(a);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t i = 0; i < s.inner; ++i) {
                const std::size_t j = argmax[o * s.inner + i];
                da[(o * s.n + j) * s.inner + i] += g[o * s.inner + i];
            }
    });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
    return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat: no operands");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) {
        throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(first));
    }
    std::vector<std::size_t> extents;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& sh = p.shape();
        bool ok = sh.size() == first.size();
        for (std::size_t i = 0; ok && i < sh.size(); ++i) ok = i == axis || sh[i] == first[i];
        if (!ok) {
            throw DimensionError("concat: operand " + shape_str(sh) + " disagrees with " + shape_str(first) +
                                 " off axis " + std::to_string(axis));
        }
        extents.push_back(sh[axis]);
        total += sh[axis];
    }
    Shape out_shape = first;
    out_shape[axis] = total;
    const auto s = split_axis(out_shape, axis);
    Tensor out(out_shape);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto& v = parts[p].value();
        const std::size_t e = extents[p];
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t j = 0; j < e; ++j)
                for (std::size_t i = 0; i < s.inner; ++i)
                    out[(o * total + offset + j) * s.inner + i] = v[(o * e + j) * s.inner + i];
        offset += e;
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return parts[0].tape().record(
        std::move(out), parts, [inputs, extents, s, total](Tape& t, std::span<const double> g) {
            std::size_t offset = 0;
            for (std::size_t p = 0; p < inputs.size(); ++p) {
                const std::size_t e = extents[p];
                if (t.requires_grad(inputs[p].id())) {
                    auto d = t.grad_buffer(inputs[p]);
                    for (std::size_t o = 0; o < s.outer; ++o)
                        for (std::size_t j = 0; j < e; ++j)
                            for (std::size_t i = 0; i < s.inner; ++i)
                                d[(o * e + j) * s.inner + i] += g[(o * total + offset + j) * s.inner + i];
                }
                offset += e;
            }
        });
}

Var reshape(const Var& a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return a.tape().record(std::move(out), {a}, [a](Tape& t, std::span<const double> g) {
        accumulate(t.grad_buffer(a), g);
    });
}

Var slice_columns(const Var& a, std::size_t begin, std::size_t count) {
    require_rank2(a, "slice_columns");
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (count == 0 || begin + count > cols) {
        throw DimensionError("slice_columns: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") out of range for " + shape_str(a.shape()));
    }
    Tensor out({rows, count});
    const auto& v = a.value();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < count; ++j) out[r * count + j] = v[r * cols + begin + j];
    return a.tape().record(std::move(out), {a}, [a, rows, cols, begin, count](Tape& t, std::span<const double> g) {
        auto da = t.grad_buffer(a);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < count; ++j) da[r * cols + begin + j] += g[r * count + j];
    });
}

Var layer_norm(const Var& x, const Var& gain, const Var& shift, double epsilon) {
    if (x.shape().empty()) throw DimensionError("layer_norm: scalar input");
    const std::size_t d = x.shape().back();
    if (gain.shape() != Shape{d} || shift.shape() != Shape{d}) {
        throw DimensionError("layer_norm: gain/shift must be [" + std::to_string(d) + "], got " +
                             shape_str(gain.shape()) + " and " + shape_str(shift.shape()));
    }
    if (!(epsilon > 0.0)) throw RangeError("layer_norm: epsilon must be positive");
    const std::size_t rows = x.numel() / d;
    const auto& xv = x.value();
    const auto& gv = gain.value();
    const auto& sv = shift.value();
    auto normed = std::make_shared<std::vector<double>>(x.numel());
    auto rstd = std::make_shared<std::vector<double>>(rows);
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += xv[r * d + j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = xv[r * d + j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + epsilon);
        (*rstd)[r] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const double z = (xv[r * d + j] - mean) * inv;
            (*normed)[r * d + j] = z;
            out[r * d + j] = gv[j] * z + sv[j];
        }
    }
    return x.tape().record(
        std::move(out), {x, gain, shift}, [x, gain, shift, normed, rstd, rows, d](Tape& t, std::span<const double> g) {
            const auto& z = *normed;
            if (t.requires_grad(shift.id())) {
                auto ds = t.grad_buffer(shift);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) ds[j] += g[r * d + j];
            }
            if (t.requires_grad(gain.id())) {
                auto dg = t.grad_buffer(gain);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) dg[j] += g[r * d + j] * z[r * d + j];
            }
            if (t.requires_grad(x.id())) {
                auto dx = t.grad_buffer(x);
                const auto& gv = t.value(gain.id());
                const double inv_d = 1.0 / static_cast<double>(d);
                for (std::size_t r = 0; r < rows; ++r) {
                    double mean_dz = 0.0, mean_dzz = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dz = g[r * d + j] * gv[j];
                        mean_dz += dz;
                        mean_dzz += dz * z[r * d + j];
                    }
                    mean_dz *= inv_d;
                    mean_dzz *= inv_d;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dz = g[r * d + j] * gv[j];
                        dx[r * d + j] += (*rstd)[r] * (dz - mean_dz - z[r * d + j] * mean_dzz);
                    }
                }
            }
        });
}

}  // namespace memfuse
