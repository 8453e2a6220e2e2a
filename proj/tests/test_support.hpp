#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "memfuse/autograd.hpp"
#include "memfuse/tensor.hpp"

namespace memfuse::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.data()) v = u(rng);
    return t;
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::string worst;
    std::size_t checked = 0;
};

/// Compares tape gradients of `loss` with central differences for every
/// entry of every tensor in `wrt`:
///   max |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
inline GradCheck grad_check(const std::vector<Tensor*>& wrt, const std::function<Var(Tape&)>& loss,
                            double step = 1e-5) {
    Tape tape;
    const Var out = loss(tape);
    for (auto* t : wrt) tape.parameter(*t);
    tape.backward(out);
    std::vector<std::vector<double>> analytic;
    for (auto* t : wrt) {
        const auto g = tape.parameter_grad(*t);
        analytic.emplace_back(g.begin(), g.end());
    }
    auto eval = [&]() {
        Tape t(false);
        return loss(t).value().item();
    };
    GradCheck res;
    for (std::size_t p = 0; p < wrt.size(); ++p) {
        auto data = wrt[p]->data();
        for (std::size_t k = 0; k < data.size(); ++k) {
            const double orig = data[k];
            data[k] = orig + step;
            const double up = eval();
            data[k] = orig - step;
            const double down = eval();
            data[k] = orig;
            const double numeric = (up - down) / (2.0 * step);
            const double scale = std::max({std::fabs(analytic[p][k]), std::fabs(numeric), 1e-6});
            const double rel = std::fabs(analytic[p][k] - numeric) / scale;
            ++res.checked;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst = "tensor " + std::to_string(p) + " entry " + std::to_string(k) + ": analytic " +
                            std::to_string(analytic[p][k]) + " numeric " + std::to_string(numeric);
            }
        }
    }
    return res;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("memfuse-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

}  // namespace memfuse::testing
