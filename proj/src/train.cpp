#include "memfuse/train.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <sstream>

#include "memfuse/data.hpp"
#include "memfuse/errors.hpp"
#include "memfuse/stats.hpp"

namespace memfuse::train {

using nlohmann::json;

std::string_view to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view s) {
    if (s == "adam") return Optimizer::adam;
    if (s == "sgd") return Optimizer::sgd;
    throw RangeError("unknown optimizer '" + std::string(s) + "'");
}

std::string_view to_string(SelectionMetric m) { return m == SelectionMetric::val_mse ? "val_mse" : "val_spearman"; }

SelectionMetric parse_selection_metric(std::string_view s) {
    if (s == "val_mse") return SelectionMetric::val_mse;
    if (s == "val_spearman") return SelectionMetric::val_spearman;
    throw RangeError("unknown selection metric '" + std::string(s) + "'");
}

std::vector<std::string> TrainConfig::violations() const {
    std::vector<std::string> v;
    if (epochs == 0) v.push_back("epochs must be >= 1");
    if (batch_size == 0) v.push_back("batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) v.push_back("learning_rate must be finite and >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) v.push_back("beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) v.push_back("beta2 must be in [0, 1)");
    if (!(epsilon > 0.0)) v.push_back("epsilon must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) v.push_back("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) v.push_back("weight_decay must be finite and >= 0");
    if (!(clip_norm >= 0.0)) v.push_back("clip_norm must be >= 0");
    return v;
}

void TrainConfig::validate() const {
    auto v = violations();
    if (!v.empty()) throw ValidationError(std::move(v));
}

json TrainConfig::to_json() const {
    json j;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["optimizer"] = std::string(to_string(optimizer));
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["epsilon"] = epsilon;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["seed"] = seed;
    j["early_stop_patience"] = early_stop_patience;
    j["selection_metric"] = std::string(to_string(selection_metric));
    j["clip_norm"] = clip_norm;
    return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
    if (!j.is_object()) throw ValidationError({"train config must be a JSON object"});
    TrainConfig c;
    std::vector<std::string> bad;
    for (const auto& [k, v] : j.items()) {
        try {
            if (k == "epochs") c.epochs = v.get<std::size_t>();
            else if (k == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (k == "learning_rate") c.learning_rate = v.get<double>();
            else if (k == "optimizer") c.optimizer = parse_optimizer(v.get<std::string>());
            else if (k == "beta1") c.beta1 = v.get<double>();
            else if (k == "beta2") c.beta2 = v.get<double>();
            else if (k == "epsilon") c.epsilon = v.get<double>();
            else if (k == "momentum") c.momentum = v.get<double>();
            else if (k == "weight_decay") c.weight_decay = v.get<double>();
            else if (k == "seed") c.seed = v.get<std::uint64_t>();
            else if (k == "early_stop_patience") c.early_stop_patience = v.get<std::size_t>();
            else if (k == "selection_metric") c.selection_metric = parse_selection_metric(v.get<std::string>());
            else if (k == "clip_norm") c.clip_norm = v.get<double>();
            else bad.push_back("unknown train config key '" + k + "'");
        } catch (const json::exception& e) {
            bad.push_back("train config key '" + k + "': " + e.what());
        } catch (const RangeError& e) {
            bad.push_back(e.what());
        }
    }
    if (!bad.empty()) throw ValidationError(std::move(bad));
    c.validate();
    return c;
}

// ---- optimizers -------------------------------------------------------------

namespace {

void check_grads(std::span<Tensor* const> params, std::span<const std::vector<double>> grads) {
    if (params.size() != grads.size()) {
        throw DimensionError("optimizer got " + std::to_string(grads.size()) + " gradients for " +
                             std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i]->numel()) {
            throw DimensionError("gradient " + std::to_string(i) + " has " + std::to_string(grads[i].size()) +
                                 " values, parameter has " + std::to_string(params[i]->numel()));
        }
        for (double g : grads[i]) {
            if (!std::isfinite(g)) throw RangeError("non-finite gradient for parameter " + std::to_string(i));
        }
    }
}

void check_state(std::span<Tensor* const> params, const std::vector<std::vector<double>>& s, const char* what) {
    if (s.size() != params.size()) throw DimensionError(std::string(what) + " does not match the parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (s[i].size() != params[i]->numel()) throw DimensionError(std::string(what) + " shape mismatch");
    }
}

std::vector<std::vector<double>> zeros(std::span<Tensor* const> params) {
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const auto* p : params) out.emplace_back(p->numel(), 0.0);
    return out;
}

}  // namespace

AdamState AdamState::zeros_like(std::span<Tensor* const> params) { return {0, zeros(params), zeros(params)}; }

void adam_step(std::span<Tensor* const> params, std::span<const std::vector<double>> grads, AdamState& state,
               const AdamHyper& h) {
    check_grads(params, grads);
    check_state(params, state.m, "Adam first moment");
    check_state(params, state.v, "Adam second moment");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double g = grads[i][k] + h.weight_decay * p[k];
            m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g;
            v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g * g;
            p[k] -= h.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + h.epsilon);
        }
    }
}

SgdState SgdState::zeros_like(std::span<Tensor* const> params) { return {zeros(params)}; }

void sgd_step(std::span<Tensor* const> params, std::span<const std::vector<double>> grads, SgdState& state,
              double learning_rate, double momentum, double weight_decay) {
    check_grads(params, grads);
    check_state(params, state.velocity, "SGD velocity");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        auto& u = state.velocity[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            u[k] = momentum * u[k] + grads[i][k] + weight_decay * p[k];
            p[k] -= learning_rate * u[k];
        }
    }
}

double clip_global_norm(std::span<std::vector<double>> grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (double x : g) sq += x * x;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& g : grads)
            for (double& x : g) x *= s;
    }
    return norm;
}

// ---- training ---------------------------------------------------------------

std::string TrainLog::to_jsonl(bool include_timing) const {
    std::ostringstream os;
    for (const auto& r : epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["train_loss"] = r.train_loss;
        j["val_mse"] = r.val_mse;
        j["val_spearman"] = r.val_spearman ? json(*r.val_spearman) : json(nullptr);
        j["grad_norm_mean"] = r.grad_norm_mean;
        j["grad_norm_max"] = r.grad_norm_max;
        if (include_timing) j["wall_seconds"] = r.wall_seconds;
        j["best"] = r.epoch == best_epoch;
        os << j.dump() << '\n';
    }
    return os.str();
}

namespace {

struct Prepared {
    std::vector<ModelInput> inputs;
    std::vector<double> labels;
};

Prepared prepare(std::span<const Sample> samples, const ModelConfig& config, const char* what) {
    Prepared p;
    p.inputs.reserve(samples.size());
    for (const auto& s : samples) {
        if (!s.label) throw ValidationError({std::string(what) + " sample '" + s.id + "' has no label"});
        if (!(*s.label >= 0.0 && *s.label <= 1.0)) {
            throw RangeError(std::string(what) + " sample '" + s.id + "' label outside [0, 1]");
        }
        p.inputs.push_back(to_model_input(s, config));
        p.labels.push_back(*s.label);
    }
    return p;
}

Metrics metrics_of(const ModelParams& params, const ModelConfig& config, const Prepared& data) {
    std::vector<double> pred(data.inputs.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = predict(params, config, data.inputs[i]);
    Metrics m;
    m.n = pred.size();
    m.mse = stats::mse(pred, data.labels);
    if (pred.size() >= 3) {
        try {
            m.spearman = stats::spearman(pred, data.labels);
        } catch (const UndefinedStatisticError&) {
        }
    }
    return m;
}

// Larger is better; undefined correlation ranks below everything.
double selection_score(const EpochRecord& r, SelectionMetric metric) {
    if (metric == SelectionMetric::val_mse) return -r.val_mse;
    return r.val_spearman ? *r.val_spearman : -std::numeric_limits<double>::infinity();
}

std::vector<Tensor*> parameter_list(ModelParams& params) {
    std::vector<Tensor*> out;
    params.for_each([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

}  // namespace

Metrics evaluate(const ModelParams& params, const ModelConfig& config, std::span<const Sample> samples) {
    if (samples.empty()) throw ValidationError({"evaluation set is empty"});
    return metrics_of(params, config, prepare(samples, config, "evaluation"));
}

TrainResult train(const ModelConfig& config, ModelParams params, std::span<const Sample> train_set,
                  std::span<const Sample> validation_set, const TrainConfig& tc, const EpochCallback& on_epoch) {
    config.validate();
    tc.validate();
    if (train_set.empty()) throw ValidationError({"training set is empty"});
    if (validation_set.empty()) throw ValidationError({"validation set is empty"});
    data::check_disjoint(train_set, validation_set);
    const Prepared tr = prepare(train_set, config, "training");
    const Prepared va = prepare(validation_set, config, "validation");

    std::vector<Tensor*> plist = parameter_list(params);
    AdamState adam = AdamState::zeros_like(plist);
    SgdState sgd = SgdState::zeros_like(plist);
    const AdamHyper hyper{tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon, tc.weight_decay};

    std::seed_seq dropout_seed{static_cast<std::uint32_t>(tc.seed), static_cast<std::uint32_t>(tc.seed >> 32), 1u};
    Rng dropout_rng(dropout_seed);
    TrainResult result{params, {}};
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t wait = 0;
    std::vector<std::vector<double>> grads(plist.size());

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::seed_seq shuffle_seed{static_cast<std::uint32_t>(tc.seed), static_cast<std::uint32_t>(tc.seed >> 32), 2u,
                                   static_cast<std::uint32_t>(epoch)};
        std::uint32_t perm_seed[2];
        shuffle_seed.generate(perm_seed, perm_seed + 2);
        const auto idx = data::order(tr.inputs.size(), (std::uint64_t{perm_seed[0]} << 32) | perm_seed[1]);

        double loss_sum = 0.0, norm_sum = 0.0, norm_max = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t b0 = 0; b0 < idx.size(); b0 += tc.batch_size) {
            const std::size_t b1 = std::min(idx.size(), b0 + tc.batch_size);
            const int batch_no = static_cast<int>(n_batches);
            Tape tape;
            std::vector<Var> losses;
            losses.reserve(b1 - b0);
            for (std::size_t k = b0; k < b1; ++k) {
                const Var pred = forward(tape, params, config, tr.inputs[idx[k]], Mode::train, &dropout_rng);
                losses.push_back(squared_error(pred, tr.labels[idx[k]]));
            }
            const Var batch_loss =
                scale(sum(losses.size() == 1 ? losses.front() : concat(losses, 0)), 1.0 / static_cast<double>(b1 - b0));
            const double loss_value = batch_loss.value().item();
            if (!std::isfinite(loss_value)) {
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(batch_no),
                                      static_cast<int>(epoch), batch_no);
            }
            tape.backward(batch_loss);
            for (std::size_t i = 0; i < plist.size(); ++i) {
                const auto g = tape.parameter_grad(*plist[i]);
                grads[i].assign(g.begin(), g.end());
            }
            const double norm = clip_global_norm(grads, tc.clip_norm);
            if (!std::isfinite(norm)) {
                throw DivergenceError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(batch_no),
                                      static_cast<int>(epoch), batch_no);
            }
            if (tc.optimizer == Optimizer::adam) {
                adam_step(plist, grads, adam, hyper);
            } else {
                sgd_step(plist, grads, sgd, tc.learning_rate, tc.momentum, tc.weight_decay);
            }
            loss_sum += loss_value * static_cast<double>(b1 - b0);
            norm_sum += norm;
            norm_max = std::max(norm_max, norm);
            ++n_batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(idx.size());
        const Metrics vm = metrics_of(params, config, va);
        rec.val_mse = vm.mse;
        rec.val_spearman = vm.spearman;
        rec.grad_norm_mean = norm_sum / static_cast<double>(n_batches);
        rec.grad_norm_max = norm_max;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        const double score = selection_score(rec, tc.selection_metric);
        if (result.log.best_epoch == 0 || score > best_score) {
            best_score = score;
            result.log.best_epoch = epoch;
            result.best_params = params;
            wait = 0;
        } else if (++wait >= tc.early_stop_patience && epoch < tc.epochs) {
            result.log.stopped_early = true;
            break;
        }
    }
    return result;
}

// ---- ablations --------------------------------------------------------------

namespace {

std::string subset_name(const std::vector<Modality>& mods) {
    std::string s;
    for (auto m : mods) {
        if (!s.empty()) s += "+";
        s += to_string(m);
    }
    return s;
}

AttentionMode cross_free(AttentionMode m) {
    switch (m) {
        case AttentionMode::self_and_cross: return AttentionMode::self_only;
        case AttentionMode::cross_with_average: return AttentionMode::average_only;
        default: return m;
    }
}

}  // namespace

std::vector<Variant> ablation_variants(const ModelConfig& base) {
    std::vector<Variant> out;
    const std::vector<std::vector<Modality>> subsets = {
        {Modality::video},
        {Modality::audio},
        {Modality::text},
        {Modality::video, Modality::audio},
        {Modality::video, Modality::text},
        {Modality::audio, Modality::text},
        {Modality::video, Modality::audio, Modality::text},
    };
    for (const auto& mods : subsets) {
        ModelConfig c = base;
        c.modalities = mods;
        c.input_dims.clear();
        for (auto m : mods) {
            auto it = base.input_dims.find(m);
            if (it == base.input_dims.end()) {
                throw ValidationError({"ablation needs an input dim for " + std::string(to_string(m))});
            }
            c.input_dims[m] = it->second;
        }
        if (mods.size() == 1) c.attention_mode = cross_free(base.attention_mode);
        out.push_back({"modality:" + subset_name(mods), c});
    }
    for (auto mode : kAllAttentionModes) {
        ModelConfig c = out.back().config;
        c.attention_mode = mode;
        out.push_back({"attention:" + std::string(to_string(mode)), c});
    }
    return out;
}

std::vector<AblationRow> ablation_suite(const ModelConfig& base, std::span<const Sample> train_set,
                                        std::span<const Sample> validation_set, const TrainConfig& tc,
                                        const std::vector<std::string>& only) {
    for (const auto* set : {&train_set, &validation_set}) {
        for (const auto& s : *set) {
            for (auto m : kAllModalities) {
                if (!s.has(m)) {
                    throw ValidationError({"ablation needs all three modalities; sample '" + s.id + "' lacks " +
                                           std::string(to_string(m))});
                }
            }
        }
    }
    std::vector<Variant> variants;
    for (auto& v : ablation_variants(base)) {
        if (only.empty() || std::find(only.begin(), only.end(), v.name) != only.end()) variants.push_back(std::move(v));
    }
    for (const auto& name : only) {
        if (std::none_of(variants.begin(), variants.end(), [&](const Variant& v) { return v.name == name; })) {
            throw ValidationError({"unknown ablation variant '" + name + "'"});
        }
    }

    std::vector<AblationRow> rows(variants.size());
    std::vector<std::string> failures(variants.size());
    const auto n = static_cast<std::ptrdiff_t>(variants.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& v = variants[i];
        try {
            auto res = train(v.config, build(v.config, tc.seed), train_set, validation_set, tc);
            const auto& best = res.log.best();
            rows[i] = {v.name, best.val_spearman, best.val_mse, res.log.epochs_run(), tc.seed};
        } catch (const std::exception& e) {
            failures[i] = v.name + ": " + e.what();
        }
    }
    for (const auto& f : failures) {
        if (!f.empty()) throw Error("ablation variant " + f);
    }
    return rows;
}

namespace {

std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os.precision(precision);
    os << std::fixed << v;
    return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::string ablation_csv(std::span<const AblationRow> rows) {
    std::ostringstream os;
    os << "variant,spearman_rho,mse,epochs_run,seed\n";
    for (const auto& r : rows) {
        os << r.variant << ',' << fmt(r.spearman_rho) << ',' << fmt(r.mse) << ',' << r.epochs_run << ',' << r.seed
           << '\n';
    }
    return os.str();
}

std::string ablation_markdown(std::span<const AblationRow> rows) {
    std::ostringstream os;
    auto table = [&](const char* title, const char* prefix) {
        os << "### " << title << "\n\n| Variant | Spearman's ρ | MSE |\n|---|---|---|\n";
        for (const auto& r : rows) {
            if (r.variant.rfind(prefix, 0) != 0) continue;
            os << "| " << r.variant.substr(std::string_view(prefix).size()) << " | "
               << (r.spearman_rho ? fmt(*r.spearman_rho, 3) : std::string("n/a")) << " | " << fmt(r.mse, 3)
               << " |\n";
        }
        os << '\n';
    };
    table("Modality comparison", "modality:");
    table("Attention ablations", "attention:");
    return os.str();
}

}  // namespace memfuse::train
