// memfuse: command-line front end.
//
// Every subcommand writes run.json into its output directory, prints exactly
// one JSON summary line on stdout and logs to stderr.
// Exit codes: 0 ok, 2 usage or validation error, 3 runtime or numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "memfuse/checkpoint.hpp"
#include "memfuse/data.hpp"
#include "memfuse/errors.hpp"
#include "memfuse/insight.hpp"
#include "memfuse/kernels.hpp"
#include "memfuse/stats.hpp"
#include "memfuse/synthetic.hpp"
#include "memfuse/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace memfuse;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 2, kRuntime = 3 };

/// Raised for problems the operator can fix by changing the invocation.
struct UsageError : Error {
    using Error::Error;
};

void log(const std::string& msg) { std::cerr << "memfuse: " << msg << '\n'; }

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
}

void prepare_out(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_run_json(const fs::path& dir, const std::string& subcommand, const json& resolved) {
    json j;
    j["subcommand"] = subcommand;
    j["memfuse_version"] = kVersion;
    j["formats"] = {{"checkpoint", kCheckpointVersion}, {"memb", data::kEmbeddingVersion}};
    j["resolved"] = resolved;
    write_text(dir / "run.json", j.dump(2) + "\n");
}

std::vector<Sample> load(const std::string& manifest_path, data::Manifest* manifest_out = nullptr) {
    if (!fs::exists(manifest_path)) throw IoError("manifest not found: '" + manifest_path + "'");
    auto manifest = data::read_manifest(manifest_path);
    auto samples = data::load_dataset(manifest);
    if (manifest_out) *manifest_out = std::move(manifest);
    return samples;
}

void fill_input_dims(ModelConfig& config, std::span<const Sample> samples) {
    for (auto m : config.modalities) {
        if (config.input_dims.count(m)) continue;
        for (const auto& s : samples) {
            auto it = s.sequences.find(m);
            if (it != s.sequences.end()) {
                config.input_dims[m] = it->second.width();
                break;
            }
        }
    }
}

void require_modalities(const ModelConfig& config, std::span<const Sample> samples, const std::string& what) {
    for (const auto& s : samples) {
        for (auto m : config.modalities) {
            auto it = s.sequences.find(m);
            if (it == s.sequences.end()) {
                throw UsageError(what + ": sample '" + s.id + "' has no " + std::string(to_string(m)) +
                                 " embedding, which the model needs");
            }
            const auto want = config.input_dims.count(m) ? config.input_dims.at(m) : 0;
            if (want != 0 && it->second.width() != want) {
                throw UsageError(what + ": sample '" + s.id + "' " + std::string(to_string(m)) + " width " +
                                 std::to_string(it->second.width()) + " does not match model input dim " +
                                 std::to_string(want));
            }
        }
    }
}

void require_labels(std::span<const Sample> samples, const std::string& what) {
    for (const auto& s : samples) {
        if (!s.label) throw UsageError(what + ": sample '" + s.id + "' has no label");
    }
}

std::vector<std::size_t> parse_dims(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(part, &pos);
            if (pos != part.size() || v < 0) throw std::invalid_argument(part);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("--dims expects three non-negative integers v,a,t; got '" + text + "'");
        }
    }
    if (out.size() != 3) throw UsageError("--dims expects three values v,a,t; got '" + text + "'");
    return out;
}

json metrics_json(const train::Metrics& m) {
    json j;
    j["spearman"] = m.spearman ? json(*m.spearman) : json(nullptr);
    j["mse"] = m.mse;
    j["n"] = m.n;
    return j;
}

// ---- model/train config assembly ---------------------------------------------

struct ModelFlags {
    std::optional<std::string> modalities;
    std::optional<std::size_t> latent_dim;
    std::optional<std::size_t> heads;
    std::optional<double> dropout;
    std::optional<std::string> attention;
    std::optional<std::size_t> fusion_hidden;
    std::optional<std::string> fusion_head;
};

struct TrainFlags {
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> lr;
    std::optional<std::string> optimizer;
    std::optional<double> weight_decay;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> patience;
    std::optional<std::string> selection;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
    cmd->add_option("--modalities", f.modalities, "comma-separated subset of video,audio,text");
    cmd->add_option("--latent-dim", f.latent_dim, "shared latent width");
    cmd->add_option("--heads", f.heads, "attention heads");
    cmd->add_option("--dropout", f.dropout, "dropout rate in [0,1)");
    cmd->add_option("--attention", f.attention,
                    "self_and_cross | self_only | cross_with_average | average_only | max_only");
    cmd->add_option("--fusion-hidden", f.fusion_hidden, "fusion MLP hidden width");
    cmd->add_option("--fusion-head", f.fusion_head, "mlp | literal");
}

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--epochs", f.epochs, "maximum epochs");
    cmd->add_option("--batch-size", f.batch_size, "mini-batch size");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--optimizer", f.optimizer, "adam | sgd");
    cmd->add_option("--weight-decay", f.weight_decay, "L2 weight decay");
    cmd->add_option("--seed", f.seed, "seed for initialization, shuffling and dropout");
    cmd->add_option("--patience", f.patience, "early-stopping patience in epochs");
    cmd->add_option("--selection", f.selection, "val_spearman | val_mse");
}

/// Config file layout: {"model": {...}, "train": {...}}. Flags win.
std::pair<ModelConfig, train::TrainConfig> resolve_configs(const std::string& config_path, const ModelFlags& mf,
                                                           const TrainFlags& tf) {
    json model_j = json::object();
    json train_j = json::object();
    if (!config_path.empty()) {
        const json file = read_json_file(config_path);
        if (!file.is_object()) throw UsageError("config file must hold a JSON object");
        for (const auto& [k, v] : file.items()) {
            if (k == "model") model_j = v;
            else if (k == "train") train_j = v;
            else throw UsageError("unknown config section '" + k + "' (expected \"model\" and \"train\")");
        }
    }
    if (mf.modalities) {
        json mods = json::array();
        std::stringstream ss(*mf.modalities);
        std::string part;
        while (std::getline(ss, part, ',')) mods.push_back(part);
        model_j["modalities"] = mods;
    }
    if (mf.latent_dim) model_j["latent_dim"] = *mf.latent_dim;
    if (mf.heads) model_j["num_heads"] = *mf.heads;
    if (mf.dropout) model_j["dropout_rate"] = *mf.dropout;
    if (mf.attention) model_j["attention_mode"] = *mf.attention;
    if (mf.fusion_hidden) model_j["fusion_hidden_dim"] = *mf.fusion_hidden;
    if (mf.fusion_head) model_j["fusion_head"] = *mf.fusion_head;
    if (tf.epochs) train_j["epochs"] = *tf.epochs;
    if (tf.batch_size) train_j["batch_size"] = *tf.batch_size;
    if (tf.lr) train_j["learning_rate"] = *tf.lr;
    if (tf.optimizer) train_j["optimizer"] = *tf.optimizer;
    if (tf.weight_decay) train_j["weight_decay"] = *tf.weight_decay;
    if (tf.seed) train_j["seed"] = *tf.seed;
    if (tf.patience) train_j["early_stop_patience"] = *tf.patience;
    if (tf.selection) train_j["selection_metric"] = *tf.selection;
    return {ModelConfig::from_json(model_j), train::TrainConfig::from_json(train_j)};
}

// ---- subcommands ------------------------------------------------------------

struct GenOptions {
    std::size_t n = 2000;
    std::optional<std::size_t> n_val;
    std::optional<std::size_t> n_test;
    std::string dims = "16,16,16";
    double noise = 0.5;
    std::uint64_t seed = 7;
    std::size_t min_len = 4;
    std::size_t max_len = 10;
    std::size_t rerank_items = 40;
    std::size_t candidates = 3;
    std::string out;
};

json run_gen(const GenOptions& o) {
    data::SyntheticSpec spec;
    spec.n_train = o.n;
    spec.n_validation = o.n_val.value_or(o.n / 8);
    spec.n_test = o.n_test.value_or(o.n / 8);
    const auto d = parse_dims(o.dims);
    spec.dims = {{Modality::video, d[0]}, {Modality::audio, d[1]}, {Modality::text, d[2]}};
    spec.noise = o.noise;
    spec.seed = o.seed;
    spec.min_length = o.min_len;
    spec.max_length = o.max_len;
    spec.n_rerank = o.rerank_items;
    spec.candidates_per_item = o.candidates;
    spec.validate();
    prepare_out(o.out);
    log("generating " + std::to_string(spec.n_train) + "/" + std::to_string(spec.n_validation) + "/" +
        std::to_string(spec.n_test) + " samples into " + o.out);
    const auto ds = data::generate_synthetic(spec);
    json summary = data::write_synthetic(ds, spec, o.out);
    write_run_json(o.out, "gen-synthetic", {{"spec", spec.to_json()}});
    summary["out"] = o.out;
    return summary;
}

struct TrainOptions {
    std::string config;
    std::string train_manifest;
    std::string val_manifest;
    std::string out;
    ModelFlags model;
    TrainFlags train;
};

json run_train(const TrainOptions& o) {
    auto [config, tc] = resolve_configs(o.config, o.model, o.train);
    const auto train_set = load(o.train_manifest);
    const auto val_set = load(o.val_manifest);
    fill_input_dims(config, train_set);
    config.validate();
    require_modalities(config, train_set, o.train_manifest);
    require_modalities(config, val_set, o.val_manifest);
    require_labels(train_set, o.train_manifest);
    require_labels(val_set, o.val_manifest);
    data::check_disjoint(train_set, val_set);
    prepare_out(o.out);
    write_run_json(o.out, "train", {{"model", config.to_json()},
                                    {"train", tc.to_json()},
                                    {"train_manifest", o.train_manifest},
                                    {"val_manifest", o.val_manifest}});

    json note = nullptr;
    if (tc.learning_rate == 0.0) {
        log("warning: learning rate is 0, parameters will not change");
        note = "learning_rate is 0; parameters unchanged from initialization";
    }
    log("training " + std::to_string(parameter_census(config)) + " parameters on " +
        std::to_string(train_set.size()) + " samples");
    auto result = train::train(config, build(config, tc.seed), train_set, val_set, tc, [](const train::EpochRecord& r) {
        std::ostringstream os;
        os << "epoch " << r.epoch << " loss " << r.train_loss << " val_mse " << r.val_mse << " val_rho "
           << (r.val_spearman ? std::to_string(*r.val_spearman) : std::string("undefined"));
        log(os.str());
    });
    save_checkpoint(fs::path(o.out) / "checkpoint.mmem", result.best_params, config);
    write_text(fs::path(o.out) / "train_log.jsonl", result.log.to_jsonl(true));

    const auto& best = result.log.best();
    json metrics;
    metrics["best_epoch"] = result.log.best_epoch;
    metrics["epochs_run"] = result.log.epochs_run();
    metrics["stopped_early"] = result.log.stopped_early;
    metrics["val_spearman"] = best.val_spearman ? json(*best.val_spearman) : json(nullptr);
    metrics["val_mse"] = best.val_mse;
    metrics["n_val"] = val_set.size();
    write_text(fs::path(o.out) / "metrics.json", metrics.dump(2) + "\n");

    json summary = metrics;
    summary["checkpoint"] = (fs::path(o.out) / "checkpoint.mmem").string();
    if (!note.is_null()) summary["note"] = note;
    return summary;
}

struct EvalOptions {
    std::string checkpoint;
    std::string manifest;
    std::string out;
};

std::pair<Checkpoint, std::vector<Sample>> load_model_and_data(const EvalOptions& o) {
    if (!fs::exists(o.checkpoint)) throw IoError("checkpoint not found: '" + o.checkpoint + "'");
    auto ck = load_checkpoint(o.checkpoint);
    auto samples = load(o.manifest);
    require_modalities(ck.config, samples, o.manifest);
    return {std::move(ck), std::move(samples)};
}

json run_evaluate(const EvalOptions& o) {
    auto [ck, samples] = load_model_and_data(o);
    require_labels(samples, o.manifest);
    const auto m = train::evaluate(ck.params, ck.config, samples);
    prepare_out(o.out);
    write_run_json(o.out, "evaluate",
                   {{"model", ck.config.to_json()}, {"checkpoint", o.checkpoint}, {"manifest", o.manifest}});
    const json j = metrics_json(m);
    write_text(fs::path(o.out) / "metrics.json", j.dump(2) + "\n");
    return j;
}

json run_predict(const EvalOptions& o) {
    auto [ck, samples] = load_model_and_data(o);
    const auto scores = predict_all(ck.params, ck.config, samples);
    prepare_out(o.out);
    write_run_json(o.out, "predict",
                   {{"model", ck.config.to_json()}, {"checkpoint", o.checkpoint}, {"manifest", o.manifest}});
    std::ostringstream csv;
    csv.precision(17);
    csv << "id,score\n";
    for (std::size_t i = 0; i < samples.size(); ++i) csv << samples[i].id << ',' << scores[i] << '\n';
    const fs::path path = fs::path(o.out) / "predictions.csv";
    write_text(path, csv.str());
    return {{"n", samples.size()}, {"predictions", path.string()}};
}

struct AblateOptions {
    std::string config;
    std::vector<std::string> manifests;
    std::vector<std::string> variants;
    std::string out;
    ModelFlags model;
    TrainFlags train;
};

json run_ablate(const AblateOptions& o) {
    if (o.manifests.size() != 2) throw UsageError("--manifests expects TRAIN,VAL");
    auto [config, tc] = resolve_configs(o.config, o.model, o.train);
    const auto train_set = load(o.manifests[0]);
    const auto val_set = load(o.manifests[1]);
    config.modalities = {Modality::video, Modality::audio, Modality::text};
    fill_input_dims(config, train_set);
    config.validate();
    require_modalities(config, train_set, o.manifests[0]);
    require_modalities(config, val_set, o.manifests[1]);
    require_labels(train_set, o.manifests[0]);
    require_labels(val_set, o.manifests[1]);
    data::check_disjoint(train_set, val_set);
    prepare_out(o.out);
    write_run_json(o.out, "ablate", {{"model", config.to_json()},
                                     {"train", tc.to_json()},
                                     {"manifests", o.manifests},
                                     {"variants", o.variants}});
    log("running ablation suite with " + std::to_string(kernels::max_threads()) + " thread(s)");
    const auto rows = train::ablation_suite(config, train_set, val_set, tc, o.variants);
    write_text(fs::path(o.out) / "ablation.csv", train::ablation_csv(rows));
    write_text(fs::path(o.out) / "ablation.md", train::ablation_markdown(rows));
    json out_rows = json::array();
    for (const auto& r : rows) {
        out_rows.push_back({{"variant", r.variant},
                            {"spearman_rho", r.spearman_rho ? json(*r.spearman_rho) : json(nullptr)},
                            {"mse", r.mse},
                            {"epochs_run", r.epochs_run}});
    }
    return {{"rows", out_rows}, {"seed", tc.seed}, {"csv", (fs::path(o.out) / "ablation.csv").string()}};
}

struct AnalyzeOptions {
    EvalOptions io;
    std::size_t permutations = 10000;
    std::uint64_t seed = 0;
};

json run_analyze(const AnalyzeOptions& o) {
    data::Manifest manifest;
    if (!fs::exists(o.io.checkpoint)) throw IoError("checkpoint not found: '" + o.io.checkpoint + "'");
    auto ck = load_checkpoint(o.io.checkpoint);
    const auto samples = load(o.io.manifest, &manifest);
    if (!manifest.has_metadata()) throw UsageError("no metadata: manifest '" + o.io.manifest + "' has no metadata paths");
    std::vector<Sample> with_meta;
    for (const auto& s : samples) {
        if (s.metadata) with_meta.push_back(s);
    }
    require_modalities(ck.config, with_meta, o.io.manifest);
    const auto scores = predict_all(ck.params, ck.config, with_meta);
    const auto report = insight::factor_analysis(with_meta, scores, {o.permutations, o.seed, 10});
    prepare_out(o.io.out);
    write_run_json(o.io.out, "analyze", {{"model", ck.config.to_json()},
                                         {"checkpoint", o.io.checkpoint},
                                         {"manifest", o.io.manifest},
                                         {"permutations", o.permutations},
                                         {"seed", o.seed}});
    const fs::path dir(o.io.out);
    write_text(dir / "factors.csv", insight::render(report, insight::Format::csv));
    write_text(dir / "factors.json", insight::render(report, insight::Format::json));
    write_text(dir / "factors.md", insight::render(report, insight::Format::markdown));
    json factors = json::array();
    for (const auto& f : report.factors) {
        factors.push_back({{"factor", f.factor},
                           {"status", std::string(insight::to_string(f.status))},
                           {"p_value", f.p_value ? json(*f.p_value) : json(nullptr)}});
    }
    return {{"n", report.n_samples}, {"factors", factors}};
}

json run_rank(const EvalOptions& o) {
    data::Manifest manifest;
    if (!fs::exists(o.checkpoint)) throw IoError("checkpoint not found: '" + o.checkpoint + "'");
    auto ck = load_checkpoint(o.checkpoint);
    const auto samples = load(o.manifest, &manifest);
    if (!manifest.has_candidates()) {
        throw UsageError("manifest '" + o.manifest + "' has no candidates field; nothing to rerank");
    }
    require_modalities(ck.config, samples, o.manifest);
    const auto report = insight::rerank(samples, ck.params, ck.config);
    prepare_out(o.out);
    write_run_json(o.out, "rank", {{"model", ck.config.to_json()}, {"checkpoint", o.checkpoint}, {"manifest", o.manifest}});
    const fs::path dir(o.out);
    write_text(dir / "rerank.csv", insight::render(report, insight::Format::csv));
    write_text(dir / "rerank.json", insight::render(report, insight::Format::json));
    write_text(dir / "rerank.md", insight::render(report, insight::Format::markdown));
    json cats = json::array();
    for (const auto& c : report.categories) {
        cats.push_back({{"category", c.category},
                        {"n", c.n},
                        {"improvement_pct", c.improvement_pct ? json(*c.improvement_pct) : json(nullptr)}});
    }
    return {{"items", report.items.size()}, {"categories", cats}};
}

}  // namespace

int main(int argc, char** argv) {
    kernels::apply_thread_limit_from_env();

    CLI::App app{"memfuse: multimodal memorability predictor"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "write a planted synthetic dataset");
    gen_cmd->add_option("--n", gen.n, "training samples")->capture_default_str();
    gen_cmd->add_option("--n-val", gen.n_val, "validation samples (default n/8)");
    gen_cmd->add_option("--n-test", gen.n_test, "test samples (default n/8)");
    gen_cmd->add_option("--dims", gen.dims, "embedding widths v,a,t")->capture_default_str();
    gen_cmd->add_option("--noise", gen.noise, "noise level sigma")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
    gen_cmd->add_option("--min-len", gen.min_len, "shortest sequence")->capture_default_str();
    gen_cmd->add_option("--max-len", gen.max_len, "longest sequence")->capture_default_str();
    gen_cmd->add_option("--rerank-items", gen.rerank_items, "items in rerank.jsonl")->capture_default_str();
    gen_cmd->add_option("--candidates", gen.candidates, "candidates per rerank item")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "output directory")->required();

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "train a model and save the best checkpoint");
    train_cmd->add_option("--config", tr.config, "JSON config {\"model\": {...}, \"train\": {...}}");
    train_cmd->add_option("--train-manifest", tr.train_manifest, "training manifest")->required();
    train_cmd->add_option("--val-manifest", tr.val_manifest, "validation manifest")->required();
    train_cmd->add_option("--out", tr.out, "output directory")->required();
    add_model_flags(train_cmd, tr.model);
    add_train_flags(train_cmd, tr.train);

    EvalOptions ev{"", "", "memfuse-evaluate"};
    auto* eval_cmd = app.add_subcommand("evaluate", "Spearman rho and MSE of a checkpoint on a manifest");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--manifest", ev.manifest, "labeled manifest")->required();
    eval_cmd->add_option("--out", ev.out, "output directory")->capture_default_str();

    EvalOptions pr;
    auto* pred_cmd = app.add_subcommand("predict", "write per-id scores");
    pred_cmd->add_option("--checkpoint", pr.checkpoint, "checkpoint file")->required();
    pred_cmd->add_option("--manifest", pr.manifest, "manifest")->required();
    pred_cmd->add_option("--out", pr.out, "output directory")->required();

    AblateOptions ab;
    auto* ablate_cmd = app.add_subcommand("ablate", "modality and attention ablations");
    ablate_cmd->add_option("--config", ab.config, "JSON config {\"model\": {...}, \"train\": {...}}");
    ablate_cmd->add_option("--manifests", ab.manifests, "TRAIN,VAL manifests")->required()->delimiter(',');
    ablate_cmd->add_option("--variants", ab.variants, "restrict to these variant names")->delimiter(',');
    ablate_cmd->add_option("--out", ab.out, "output directory")->required();
    add_model_flags(ablate_cmd, ab.model);
    add_train_flags(ablate_cmd, ab.train);

    AnalyzeOptions an{{"", "", "memfuse-analyze"}};
    auto* analyze_cmd = app.add_subcommand("analyze", "content-factor statistics over predictions");
    analyze_cmd->add_option("--checkpoint", an.io.checkpoint, "checkpoint file")->required();
    analyze_cmd->add_option("--manifest", an.io.manifest, "manifest with metadata")->required();
    analyze_cmd->add_option("--out", an.io.out, "output directory")->capture_default_str();
    analyze_cmd->add_option("--permutations", an.permutations, "permutations per continuous factor")
        ->capture_default_str();
    analyze_cmd->add_option("--seed", an.seed, "permutation seed")->capture_default_str();

    EvalOptions rk{"", "", "memfuse-rank"};
    auto* rank_cmd = app.add_subcommand("rank", "rerank candidate versions with the predictor");
    rank_cmd->add_option("--checkpoint", rk.checkpoint, "checkpoint file")->required();
    rank_cmd->add_option("--manifest", rk.manifest, "manifest with candidates")->required();
    rank_cmd->add_option("--out", rk.out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "memfuse: " << e.what() << "\n";
        return kUsage;
    }

    try {
        json summary;
        if (*gen_cmd) summary = run_gen(gen);
        else if (*train_cmd) summary = run_train(tr);
        else if (*eval_cmd) summary = run_evaluate(ev);
        else if (*pred_cmd) summary = run_predict(pr);
        else if (*ablate_cmd) summary = run_ablate(ab);
        else if (*analyze_cmd) summary = run_analyze(an);
        else if (*rank_cmd) summary = run_rank(rk);
        std::cout << summary.dump() << std::endl;
        return kOk;
    } catch (const DivergenceError& e) {
        log(std::string("training diverged: ") + e.what());
        return kRuntime;
    } catch (const UsageError& e) {
        log(e.what());
        return kUsage;
    } catch (const ValidationError& e) {
        log(e.what());
        return kUsage;
    } catch (const IoError& e) {
        log(e.what());
        return kUsage;
    } catch (const FormatError& e) {
        log(e.what());
        return kUsage;
    } catch (const ConfigMismatchError& e) {
        log(e.what());
        return kUsage;
    } catch (const RangeError& e) {
        log(e.what());
        return kUsage;
    } catch (const DimensionError& e) {
        log(e.what());
        return kUsage;
    } catch (const std::exception& e) {
        log(e.what());
        return kRuntime;
    }
}
