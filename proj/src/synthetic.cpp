#include "memfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <array>
#include <random>

#include "memfuse/data.hpp"
#include "memfuse/errors.hpp"
#include "memfuse/layers.hpp"

namespace memfuse::data {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::array<const char*, 10> kEmotions = {"happy",    "excited", "calm",     "tense",     "nostalgic",
                                                   "humorous", "hopeful", "romantic", "surprised", "inspired"};
constexpr std::array<const char*, 8> kColors = {"red", "blue", "green", "yellow", "black", "white", "orange", "purple"};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Independent stream per (seed, split, index) so samples do not depend on
// generation order.
Rng stream(std::uint64_t seed, std::uint64_t split, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

EmbeddingSequence make_sequence(Modality m, double z, std::size_t width, const SyntheticSpec& spec, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t len = uniform_index(rng, spec.min_length, spec.max_length);
    const std::size_t n_salient = uniform_index(rng, 1, std::max<std::size_t>(1, len / 3));
    std::vector<std::size_t> order(len);
    for (std::size_t i = 0; i < len; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> salient(len, false);
    for (std::size_t i = 0; i < n_salient; ++i) salient[order[i]] = true;

    EmbeddingSequence seq{m, Tensor({len, width})};
    for (std::size_t r = 0; r < len; ++r) {
        double* row = seq.rows.data().data() + r * width;
        row[0] = salient[r] ? z : z + spec.distractor_scale * spec.noise * normal(rng);
        row[1] = salient[r] ? spec.salience_marker : 0.0;
        for (std::size_t c = 2; c < width; ++c) row[c] = spec.noise * normal(rng);
        for (std::size_t c = 0; c < width; ++c) row[c] = static_cast<double>(static_cast<float>(row[c]));
    }
    return seq;
}

std::string join_terms(const std::vector<std::string>& terms) {
    std::string out;
    for (const auto& t : terms) {
        if (!out.empty()) out += ", ";
        out += t;
    }
    return out;
}

// Appendix-style analysis document whose factors relate to the label:
// pace and scene/emotion counts follow it, orientation/colors/duration do not.
std::string make_metadata(double label, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double logit = std::log(label / (1.0 - label));

    const double pace_score = logit + normal(rng);
    const char* pace = pace_score > 0.6 ? "Fast" : pace_score < -0.6 ? "Slow" : "Medium";
    const char* orientation = unit(rng) < 0.5 ? "Landscape" : "Portrait";
    const long scenes = std::clamp(std::lround(4.0 + 1.5 * logit + 1.5 * normal(rng)), 1L, 12L);
    const long emotions = std::clamp(std::lround(3.0 + 1.0 * logit + normal(rng)), 1L, static_cast<long>(kEmotions.size()));
    const long colors = static_cast<long>(uniform_index(rng, 1, kColors.size()));
    const double duration = std::round(15.0 + 45.0 * unit(rng));

    std::vector<std::string> emo(kEmotions.begin(), kEmotions.end());
    std::shuffle(emo.begin(), emo.end(), rng);
    emo.resize(static_cast<std::size_t>(emotions));
    std::vector<std::string> col(kColors.begin(), kColors.end());
    std::shuffle(col.begin(), col.end(), rng);
    col.resize(static_cast<std::size_t>(colors));

    ordered_json info;
    info["Brand"] = "Brand " + std::to_string(uniform_index(rng, 1, 12));
    info["Orientation"] = orientation;
    info["Pace"] = pace;
    info["Sentiment"] = label > 0.5 ? "Positive" : "Neutral";
    info["Duration"] = duration;
    ordered_json scene_list = ordered_json::array();
    for (long s = 0; s < scenes; ++s) {
        std::vector<std::string> e, c;
        for (std::size_t i = static_cast<std::size_t>(s); i < emo.size(); i += static_cast<std::size_t>(scenes)) e.push_back(emo[i]);
        for (std::size_t i = static_cast<std::size_t>(s); i < col.size(); i += static_cast<std::size_t>(scenes)) c.push_back(col[i]);
        ordered_json scene;
        scene["Scene Number"] = s + 1;
        scene["Emotions or Mood"] = join_terms(e);
        scene["Colors"] = join_terms(c);
        scene_list.push_back(std::move(scene));
    }
    ordered_json doc;
    doc["General Video Information"] = std::move(info);
    doc["Scene Analysis"] = std::move(scene_list);
    return doc.dump(2);
}

Sample make_sample(const std::string& id, const Latent& z, const SyntheticSpec& spec, Rng& rng) {
    Sample s;
    s.id = id;
    s.label = planted_label(z, spec.coefficients);
    for (const auto& [m, width] : spec.dims) {
        const double zm = m == Modality::video ? z.video : m == Modality::audio ? z.audio : z.text;
        s.sequences.emplace(m, make_sequence(m, zm, width, spec, rng));
    }
    return s;
}

std::string padded(std::size_t i) {
    std::string n = std::to_string(i);
    return std::string(n.size() < 5 ? 5 - n.size() : 0, '0') + n;
}

json label_summary(const std::vector<Sample>& samples) {
    json j;
    j["n"] = samples.size();
    if (samples.empty()) return j;
    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (const auto& s : samples) {
        lo = std::min(lo, *s.label);
        hi = std::max(hi, *s.label);
        sum += *s.label;
    }
    j["label_min"] = lo;
    j["label_max"] = hi;
    j["label_mean"] = sum / static_cast<double>(samples.size());
    return j;
}

}  // namespace

std::vector<std::string> SyntheticSpec::violations() const {
    std::vector<std::string> v;
    if (dims.empty()) v.push_back("at least one modality dimension is required");
    for (const auto& [m, d] : dims) {
        if (d < 4) v.push_back("dims[" + std::string(to_string(m)) + "] = " + std::to_string(d) + " must be >= 4");
    }
    if (!(noise >= 0.0) || !std::isfinite(noise)) v.push_back("noise must be finite and >= 0");
    if (min_length < 1) v.push_back("min_length must be >= 1");
    if (max_length < min_length) v.push_back("max_length must be >= min_length");
    if (n_train == 0) v.push_back("n_train must be >= 1");
    if (n_rerank > 0 && candidates_per_item == 0) v.push_back("candidates_per_item must be >= 1");
    return v;
}

void SyntheticSpec::validate() const {
    auto v = violations();
    if (!v.empty()) throw ValidationError(std::move(v));
}

json SyntheticSpec::to_json() const {
    json j;
    j["n_train"] = n_train;
    j["n_validation"] = n_validation;
    j["n_test"] = n_test;
    j["n_rerank"] = n_rerank;
    j["candidates_per_item"] = candidates_per_item;
    json d = json::object();
    for (const auto& [m, w] : dims) d[std::string(to_string(m))] = w;
    j["dims"] = d;
    j["min_length"] = min_length;
    j["max_length"] = max_length;
    j["noise"] = noise;
    j["distractor_scale"] = distractor_scale;
    j["salience_marker"] = salience_marker;
    j["coefficients"] = {{"video", coefficients.video},
                         {"audio", coefficients.audio},
                         {"text", coefficients.text},
                         {"interaction", coefficients.interaction}};
    j["seed"] = seed;
    return j;
}

double planted_label(const Latent& z, const LabelCoefficients& c) {
    return logistic(c.video * z.video + c.audio * z.audio + c.text * z.text + c.interaction * z.video * z.text);
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticDataset ds;
    auto fill = [&](std::vector<Sample>& out, std::size_t n, std::uint64_t split, const std::string& prefix) {
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng = stream(spec.seed, split, i);
            std::normal_distribution<double> normal(0.0, 1.0);
            Latent z;
            z.video = normal(rng);
            z.audio = normal(rng);
            z.text = normal(rng);
            const std::string id = prefix + padded(i);
            Sample s = make_sample(id, z, spec, rng);
            const std::string doc = make_metadata(*s.label, rng);
            s.metadata = parse_metadata(doc);
            ds.metadata_documents[id] = doc;
            ds.latents[id] = z;
            out.push_back(std::move(s));
        }
    };
    fill(ds.train, spec.n_train, 0, "train-");
    fill(ds.validation, spec.n_validation, 1, "val-");
    fill(ds.test, spec.n_test, 2, "test-");

    std::vector<Sample> variants;
    for (std::size_t i = 0; i < spec.n_rerank; ++i) {
        Rng rng = stream(spec.seed, 3, i);
        std::normal_distribution<double> normal(0.0, 1.0);
        Latent z{normal(rng), normal(rng), normal(rng)};
        const std::string id = "rr-" + padded(i);
        Sample original = make_sample(id, z, spec, rng);
        ds.latents[id] = z;
        for (std::size_t c = 1; c <= spec.candidates_per_item; ++c) {
            // Rewrites mostly change the copy, so the text latent moves most.
            Latent zc{z.video + 0.2 * normal(rng), z.audio + 0.2 * normal(rng), z.text + 0.8 * normal(rng)};
            const std::string cid = id + "-c" + std::to_string(c);
            variants.push_back(make_sample(cid, zc, spec, rng));
            ds.latents[cid] = zc;
            original.candidates.push_back(cid);
        }
        ds.rerank.push_back(std::move(original));
    }
    for (auto& v : variants) ds.rerank.push_back(std::move(v));
    return ds;
}

json summarize(const SyntheticDataset& dataset, const SyntheticSpec& spec) {
    json j;
    j["seed"] = spec.seed;
    j["noise"] = spec.noise;
    json d = json::object();
    for (const auto& [m, w] : spec.dims) d[std::string(to_string(m))] = w;
    j["dims"] = d;
    j["train"] = label_summary(dataset.train);
    j["validation"] = label_summary(dataset.validation);
    j["test"] = label_summary(dataset.test);
    j["rerank_items"] = spec.n_rerank;
    j["rerank_candidates"] = spec.n_rerank * spec.candidates_per_item;
    return j;
}

json write_synthetic(const SyntheticDataset& dataset, const SyntheticSpec& spec, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "emb");
    fs::create_directories(dir / "meta");

    auto write_split = [&](const std::vector<Sample>& samples, Split split, const std::string& dataset_name,
                           const std::string& file) {
        Manifest m;
        m.dataset = dataset_name;
        m.split = split;
        for (const auto& s : samples) {
            ManifestEntry e;
            e.id = s.id;
            e.label = s.label;
            for (const auto& [mod, seq] : s.sequences) {
                const std::string rel = "emb/" + s.id + "." + std::string(to_string(mod)) + ".memb";
                write_embedding(seq, dir / rel);
                e.embeddings[mod] = rel;
            }
            auto doc = dataset.metadata_documents.find(s.id);
            if (doc != dataset.metadata_documents.end()) {
                const std::string rel = "meta/" + s.id + ".json";
                std::ofstream out(dir / rel, std::ios::trunc);
                if (!out) throw IoError("cannot write '" + (dir / rel).string() + "'");
                out << doc->second << '\n';
                e.metadata = rel;
            }
            if (!s.candidates.empty()) e.candidates = s.candidates;
            m.entries.push_back(std::move(e));
        }
        write_manifest(m, dir / file);
    };
    write_split(dataset.train, Split::train, "synthetic", "train.jsonl");
    write_split(dataset.validation, Split::validation, "synthetic", "val.jsonl");
    write_split(dataset.test, Split::test, "synthetic", "test.jsonl");
    if (!dataset.rerank.empty()) write_split(dataset.rerank, Split::test, "synthetic-rerank", "rerank.jsonl");
    return summarize(dataset, spec);
}

}  // namespace memfuse::data
