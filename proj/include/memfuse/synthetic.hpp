#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "memfuse/sample.hpp"

namespace memfuse::data {

/// Label = sigmoid(video·z_v + audio·z_a + text·z_t + interaction·z_v·z_t).
struct LabelCoefficients {
    double video = 0.9;
    double audio = 0.75;
    double text = 1.0;
    double interaction = 0.8;
};

/// Row layout for every modality: column 0 is the planted direction, column 1
/// marks salient rows, the rest is N(0, σ²) noise. Salient rows carry z
/// exactly; distractor rows carry z + distractor_scale·σ·N(0, 1).
struct SyntheticSpec {
    std::size_t n_train = 2000;
    std::size_t n_validation = 250;
    std::size_t n_test = 250;
    std::size_t n_rerank = 40;
    std::size_t candidates_per_item = 3;
    std::map<Modality, std::size_t> dims{{Modality::video, 16}, {Modality::audio, 16}, {Modality::text, 16}};
    std::size_t min_length = 4;
    std::size_t max_length = 10;
    double noise = 0.5;
    double distractor_scale = 3.0;
    double salience_marker = 1.5;
    LabelCoefficients coefficients;
    std::uint64_t seed = 7;

    std::vector<std::string> violations() const;
    void validate() const;
    nlohmann::json to_json() const;
};

struct Latent {
    double video = 0.0;
    double audio = 0.0;
    double text = 0.0;
};

struct SyntheticDataset {
    std::vector<Sample> train;
    std::vector<Sample> validation;
    std::vector<Sample> test;
    /// Originals (with `candidates`) followed by their candidate variants.
    std::vector<Sample> rerank;
    std::map<std::string, Latent> latents;
    std::map<std::string, std::string> metadata_documents;
};

double planted_label(const Latent& z, const LabelCoefficients& c);

/// Deterministic in `spec`; embedding values are float32-representable so the
/// in-memory samples equal what a MEMB round trip returns.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Writes emb/*.memb, meta/*.json and train/val/test/rerank .jsonl manifests
/// under `dir`. Returns a JSON summary (counts and label ranges per split).
nlohmann::json write_synthetic(const SyntheticDataset& dataset, const SyntheticSpec& spec,
                               const std::filesystem::path& dir);

nlohmann::json summarize(const SyntheticDataset& dataset, const SyntheticSpec& spec);

}  // namespace memfuse::data
