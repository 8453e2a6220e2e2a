#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "memfuse/data.hpp"
#include "memfuse/errors.hpp"

namespace memfuse::data {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "validation" || s == "val") return Split::validation;
    if (s == "test") return Split::test;
    throw RangeError("unknown split '" + std::string(s) + "'");
}

bool Manifest::has_metadata() const {
    return std::any_of(entries.begin(), entries.end(), [](const auto& e) { return e.metadata.has_value(); });
}

bool Manifest::has_candidates() const {
    return std::any_of(entries.begin(), entries.end(), [](const auto& e) { return e.candidates.has_value(); });
}

Manifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    Manifest m;
    m.base_dir = path.parent_path();
    bool header_seen = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        ordered_json rec;
        try {
            rec = ordered_json::parse(line);
        } catch (const ordered_json::parse_error& e) {
            throw FormatError(where + ": malformed JSON: " + e.what());
        }
        try {
            ManifestEntry e;
            e.id = rec.at("id").get<std::string>();
            const std::string dataset = rec.value("dataset", std::string{});
            const Split split = parse_split(rec.value("split", std::string("train")));
            if (!header_seen) {
                m.dataset = dataset;
                m.split = split;
                header_seen = true;
            } else if (dataset != m.dataset || split != m.split) {
                throw FormatError(where + ": dataset/split differ from earlier records");
            }
            if (rec.contains("label") && !rec.at("label").is_null()) e.label = rec.at("label").get<double>();
            if (rec.contains("embeddings")) {
                for (const auto& [k, v] : rec.at("embeddings").items()) e.embeddings[parse_modality(k)] = v.get<std::string>();
            }
            if (rec.contains("metadata") && !rec.at("metadata").is_null()) e.metadata = rec.at("metadata").get<std::string>();
            if (rec.contains("candidates")) e.candidates = rec.at("candidates").get<std::vector<std::string>>();
            m.entries.push_back(std::move(e));
        } catch (const ordered_json::exception& ex) {
            throw FormatError(where + ": " + ex.what());
        } catch (const RangeError& ex) {
            throw FormatError(where + ": " + ex.what());
        }
    }
    return m;
}

std::string manifest_line(const Manifest& manifest, const ManifestEntry& e) {
    ordered_json rec;
    rec["id"] = e.id;
    rec["dataset"] = manifest.dataset;
    rec["split"] = std::string(to_string(manifest.split));
    if (e.label) rec["label"] = *e.label;
    ordered_json emb = ordered_json::object();
    for (const auto& [mod, p] : e.embeddings) emb[std::string(to_string(mod))] = p;
    rec["embeddings"] = emb;
    if (e.metadata) rec["metadata"] = *e.metadata;
    if (e.candidates) rec["candidates"] = *e.candidates;
    return rec.dump();
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
    for (const auto& e : manifest.entries) out << manifest_line(manifest, e) << '\n';
}

std::vector<Sample> load_dataset(const Manifest& manifest) {
    std::set<std::string> ids;
    for (const auto& e : manifest.entries) {
        if (!ids.insert(e.id).second) throw ValidationError({"duplicate sample id '" + e.id + "' in manifest"});
        if (e.label && !(*e.label >= 0.0 && *e.label <= 1.0)) {
            std::ostringstream os;
            os << "sample '" << e.id << "': label " << *e.label << " outside [0, 1]";
            throw RangeError(os.str());
        }
    }
    std::vector<Sample> out(manifest.entries.size());
    auto resolve = [&](const std::string& rel) {
        fs::path p(rel);
        return p.is_absolute() ? p : manifest.base_dir / p;
    };
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        Sample& s = out[i];
        s.id = e.id;
        s.label = e.label;
        if (e.candidates) s.candidates = *e.candidates;
        for (const auto& [mod, rel] : e.embeddings) {
            const fs::path p = resolve(rel);
            if (!fs::exists(p)) throw IoError("sample '" + e.id + "': missing embedding file '" + p.string() + "'");
            EmbeddingSequence seq = read_embedding(p);
            if (seq.modality != mod) {
                throw FormatError("sample '" + e.id + "': file '" + p.string() + "' holds " +
                                  std::string(to_string(seq.modality)) + ", manifest says " +
                                  std::string(to_string(mod)));
            }
            s.sequences.emplace(mod, std::move(seq));
        }
        if (e.metadata) {
            const fs::path p = resolve(*e.metadata);
            std::ifstream in(p);
            if (!in) throw IoError("sample '" + e.id + "': missing metadata file '" + p.string() + "'");
            std::stringstream buf;
            buf << in.rdbuf();
            s.metadata = parse_metadata(buf.str());
        }
    }
    return out;
}

void check_disjoint(std::span<const Sample> a, std::span<const Sample> b) {
    std::set<std::string> ids;
    for (const auto& s : a) ids.insert(s.id);
    std::vector<std::string> overlap;
    for (const auto& s : b) {
        if (ids.count(s.id)) overlap.push_back("id '" + s.id + "' appears in both training and validation sets");
    }
    if (!overlap.empty()) throw ValidationError(std::move(overlap));
}

PaddedBatch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices) {
    PaddedBatch batch;
    std::set<Modality> mods;
    for (auto i : indices) {
        batch.ids.push_back(samples[i].id);
        batch.labels.push_back(samples[i].label);
        for (const auto& [m, _] : samples[i].sequences) mods.insert(m);
    }
    const std::size_t B = indices.size();
    for (auto m : mods) {
        std::size_t max_len = 0, width = 0;
        for (auto i : indices) {
            auto it = samples[i].sequences.find(m);
            if (it == samples[i].sequences.end()) {
                throw Error("sample '" + samples[i].id + "' lacks " + std::string(to_string(m)) +
                            " while other samples in the batch have it");
            }
            max_len = std::max(max_len, it->second.length());
            if (width == 0) width = it->second.width();
            if (it->second.width() != width) {
                throw DimensionError("sample '" + samples[i].id + "' has " + std::string(to_string(m)) +
                                     " width " + std::to_string(it->second.width()) + ", batch uses " +
                                     std::to_string(width));
            }
        }
        PaddedModality pm{Tensor({B, max_len, width}), Mask(B * max_len, 0), {}};
        for (std::size_t b = 0; b < B; ++b) {
            const auto& rows = samples[indices[b]].sequences.at(m).rows;
            const std::size_t len = rows.dim(0);
            pm.lengths.push_back(len);
            std::copy(rows.data().begin(), rows.data().end(), pm.rows.data().begin() + b * max_len * width);
            std::fill_n(pm.mask.begin() + b * max_len, len, std::uint8_t{1});
        }
        batch.modalities.emplace(m, std::move(pm));
    }
    return batch;
}

std::vector<std::size_t> order(std::size_t n, std::optional<std::uint64_t> shuffle_seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (shuffle_seed) {
        std::mt19937_64 rng(*shuffle_seed);
        std::shuffle(idx.begin(), idx.end(), rng);
    }
    return idx;
}

}  // namespace memfuse::data
