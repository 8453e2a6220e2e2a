#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memfuse/sample.hpp"
#include "memfuse/tensor.hpp"

namespace memfuse::data {

// ---- MEMB embedding files ---------------------------------------------------
//
//   "MEMB"        4 bytes magic
//   u16 version   = 1
//   u8 modality   0 video, 1 audio, 2 text
//   u8 dtype      0 = float32 little-endian
//   u32 L, u32 d  L >= 1, d >= 1
//   L·d float32   row-major
//   u32 CRC-32    over every preceding byte
//
// Values are widened to float64 on load. Writing narrows to float32, so a
// round trip is bitwise exact for float32-representable data.

inline constexpr std::uint16_t kEmbeddingVersion = 1;

std::vector<std::uint8_t> encode_embedding(const EmbeddingSequence& seq);
EmbeddingSequence decode_embedding(std::span<const std::uint8_t> bytes);
void write_embedding(const EmbeddingSequence& seq, const std::filesystem::path& path);
EmbeddingSequence read_embedding(const std::filesystem::path& path);

// ---- metadata ---------------------------------------------------------------

/// Parses a video-analysis document ("General Video Information" +
/// "Scene Analysis"). Missing or empty fields become unknown/0; only
/// malformed JSON throws (FormatError).
MetaRecord parse_metadata(std::string_view json_text);

/// Lowercased, trimmed, comma-split, de-duplicated terms.
std::vector<std::string> normalize_terms(std::string_view text);

Pace parse_pace(std::string_view text);
Orientation parse_orientation(std::string_view text);

// ---- manifests --------------------------------------------------------------

enum class Split { train, validation, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ManifestEntry {
    std::string id;
    std::map<Modality, std::string> embeddings;  // paths relative to the manifest directory
    std::optional<double> label;
    std::optional<std::string> metadata;  // path relative to the manifest directory
    std::optional<std::vector<std::string>> candidates;
};

/// Line-delimited JSON, one record per line:
/// {"id":..., "dataset":..., "split":..., "label":..., "embeddings":{"text":"...",...},
///  "metadata":"...", "candidates":[...]}
/// dataset/split must agree across lines.
struct Manifest {
    std::string dataset;
    Split split = Split::train;
    std::vector<ManifestEntry> entries;
    std::filesystem::path base_dir;

    bool has_metadata() const;
    bool has_candidates() const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
std::string manifest_line(const Manifest& manifest, const ManifestEntry& entry);

/// Loads every entry. Throws IoError for missing files, ValidationError for
/// duplicate ids, RangeError (naming the sample) for labels outside [0,1].
std::vector<Sample> load_dataset(const Manifest& manifest);

/// Throws ValidationError when the two sets share an id.
void check_disjoint(std::span<const Sample> a, std::span<const Sample> b);

// ---- batching ---------------------------------------------------------------

/// Padded view of several samples for one modality.
struct PaddedModality {
    Tensor rows;  // [B × Lmax × d], padding rows are zero
    Mask mask;    // [B × Lmax]
    std::vector<std::size_t> lengths;
};

struct PaddedBatch {
    std::vector<std::string> ids;
    std::map<Modality, PaddedModality> modalities;
    std::vector<std::optional<double>> labels;

    std::size_t size() const { return ids.size(); }
};

/// Pads every modality to the longest sequence among `indices`.
PaddedBatch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices);

/// 0..n-1, or a seeded permutation of it.
std::vector<std::size_t> order(std::size_t n, std::optional<std::uint64_t> shuffle_seed);

}  // namespace memfuse::data
