#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memfuse/tensor.hpp"

namespace memfuse {

/// Input channel. The numeric value is the on-disk code in MEMB files and the
/// canonical concatenation order of the fusion vector.
enum class Modality : std::uint8_t { video = 0, audio = 1, text = 2 };

inline constexpr std::array<Modality, 3> kAllModalities = {Modality::video, Modality::audio, Modality::text};

std::string_view to_string(Modality m);
/// Accepts "video"/"audio"/"text" (also "v"/"a"/"t"). Throws RangeError.
Modality parse_modality(std::string_view s);

/// One modality's variable-length sequence of fixed-width vectors.
struct EmbeddingSequence {
    Modality modality = Modality::video;
    Tensor rows;  // [L×d], L >= 1

    std::size_t length() const { return rows.dim(0); }
    std::size_t width() const { return rows.dim(1); }
};

enum class Orientation { landscape, portrait, unknown };
enum class Pace { slow, medium, fast, unknown };

std::string_view to_string(Orientation o);
std::string_view to_string(Pace p);

/// Content descriptors extracted from a video-analysis JSON document.
struct MetaRecord {
    std::string brand;
    Orientation orientation = Orientation::unknown;
    Pace pace = Pace::unknown;
    std::string sentiment;
    std::int64_t scene_count = 0;
    std::int64_t distinct_emotion_count = 0;
    std::int64_t color_theme_count = 0;
    double duration_seconds = 0.0;  // 0 = not reported

    friend bool operator==(const MetaRecord&, const MetaRecord&) = default;
};

struct Sample {
    std::string id;
    std::map<Modality, EmbeddingSequence> sequences;
    std::optional<double> label;
    std::optional<MetaRecord> metadata;
    std::vector<std::string> candidates;  // ids of alternative versions, for reranking

    bool has(Modality m) const { return sequences.count(m) != 0; }
};

}  // namespace memfuse
