#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "json.hpp"
#include "memfuse/data.hpp"
#include "memfuse/errors.hpp"

namespace memfuse {

std::string_view to_string(Orientation o) {
    switch (o) {
        case Orientation::landscape: return "landscape";
        case Orientation::portrait: return "portrait";
        case Orientation::unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(Pace p) {
    switch (p) {
        case Pace::slow: return "slow";
        case Pace::medium: return "medium";
        case Pace::fast: return "fast";
        case Pace::unknown: return "unknown";
    }
    return "unknown";
}

}  // namespace memfuse

namespace memfuse::data {

namespace {

using nlohmann::json;

std::string lower_trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out(s.substr(b, e - b));
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool contains_any(const std::string& s, std::initializer_list<std::string_view> words) {
    return std::any_of(words.begin(), words.end(), [&](std::string_view w) { return s.find(w) != std::string::npos; });
}

std::string string_field(const json& obj, const char* key) {
    if (!obj.is_object()) return {};
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return {};
    return it->get<std::string>();
}

// A field that may be a string ("red, blue") or an array of strings.
std::vector<std::string> term_field(const json& obj, const char* key) {
    std::vector<std::string> out;
    if (!obj.is_object()) return out;
    auto it = obj.find(key);
    if (it == obj.end()) return out;
    auto add = [&](std::string_view text) {
        for (auto& t : normalize_terms(text)) out.push_back(std::move(t));
    };
    if (it->is_string()) {
        add(it->get<std::string>());
    } else if (it->is_array()) {
        for (const auto& e : *it) {
            if (e.is_string()) add(e.get<std::string>());
        }
    }
    return out;
}

// Document-generating models often wrap JSON in a ```json fence.
std::string_view strip_code_fence(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos || text.substr(first, 3) != "```") return text;
    const auto body = text.find('\n', first);
    const auto close = text.rfind("```");
    if (body == std::string_view::npos || close <= body) return text;
    return text.substr(body + 1, close - body - 1);
}

double duration_field(const json& info) {
    if (!info.is_object()) return 0.0;
    auto it = info.find("Duration");
    if (it == info.end()) return 0.0;
    double v = 0.0;
    if (it->is_number()) {
        v = it->get<double>();
    } else if (it->is_string()) {
        const std::string s = it->get<std::string>();
        v = std::strtod(s.c_str(), nullptr);
    }
    return std::isfinite(v) && v > 0.0 ? v : 0.0;
}

}  // namespace

std::vector<std::string> normalize_terms(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto end = comma == std::string_view::npos ? text.size() : comma;
        std::string term = lower_trim(text.substr(start, end - start));
        if (!term.empty() && std::find(out.begin(), out.end(), term) == out.end()) out.push_back(std::move(term));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

Pace parse_pace(std::string_view text) {
    const std::string s = lower_trim(text);
    if (s.empty()) return Pace::unknown;
    if (contains_any(s, {"medium", "moderate", "mid"})) return Pace::medium;
    const bool fast = contains_any(s, {"fast", "quick", "rapid", "high", "energetic"});
    const bool slow = contains_any(s, {"slow", "low", "calm", "leisurely"});
    if (fast && !slow) return Pace::fast;
    if (slow && !fast) return Pace::slow;
    return Pace::unknown;
}

Orientation parse_orientation(std::string_view text) {
    const std::string s = lower_trim(text);
    if (contains_any(s, {"landscape", "horizontal", "16:9"})) return Orientation::landscape;
    if (contains_any(s, {"portrait", "vertical", "9:16"})) return Orientation::portrait;
    return Orientation::unknown;
}

MetaRecord parse_metadata(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(strip_code_fence(json_text));
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("metadata: malformed JSON: ") + e.what());
    }
    MetaRecord rec;
    if (!doc.is_object()) return rec;

    const json info = doc.value("General Video Information", json::object());
    rec.brand = string_field(info, "Brand");
    rec.orientation = parse_orientation(string_field(info, "Orientation"));
    rec.pace = parse_pace(string_field(info, "Pace"));
    rec.sentiment = lower_trim(string_field(info, "Sentiment"));
    rec.duration_seconds = duration_field(info);

    auto scenes = doc.find("Scene Analysis");
    if (scenes != doc.end() && scenes->is_array()) {
        rec.scene_count = static_cast<std::int64_t>(scenes->size());
        std::vector<std::string> emotions, colors;
        for (const auto& scene : *scenes) {
            for (auto& t : term_field(scene, "Emotions or Mood")) emotions.push_back(std::move(t));
            for (auto& t : term_field(scene, "Colors")) colors.push_back(std::move(t));
        }
        auto distinct = [](std::vector<std::string>& v) {
            std::sort(v.begin(), v.end());
            return static_cast<std::int64_t>(std::unique(v.begin(), v.end()) - v.begin());
        };
        rec.distinct_emotion_count = distinct(emotions);
        rec.color_theme_count = distinct(colors);
    }
    return rec;
}

}  // namespace memfuse::data
