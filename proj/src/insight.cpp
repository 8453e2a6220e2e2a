#include "memfuse/insight.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "memfuse/errors.hpp"
#include "memfuse/layers.hpp"
#include "memfuse/stats.hpp"

namespace memfuse::insight {

using nlohmann::json;
using nlohmann::ordered_json;

Format parse_format(std::string_view s) {
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    if (s == "markdown" || s == "md") return Format::markdown;
    throw RangeError("unknown report format '" + std::string(s) + "'");
}

std::string_view to_string(FactorStatus s) {
    switch (s) {
        case FactorStatus::ok: return "ok";
        case FactorStatus::degenerate: return "degenerate";
        case FactorStatus::skipped: return "skipped";
    }
    return "?";
}

namespace {

FactorStatus parse_status(std::string_view s) {
    if (s == "ok") return FactorStatus::ok;
    if (s == "degenerate") return FactorStatus::degenerate;
    if (s == "skipped") return FactorStatus::skipped;
    throw FormatError("unknown factor status '" + std::string(s) + "'");
}

GroupSummary summarize_group(std::string name, const std::vector<double>& values, bool included = true) {
    GroupSummary g{std::move(name), values.size(), std::nullopt, std::nullopt, included};
    if (!values.empty()) g.mean = stats::mean(values);
    if (values.size() >= 2) g.sd = std::sqrt(stats::sample_variance(values));
    return g;
}

bool all_equal(const std::vector<std::vector<double>>& groups) {
    std::optional<double> first;
    for (const auto& g : groups) {
        for (double v : g) {
            if (!first) first = v;
            if (v != *first) return false;
        }
    }
    return true;
}

void sort_groups(std::vector<std::vector<double>>& groups) {
    for (auto& g : groups) std::sort(g.begin(), g.end());
}

void finish_anova(FactorResult& r, std::vector<std::vector<double>> groups) {
    sort_groups(groups);
    const auto a = stats::one_way_anova(groups);
    r.infinite = a.infinite;
    if (!a.infinite) r.statistic = a.f_statistic;
    r.df1 = a.df_between;
    r.df2 = a.df_within;
    r.p_value = a.p_value;
    if (all_equal(groups)) {
        r.status = FactorStatus::degenerate;
        r.notice = "scores are constant";
    }
}

FactorResult pace_factor(std::span<const Sample> samples, std::span<const double> scores) {
    FactorResult r;
    r.factor = "pace";
    r.test = "anova";
    std::vector<double> slow, medium, fast;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        switch (samples[i].metadata->pace) {
            case Pace::slow: slow.push_back(scores[i]); break;
            case Pace::medium: medium.push_back(scores[i]); break;
            case Pace::fast: fast.push_back(scores[i]); break;
            case Pace::unknown: ++r.n_unknown; break;
        }
    }
    for (auto* g : {&slow, &medium, &fast}) std::sort(g->begin(), g->end());
    r.groups = {summarize_group("slow", slow), summarize_group("medium", medium, false),
                summarize_group("fast", fast)};
    r.n_used = slow.size() + fast.size();
    if (slow.size() < 2 || fast.size() < 2) {
        r.status = FactorStatus::skipped;
        r.notice = "needs at least 2 slow and 2 fast samples";
        return r;
    }
    finish_anova(r, {slow, fast});
    return r;
}

FactorResult scene_factor(std::span<const Sample> samples, std::span<const double> scores) {
    FactorResult r;
    r.factor = "scene_count";
    r.test = "anova";
    std::vector<std::pair<std::int64_t, double>> known;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto c = samples[i].metadata->scene_count;
        if (c > 0) known.emplace_back(c, scores[i]);
        else ++r.n_unknown;
    }
    std::sort(known.begin(), known.end());
    const std::size_t n = known.size();
    if (n < 4 || known.front().first == known.back().first) {
        r.status = FactorStatus::skipped;
        r.notice = "scene counts are missing or all equal";
        r.n_used = 0;
        return r;
    }
    // Tercile cut points on the sorted counts; equal counts share a bin.
    const auto cut1 = known[(n + 2) / 3 - 1].first;
    const auto cut2 = known[(2 * n + 2) / 3 - 1].first;
    std::vector<std::vector<double>> bins(3);
    std::vector<std::int64_t> lo(3, INT64_MAX), hi(3, INT64_MIN);
    for (const auto& [c, s] : known) {
        const std::size_t b = c <= cut1 ? 0 : c <= cut2 ? 1 : 2;
        bins[b].push_back(s);
        lo[b] = std::min(lo[b], c);
        hi[b] = std::max(hi[b], c);
    }
    std::vector<std::vector<double>> used;
    for (std::size_t b = 0; b < 3; ++b) {
        if (bins[b].empty()) continue;
        std::sort(bins[b].begin(), bins[b].end());
        const std::string name = lo[b] == hi[b] ? std::to_string(lo[b]) : std::to_string(lo[b]) + "-" + std::to_string(hi[b]);
        const bool ok = bins[b].size() >= 2;
        r.groups.push_back(summarize_group(name, bins[b], ok));
        if (ok) {
            used.push_back(bins[b]);
            r.n_used += bins[b].size();
        }
    }
    if (used.size() < 2) {
        r.status = FactorStatus::skipped;
        r.notice = "fewer than 2 scene-count bins with at least 2 samples";
        return r;
    }
    finish_anova(r, used);
    return r;
}

FactorResult orientation_factor(std::span<const Sample> samples, std::span<const double> scores) {
    FactorResult r;
    r.factor = "orientation";
    r.test = "welch_t";
    std::vector<double> land, port;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        switch (samples[i].metadata->orientation) {
            case Orientation::landscape: land.push_back(scores[i]); break;
            case Orientation::portrait: port.push_back(scores[i]); break;
            case Orientation::unknown: ++r.n_unknown; break;
        }
    }
    std::sort(land.begin(), land.end());
    std::sort(port.begin(), port.end());
    r.groups = {summarize_group("landscape", land), summarize_group("portrait", port)};
    r.n_used = land.size() + port.size();
    if (land.size() < 2 || port.size() < 2) {
        r.status = FactorStatus::skipped;
        r.notice = "needs at least 2 landscape and 2 portrait samples";
        return r;
    }
    const auto t = stats::t_test(land, port, stats::TTestVariant::welch);
    r.infinite = t.infinite;
    if (!t.infinite) r.statistic = t.t;
    r.df1 = t.df;
    r.p_value = t.p_value;
    if (all_equal({land, port})) {
        r.status = FactorStatus::degenerate;
        r.notice = "scores are constant";
    }
    return r;
}

template <class Get>
FactorResult continuous_factor(const char* name, std::span<const Sample> samples, std::span<const double> scores,
                               const FactorOptions& opt, Get get) {
    FactorResult r;
    r.factor = name;
    r.test = "spearman_permutation";
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double x = get(*samples[i].metadata);
        if (x > 0.0) pairs.emplace_back(x, scores[i]);
        else ++r.n_unknown;
    }
    r.n_used = pairs.size();
    if (pairs.size() < std::max<std::size_t>(opt.min_continuous, 3)) {
        r.status = FactorStatus::skipped;
        r.notice = "needs at least " + std::to_string(std::max<std::size_t>(opt.min_continuous, 3)) + " known values";
        return r;
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<double> x, y;
    for (const auto& [a, b] : pairs) {
        x.push_back(a);
        y.push_back(b);
    }
    const auto rx = stats::rank(x).ranks;
    auto ry = stats::rank(y).ranks;
    double rho = 0.0;
    try {
        rho = stats::pearson(rx, ry);
    } catch (const UndefinedStatisticError&) {
        r.status = FactorStatus::degenerate;
        r.notice = "correlation undefined for a constant series";
        return r;
    }
    r.statistic = rho;
    std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32)};
    Rng rng(seq);
    std::size_t extreme = 0;
    for (std::size_t k = 0; k < opt.permutations; ++k) {
        std::shuffle(ry.begin(), ry.end(), rng);
        if (std::fabs(stats::pearson(rx, ry)) >= std::fabs(rho) - 1e-12) ++extreme;
    }
    r.p_value = static_cast<double>(extreme + 1) / static_cast<double>(opt.permutations + 1);
    return r;
}

}  // namespace

FactorReport factor_analysis(std::span<const Sample> samples, std::span<const double> scores,
                             const FactorOptions& options) {
    if (samples.size() != scores.size()) {
        throw DimensionError("factor analysis: " + std::to_string(samples.size()) + " samples but " +
                             std::to_string(scores.size()) + " scores");
    }
    for (const auto& s : samples) {
        if (!s.metadata) throw ValidationError({"sample '" + s.id + "' has no metadata"});
    }
    FactorReport rep;
    rep.n_samples = samples.size();
    rep.permutations = options.permutations;
    rep.seed = options.seed;
    rep.factors.push_back(pace_factor(samples, scores));
    rep.factors.push_back(scene_factor(samples, scores));
    rep.factors.push_back(orientation_factor(samples, scores));
    rep.factors.push_back(continuous_factor("emotion_count", samples, scores, options, [](const MetaRecord& m) {
        return static_cast<double>(m.distinct_emotion_count);
    }));
    rep.factors.push_back(continuous_factor("duration", samples, scores, options,
                                            [](const MetaRecord& m) { return m.duration_seconds; }));
    rep.factors.push_back(continuous_factor("color_theme_count", samples, scores, options, [](const MetaRecord& m) {
        return static_cast<double>(m.color_theme_count);
    }));
    return rep;
}

// ---- reranking --------------------------------------------------------------

std::string_view to_string(Category c) {
    switch (c) {
        case Category::low: return "low";
        case Category::medium: return "medium";
        case Category::high: return "high";
    }
    return "?";
}

namespace {

Category parse_category(std::string_view s) {
    if (s == "low") return Category::low;
    if (s == "medium") return Category::medium;
    if (s == "high") return Category::high;
    throw FormatError("unknown category '" + std::string(s) + "'");
}

CategorySummary summarize_category(std::string name, const std::vector<double>& orig, const std::vector<double>& best) {
    CategorySummary c;
    c.category = std::move(name);
    c.n = orig.size();
    if (orig.empty()) return c;
    c.original_mean = stats::mean(orig);
    c.best_mean = stats::mean(best);
    if (orig.size() >= 2) {
        c.original_sd = std::sqrt(stats::sample_variance(orig));
        c.best_sd = std::sqrt(stats::sample_variance(best));
    }
    if (*c.original_mean != 0.0) c.improvement_pct = 100.0 * (*c.best_mean - *c.original_mean) / *c.original_mean;
    return c;
}

}  // namespace

Category categorize(double score) {
    if (score <= 0.5) return Category::low;
    if (score < 0.7) return Category::medium;
    return Category::high;
}

RerankReport build_rerank_report(std::span<const ScoredItem> items) {
    RerankReport rep;
    std::map<Category, std::pair<std::vector<double>, std::vector<double>>> by_cat;
    std::vector<double> all_orig, all_best;
    for (const auto& it : items) {
        if (it.candidates.empty()) throw ValidationError({"item '" + it.id + "' has no candidates"});
        RerankItem r;
        r.id = it.id;
        r.original_score = it.original_score;
        r.category = categorize(it.original_score);
        r.chosen = it.candidates.front().first;
        r.best_score = it.candidates.front().second;
        for (const auto& [cid, score] : it.candidates) {
            if (score > r.best_score || (score == r.best_score && cid < r.chosen)) {
                r.best_score = score;
                r.chosen = cid;
            }
        }
        if (r.original_score != 0.0) r.improvement_pct = 100.0 * (r.best_score - r.original_score) / r.original_score;
        by_cat[r.category].first.push_back(r.original_score);
        by_cat[r.category].second.push_back(r.best_score);
        all_orig.push_back(r.original_score);
        all_best.push_back(r.best_score);
        rep.items.push_back(std::move(r));
    }
    for (auto c : {Category::low, Category::medium, Category::high}) {
        const auto& [o, b] = by_cat[c];
        rep.categories.push_back(summarize_category(std::string(to_string(c)), o, b));
    }
    rep.categories.push_back(summarize_category("overall", all_orig, all_best));
    return rep;
}

RerankReport rerank(std::span<const Sample> pool, const ModelParams& params, const ModelConfig& config) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < pool.size(); ++i) index.emplace(pool[i].id, i);
    std::vector<Sample> to_score;
    std::map<std::string, std::size_t> slot;
    auto want = [&](const std::string& id, const std::string& owner) {
        if (slot.count(id)) return;
        auto it = index.find(id);
        if (it == index.end()) throw ValidationError({"item '" + owner + "' lists unknown candidate '" + id + "'"});
        slot[id] = to_score.size();
        to_score.push_back(pool[it->second]);
    };
    std::vector<const Sample*> originals;
    for (const auto& s : pool) {
        if (s.candidates.empty()) continue;
        originals.push_back(&s);
        want(s.id, s.id);
        for (const auto& c : s.candidates) want(c, s.id);
    }
    if (originals.empty()) throw ValidationError({"no sample lists candidates"});
    const auto scores = predict_all(params, config, to_score);
    std::vector<ScoredItem> items;
    for (const auto* s : originals) {
        ScoredItem it{s->id, scores[slot.at(s->id)], {}};
        for (const auto& c : s->candidates) it.candidates.emplace_back(c, scores[slot.at(c)]);
        items.push_back(std::move(it));
    }
    return build_rerank_report(items);
}

// ---- JSON -------------------------------------------------------------------

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

}  // namespace

ordered_json to_json(const FactorReport& rep) {
    ordered_json j;
    j["n_samples"] = rep.n_samples;
    j["permutations"] = rep.permutations;
    j["seed"] = rep.seed;
    ordered_json fs = ordered_json::array();
    for (const auto& f : rep.factors) {
        ordered_json o;
        o["factor"] = f.factor;
        o["test"] = f.test;
        o["status"] = std::string(to_string(f.status));
        o["notice"] = f.notice;
        ordered_json gs = ordered_json::array();
        for (const auto& g : f.groups) {
            ordered_json go;
            go["name"] = g.name;
            go["n"] = g.n;
            go["mean"] = opt(g.mean);
            go["sd"] = opt(g.sd);
            go["included"] = g.included;
            gs.push_back(std::move(go));
        }
        o["groups"] = std::move(gs);
        o["statistic"] = opt(f.statistic);
        o["infinite"] = f.infinite;
        o["df1"] = opt(f.df1);
        o["df2"] = opt(f.df2);
        o["p_value"] = opt(f.p_value);
        o["n_used"] = f.n_used;
        o["n_unknown"] = f.n_unknown;
        fs.push_back(std::move(o));
    }
    j["factors"] = std::move(fs);
    return j;
}

FactorReport factor_report_from_json(const json& j) {
    try {
        FactorReport rep;
        rep.n_samples = j.at("n_samples").get<std::size_t>();
        rep.permutations = j.at("permutations").get<std::size_t>();
        rep.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& o : j.at("factors")) {
            FactorResult f;
            f.factor = o.at("factor").get<std::string>();
            f.test = o.at("test").get<std::string>();
            f.status = parse_status(o.at("status").get<std::string>());
            f.notice = o.at("notice").get<std::string>();
            for (const auto& go : o.at("groups")) {
                f.groups.push_back({go.at("name").get<std::string>(), go.at("n").get<std::size_t>(), opt_from(go, "mean"),
                                    opt_from(go, "sd"), go.at("included").get<bool>()});
            }
            f.statistic = opt_from(o, "statistic");
            f.infinite = o.at("infinite").get<bool>();
            f.df1 = opt_from(o, "df1");
            f.df2 = opt_from(o, "df2");
            f.p_value = opt_from(o, "p_value");
            f.n_used = o.at("n_used").get<std::size_t>();
            f.n_unknown = o.at("n_unknown").get<std::size_t>();
            rep.factors.push_back(std::move(f));
        }
        return rep;
    } catch (const json::exception& e) {
        throw FormatError(std::string("factor report JSON: ") + e.what());
    }
}

ordered_json to_json(const RerankReport& rep) {
    ordered_json j;
    ordered_json items = ordered_json::array();
    for (const auto& it : rep.items) {
        ordered_json o;
        o["id"] = it.id;
        o["category"] = std::string(to_string(it.category));
        o["original_score"] = it.original_score;
        o["best_score"] = it.best_score;
        o["chosen"] = it.chosen;
        o["improvement_pct"] = opt(it.improvement_pct);
        items.push_back(std::move(o));
    }
    ordered_json cats = ordered_json::array();
    for (const auto& c : rep.categories) {
        ordered_json o;
        o["category"] = c.category;
        o["n"] = c.n;
        o["original_mean"] = opt(c.original_mean);
        o["original_sd"] = opt(c.original_sd);
        o["best_mean"] = opt(c.best_mean);
        o["best_sd"] = opt(c.best_sd);
        o["improvement_pct"] = opt(c.improvement_pct);
        cats.push_back(std::move(o));
    }
    j["items"] = std::move(items);
    j["categories"] = std::move(cats);
    return j;
}

RerankReport rerank_report_from_json(const json& j) {
    try {
        RerankReport rep;
        for (const auto& o : j.at("items")) {
            RerankItem it;
            it.id = o.at("id").get<std::string>();
            it.category = parse_category(o.at("category").get<std::string>());
            it.original_score = o.at("original_score").get<double>();
            it.best_score = o.at("best_score").get<double>();
            it.chosen = o.at("chosen").get<std::string>();
            it.improvement_pct = opt_from(o, "improvement_pct");
            rep.items.push_back(std::move(it));
        }
        for (const auto& o : j.at("categories")) {
            CategorySummary c;
            c.category = o.at("category").get<std::string>();
            c.n = o.at("n").get<std::size_t>();
            c.original_mean = opt_from(o, "original_mean");
            c.original_sd = opt_from(o, "original_sd");
            c.best_mean = opt_from(o, "best_mean");
            c.best_sd = opt_from(o, "best_sd");
            c.improvement_pct = opt_from(o, "improvement_pct");
            rep.categories.push_back(std::move(c));
        }
        return rep;
    } catch (const json::exception& e) {
        throw FormatError(std::string("rerank report JSON: ") + e.what());
    }
}

// ---- text rendering ---------------------------------------------------------

namespace {

std::string num(const std::optional<double>& v, int precision = 4) {
    if (!v) return "";
    std::ostringstream os;
    os.precision(precision);
    os << std::fixed << *v;
    return os.str();
}

std::string pvalue(const std::optional<double>& p) {
    if (!p) return "";
    std::ostringstream os;
    os.precision(3);
    if (*p != 0.0 && *p < 1e-3) os << std::scientific;
    else os << std::fixed;
    os << *p;
    return os.str();
}

std::string mean_sd(const std::optional<double>& m, const std::optional<double>& sd) {
    if (!m) return "n/a";
    return sd ? num(m, 3) + " ± " + num(sd, 3) : num(m, 3);
}

std::string statistic(const FactorResult& f) { return f.infinite ? std::string("inf") : num(f.statistic); }

std::string groups_text(const FactorResult& f) {
    std::string out;
    for (const auto& g : f.groups) {
        if (!out.empty()) out += "; ";
        out += g.name + " (n=" + std::to_string(g.n) + (g.included ? "" : ", excluded") + ") " + mean_sd(g.mean, g.sd);
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string render(const FactorReport& rep, Format format) {
    if (format == Format::json) return to_json(rep).dump(2) + "\n";
    std::ostringstream os;
    if (format == Format::csv) {
        os << "factor,test,status,statistic,df1,df2,p_value,n_used,n_unknown,groups\n";
        for (const auto& f : rep.factors) {
            os << f.factor << ',' << f.test << ',' << to_string(f.status) << ',' << statistic(f) << ','
               << num(f.df1) << ',' << num(f.df2) << ',' << pvalue(f.p_value) << ',' << f.n_used << ','
               << f.n_unknown << ',' << csv_field(groups_text(f)) << '\n';
        }
        return os.str();
    }
    os << "| Factor | Test | Groups (mean ± sd) | Statistic | p-value | n | Status |\n";
    os << "|---|---|---|---|---|---|---|\n";
    for (const auto& f : rep.factors) {
        os << "| " << f.factor << " | " << f.test << " | " << (f.groups.empty() ? "-" : groups_text(f)) << " | "
           << (f.statistic || f.infinite ? statistic(f) : "-") << " | " << (f.p_value ? pvalue(f.p_value) : "-")
           << " | " << f.n_used << " | " << to_string(f.status) << (f.notice.empty() ? "" : " (" + f.notice + ")")
           << " |\n";
    }
    return os.str();
}

std::string render(const RerankReport& rep, Format format) {
    if (format == Format::json) return to_json(rep).dump(2) + "\n";
    std::ostringstream os;
    if (format == Format::csv) {
        os << "id,category,original_score,best_score,chosen,improvement_pct\n";
        for (const auto& it : rep.items) {
            os << csv_field(it.id) << ',' << to_string(it.category) << ',' << num(it.original_score, 6) << ','
               << num(it.best_score, 6) << ',' << csv_field(it.chosen) << ',' << num(it.improvement_pct, 2) << '\n';
        }
        return os.str();
    }
    os << "| Category | n | Original score | Best candidate score | Improvement (%) |\n";
    os << "|---|---|---|---|---|\n";
    for (const auto& c : rep.categories) {
        if (c.n == 0) continue;
        os << "| " << c.category << " | " << c.n << " | " << mean_sd(c.original_mean, c.original_sd) << " | "
           << mean_sd(c.best_mean, c.best_sd) << " | " << (c.improvement_pct ? num(c.improvement_pct, 2) : "n/a")
           << " |\n";
    }
    return os.str();
}

}  // namespace memfuse::insight
