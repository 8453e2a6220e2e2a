#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "memfuse/data.hpp"
#include "memfuse/errors.hpp"
#include "memfuse/stats.hpp"
#include "memfuse/synthetic.hpp"
#include "test_support.hpp"

using namespace memfuse;
using namespace memfuse::data;
using memfuse::testing::TempDir;
namespace fs = std::filesystem;

namespace {

EmbeddingSequence random_sequence(Modality m, std::size_t len, std::size_t width, std::mt19937_64& rng) {
    std::normal_distribution<float> n(0.0f, 1.0f);
    EmbeddingSequence s{m, Tensor({len, width})};
    for (auto& v : s.rows.data()) v = static_cast<double>(n(rng));
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

SyntheticSpec small_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.n_train = 60;
    s.n_validation = 20;
    s.n_test = 20;
    s.n_rerank = 5;
    s.candidates_per_item = 2;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(Memb, RandomSequenceRoundTripsBitwise) {
    std::mt19937_64 rng(1);
    TempDir dir("memb");
    const auto seq = random_sequence(Modality::audio, 7, 16, rng);
    write_embedding(seq, dir / "a.memb");
    const auto back = read_embedding(dir / "a.memb");
    EXPECT_EQ(back.modality, Modality::audio);
    EXPECT_EQ(back.rows, seq.rows);
    EXPECT_EQ(fs::file_size(dir / "a.memb"), 16u + 7 * 16 * 4 + 4);
}

TEST(Memb, ShortPayloadIsTruncation) {
    std::mt19937_64 rng(2);
    const auto bytes = encode_embedding(random_sequence(Modality::text, 3, 4, rng));
    for (std::size_t keep : {bytes.size() - 1, bytes.size() - 9, std::size_t{17}, std::size_t{4}}) {
        const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(keep));
        EXPECT_THROW(decode_embedding(cut), TruncationError) << keep;
    }
}

TEST(Memb, ZeroLengthHeaderIsAValidationError) {
    std::vector<std::uint8_t> bytes = {'M', 'E', 'M', 'B', 1, 0, 0, 0, 0, 0, 0, 0, 4, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_THROW(decode_embedding(bytes), ValidationError);
}

TEST(Memb, CorruptionIsDetected) {
    std::mt19937_64 rng(3);
    auto bytes = encode_embedding(random_sequence(Modality::video, 2, 3, rng));
    bytes[20] ^= 0x04;
    EXPECT_THROW(decode_embedding(bytes), ChecksumError);
    bytes = encode_embedding(random_sequence(Modality::video, 2, 3, rng));
    bytes[4] = 9;
    EXPECT_THROW(decode_embedding(bytes), VersionError);
}

TEST(Memb, ReadErrorsNameThePath) {
    TempDir dir("memb");
    EXPECT_THROW(read_embedding(dir / "none.memb"), IoError);
    write_text(dir / "bad.memb", "MEMBxx");
    try {
        read_embedding(dir / "bad.memb");
        FAIL();
    } catch (const TruncationError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.memb"), std::string::npos);
    }
}

TEST(Metadata, EmptySceneList) {
    const auto r = parse_metadata(R"({"General Video Information": {"Pace": "Fast"}, "Scene Analysis": []})");
    EXPECT_EQ(r.scene_count, 0);
    EXPECT_EQ(r.distinct_emotion_count, 0);
    EXPECT_EQ(r.color_theme_count, 0);
    EXPECT_EQ(r.pace, Pace::fast);
}

TEST(Metadata, EmotionNormalization) {
    const auto r = parse_metadata(R"({"Scene Analysis": [
        {"Scene Number": 1, "Emotions or Mood": "Happy", "Colors": "Red, blue"},
        {"Scene Number": 2, "Emotions or Mood": "happy, tense ", "Colors": ["BLUE", "green"]}]})");
    EXPECT_EQ(r.scene_count, 2);
    EXPECT_EQ(r.distinct_emotion_count, 2);
    EXPECT_EQ(r.color_theme_count, 3);
}

TEST(Metadata, EmptyStringsMeanUnknown) {
    const auto r = parse_metadata(
        R"({"General Video Information": {"Brand": "", "Orientation": "", "Pace": "", "Duration": ""}})");
    EXPECT_EQ(r.pace, Pace::unknown);
    EXPECT_EQ(r.orientation, Orientation::unknown);
    EXPECT_EQ(r.duration_seconds, 0.0);
    EXPECT_EQ(parse_metadata("{}"), MetaRecord{});
    EXPECT_THROW(parse_metadata("{not json"), FormatError);
}

TEST(Metadata, FieldVocabulary) {
    EXPECT_EQ(parse_pace("Slow and calm"), Pace::slow);
    EXPECT_EQ(parse_pace("moderate"), Pace::medium);
    EXPECT_EQ(parse_orientation("Vertical (9:16)"), Orientation::portrait);
    EXPECT_EQ(parse_orientation("landscape"), Orientation::landscape);
    const auto r = parse_metadata("```json\n{\"General Video Information\": {\"Duration\": \"30 seconds\"}}\n```");
    EXPECT_EQ(r.duration_seconds, 30.0);
    EXPECT_EQ(normalize_terms(" A, b ,a,, C"), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Manifest, LoadResolvesRelativePathsAndMetadata) {
    TempDir dir("manifest");
    std::mt19937_64 rng(4);
    fs::create_directories(dir / "emb");
    fs::create_directories(dir / "meta");
    write_embedding(random_sequence(Modality::text, 3, 4, rng), dir / "emb/x.text.memb");
    write_embedding(random_sequence(Modality::text, 5, 4, rng), dir / "emb/y.text.memb");
    write_text(dir / "meta/x.json", R"({"General Video Information": {"Pace": "slow"}})");
    write_text(dir / "m.jsonl",
               R"({"id":"x","dataset":"d","split":"train","label":0.25,"embeddings":{"text":"emb/x.text.memb"},"metadata":"meta/x.json"})"
               "\n"
               R"({"id":"y","dataset":"d","split":"train","label":1.0,"embeddings":{"text":"emb/y.text.memb"}})"
               "\n");
    const auto m = read_manifest(dir / "m.jsonl");
    EXPECT_EQ(m.dataset, "d");
    EXPECT_EQ(m.split, Split::train);
    ASSERT_EQ(m.entries.size(), 2u);
    EXPECT_TRUE(m.has_metadata());
    EXPECT_FALSE(m.has_candidates());
    const auto samples = load_dataset(m);
    EXPECT_EQ(samples[0].id, "x");
    EXPECT_EQ(*samples[0].label, 0.25);
    ASSERT_TRUE(samples[0].metadata);
    EXPECT_EQ(samples[0].metadata->pace, Pace::slow);
    EXPECT_FALSE(samples[1].metadata);
    EXPECT_EQ(samples[1].sequences.at(Modality::text).length(), 5u);
}

TEST(Manifest, OutOfRangeLabelNamesTheSample) {
    TempDir dir("manifest");
    std::mt19937_64 rng(5);
    write_embedding(random_sequence(Modality::video, 2, 3, rng), dir / "v.memb");
    write_text(dir / "m.jsonl",
               R"({"id":"clip-17","dataset":"d","split":"val","label":1.2,"embeddings":{"video":"v.memb"}})"
               "\n");
    try {
        load_dataset(read_manifest(dir / "m.jsonl"));
        FAIL();
    } catch (const RangeError& e) {
        EXPECT_NE(std::string(e.what()).find("clip-17"), std::string::npos) << e.what();
    }
}

TEST(Manifest, StructuralErrors) {
    TempDir dir("manifest");
    std::mt19937_64 rng(6);
    write_embedding(random_sequence(Modality::video, 2, 3, rng), dir / "v.memb");
    const std::string line = R"({"id":"a","dataset":"d","split":"train","label":0.5,"embeddings":{"video":"v.memb"}})";
    write_text(dir / "dup.jsonl", line + "\n" + line + "\n");
    EXPECT_THROW(load_dataset(read_manifest(dir / "dup.jsonl")), ValidationError);
    write_text(dir / "mixed.jsonl",
               line + "\n" + R"({"id":"b","dataset":"d","split":"test","embeddings":{"video":"v.memb"}})" + "\n");
    EXPECT_THROW(read_manifest(dir / "mixed.jsonl"), FormatError);
    write_text(dir / "missing.jsonl",
               R"({"id":"a","dataset":"d","split":"train","embeddings":{"video":"nope.memb"}})" "\n");
    EXPECT_THROW(load_dataset(read_manifest(dir / "missing.jsonl")), IoError);
    write_text(dir / "wrongmod.jsonl",
               R"({"id":"a","dataset":"d","split":"train","embeddings":{"audio":"v.memb"}})" "\n");
    EXPECT_THROW(load_dataset(read_manifest(dir / "wrongmod.jsonl")), FormatError);
    EXPECT_THROW(read_manifest(dir / "absent.jsonl"), IoError);
}

TEST(Manifest, WriteReadRoundTrip) {
    TempDir dir("manifest");
    Manifest m;
    m.dataset = "demo";
    m.split = Split::validation;
    m.entries.push_back({"a", {{Modality::video, "emb/a.video.memb"}}, 0.5, "meta/a.json", std::nullopt});
    m.entries.push_back({"b", {{Modality::text, "emb/b.text.memb"}}, std::nullopt, std::nullopt,
                         std::vector<std::string>{"c1", "c2"}});
    write_manifest(m, dir / "m.jsonl");
    const auto back = read_manifest(dir / "m.jsonl");
    EXPECT_EQ(back.dataset, "demo");
    EXPECT_EQ(back.split, Split::validation);
    ASSERT_EQ(back.entries.size(), 2u);
    EXPECT_EQ(back.entries[0].embeddings, m.entries[0].embeddings);
    EXPECT_EQ(back.entries[0].metadata, m.entries[0].metadata);
    EXPECT_EQ(back.entries[1].candidates, m.entries[1].candidates);
    EXPECT_FALSE(back.entries[1].label);
}

TEST(Batching, PadsToLongestSequence) {
    std::mt19937_64 rng(7);
    std::vector<Sample> s(2);
    s[0].id = "short";
    s[0].sequences[Modality::text] = random_sequence(Modality::text, 3, 2, rng);
    s[1].id = "long";
    s[1].sequences[Modality::text] = random_sequence(Modality::text, 5, 2, rng);
    const std::vector<std::size_t> idx{0, 1};
    const auto b = make_batch(s, idx);
    const auto& pm = b.modalities.at(Modality::text);
    EXPECT_EQ(pm.rows.shape(), (Shape{2, 5, 2}));
    EXPECT_EQ(pm.mask, (Mask{1, 1, 1, 0, 0, 1, 1, 1, 1, 1}));
    EXPECT_EQ(pm.lengths, (std::vector<std::size_t>{3, 5}));
    for (std::size_t i = 6; i < 10; ++i) EXPECT_EQ(pm.rows[i], 0.0);
    EXPECT_EQ(pm.rows[5], s[0].sequences[Modality::text].rows[5]);

    s[1].sequences[Modality::text] = random_sequence(Modality::text, 5, 3, rng);
    EXPECT_THROW(make_batch(s, idx), DimensionError);
}

TEST(Batching, SeededOrderIsStable) {
    EXPECT_EQ(order(50, 3), order(50, 3));
    EXPECT_NE(order(50, 3), order(50, 4));
    auto sorted = order(50, 3);
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, order(50, std::nullopt));
}

TEST(Batching, OverlapIsRejected) {
    std::vector<Sample> a(2), b(1);
    a[0].id = "p";
    a[1].id = "q";
    b[0].id = "r";
    EXPECT_NO_THROW(check_disjoint(a, b));
    b[0].id = "q";
    EXPECT_THROW(check_disjoint(a, b), ValidationError);
}

TEST(Synthetic, SameSeedGivesIdenticalFiles) {
    TempDir one("syn"), two("syn");
    const auto spec = small_spec(1);
    write_synthetic(generate_synthetic(spec), spec, one.path());
    write_synthetic(generate_synthetic(spec), spec, two.path());
    const auto a = tree_contents(one.path());
    EXPECT_EQ(a, tree_contents(two.path()));
    EXPECT_TRUE(a.count("train.jsonl"));
    EXPECT_TRUE(a.count("rerank.jsonl"));

    TempDir three("syn");
    write_synthetic(generate_synthetic(small_spec(2)), small_spec(2), three.path());
    EXPECT_NE(a, tree_contents(three.path()));
}

TEST(Synthetic, WrittenFilesLoadBackToTheSameSamples) {
    TempDir dir("syn");
    const auto spec = small_spec(3);
    const auto ds = generate_synthetic(spec);
    write_synthetic(ds, spec, dir.path());
    const auto val = load_dataset(read_manifest(dir / "val.jsonl"));
    ASSERT_EQ(val.size(), ds.validation.size());
    for (std::size_t i = 0; i < val.size(); ++i) {
        EXPECT_EQ(val[i].id, ds.validation[i].id);
        EXPECT_EQ(*val[i].label, *ds.validation[i].label);
        for (auto m : kAllModalities) EXPECT_EQ(val[i].sequences.at(m).rows, ds.validation[i].sequences.at(m).rows);
        EXPECT_EQ(val[i].metadata, ds.validation[i].metadata);
    }
    const auto rr = read_manifest(dir / "rerank.jsonl");
    EXPECT_TRUE(rr.has_candidates());
}

TEST(Synthetic, LabelsStayInsideTheOpenUnitInterval) {
    const auto spec = small_spec(4);
    const auto ds = generate_synthetic(spec);
    const auto summary = summarize(ds, spec);
    for (const auto* split : {&ds.train, &ds.validation, &ds.test}) {
        for (const auto& s : *split) {
            EXPECT_GT(*s.label, 0.0);
            EXPECT_LT(*s.label, 1.0);
            EXPECT_DOUBLE_EQ(*s.label, planted_label(ds.latents.at(s.id), spec.coefficients));
            for (const auto& [m, seq] : s.sequences) {
                EXPECT_GE(seq.length(), spec.min_length);
                EXPECT_LE(seq.length(), spec.max_length);
                EXPECT_EQ(seq.width(), spec.dims.at(m));
            }
        }
    }
}

TEST(Synthetic, InvalidSpecListsViolations) {
    auto spec = small_spec(1);
    spec.dims[Modality::video] = 0;
    spec.min_length = 9;
    spec.max_length = 3;
    try {
        generate_synthetic(spec);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_GE(e.violations().size(), 2u);
    }
}

TEST(Synthetic, NoiselessTextProbeRecoversLabels) {
    auto spec = small_spec(5);
    spec.n_train = 400;
    spec.noise = 0.0;
    spec.coefficients.video = 0.0;
    spec.coefficients.audio = 0.0;
    spec.coefficients.interaction = 0.0;
    const auto ds = generate_synthetic(spec);

    // least-squares fit of label on the mean of the planted text column
    std::vector<double> x, y;
    for (const auto& s : ds.train) {
        const auto& rows = s.sequences.at(Modality::text).rows;
        double m = 0.0;
        for (std::size_t r = 0; r < rows.dim(0); ++r) m += rows.at(r, 0);
        x.push_back(m / static_cast<double>(rows.dim(0)));
        y.push_back(*s.label);
    }
    const double mx = stats::mean(x), my = stats::mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double slope = sxy / sxx;
    std::vector<double> fit;
    for (double v : x) fit.push_back(my + slope * (v - mx));
    EXPECT_GT(stats::spearman(fit, y), 0.99);
}

TEST(Synthetic, LatentInfluenceFollowsTextVideoAudio) {
    auto spec = small_spec(6);
    spec.n_train = 3000;
    const auto ds = generate_synthetic(spec);
    std::vector<double> zv, za, zt, y;
    for (const auto& s : ds.train) {
        const auto& z = ds.latents.at(s.id);
        zv.push_back(z.video);
        za.push_back(z.audio);
        zt.push_back(z.text);
        y.push_back(*s.label);
    }
    const double rv = stats::spearman(zv, y), ra = stats::spearman(za, y), rt = stats::spearman(zt, y);
    EXPECT_GT(rt, rv);
    EXPECT_GT(rv, ra);
    EXPECT_GT(ra, 0.2);
}
