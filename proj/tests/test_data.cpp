#include "tafilter/data.hpp"
#include "tafilter/train.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <fstream>

namespace taf {
namespace {

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("tafilter_data_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    void write_raw(const fs::path& p, const std::string& bytes) {
        std::ofstream(p, std::ios::binary) << bytes;
    }

    fs::path dir_;
};

using FeatureIo = TempDir;

FeatureSequence random_sequence(int length, int dim, std::uint64_t seed) {
    Rng rng(seed);
    FeatureSequence s;
    s.data = gaussian_matrix(length, dim, 3.0, rng).cast<float>().cast<double>();
    return s;
}

TEST_F(FeatureIo, BinaryRoundTripIsBitExact) {
    const auto x = random_sequence(37, 5, 1);
    write_features(dir_ / "x.taf", x);
    EXPECT_EQ(load_features(dir_ / "x.taf").data, x.data);
    EXPECT_FALSE(fs::exists(dir_ / "x.taf.tmp"));
}

TEST_F(FeatureIo, HeaderLayout) {
    FeatureSequence x;
    x.data = (Matrix(1, 2) << 1.0, -2.0).finished();
    const std::string bytes = encode_features(x.data);
    ASSERT_EQ(bytes.size(), 20u);
    EXPECT_EQ(bytes.substr(0, 4), "TAF1");
    EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\0\0\0", 4));
    EXPECT_EQ(bytes.substr(8, 4), std::string("\x02\0\0\0", 4));
    EXPECT_EQ(bytes.substr(12, 4), std::string("\0\0\x80\x3f", 4));
    EXPECT_EQ(bytes.substr(16, 4), std::string("\0\0\0\xc0", 4));
}

TEST_F(FeatureIo, TruncatedPayloadRejected) {
    std::string bytes = encode_features(Matrix::Ones(2, 3));
    bytes.resize(12 + 5 * 4);
    write_raw(dir_ / "t.taf", bytes);
    try {
        load_features(dir_ / "t.taf");
        FAIL() << "expected truncation error";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
    }
}

TEST_F(FeatureIo, CorruptedHeadersRejected) {
    std::string bytes = encode_features(Matrix::Ones(2, 3));
    std::string bad_magic = bytes;
    bad_magic[3] = '2';
    write_raw(dir_ / "m.taf", bad_magic);
    EXPECT_THROW(load_features(dir_ / "m.taf"), DataError);

    write_raw(dir_ / "short.taf", bytes.substr(0, 7));
    EXPECT_THROW(load_features(dir_ / "short.taf"), DataError);

    write_raw(dir_ / "trail.taf", bytes + "x");
    EXPECT_THROW(load_features(dir_ / "trail.taf"), DataError);

    std::string zero_rows = bytes;
    zero_rows[4] = 0;
    write_raw(dir_ / "zero.taf", zero_rows);
    EXPECT_THROW(load_features(dir_ / "zero.taf"), DataError);
}

TEST_F(FeatureIo, NonFiniteValuesRejected) {
    std::string bytes = encode_features(Matrix::Ones(2, 2));
    const auto nan = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
    std::memcpy(bytes.data() + 16, &nan, 4);
    write_raw(dir_ / "nan.taf", bytes);
    EXPECT_THROW(load_features(dir_ / "nan.taf"), DataError);

    const auto inf = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::infinity());
    std::memcpy(bytes.data() + 16, &inf, 4);
    write_raw(dir_ / "inf.taf", bytes);
    EXPECT_THROW(load_features(dir_ / "inf.taf"), DataError);

    FeatureSequence x;
    x.data = Matrix::Ones(2, 2);
    x.data(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(write_features(dir_ / "w.taf", x), DataError);
}

TEST_F(FeatureIo, CsvFallback) {
    write_raw(dir_ / "x.csv", "1,2\n3,4\n");
    const auto x = load_features(dir_ / "x.csv");
    EXPECT_EQ(x.data, (Matrix(2, 2) << 1, 2, 3, 4).finished());

    write_raw(dir_ / "ragged.csv", "1,2\n3\n");
    EXPECT_THROW(load_features(dir_ / "ragged.csv"), DataError);
    write_raw(dir_ / "word.csv", "1,x\n");
    EXPECT_THROW(load_features(dir_ / "word.csv"), DataError);
    write_raw(dir_ / "empty.csv", "");
    EXPECT_THROW(load_features(dir_ / "empty.csv"), DataError);
}

TEST_F(FeatureIo, EmptySequenceRejectedOnWrite) {
    FeatureSequence x;
    x.data.resize(0, 4);
    EXPECT_THROW(write_features(dir_ / "e.taf", x), DataError);
}

TEST_F(FeatureIo, MissingFileRejected) {
    EXPECT_THROW(load_features(dir_ / "nope.taf"), DataError);
}

TEST_F(FeatureIo, TenMegabyteRoundTripUnderOneSecond) {
    const auto x = random_sequence(10000, 256, 2);  // 10.24 MB of f32
    const auto start = std::chrono::steady_clock::now();
    write_features(dir_ / "big.taf", x);
    const auto y = load_features(dir_ / "big.taf");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(y.data, x.data);
    EXPECT_EQ(fs::file_size(dir_ / "big.taf"), 12u + 4u * 10000u * 256u);
    EXPECT_LT(seconds, 1.0);
}

TEST(ManifestText, ParsesEntriesAndHeader) {
    const Manifest m = parse_manifest("# classes=4\na.taf\t0\ttrain\nsub/b.taf\t2\ttest\n\n", "/data");
    ASSERT_EQ(m.entries.size(), 2u);
    EXPECT_EQ(m.classes, 4);
    EXPECT_EQ(m.entries[1].label, 2);
    EXPECT_EQ(m.entries[1].split, Split::Test);
    EXPECT_EQ(m.resolve(m.entries[1]), fs::path("/data/sub/b.taf"));
    EXPECT_EQ(parse_manifest(format_manifest(m), "/data").entries[1].path, m.entries[1].path);
}

TEST(ManifestText, InfersClassCount) {
    EXPECT_EQ(parse_manifest("a\t0\ttrain\nb\t3\ttrain\n", ".").classes, 4);
}

TEST(ManifestText, RejectsMalformedInput) {
    EXPECT_THROW(parse_manifest("a\t0\n", "."), DataError);
    EXPECT_THROW(parse_manifest("a\tx\ttrain\n", "."), DataError);
    EXPECT_THROW(parse_manifest("a\t-1\ttrain\n", "."), DataError);
    EXPECT_THROW(parse_manifest("a\t0\tvalid\n", "."), DataError);
    EXPECT_THROW(parse_manifest("a\t0\ttest\n", "."), DataError);
    EXPECT_THROW(parse_manifest("# classes=2\na\t2\ttrain\n", "."), DataError);
}

using ManifestFiles = TempDir;

TEST_F(ManifestFiles, LoadsDatasetAndValidatesPaths) {
    write_features(dir_ / "a.taf", random_sequence(5, 3, 1));
    write_features(dir_ / "b.taf", random_sequence(7, 3, 2));
    write_raw(dir_ / "m.tsv", "a.taf\t1\ttrain\nb.taf\t0\ttest\n");
    const Dataset ds = load_dataset(load_manifest(dir_ / "m.tsv"));
    ASSERT_EQ(ds.train.size(), 1u);
    ASSERT_EQ(ds.test.size(), 1u);
    EXPECT_EQ(ds.train[0].label, 1);
    EXPECT_EQ(ds.test[0].length(), 7);
    EXPECT_EQ(ds.dim, 3);

    write_raw(dir_ / "missing.tsv", "a.taf\t1\ttrain\nc.taf\t0\ttest\n");
    EXPECT_THROW(load_manifest(dir_ / "missing.tsv"), DataError);

    write_features(dir_ / "wide.taf", random_sequence(5, 4, 3));
    write_raw(dir_ / "mixed.tsv", "a.taf\t1\ttrain\nwide.taf\t0\ttest\n");
    EXPECT_THROW(load_dataset(load_manifest(dir_ / "mixed.tsv")), DataError);
}

using Synth = TempDir;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

TEST_F(Synth, GenerationIsByteDeterministic) {
    SynthSpec spec;
    spec.train_count = 12;
    spec.test_count = 6;
    synth_generate(spec, dir_ / "a");
    synth_generate(spec, dir_ / "b");
    size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir_ / "a")) {
        if (!e.is_regular_file()) continue;
        ++files;
        EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / fs::relative(e.path(), dir_ / "a"))) << e.path();
    }
    EXPECT_EQ(files, 12u + 6u + 2u);
    spec.seed = 43;
    synth_generate(spec, dir_ / "c");
    EXPECT_NE(slurp(dir_ / "a" / "train/00000.taf"), slurp(dir_ / "c" / "train/00000.taf"));
}

TEST_F(Synth, WrittenFilesMatchInMemorySample) {
    SynthSpec spec;
    spec.train_count = 10;
    spec.test_count = 5;
    SynthData kept;
    const auto manifest = synth_generate(spec, dir_, &kept);
    const Dataset ds = load_dataset(load_manifest(manifest));
    ASSERT_EQ(ds.train.size(), 10u);
    for (size_t i = 0; i < ds.train.size(); ++i) {
        EXPECT_EQ(ds.train[i].data, kept.dataset.train[i].data);
        EXPECT_EQ(ds.train[i].label, kept.dataset.train[i].label);
    }
    const auto planted = parse_planted(slurp(dir_ / "planted.tsv"));
    ASSERT_EQ(planted.size(), 15u);
    for (size_t i = 0; i < planted.size(); ++i) {
        EXPECT_EQ(planted[i].id, kept.planted[i].id);
        EXPECT_EQ(planted[i].position, kept.planted[i].position);
    }
}

TEST(SynthSample, ClassAverageMotifIsZero) {
    for (std::uint64_t seed : {1, 2, 3}) {
        SynthSpec spec;
        spec.seed = seed;
        Rng rng(seed);
        const auto motifs = synth_motifs(spec, rng);
        Matrix sum = Matrix::Zero(spec.motif_len, spec.dim);
        for (const auto& m : motifs) sum += m;
        EXPECT_LE((sum / spec.classes).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(SynthSample, NoiselessUnjitteredSamplesAreIdentical) {
    SynthSpec spec;
    spec.classes = 2;
    spec.jitter = 0.0;
    spec.noise_std = 0.0;
    spec.min_length = spec.max_length = 50;
    spec.train_count = 6;
    spec.test_count = 0;
    const auto data = synth_sample(spec);
    for (size_t i = 2; i < data.dataset.train.size(); ++i)
        EXPECT_EQ(data.dataset.train[i].data, data.dataset.train[i % 2].data);
    EXPECT_NE(data.dataset.train[0].data, data.dataset.train[1].data);
}

TEST(SynthSample, PlantedPositionsFollowSpec) {
    SynthSpec spec;
    spec.jitter = 0.0;
    spec.positions = {0.2, 0.4, 0.5, 0.6, 0.8};
    const auto data = synth_sample(spec);
    ASSERT_EQ(data.planted.size(), 300u);
    for (const auto& p : data.planted) {
        EXPECT_NEAR(p.position, spec.positions[size_t(p.label)], 0.5 / p.length + 1e-12);
        EXPECT_GE(p.length, 40);
        EXPECT_LE(p.length, 80);
    }
}

TEST(SynthSample, TemporalMeanCarriesNoMotif) {
    SynthSpec spec;
    spec.noise_std = 0.0;
    const auto data = synth_sample(spec);
    for (const auto& s : data.dataset.train) EXPECT_LE(s.data.colwise().mean().cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SynthSample, RejectsInvalidSpecs) {
    SynthSpec spec;
    spec.classes = 1;
    EXPECT_THROW(synth_sample(spec), UsageError);
    spec = SynthSpec{};
    spec.motif_len = 40;
    EXPECT_THROW(synth_sample(spec), UsageError);
    spec = SynthSpec{};
    spec.positions = {0.1, 0.2, 0.3, 0.4, 1.0};
    EXPECT_THROW(synth_sample(spec), UsageError);
    spec.positions = {0.1, 0.2};
    EXPECT_THROW(synth_sample(spec), UsageError);
}

TEST(SynthBenchmark, MeanPoolingIsNearChance) {
    const auto ds = synth_sample(SynthSpec{}).dataset;
    ModelConfig mc;
    mc.kind = ModelKind::Mean;
    mc.hidden = 32;
    TrainConfig cfg;
    cfg.iterations = 1500;
    cfg.eval_every = 0;
    EXPECT_LE(accuracy(fit(mc, ds, cfg).model, ds.test), 0.45);
}

// Scores each class by the Gaussian log-likelihood ratio of the window
// centered at that class's position against its motif.
int matched_filter(const Matrix& x, const SynthSpec& spec, const std::vector<Matrix>& motifs) {
    const int length = int(x.rows());
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < spec.classes; ++c) {
        const double half = 0.5 * (spec.motif_len - 1);
        const int start = std::clamp(int(std::lround(spec.position(c) * length - half)), 0, length - spec.motif_len);
        const Matrix& m = motifs[size_t(c)];
        const Matrix window = x.middleRows(start, spec.motif_len);
        const double score = (window.cwiseProduct(m)).sum() - 0.5 * m.squaredNorm();
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    return best;
}

TEST(SynthBenchmark, MatchedFilterAtPlantedPositionsSolvesIt) {
    const SynthSpec spec;
    const auto data = synth_sample(spec);
    int correct = 0;
    for (const auto& s : data.dataset.test) correct += matched_filter(s.data, spec, data.motifs) == s.label;
    EXPECT_GE(correct / double(data.dataset.test.size()), 0.95);
}

}  // namespace
}  // namespace taf
