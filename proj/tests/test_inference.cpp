#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "rehabcl/inference.hpp"
#include "rehabcl/synthetic.hpp"
#include "testutil.hpp"

using namespace rehabcl;
using testutil::Rng;

namespace {

Tensor matrix(const std::vector<std::vector<double>>& rows) {
    Tensor t({static_cast<long>(rows.size()), static_cast<long>(rows.front().size())});
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            t(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
    return t;
}

ModelState tiny_model(std::uint64_t seed = 1) {
    EncoderConfig cfg;
    cfg.layer_channels = {8, 16};
    cfg.temporal_strides = {1, 2};
    cfg.temporal_kernel = 5;
    cfg.embedding_dim = 16;
    return ModelState::create(synthetic_graph(), cfg, ProjectionConfig{16, 8}, seed);
}

}  // namespace

TEST_CASE("reference formula hand examples") {
    // V = [(1,3), (3,1)]: Var=(1,1), normalized weights (0.5,0.5), sum (4,4) -> (2,2).
    auto r = build_reference(matrix({{1, 3}, {3, 1}}));
    CHECK(r[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(r[1] == doctest::Approx(2.0).epsilon(1e-9));

    // Two identical rows: zero variance resolved by epsilon -> uniform weights.
    auto r2 = build_reference(matrix({{1, 2}, {1, 2}}));
    CHECK(r2[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r2[1] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("high-variance dimensions are down-weighted") {
    // Dimension 0 noisy, dimension 1 stable; equal column sums.
    Tensor v = matrix({{0.0, 1.0}, {3.0, 1.1}, {0.0, 0.9}});
    auto r = build_reference(v);
    // Unweighted average treats them equally. Inverse variance shrinks dim 0.
    double sum0 = 3.0, sum1 = 3.0;
    CHECK(std::abs(r[0]) < std::abs(sum0) / 2.0 * 0.2);  // strongly suppressed
    CHECK(r[1] > sum1 * 0.5);                            // dominates the weight mass
}

TEST_CASE("reference matches the hand oracle on random matrices") {
    Rng rng(5);
    std::normal_distribution<double> value(0.0, 1.0);
    std::uniform_int_distribution<long> mdist(2, 5), ddist(1, 4);
    for (int trial = 0; trial < 200; ++trial) {
        long m = mdist(rng), d = ddist(rng);
        std::vector<std::vector<double>> rows(static_cast<size_t>(m),
                                              std::vector<double>(static_cast<size_t>(d)));
        for (auto& row : rows)
            for (auto& x : row) x = value(rng);
        auto got = build_reference(matrix(rows), 1e-8, true);
        auto expected = testutil::reference_oracle(rows, 1e-8);
        for (size_t k = 0; k < expected.size(); ++k) CHECK(std::abs(got[k] - expected[k]) < 1e-9);
    }
}

TEST_CASE("reference requires at least two rows") {
    CHECK_THROWS_WITH_AS(build_reference(matrix({{1, 2}})), doctest::Contains("insufficient"),
                         ArgumentError);
}

TEST_CASE("references are permutation invariant") {
    Tensor v = matrix({{1, 2}, {3, 4}, {5, 0}});
    Tensor p = matrix({{5, 0}, {1, 2}, {3, 4}});
    auto a = build_reference(v), b = build_reference(p);
    for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
}

TEST_CASE("classify boundary is inclusive") {
    CHECK(classify(0.9, 0.5) == Assessment::correct);
    CHECK(classify(0.5, 0.5) == Assessment::correct);
    CHECK(classify(0.4, 0.5) == Assessment::incorrect);
}

TEST_CASE("build_reference_set covers types and head modes") {
    SyntheticConfig cfg;
    cfg.types = 2;
    cfg.samples_per_type = 8;
    cfg.frames = 12;
    Dataset ds = make_synthetic_classification(cfg);
    auto model = tiny_model();

    auto refs = build_reference_set(model, ds, HeadMode::with_projection);
    CHECK(refs.references.count("s01"));
    CHECK(refs.references.count("s02"));
    CHECK(refs.references.at("s01").size() == 8);  // d_p

    auto refs_enc = build_reference_set(model, ds, HeadMode::encoder_only);
    CHECK(refs_enc.references.at("s01").size() == 16);  // d_f

    auto refs2 = build_reference_set(model, ds, HeadMode::with_projection);
    CHECK(refs.references.at("s01") == refs2.references.at("s01"));
}

TEST_CASE("types with fewer than two correct samples are omitted with a warning") {
    SyntheticConfig cfg;
    cfg.types = 2;
    cfg.samples_per_type = 6;
    cfg.frames = 12;
    Dataset ds = make_synthetic_classification(cfg);
    // Drop all but one correct s02 sample.
    Dataset pruned;
    pruned.graph = ds.graph;
    pruned.name = ds.name;
    long s02_correct = 0;
    for (const auto& s : ds.samples) {
        bool is_correct_s02 = s.exercise_type == "s02" && s.assessment == Assessment::correct;
        if (is_correct_s02 && ++s02_correct > 1) continue;
        pruned.samples.push_back(s);
    }
    auto model = tiny_model();
    Warnings warnings;
    auto refs = build_reference_set(model, pruned, HeadMode::with_projection, {}, &warnings);
    CHECK(refs.references.count("s01"));
    CHECK_FALSE(refs.references.count("s02"));
    CHECK_FALSE(warnings.empty());
}

TEST_CASE("score_sample agrees with cosine against the stored reference") {
    SyntheticConfig cfg;
    cfg.types = 1;
    cfg.samples_per_type = 6;
    cfg.frames = 12;
    Dataset ds = make_synthetic_classification(cfg);
    auto model = tiny_model();

    // Reference equal to a sample's own embedding scores that sample at 1.
    const auto& probe = ds.samples[0];
    Tensor views({1, probe.sequence.frame_count(), probe.sequence.joint_count(),
                  probe.sequence.channel_count()});
    std::copy(probe.sequence.frames.raw().begin(), probe.sequence.frames.raw().end(), views.data());
    Tensor emb = model.embed(views, true);

    ReferenceSet refs;
    refs.head_mode = HeadMode::with_projection;
    refs.references["s01"] = std::vector<double>(emb.data(), emb.data() + emb.dim(1));
    refs.thresholds["s01"] = 0.5;
    CHECK(score_sample(model, refs, probe) == doctest::Approx(1.0).epsilon(1e-9));

    // Antipodal reference scores at -1.
    for (auto& x : refs.references["s01"]) x = -x;
    CHECK(score_sample(model, refs, probe) == doctest::Approx(-1.0).epsilon(1e-9));

    LabeledSample unknown = probe;
    unknown.exercise_type = "zz";
    CHECK_THROWS_WITH_AS(score_sample(model, refs, unknown), doctest::Contains("zz"), ArgumentError);
}

TEST_CASE("decisions ignore positive scaling of references and embeddings") {
    SyntheticConfig cfg;
    cfg.types = 2;
    cfg.samples_per_type = 10;
    cfg.frames = 12;
    Dataset ds = make_synthetic_classification(cfg);
    auto model = tiny_model();
    auto refs = build_reference_set(model, ds, HeadMode::with_projection);
    auto scores = score_dataset(model, refs, ds);

    ReferenceSet scaled = refs;
    for (auto& [type, vec] : scaled.references)
        for (auto& x : vec) x *= 17.0;
    auto scaled_scores = score_dataset(model, scaled, ds);
    for (size_t i = 0; i < scores.size(); ++i) {
        CHECK(scores[i] == doctest::Approx(scaled_scores[i]).epsilon(1e-9));
        CHECK(classify(scores[i], 0.5) == classify(scaled_scores[i], 0.5));
    }
}

TEST_CASE("threshold scan separates cleanly and prefers the larger tie") {
    // +: {0.9, 0.8}, -: {0.2, 0.1} -> midpoints {0.15, 0.5, 0.85}; 0.5 is best.
    double theta = calibrate_threshold_scan({0.9, 0.8, 0.2, 0.1}, {true, true, false, false}, 0.5);
    CHECK(theta == doctest::Approx(0.5));

    // All candidates perfect -> tie broken toward the largest midpoint.
    double theta2 = calibrate_threshold_scan({0.9, 0.1}, {true, false}, 0.0);
    CHECK(theta2 == doctest::Approx(0.5));

    bool degenerate = false;
    double fallback = calibrate_threshold_scan({0.5, 0.5, 0.5}, {true, false, true}, 0.42, &degenerate);
    CHECK(degenerate);
    CHECK(fallback == doctest::Approx(0.42));

    degenerate = false;
    calibrate_threshold_scan({0.5, 0.6}, {true, true}, 0.42, &degenerate);
    CHECK(degenerate);
}

TEST_CASE("calibrate_thresholds fills per-type margins") {
    SyntheticConfig cfg;
    cfg.types = 2;
    cfg.samples_per_type = 12;
    cfg.frames = 12;
    Dataset ds = make_synthetic_classification(cfg);
    auto model = tiny_model();
    auto refs = build_reference_set(model, ds, HeadMode::with_projection);
    auto calibrated = calibrate_thresholds(model, refs, ds);
    for (const auto& [type, theta] : calibrated.thresholds) {
        CHECK(theta >= -1.0);
        CHECK(theta <= 1.0);
    }
}

TEST_CASE("reference set serializes and loads") {
    ReferenceSet refs;
    refs.head_mode = HeadMode::encoder_only;
    refs.variance_epsilon = 1e-7;
    refs.checkpoint_id = "ckpt-123";
    refs.references["a"] = {0.25, -1.5, 3.0};
    refs.thresholds["a"] = 0.61;
    auto path = std::filesystem::temp_directory_path() / "rehabcl_refs_test.json";
    refs.save(path);
    auto back = ReferenceSet::load(path);
    CHECK(back.head_mode == HeadMode::encoder_only);
    CHECK(back.variance_epsilon == 1e-7);
    CHECK(back.checkpoint_id == "ckpt-123");
    CHECK(back.references.at("a") == refs.references.at("a"));
    CHECK(back.thresholds.at("a") == 0.61);
}
