#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rehabcl/evaluation.hpp"
#include "rehabcl/synthetic.hpp"
#include "testutil.hpp"

using namespace rehabcl;
using testutil::Rng;

namespace {

std::vector<Assessment> labels(std::initializer_list<int> raw) {
    std::vector<Assessment> out;
    for (int v : raw) out.push_back(v ? Assessment::correct : Assessment::incorrect);
    return out;
}

}  // namespace

TEST_CASE("accuracy basics") {
    CHECK(accuracy(labels({1, 0, 1}), labels({1, 0, 1})) == doctest::Approx(1.0));
    CHECK(accuracy(labels({1, 0, 1, 0}), labels({1, 1, 0, 0})) == doctest::Approx(0.5));
    CHECK_THROWS_AS(accuracy(labels({1}), labels({1, 0})), ArgumentError);
}

TEST_CASE("auc_roc hand examples") {
    CHECK(auc_roc({0.9, 0.1}, labels({1, 0})) == doctest::Approx(1.0));
    CHECK(auc_roc({0.5, 0.5, 0.5, 0.5}, labels({1, 1, 0, 0})) == doctest::Approx(0.5));
    // {+: 0.8, 0.4; -: 0.6, 0.2}: of 4 pairs, 3 wins -> 0.75.
    CHECK(auc_roc({0.8, 0.4, 0.6, 0.2}, labels({1, 1, 0, 0})) == doctest::Approx(0.75));
    CHECK_THROWS_AS(auc_roc({0.1, 0.2}, labels({1, 1})), MetricError);
}

TEST_CASE("auc_pr hand examples") {
    CHECK(auc_pr({0.9, 0.2}, labels({1, 0})) == doctest::Approx(1.0));
    CHECK(auc_pr({0.9, 0.8, 0.7}, labels({1, 0, 0})) == doctest::Approx(1.0));
    // {+: 0.9, 0.3; -: 0.7}: precision 1 at recall 1/2, 2/3 at recall 1 -> 5/6.
    CHECK(auc_pr({0.9, 0.3, 0.7}, labels({1, 1, 0})) == doctest::Approx(5.0 / 6.0));
    CHECK_THROWS_AS(auc_pr({0.1, 0.2}, labels({0, 0})), MetricError);
}

TEST_CASE("spearman hand examples") {
    CHECK(spearman({1, 2, 3}, {10, 20, 30}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3}, {5, 4, 3}) == doctest::Approx(-1.0));
    // d^2 = 2, n = 5: 1 - 12/120 = 0.9.
    CHECK(spearman({1, 2, 3, 5, 4}, {1, 2, 3, 4, 5}) == doctest::Approx(0.9));
    CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), MetricError);
}

TEST_CASE("metrics match the naive oracles on random instances") {
    Rng rng(123);
    std::uniform_int_distribution<long> ndist(4, 50);
    std::uniform_real_distribution<double> sdist(0.0, 1.0);
    std::bernoulli_distribution pos(0.5);
    std::uniform_int_distribution<int> grid(0, 9);
    for (int trial = 0; trial < 300; ++trial) {
        long n = ndist(rng);
        std::vector<double> scores;
        std::vector<Assessment> truth;
        bool has_pos = false, has_neg = false;
        for (long i = 0; i < n; ++i) {
            // Quantized scores make ties common.
            scores.push_back(trial % 2 == 0 ? sdist(rng) : grid(rng) / 10.0);
            bool p = pos(rng);
            truth.push_back(p ? Assessment::correct : Assessment::incorrect);
            has_pos |= p;
            has_neg |= !p;
        }
        if (!has_pos || !has_neg) continue;
        CHECK(std::abs(auc_roc(scores, truth) - testutil::auc_roc_oracle(scores, truth)) < 1e-9);
        CHECK(std::abs(auc_pr(scores, truth) - testutil::auc_pr_oracle(scores, truth)) < 1e-9);

        std::vector<double> a, b;
        for (long i = 0; i < n; ++i) {
            a.push_back(trial % 2 == 0 ? sdist(rng) : grid(rng) / 10.0);
            b.push_back(trial % 2 == 0 ? sdist(rng) : grid(rng) / 10.0);
        }
        bool const_a = std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; });
        bool const_b = std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; });
        if (!const_a && !const_b)
            CHECK(std::abs(spearman(a, b) - testutil::spearman_oracle(a, b)) < 1e-9);
    }
}

TEST_CASE("auc_roc is invariant under strictly increasing transforms") {
    Rng rng(9);
    std::uniform_real_distribution<double> sdist(-2.0, 2.0);
    std::bernoulli_distribution pos(0.5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores;
        std::vector<Assessment> truth;
        for (int i = 0; i < 20; ++i) {
            scores.push_back(sdist(rng));
            truth.push_back(pos(rng) ? Assessment::correct : Assessment::incorrect);
        }
        bool has_pos = std::count(truth.begin(), truth.end(), Assessment::correct) > 0;
        bool has_neg = std::count(truth.begin(), truth.end(), Assessment::incorrect) > 0;
        if (!has_pos || !has_neg) continue;
        std::vector<double> transformed;
        for (double s : scores) transformed.push_back(std::exp(3.0 * s) + 1.0);
        CHECK(auc_roc(scores, truth) == doctest::Approx(auc_roc(transformed, truth)).epsilon(1e-12));
    }
}

TEST_CASE("metrics are permutation invariant") {
    std::vector<double> scores{0.9, 0.1, 0.6, 0.4, 0.7};
    auto truth = labels({1, 0, 1, 0, 0});
    double roc = auc_roc(scores, truth), pr = auc_pr(scores, truth);
    std::vector<size_t> perm{4, 2, 0, 1, 3};
    std::vector<double> ps;
    std::vector<Assessment> pt;
    for (size_t i : perm) {
        ps.push_back(scores[i]);
        pt.push_back(truth[i]);
    }
    CHECK(auc_roc(ps, pt) == doctest::Approx(roc).epsilon(1e-12));
    CHECK(auc_pr(ps, pt) == doctest::Approx(pr).epsilon(1e-12));
}

TEST_CASE("random scores give null AUC near one half") {
    Rng rng(77);
    std::uniform_real_distribution<double> sdist(0.0, 1.0);
    double sum = 0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> scores;
        std::vector<Assessment> truth;
        for (int i = 0; i < 30; ++i) {
            scores.push_back(sdist(rng));
            truth.push_back(i % 2 == 0 ? Assessment::correct : Assessment::incorrect);
        }
        sum += auc_roc(scores, truth);
    }
    CHECK(sum / trials == doctest::Approx(0.5).epsilon(0.05));
}

namespace {

ModelState tiny_model(std::uint64_t seed = 21) {
    EncoderConfig cfg;
    cfg.layer_channels = {8, 16};
    cfg.temporal_strides = {1, 2};
    cfg.temporal_kernel = 5;
    cfg.embedding_dim = 16;
    return ModelState::create(synthetic_graph(), cfg, ProjectionConfig{16, 8}, seed);
}

}  // namespace

TEST_CASE("evaluate assembles per-type metrics and the unweighted average") {
    SyntheticConfig cfg;
    cfg.types = 2;
    cfg.samples_per_type = 12;
    cfg.frames = 12;
    Dataset ds = make_synthetic_classification(cfg);
    auto model = tiny_model();
    auto refs = build_reference_set(model, ds, HeadMode::with_projection);
    auto report = evaluate(model, refs, ds, SplitScheme::ratio_3_1, 5);

    REQUIRE(report.per_exercise.size() == 2);
    REQUIRE(report.per_exercise.count("s01"));
    REQUIRE(report.per_exercise.count("s02"));
    const auto& a = report.per_exercise.at("s01");
    const auto& b = report.per_exercise.at("s02");
    REQUIRE(a.accuracy);
    REQUIRE(b.accuracy);
    CHECK(*report.macro_average.accuracy ==
          doctest::Approx((*a.accuracy + *b.accuracy) / 2.0).epsilon(1e-12));
    CHECK(*report.macro_average.auc_roc ==
          doctest::Approx((*a.auc_roc + *b.auc_roc) / 2.0).epsilon(1e-12));
    CHECK(report.macro_average.sample_count == 24);

    // Serialized forms contain every exercise row.
    auto json_text = report.to_json_string();
    CHECK(json_text.find("s01") != std::string::npos);
    auto table = report.to_table();
    CHECK(table.find("average") != std::string::npos);
}

TEST_CASE("single-class types record a metric error without failing globally") {
    SyntheticConfig cfg;
    cfg.types = 1;
    cfg.samples_per_type = 8;
    cfg.frames = 12;
    Dataset ds = make_synthetic_classification(cfg);
    // Keep only correct samples: AUC undefined, accuracy still defined.
    Dataset correct_only;
    correct_only.graph = ds.graph;
    correct_only.name = ds.name;
    for (const auto& s : ds.samples)
        if (s.assessment == Assessment::correct) correct_only.samples.push_back(s);
    auto model = tiny_model();
    auto refs = build_reference_set(model, correct_only, HeadMode::with_projection);
    auto report = evaluate(model, refs, correct_only, SplitScheme::ratio_3_1, 5);
    const auto& m = report.per_exercise.at("s01");
    CHECK(m.accuracy.has_value());
    CHECK_FALSE(m.auc_roc.has_value());
    CHECK_FALSE(m.errors.empty());
}

TEST_CASE("export_embeddings writes rows, projections and reference markers") {
    SyntheticConfig cfg;
    cfg.types = 2;
    cfg.samples_per_type = 10;
    cfg.frames = 12;
    Dataset ds = make_synthetic_classification(cfg);
    auto model = tiny_model();
    auto refs = build_reference_set(model, ds, HeadMode::with_projection);

    auto path = std::filesystem::temp_directory_path() / "rehabcl_emb_test.tsv";
    EmbeddingExportOptions options;
    options.project_2d = true;
    options.perplexity = 5.0;
    options.refs = &refs;
    export_embeddings(model, ds, path, options);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header.find("proj_x") != std::string::npos);
    long rows = 0, ref_rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        if (line.rfind("ref:", 0) == 0) ++ref_rows;
        // id, type, assessment, 8 embedding dims, proj_x, proj_y
        CHECK(std::count(line.begin(), line.end(), '\t') == 3 + 8 + 2 - 1);
    }
    CHECK(rows == 20 + 2);
    CHECK(ref_rows == 2);
}

TEST_CASE("export_embeddings on an empty dataset writes the header only") {
    Dataset empty;
    empty.graph = synthetic_graph();
    auto model = tiny_model();
    auto path = std::filesystem::temp_directory_path() / "rehabcl_emb_empty.tsv";
    export_embeddings(model, empty, path);
    std::ifstream in(path);
    std::string header, rest;
    CHECK(std::getline(in, header));
    CHECK_FALSE(std::getline(in, rest));
}

TEST_CASE("svm probe separates toy clusters and fails on one class") {
    Rng rng(31);
    std::normal_distribution<double> noise(0.0, 0.15);
    Tensor train({40, 2}), val({20, 2});
    std::vector<Assessment> train_labels, val_labels;
    for (long i = 0; i < 40; ++i) {
        bool pos = i % 2 == 0;
        train(i, 0) = (pos ? 1.0 : -1.0) + noise(rng);
        train(i, 1) = (pos ? 1.0 : -1.0) + noise(rng);
        train_labels.push_back(pos ? Assessment::correct : Assessment::incorrect);
    }
    for (long i = 0; i < 20; ++i) {
        bool pos = i % 2 == 0;
        val(i, 0) = (pos ? 1.0 : -1.0) + noise(rng);
        val(i, 1) = (pos ? 1.0 : -1.0) + noise(rng);
        val_labels.push_back(pos ? Assessment::correct : Assessment::incorrect);
    }
    CHECK(svm_probe(train, train_labels, val, val_labels, 1.0, 0.5) == doctest::Approx(1.0));

    std::vector<Assessment> single(40, Assessment::correct);
    CHECK_THROWS_AS(svm_probe(train, single, val, val_labels), ArgumentError);
}

TEST_CASE("svm probe on shuffled labels hovers near chance") {
    Rng rng(32);
    std::normal_distribution<double> value(0.0, 1.0);
    double sum = 0;
    const int trials = 10;
    for (int trial = 0; trial < trials; ++trial) {
        Tensor train({30, 3}), val({30, 3});
        std::vector<Assessment> train_labels, val_labels;
        for (long i = 0; i < 30; ++i) {
            for (long d = 0; d < 3; ++d) {
                train(i, d) = value(rng);
                val(i, d) = value(rng);
            }
            train_labels.push_back(rng() % 2 ? Assessment::correct : Assessment::incorrect);
            val_labels.push_back(i % 2 ? Assessment::correct : Assessment::incorrect);
        }
        bool has_both = std::count(train_labels.begin(), train_labels.end(), Assessment::correct) > 0 &&
                        std::count(train_labels.begin(), train_labels.end(), Assessment::incorrect) > 0;
        if (!has_both) {
            train_labels[0] = Assessment::correct;
            train_labels[1] = Assessment::incorrect;
        }
        sum += svm_probe(train, train_labels, val, val_labels, 1.0, 1.0 / 3.0);
    }
    CHECK(sum / trials == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("tsne produces finite 2-d coordinates") {
    Rng rng(33);
    std::normal_distribution<double> value(0.0, 1.0);
    Tensor points({30, 5});
    for (long i = 0; i < points.size(); ++i) points.data()[i] = value(rng);
    auto proj = tsne_project(points, 10.0, 1, 250);
    REQUIRE(proj.size() == 30);
    for (const auto& p : proj) {
        CHECK(std::isfinite(p[0]));
        CHECK(std::isfinite(p[1]));
    }
}
