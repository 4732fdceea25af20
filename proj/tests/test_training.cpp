#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "rehabcl/evaluation.hpp"
#include "rehabcl/synthetic.hpp"
#include "rehabcl/training.hpp"
#include "testutil.hpp"

using namespace rehabcl;
using testutil::Rng;
namespace fs = std::filesystem;

namespace {

EncoderConfig tiny_encoder() {
    EncoderConfig cfg;
    cfg.layer_channels = {8, 16};
    cfg.temporal_strides = {1, 2};
    cfg.temporal_kernel = 5;
    cfg.embedding_dim = 16;
    return cfg;
}

TrainConfig quick_config(long epochs, long batch = 8, std::uint64_t seed = 7) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_tuples = batch;
    cfg.learning_rate = 0.003;
    cfg.seed = seed;
    cfg.augmentation.noise_sigma = 0.01;
    cfg.augmentation.rotation_range = 0.05;
    cfg.augmentation.shear_range = 0.05;
    cfg.augmentation.blur_sigma_range = {0.0, 0.5};
    return cfg;
}

Dataset small_synthetic(int types = 2, int per_type = 12, std::uint64_t seed = 3) {
    SyntheticConfig cfg;
    cfg.types = types;
    cfg.samples_per_type = per_type;
    cfg.frames = 16;
    cfg.seed = seed;
    return make_synthetic_classification(cfg);
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
    Dataset ds = small_synthetic();
    auto cfg = quick_config(3);
    auto a = train_contrastive(ds, cfg, tiny_encoder(), ProjectionConfig{16, 8});
    auto b = train_contrastive(ds, cfg, tiny_encoder(), ProjectionConfig{16, 8});
    REQUIRE(a.log.size() == b.log.size());
    for (size_t e = 0; e < a.log.size(); ++e) CHECK(a.log[e].loss == b.log[e].loss);
}

TEST_CASE("loss decreases on the synthetic dataset") {
    Dataset ds = small_synthetic(3, 16);
    auto cfg = quick_config(40, 8);
    auto result = train_contrastive(ds, cfg, tiny_encoder(), ProjectionConfig{16, 8});
    REQUIRE(result.log.size() == 40);
    double first = 0, last = 0;
    for (int e = 0; e < 10; ++e) {
        first += result.log[static_cast<size_t>(e)].loss;
        last += result.log[result.log.size() - 1 - static_cast<size_t>(e)].loss;
    }
    CHECK(last / 10.0 < first / 10.0);
}

TEST_CASE("single-type dataset trains with zero soft negatives") {
    Dataset ds = small_synthetic(1, 12);
    auto cfg = quick_config(2);
    auto result = train_contrastive(ds, cfg, tiny_encoder(), ProjectionConfig{16, 8});
    for (const auto& e : result.log) CHECK(e.mean_soft == 0.0);
}

TEST_CASE("all-incorrect batches are skipped while training continues") {
    // 2 correct + 8 incorrect with batch_tuples=2: at least 3 of the 5
    // batches per epoch contain no correct tuple whatever the shuffle.
    Dataset ds = small_synthetic(1, 4);
    Dataset skewed;
    skewed.graph = ds.graph;
    skewed.name = ds.name;
    int correct_kept = 0;
    for (const auto& s : ds.samples)
        if (s.assessment == Assessment::correct && correct_kept < 2) {
            skewed.samples.push_back(s);
            ++correct_kept;
        }
    Dataset more = small_synthetic(1, 16, 5);
    for (const auto& s : more.samples)
        if (s.assessment == Assessment::incorrect) skewed.samples.push_back(s);
    REQUIRE(skewed.samples.size() == 10);

    auto cfg = quick_config(2, 2);
    auto result = train_contrastive(skewed, cfg, tiny_encoder(), ProjectionConfig{16, 8});
    for (const auto& e : result.log) CHECK(e.skipped_batches >= 3);
}

TEST_CASE("contrastive training rejects unusable datasets") {
    Dataset ds = small_synthetic(1, 6);
    Dataset incorrect_only;
    incorrect_only.graph = ds.graph;
    for (const auto& s : ds.samples)
        if (s.assessment == Assessment::incorrect) incorrect_only.samples.push_back(s);
    auto cfg = quick_config(1);
    CHECK_THROWS_AS(train_contrastive(incorrect_only, cfg, tiny_encoder(), ProjectionConfig{16, 8}),
                    ArgumentError);

    SyntheticConfig rcfg;
    rcfg.samples_per_type = 6;
    rcfg.frames = 16;
    Dataset regression = make_synthetic_regression(rcfg);
    CHECK_THROWS_AS(train_contrastive(regression, cfg, tiny_encoder(), ProjectionConfig{16, 8}),
                    ArgumentError);
}

TEST_CASE("checkpoint round-trip preserves inference outputs exactly") {
    Dataset ds = small_synthetic();
    auto cfg = quick_config(2);
    auto result = train_contrastive(ds, cfg, tiny_encoder(), ProjectionConfig{16, 8});

    fs::path path = fs::temp_directory_path() / "rehabcl_ckpt_test.ckpt";
    save_checkpoint(result.state, path);
    auto loaded = load_checkpoint(path);

    Rng rng(50);
    auto probe = testutil::random_sequence(rng, 16, 8, 3);
    Tensor views({1, 16, 8, 3});
    std::copy(probe.frames.raw().begin(), probe.frames.raw().end(), views.data());
    Tensor a = result.state.embed(views, true);
    Tensor b = loaded.embed(views, true);
    REQUIRE(a.size() == b.size());
    for (long i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
    CHECK(loaded.meta().source_dataset == "synthetic");
    CHECK(loaded.meta().canonical_frames == 16);
}

TEST_CASE("truncated and version-bumped checkpoints are rejected") {
    Dataset ds = small_synthetic();
    auto cfg = quick_config(1);
    auto result = train_contrastive(ds, cfg, tiny_encoder(), ProjectionConfig{16, 8});
    fs::path path = fs::temp_directory_path() / "rehabcl_ckpt_corrupt.ckpt";
    save_checkpoint(result.state, path);

    // Truncate the payload.
    auto size = fs::file_size(path);
    fs::path cut = fs::temp_directory_path() / "rehabcl_ckpt_cut.ckpt";
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes(static_cast<size_t>(size) / 2);
        in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(cut), CheckpointError);

    // Bump the version field (bytes 8..11).
    fs::path bumped = fs::temp_directory_path() / "rehabcl_ckpt_version.ckpt";
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes(static_cast<size_t>(size));
        in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        bytes[8] = 99;
        std::ofstream out(bumped, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(bumped), doctest::Contains("version"), CheckpointError);

    CHECK_THROWS_AS(load_checkpoint(fs::temp_directory_path() / "missing.ckpt"), IoError);
}

TEST_CASE("frozen transfer keeps encoder parameters bit-identical") {
    Dataset ds = small_synthetic();
    auto cfg = quick_config(2);
    auto pre = train_contrastive(ds, cfg, tiny_encoder(), ProjectionConfig{16, 8});

    SyntheticConfig rcfg;
    rcfg.samples_per_type = 10;
    rcfg.frames = 16;
    Dataset target = make_synthetic_regression(rcfg);

    std::vector<std::vector<double>> before;
    for (auto& p : pre.state.encoder_parameters()) before.push_back(p.value->raw());

    RegressionHeadConfig head;
    head.freeze_encoder = true;
    auto tcfg = quick_config(3, 4);
    auto transfer = transfer_to_regression(pre.state, target, head, tcfg);

    auto after_params = transfer.state.encoder_parameters();
    REQUIRE(after_params.size() == before.size());
    for (size_t i = 0; i < after_params.size(); ++i)
        CHECK(after_params[i].value->raw() == before[i]);
    CHECK(transfer.state.head_kind() == HeadKind::regression);
    REQUIRE(transfer.log.size() == 3);
}

TEST_CASE("unfrozen transfer actually updates the encoder") {
    Dataset ds = small_synthetic();
    auto cfg = quick_config(1);
    auto pre = train_contrastive(ds, cfg, tiny_encoder(), ProjectionConfig{16, 8});
    SyntheticConfig rcfg;
    rcfg.samples_per_type = 8;
    rcfg.frames = 16;
    Dataset target = make_synthetic_regression(rcfg);

    std::vector<std::vector<double>> before;
    for (auto& p : pre.state.encoder_parameters()) before.push_back(p.value->raw());
    RegressionHeadConfig head;
    head.freeze_encoder = false;
    auto transfer = transfer_to_regression(pre.state, target, head, quick_config(2, 4));
    bool changed = false;
    auto after = transfer.state.encoder_parameters();
    for (size_t i = 0; i < after.size() && !changed; ++i) changed = after[i].value->raw() != before[i];
    CHECK(changed);
}

TEST_CASE("transfer rejects binary targets and graph mismatches") {
    Dataset ds = small_synthetic();
    auto pre = train_contrastive(ds, quick_config(1), tiny_encoder(), ProjectionConfig{16, 8});

    RegressionHeadConfig head;
    CHECK_THROWS_WITH_AS(transfer_to_regression(pre.state, ds, head, quick_config(1)),
                         doctest::Contains("regression target required"), ArgumentError);

    SyntheticConfig rcfg;
    rcfg.samples_per_type = 6;
    rcfg.frames = 16;
    Dataset target = make_synthetic_regression(rcfg);
    Dataset othergraph = target;
    othergraph.graph.edges.pop_back();
    othergraph.graph.edges.push_back({2, 7});
    CHECK_THROWS_WITH_AS(transfer_to_regression(pre.state, othergraph, head, quick_config(1)),
                         doctest::Contains("graph"), ArgumentError);
}

TEST_CASE("constant-score target converges toward zero MSE") {
    Dataset ds = small_synthetic();
    auto pre = train_contrastive(ds, quick_config(1), tiny_encoder(), ProjectionConfig{16, 8});
    SyntheticConfig rcfg;
    rcfg.samples_per_type = 8;
    rcfg.frames = 16;
    Dataset target = make_synthetic_regression(rcfg);
    for (auto& s : target.samples) s.clinical_score = 25.0;

    RegressionHeadConfig head;
    auto tcfg = quick_config(60, 8);
    tcfg.learning_rate = 0.01;
    auto transfer = transfer_to_regression(pre.state, target, head, tcfg);
    CHECK(transfer.log.back().train_mse < transfer.log.front().train_mse);
    CHECK(transfer.log.back().train_mse < 10.0);

    // Spearman on constant truth is undefined and reported as such.
    auto preds = predict_scores(transfer.state, target);
    std::vector<double> truth(preds.size(), 25.0);
    CHECK_THROWS_AS(spearman(preds, truth), MetricError);
}

TEST_CASE("predicted scores stay in the clinical range") {
    Dataset ds = small_synthetic();
    auto pre = train_contrastive(ds, quick_config(1), tiny_encoder(), ProjectionConfig{16, 8});
    SyntheticConfig rcfg;
    rcfg.samples_per_type = 6;
    rcfg.frames = 16;
    Dataset target = make_synthetic_regression(rcfg);
    RegressionHeadConfig head;
    auto transfer = transfer_to_regression(pre.state, target, head, quick_config(1, 4));
    for (double p : predict_scores(transfer.state, target)) {
        CHECK(p >= 0.0);
        CHECK(p <= 50.0);
    }
}

TEST_CASE("periodic checkpoints are written when configured") {
    Dataset ds = small_synthetic();
    auto cfg = quick_config(4);
    cfg.checkpoint_every = 2;
    cfg.checkpoint_dir = fs::temp_directory_path() / "rehabcl_ckpt_dir";
    fs::remove_all(cfg.checkpoint_dir);
    fs::create_directories(cfg.checkpoint_dir);
    train_contrastive(ds, cfg, tiny_encoder(), ProjectionConfig{16, 8});
    CHECK(fs::exists(cfg.checkpoint_dir / "epoch_000002.ckpt"));
    CHECK(fs::exists(cfg.checkpoint_dir / "epoch_000004.ckpt"));
}
