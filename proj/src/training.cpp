#include "rehabcl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "rehabcl/serde.hpp"

namespace rehabcl {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (epochs <= 0) throw ArgumentError("TrainConfig: epochs must be positive");
    if (batch_tuples <= 0) throw ArgumentError("TrainConfig: batch_tuples must be positive");
    if (!(learning_rate > 0)) throw ArgumentError("TrainConfig: learning_rate must be positive");
    if (!(temperature > 0)) throw ArgumentError("TrainConfig: temperature must be positive");
    augmentation.validate();
    loss.validate();
}

void AdamOptimizer::step(std::vector<nn::ParamRef>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(static_cast<size_t>(params[i].value->size()), 0.0);
            v_[i].assign(static_cast<size_t>(params[i].value->size()), 0.0);
        }
    }
    if (m_.size() != params.size()) throw ArgumentError("AdamOptimizer: parameter set changed");
    ++t_;
    const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        double* value = params[i].value->data();
        const double* grad = params[i].grad->data();
        auto& m = m_[i];
        auto& v = v_[i];
        const size_t n = m.size();
        for (size_t k = 0; k < n; ++k) {
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * grad[k];
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * grad[k] * grad[k];
            double mhat = m[k] / bias1;
            double vhat = v[k] / bias2;
            value[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

// ---------------------------------------------------------------------------
// Contrastive pre-training

TrainResult train_contrastive(const Dataset& data, const TrainConfig& config,
                              const EncoderConfig& encoder_config,
                              const ProjectionConfig& projection_config, const EpochCallback& on_epoch) {
    config.validate();
    data.validate();
    if (data.samples.empty()) throw ArgumentError("train_contrastive: dataset is empty");

    long correct_count = 0;
    for (const auto& s : data.samples) {
        if (!s.assessment)
            throw ArgumentError("train_contrastive: sample '" + s.id +
                                "' lacks a binary assessment (contrastive training needs +/- labels)");
        if (*s.assessment == Assessment::correct) ++correct_count;
    }
    if (correct_count < 2)
        throw ArgumentError("train_contrastive: need at least 2 correct samples overall");

    const long t_len = data.samples.front().sequence.frame_count();
    const long channels = data.samples.front().sequence.channel_count();
    for (const auto& s : data.samples)
        if (s.sequence.frame_count() != t_len || s.sequence.channel_count() != channels)
            throw ArgumentError("train_contrastive: samples must share T and C (run prepare first)");

    EncoderConfig enc = encoder_config;
    enc.use_ri = config.use_ri || enc.use_ri;
    ModelState model =
        ModelState::create(data.graph, enc, projection_config, config.seed, static_cast<int>(channels));
    model.meta().source_dataset = data.name;
    model.meta().canonical_frames = t_len;

    AdamOptimizer optimizer(config.learning_rate, config.adam_betas.first, config.adam_betas.second);

    LossConfig loss_config = config.loss;
    loss_config.temperature = config.temperature;

    Rng rng(config.seed);
    std::vector<size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result{std::move(model), {}};
    auto params = result.state.parameters();  // taken after the move, refs stay valid
    for (long epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);

        EpochStats stats;
        stats.epoch = epoch;
        long batches = 0;
        double anchor_loss_sum = 0;
        long anchor_total = 0;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_tuples)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_tuples));
            if (end - start < 2) break;  // partial batch with a single tuple is dropped

            std::vector<const LabeledSample*> tuples;
            tuples.reserve(end - start);
            for (size_t i = start; i < end; ++i) tuples.push_back(&data.samples[order[i]]);

            ViewBatch batch = build_two_view_batch(
                std::span<const LabeledSample* const>(tuples), config.augmentation, rng);
            BatchPartitions parts = partition_batch(batch);
            if (parts.beta_plus.empty()) {
                ++stats.skipped_batches;
                continue;
            }

            Tensor embeddings = result.state.encode_training(batch.views);
            Tensor projected = result.state.project_training(embeddings);
            Tensor grad;
            LossResult loss = contrastive_loss(projected, parts, loss_config, &grad);
            if (loss.diagnostics.anchor_count == 0) {
                ++stats.skipped_batches;
                stats.skipped_anchors += loss.diagnostics.skipped_anchors;
                continue;
            }
            if (!std::isfinite(loss.loss)) {
                std::string dump = "train_contrastive: non-finite loss at epoch " +
                                   std::to_string(epoch) + " batch " + std::to_string(batches) +
                                   " (anchors=" + std::to_string(loss.diagnostics.anchor_count) +
                                   ", mean_hard=" + std::to_string(loss.diagnostics.mean_hard) +
                                   ", mean_soft=" + std::to_string(loss.diagnostics.mean_soft) + ")";
                throw Error(dump);
            }

            result.state.zero_grads();
            Tensor grad_embeddings = result.state.project_backward(grad);
            result.state.encode_backward(grad_embeddings);
            optimizer.step(params);

            ++batches;
            stats.loss += loss.loss;
            anchor_loss_sum += loss.loss;
            anchor_total += loss.diagnostics.anchor_count;
            stats.anchors += loss.diagnostics.anchor_count;
            stats.mean_positives += loss.diagnostics.mean_positives;
            stats.mean_hard += loss.diagnostics.mean_hard;
            stats.mean_soft += loss.diagnostics.mean_soft;
            stats.skipped_anchors += loss.diagnostics.skipped_anchors;
        }

        if (batches > 0) {
            stats.loss /= static_cast<double>(batches);
            stats.mean_positives /= static_cast<double>(batches);
            stats.mean_hard /= static_cast<double>(batches);
            stats.mean_soft /= static_cast<double>(batches);
        }
        if (anchor_total > 0) stats.loss_mean_per_anchor = anchor_loss_sum / anchor_total;
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.state.meta().epoch = epoch + 1;
        result.log.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() &&
            (epoch + 1) % config.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "epoch_%06ld.ckpt", epoch + 1);
            save_checkpoint(result.state, config.checkpoint_dir / name);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Transfer learning to clinical-score regression

TransferResult transfer_to_regression(const ModelState& pretrained, const Dataset& target,
                                      const RegressionHeadConfig& head_config, const TrainConfig& config,
                                      const Dataset* validation,
                                      const std::function<void(const RegressionEpochStats&)>& on_epoch) {
    config.validate();
    target.validate();
    if (target.samples.empty()) throw ArgumentError("transfer_to_regression: empty target dataset");
    if (!(pretrained.graph() == target.graph))
        throw ArgumentError("transfer_to_regression: encoder graph topology does not match target data");
    const std::string type = target.samples.front().exercise_type;
    for (const auto& s : target.samples) {
        if (!s.clinical_score)
            throw ArgumentError("transfer_to_regression: regression target required (sample '" + s.id +
                                "' has a binary label)");
        if (s.exercise_type != type)
            throw ArgumentError("transfer_to_regression: target must contain a single exercise type");
    }

    TransferResult result{pretrained, {}};
    ModelState& model = result.state;
    model.replace_head_with_regression(head_config, config.seed ^ 0x9e3779b97f4a7c15ULL);
    model.meta().source_dataset = pretrained.meta().source_dataset;
    if (model.meta().canonical_frames <= 0)
        model.meta().canonical_frames = target.samples.front().sequence.frame_count();

    const bool frozen = head_config.freeze_encoder;
    auto params = frozen ? model.head_parameters() : model.parameters();
    AdamOptimizer optimizer(config.learning_rate, config.adam_betas.first, config.adam_betas.second);

    auto stack = [](const Dataset& ds, const std::vector<size_t>& idx) {
        const auto& first = ds.samples[idx.front()].sequence;
        Tensor views({static_cast<long>(idx.size()), first.frame_count(), first.joint_count(),
                      first.channel_count()});
        long row = 0;
        for (size_t i : idx) {
            const auto& seq = ds.samples[i].sequence;
            std::copy(seq.frames.raw().begin(), seq.frames.raw().end(),
                      views.data() + row * seq.frames.size());
            ++row;
        }
        return views;
    };

    std::vector<size_t> val_all;
    Tensor val_views;
    std::vector<double> val_truth;
    if (validation && !validation->samples.empty()) {
        val_all.resize(validation->samples.size());
        std::iota(val_all.begin(), val_all.end(), 0);
        val_views = stack(*validation, val_all);
        for (const auto& s : validation->samples) val_truth.push_back(*s.clinical_score);
    }

    Rng rng(config.seed);
    std::vector<size_t> order(target.samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (long epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);

        double train_sq_sum = 0;
        long train_n = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_tuples)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_tuples));
            std::vector<size_t> idx(order.begin() + static_cast<long>(start),
                                    order.begin() + static_cast<long>(end));
            Tensor views = stack(target, idx);
            const long batch = views.dim(0);

            Tensor embeddings = frozen ? model.encode(views) : model.encode_training(views);
            Tensor pred = model.regress_training(embeddings);

            Tensor grad({batch});
            double sq = 0;
            for (long b = 0; b < batch; ++b) {
                double truth = *target.samples[idx[static_cast<size_t>(b)]].clinical_score;
                double diff = pred(b) - truth;
                sq += diff * diff;
                grad(b) = 2.0 * diff / static_cast<double>(batch);
            }
            if (!std::isfinite(sq))
                throw Error("transfer_to_regression: non-finite loss at epoch " + std::to_string(epoch));
            train_sq_sum += sq;
            train_n += batch;

            model.zero_grads();
            Tensor grad_embeddings = model.regress_backward(grad);
            if (!frozen) model.encode_backward(grad_embeddings);
            optimizer.step(params);
        }

        RegressionEpochStats stats;
        stats.epoch = epoch;
        stats.train_mse = train_n > 0 ? train_sq_sum / static_cast<double>(train_n) : 0.0;
        if (!val_truth.empty()) {
            Tensor emb = model.encode(val_views);
            Tensor pred = model.regress(emb);
            double sq = 0;
            for (long b = 0; b < pred.dim(0); ++b) {
                double diff = pred(b) - val_truth[static_cast<size_t>(b)];
                sq += diff * diff;
            }
            stats.val_mse = sq / static_cast<double>(val_truth.size());
        }
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        model.meta().epoch = epoch + 1;
        result.log.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return result;
}

std::vector<double> predict_scores(const ModelState& state, const Dataset& data) {
    std::vector<double> out;
    out.reserve(data.samples.size());
    for (const auto& s : data.samples) {
        const auto& seq = s.sequence;
        Tensor views({1, seq.frame_count(), seq.joint_count(), seq.channel_count()});
        std::copy(seq.frames.raw().begin(), seq.frames.raw().end(), views.data());
        Tensor emb = state.encode(views);
        Tensor pred = state.regress(emb);
        out.push_back(std::clamp(pred(0), 0.0, 50.0));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'R', 'E', 'H', 'A', 'B', 'C', 'L', '\0'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const ModelState& state, const fs::path& path) {
    ModelState& mutable_state = const_cast<ModelState&>(state);  // registry access only
    auto params = mutable_state.parameters();
    auto buffers = mutable_state.buffers();

    ordered_json header;
    header["format"] = "rehabcl-checkpoint";
    header["version"] = kVersion;
    header["graph"] = to_json(state.graph());
    header["encoder"] = to_json(state.encoder_config());
    header["projection"] = to_json(state.projection_config());
    header["head"] = state.head_kind() == HeadKind::projection ? "projection" : "regression";
    if (state.head_kind() == HeadKind::regression) {
        header["regression"] = {{"hidden_dim", state.regression_config().hidden_dim},
                                {"freeze_encoder", state.regression_config().freeze_encoder}};
    }
    header["meta"] = {{"epoch", state.meta().epoch},
                      {"source_dataset", state.meta().source_dataset},
                      {"canonical_frames", state.meta().canonical_frames},
                      {"raw_channels", state.meta().raw_channels}};

    long offset = 0;
    header["tensors"] = ordered_json::array();
    auto add_tensor = [&](const std::string& name, const Tensor& t, const char* kind) {
        ordered_json entry;
        entry["name"] = name;
        entry["kind"] = kind;
        entry["shape"] = t.shape();
        entry["offset"] = offset;
        entry["count"] = t.size();
        header["tensors"].push_back(std::move(entry));
        offset += t.size();
    };
    for (const auto& p : params) add_tensor(p.name, *p.value, "param");
    for (const auto& b : buffers) add_tensor(b.name, *b.value, "buffer");

    const std::string header_text = header.dump();
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(kMagic, sizeof kMagic);
        std::uint32_t version = kVersion;
        out.write(reinterpret_cast<const char*>(&version), sizeof version);
        std::uint64_t header_len = header_text.size();
        out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
        out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
        for (const auto& p : params)
            out.write(reinterpret_cast<const char*>(p.value->data()),
                      static_cast<std::streamsize>(p.value->size() * sizeof(double)));
        for (const auto& b : buffers)
            out.write(reinterpret_cast<const char*>(b.value->data()),
                      static_cast<std::streamsize>(b.value->size() * sizeof(double)));
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

ModelState load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw CheckpointError("not a checkpoint file: " + path.string());
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    if (!in || version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " +
                              path.string() + " (supported: " + std::to_string(kVersion) + ")");
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
    if (!in) throw CheckpointError("corrupt checkpoint header in " + path.string());
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw CheckpointError("corrupt (truncated) checkpoint header in " + path.string());

    ordered_json header;
    try {
        header = ordered_json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("corrupt checkpoint header JSON in " + path.string() + ": " + e.what());
    }

    SkeletonGraph graph = graph_from_json(header.at("graph"));
    EncoderConfig enc = encoder_from_json(header.at("encoder"));
    ProjectionConfig proj = projection_from_json(header.at("projection"));
    const auto& meta = header.at("meta");

    ModelState state = ModelState::create(graph, enc, proj, 0, meta.at("raw_channels").get<int>());
    if (header.at("head").get<std::string>() == "regression") {
        RegressionHeadConfig rc;
        rc.hidden_dim = header.at("regression").at("hidden_dim").get<int>();
        rc.freeze_encoder = header.at("regression").at("freeze_encoder").get<bool>();
        state.replace_head_with_regression(rc, 0);
    }
    state.meta().epoch = meta.at("epoch").get<long>();
    state.meta().source_dataset = meta.at("source_dataset").get<std::string>();
    state.meta().canonical_frames = meta.at("canonical_frames").get<long>();
    state.meta().raw_channels = meta.at("raw_channels").get<int>();

    std::map<std::string, Tensor*> by_name;
    for (auto& p : state.parameters()) by_name[p.name] = p.value;
    for (auto& b : state.buffers()) by_name[b.name] = b.value;

    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw CheckpointError("checkpoint tensor '" + name + "' does not exist in the model");
        const long count = entry.at("count").get<long>();
        if (count != it->second->size())
            throw CheckpointError("checkpoint tensor '" + name + "' has size " + std::to_string(count) +
                                  ", model expects " + std::to_string(it->second->size()));
        in.read(reinterpret_cast<char*>(it->second->data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw CheckpointError("corrupt (truncated) checkpoint payload in " + path.string());
        by_name.erase(it);
    }
    if (!by_name.empty())
        throw CheckpointError("checkpoint is missing tensor '" + by_name.begin()->first + "'");
    return state;
}

}  // namespace rehabcl
