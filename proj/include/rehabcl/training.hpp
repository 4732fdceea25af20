#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rehabcl/augmentation.hpp"
#include "rehabcl/contrastive.hpp"
#include "rehabcl/model.hpp"
#include "rehabcl/skeleton_data.hpp"

namespace rehabcl {

enum class OptimizerKind { adam };

struct TrainConfig {
    long epochs = 2000;
    long batch_tuples = 128;  // N source tuples per mini-batch (2N views)
    double learning_rate = 0.001;
    double temperature = 0.1;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::pair<double, double> adam_betas{0.9, 0.999};
    std::uint64_t seed = 0;
    AugmentationConfig augmentation;
    LossConfig loss;  // denominator mode; temperature above is authoritative
    bool use_ri = false;

    long checkpoint_every = 0;  // 0 = no periodic checkpoints
    std::filesystem::path checkpoint_dir;

    void validate() const;
};

class AdamOptimizer {
public:
    AdamOptimizer(double learning_rate, double beta1, double beta2, double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<nn::ParamRef>& params);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct EpochStats {
    long epoch = 0;
    double loss = 0;                  // mean per-batch loss (sum form of Eq. 2)
    double loss_mean_per_anchor = 0;  // averaged over anchors for comparability
    long anchors = 0;
    double mean_positives = 0;
    double mean_hard = 0;
    double mean_soft = 0;
    long skipped_batches = 0;
    long skipped_anchors = 0;
    double seconds = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

struct TrainResult {
    ModelState state;
    std::vector<EpochStats> log;
};

// Contrastive pre-training over the whole dataset: seeded shuffles, two-view
// batches, Adam on encoder + projection head jointly. Batches whose draw has
// no usable anchor are skipped and counted. A non-finite loss aborts with a
// diagnostic dump in the message.
TrainResult train_contrastive(const Dataset& data, const TrainConfig& config,
                              const EncoderConfig& encoder_config,
                              const ProjectionConfig& projection_config,
                              const EpochCallback& on_epoch = {});

struct RegressionEpochStats {
    long epoch = 0;
    double train_mse = 0;
    std::optional<double> val_mse;
    double seconds = 0;
};

struct TransferResult {
    ModelState state;
    std::vector<RegressionEpochStats> log;
};

// Replaces the projection head of a copy of `pretrained` with a fresh
// two-layer regression head and trains it on clinical scores (MSE). With
// freeze_encoder the encoder runs in inference mode and its parameters stay
// bit-identical; pass a freshly created ModelState for from-scratch training.
TransferResult transfer_to_regression(const ModelState& pretrained, const Dataset& target,
                                      const RegressionHeadConfig& head_config, const TrainConfig& config,
                                      const Dataset* validation = nullptr,
                                      const std::function<void(const RegressionEpochStats&)>& on_epoch = {});

// Regression predictions for every sample, clamped to the score range [0, 50].
std::vector<double> predict_scores(const ModelState& state, const Dataset& data);

// Self-describing versioned checkpoint, written atomically (tmp + rename).
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace rehabcl
