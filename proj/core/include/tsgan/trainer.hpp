#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsgan/checkpoint.hpp"
#include "tsgan/data.hpp"
#include "tsgan/losses.hpp"
#include "tsgan/networks.hpp"
#include "tsgan/optimizer.hpp"

namespace tsgan {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 2;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    int n_critic = 1;          // 0 only allowed when both adversarial weights are 0
    double clip_value = 0.01;  // wgan-clip only
    double beta1 = 0.9;
    double beta2 = 0.999;
    LossWeights loss;
    NetworkConfig network;
    double blur_sigma = 0.0;  // <= 0: 25 px per 1360 px of width
    std::uint64_t seed = 1;
    std::string dataset = "synthetic:4";  // directory or synthetic:N
    int synth_height = 64;
    int synth_width = 64;
    int train_count = 0;  // > 0: split off a test set, train on this many
    std::string checkpoint_dir = "checkpoints";
    std::string log_path = "train_log.csv";
    int keep_checkpoints = 0;  // > 0: only the newest N epoch checkpoints stay on disk
    bool stagewise = false;  // first half of the epochs trains stage 1 alone
    bool lr_decay = false;   // both rates fall linearly towards 0 over the run

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

TrainConfig load_train_config(const std::filesystem::path& path);

/// Raised for a non-finite loss or gradient; a JSON dump is written first.
class TrainingError : public Error {
public:
    TrainingError(const std::string& msg, std::filesystem::path dump) : Error(msg), dump_(std::move(dump)) {}
    [[nodiscard]] const std::filesystem::path& dump_path() const { return dump_; }

private:
    std::filesystem::path dump_;
};

struct StepLog {
    std::int64_t step = 0;
    int epoch = 0;
    LossReport report;
};

inline constexpr const char* kLogHeader = "step,epoch,l1,l2_g,l3,l4_g,tv,total,d_loss";

std::vector<StepLog> read_log(const std::filesystem::path& path);

/// Resolves `synthetic:N` or a dataset directory into samples.
std::vector<data::WebpageSample> resolve_dataset(const TrainConfig& config);

/// Alternating discriminator/generator training over both stages.
class Trainer {
public:
    explicit Trainer(TrainConfig config);

    /// Continues from a checkpoint written by a previous run; the stored
    /// config is used, optionally with a new epoch budget.
    static Trainer resume(const std::filesystem::path& checkpoint, std::optional<int> epochs = std::nullopt);

    /// Trains until `config().epochs` epochs are done, checkpointing after
    /// each. Returns the last checkpoint path.
    std::filesystem::path run();

    /// One epoch; returns its checkpoint path.
    std::filesystem::path run_epoch();

    [[nodiscard]] const TrainConfig& config() const { return config_; }
    [[nodiscard]] TwoStageModel<float>& model() { return model_; }
    [[nodiscard]] const std::vector<data::WebpageSample>& train_samples() const { return train_; }
    [[nodiscard]] const std::vector<data::WebpageSample>& test_samples() const { return test_; }
    [[nodiscard]] int epochs_done() const { return epoch_; }
    [[nodiscard]] std::int64_t steps_done() const { return step_; }
    /// Rows produced by this process (resumed rows are in the CSV only).
    [[nodiscard]] const std::vector<StepLog>& log() const { return log_; }

    [[nodiscard]] Checkpoint to_checkpoint() const;

private:
    Trainer(TrainConfig config, bool fresh);
    StepLog train_step(const std::vector<std::size_t>& indices, int epoch);
    std::vector<Tensor<float>> batch_outline(const std::vector<std::size_t>& indices, const data::Batch& batch) const;
    void refresh_norm_statistics(int epoch);
    [[noreturn]] void abort_non_finite(const std::string& what, int epoch, const LossReport& partial);
    void append_log(const StepLog& row);
    std::filesystem::path epoch_checkpoint_path(int epoch) const;

    TrainConfig config_;
    TwoStageModel<float> model_;
    Optimizer<float> opt_g_;
    Optimizer<float> opt_d_;
    std::vector<data::WebpageSample> train_;
    std::vector<data::WebpageSample> test_;
    std::vector<std::vector<Tensor<float>>> outlines_;  // per train sample, decoder levels
    int epoch_ = 0;
    std::int64_t step_ = 0;
    std::vector<StepLog> log_;
    std::map<std::string, double> last_grad_norms_;
};

/// Runs a fresh training job to completion.
std::filesystem::path train(const TrainConfig& config);

/// Rebuilds the generator/discriminator from any checkpoint written by training.
TwoStageModel<float> load_model(const std::filesystem::path& checkpoint);

}  // namespace tsgan
