#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rtgan/datamodel.hpp"
#include "rtgan/framemodel.hpp"
#include "rtgan/losses.hpp"
#include "rtgan/nn/adam.hpp"

namespace rtgan {

struct TrainConfig {
  ModelConfig model;
  double lambda_t = 1.0;
  int epochs = 200;
  int batch_size = 1;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  GanLoss gan_loss = GanLoss::bce;
  int recurrence_horizon = 1;  // 1: y2' backpropagates into y1'; 0: it sees y1' detached
  std::string y1_prev_source = "f_x0";  // previous output fed to the first G call: F(x0), or F(x1)
  int checkpoint_every = 1;
  std::string frame_model_ref;  // cache:<dir> or oracle:<spec>
  std::string x_stream;         // frame directory next to each X entry; empty = the entry's own
  std::string y_stream;         // same for Y entries
  int triplet_stride = 1;
  int pool_size = 0;  // discriminator history buffer in batches; 0 disables it

  void validate() const;
};

std::string train_config_to_string(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are a ConfigError.
TrainConfig train_config_from_string(const std::string& text);
TrainConfig load_train_config(const fs::path& file);
std::string train_config_schema();

// X triplets carry F outputs for all three frames; Y triplets hold real domain-Y frames in `x`.
struct TrainingData {
  std::vector<FrameTriplet> x;
  std::vector<FrameTriplet> y;
  std::uint64_t f_digest = 0;  // digest of every F output, rechecked during training
};

// Reads `x_root/manifest.json` (X entries) and `y_root/manifest.json` (Y entries, or every entry if
// it lists none) and runs F once per referenced X frame. Y frames are converted to RGB.
TrainingData load_training_data(const TrainConfig& cfg, const fs::path& x_root, const fs::path& y_root,
                                const FrameModel& f);

std::uint64_t frame_digest(const std::vector<FrameTriplet>& triplets);

struct EpochLog {
  int epoch = 0;
  long long step = 0;
  LossBreakdown mean;
  double seconds = 0;
};

std::string log_header();
std::string format_log_row(const EpochLog& row);

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  // One D_t update, one D_f update, then one G update, in that order.
  LossBreakdown train_step(const std::vector<const FrameTriplet*>& xb, const std::vector<const FrameTriplet*>& yb);

  // One shuffled pass over data.x; the order depends only on (seed, epoch).
  EpochLog run_epoch(const TrainingData& data);

  void save_checkpoint(const fs::path& file) const;
  void load_checkpoint(const fs::path& file);

  const TrainConfig& config() const { return cfg_; }
  ModelBundle<float>& models() { return models_; }
  const ModelBundle<float>& models() const { return models_; }
  int epoch() const { return epoch_; }
  long long step() const { return step_; }

  // Called after each step; tests use it to count steps.
  std::function<void(long long step, const LossBreakdown&)> on_step;

 private:
  struct PoolEntry {
    nn::Tensor<float> f0, y1, y2, x1;
  };
  PoolEntry query_pool(PoolEntry fresh);
  std::string forensics(const LossBreakdown& parts) const;

  TrainConfig cfg_;
  ModelBundle<float> models_;
  nn::Adam<float> opt_g_, opt_df_, opt_dt_;
  std::vector<PoolEntry> pool_;
  int epoch_ = 0;
  long long step_ = 0;
};

struct Checkpoint {
  std::string config_text;
  int epoch = 0;
  long long step = 0;
};

// Config and counters only; the tensors are skipped.
Checkpoint read_checkpoint_header(const fs::path& file);
// Generator weights from a trainer checkpoint.
Generator<float> load_generator(const fs::path& file);

std::string checkpoint_file_name(int epoch);

struct TrainOptions {
  bool resume = false;     // continue from the newest checkpoint in out_dir
  bool overwrite = false;  // clear a non-empty out_dir first
};

// Full run: writes config.echo, log.csv and ckpt_epoch_%04d.bin files; returns the final checkpoint.
fs::path train(const TrainConfig& cfg, const fs::path& x_root, const fs::path& y_root, const fs::path& out_dir,
               const TrainOptions& options = {});

}  // namespace rtgan
