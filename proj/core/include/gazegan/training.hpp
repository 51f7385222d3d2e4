#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gazegan/cyclegan.hpp"
#include "gazegan/dataset.hpp"

namespace gazegan::engine {

/// Unpaired images for both domains plus optional labeled validation eyes.
struct TrainingData {
  std::vector<RgbImage> domain_a;
  std::vector<RgbImage> domain_b;
  std::vector<RgbImage> validation_images;  // domain A
  std::vector<Point2> validation_centers;
};

/// Loads trainA/trainB and uses labeled domain-A images (at most
/// `validation_limit`) for the best-checkpoint marker.
TrainingData load_training_data(const dataset::DatasetPair& pair, std::size_t validation_limit = 32);

struct TrainOptions {
  /// Receives train.log, loss_curves.csv, checkpoints/ and best.json. Empty
  /// disables all file output.
  std::filesystem::path output_dir;
  /// Called after every step.
  std::function<void(const LossReport&)> on_step;
  /// Mirror log lines here (e.g. stdout) in addition to train.log.
  std::ostream* echo = nullptr;
};

struct TrainResult {
  std::int64_t steps = 0;
  int epochs_completed = 0;
  std::vector<LossReport> reports;
  std::vector<std::filesystem::path> epoch_checkpoints;
  std::vector<std::filesystem::path> step_checkpoints;
  std::optional<int> best_epoch;
  double best_success_rate = -1.0;
};

/// Fraction of validation images whose translated pupil is detected within
/// `tolerance_px` of the label.
double detection_success_rate(const nn::Sequential<float>& generator, const std::vector<RgbImage>& images,
                              const std::vector<Point2>& centers, double tolerance_px);

/// Runs `bundle.config.epochs` epochs (capped by max_steps) over shuffled
/// unpaired batches, continuing from the bundle's step count.
TrainResult train(ModelBundle& bundle, const TrainingData& data, const TrainOptions& options = {});

/// Fresh bundle from `config`, then train().
TrainResult train(const TrainingData& data, const TrainingConfig& config, ModelBundle* out_bundle = nullptr,
                  const TrainOptions& options = {});

/// Freezes `freeze_spec` (see apply_freeze) and trains for `epochs` epochs.
TrainResult fine_tune(ModelBundle& bundle, const TrainingData& data, const std::vector<std::string>& freeze_spec,
                      int epochs = kFineTuneDefaultEpochs, const TrainOptions& options = {});

/// Smoothed series: mean of the trailing `window` values ending at each index.
std::vector<double> trailing_mean(const std::vector<double>& values, std::size_t window);

}  // namespace gazegan::engine
