#include "gazegan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "gazegan/checkpoint.hpp"
#include "gazegan/error.hpp"
#include "gazegan/image_io.hpp"
#include "gazegan/pupil.hpp"
#include "json_util.hpp"

namespace gazegan::engine {

namespace fs = std::filesystem;

TrainingData load_training_data(const dataset::DatasetPair& pair, std::size_t validation_limit) {
  TrainingData data;
  for (const auto& name : pair.domain_a) data.domain_a.push_back(io::read_image(pair.dir_a() / name));
  for (const auto& name : pair.domain_b) data.domain_b.push_back(io::read_image(pair.dir_b() / name));
  for (const auto& row : pair.labels) {
    if (data.validation_images.size() >= validation_limit) break;
    const auto it = std::find(pair.domain_a.begin(), pair.domain_a.end(), row.filename);
    if (it == pair.domain_a.end()) continue;
    data.validation_images.push_back(data.domain_a[static_cast<std::size_t>(it - pair.domain_a.begin())]);
    data.validation_centers.push_back({static_cast<double>(row.cx), static_cast<double>(row.cy)});
  }
  return data;
}

double detection_success_rate(const nn::Sequential<float>& generator, const std::vector<RgbImage>& images,
                              const std::vector<Point2>& centers, double tolerance_px) {
  if (images.size() != centers.size()) throw Error(ErrorKind::ShapeMismatch, "validation labels mismatch");
  if (images.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const RgbImage out = tensor_to_image(generator(image_to_tensor(images[i])));
    const auto d = pupil::detect_pupil(out);
    if (d && std::hypot(d->cx - centers[i].x, d->cy - centers[i].y) <= tolerance_px) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(images.size());
}

std::vector<double> trailing_mean(const std::vector<double>& values, std::size_t window) {
  if (window == 0) throw Error(ErrorKind::InvalidConfig, "smoothing window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(window, i + 1));
  }
  return out;
}

namespace {

Tensor<float> gather(const std::vector<RgbImage>& images, const std::vector<std::size_t>& order,
                     std::size_t start, int batch) {
  std::vector<const RgbImage*> ptrs;
  for (int k = 0; k < batch; ++k) ptrs.push_back(&images[order[(start + static_cast<std::size_t>(k)) % order.size()]]);
  return images_to_batch(ptrs);
}

std::string checkpoint_name(const char* prefix, std::int64_t n, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%0*lld", prefix, width, static_cast<long long>(n));
  return buf;
}

}  // namespace

TrainResult train(ModelBundle& bundle, const TrainingData& data, const TrainOptions& options) {
  const TrainingConfig& config = bundle.config;
  config.validate();
  if (data.domain_a.empty() || data.domain_b.empty()) {
    throw Error(ErrorKind::EmptyDomain, "both domains need at least one image");
  }
  const bool files = !options.output_dir.empty();
  std::ofstream log, csv;
  fs::path ckpt_root;
  if (files) {
    ckpt_root = options.output_dir / "checkpoints";
    fs::create_directories(ckpt_root);
    log.open(options.output_dir / "train.log", std::ios::binary);
    csv.open(options.output_dir / "loss_curves.csv", std::ios::binary);
    if (!log || !csv) throw Error(ErrorKind::Io, "cannot write training outputs in " + options.output_dir.string());
    csv << kLossCsvHeader << '\n';
  }

  TrainerState state(config);
  const int batch = config.batch_size;
  const std::size_t longest = std::max(data.domain_a.size(), data.domain_b.size());
  const std::size_t steps_per_epoch = (longest + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch);
  std::vector<std::size_t> order_a(data.domain_a.size()), order_b(data.domain_b.size());
  std::mt19937_64 shuffle_rng(config.seed * 6364136223846793005ULL + 1442695040888963407ULL);

  TrainResult result;
  const bool validate = !data.validation_images.empty();
  auto run_validation = [&](const fs::path& ckpt) {
    if (!validate) return;
    const double rate = detection_success_rate(bundle.g, data.validation_images, data.validation_centers,
                                               config.validation_tolerance_px);
    if (rate > result.best_success_rate) {
      result.best_success_rate = rate;
      result.best_epoch = bundle.epoch;
      if (files) {
        nlohmann::json marker{{"epoch", bundle.epoch},
                              {"step", bundle.step},
                              {"success_rate", rate},
                              {"checkpoint", fs::relative(ckpt, options.output_dir).generic_string()}};
        detail::write_file(options.output_dir / "best.json", marker.dump(2) + "\n");
      }
    }
  };

  bool capped = false;
  for (int epoch = 0; epoch < config.epochs && !capped; ++epoch) {
    std::iota(order_a.begin(), order_a.end(), 0);
    std::iota(order_b.begin(), order_b.end(), 0);
    std::shuffle(order_a.begin(), order_a.end(), shuffle_rng);
    std::shuffle(order_b.begin(), order_b.end(), shuffle_rng);
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t start = s * static_cast<std::size_t>(batch);
      if (config.decay_start_step > 0) {
        const double f = config.rate_factor(result.steps);
        bundle.opt_g.set_learning_rate(config.learning_rate * f);
        bundle.opt_f.set_learning_rate(config.learning_rate * f);
        bundle.opt_d_a.set_learning_rate(config.discriminator_rate() * f);
        bundle.opt_d_b.set_learning_rate(config.discriminator_rate() * f);
      }
      const LossReport report = train_step(gather(data.domain_a, order_a, start, batch),
                                           gather(data.domain_b, order_b, start, batch), bundle, state, config);
      result.reports.push_back(report);
      ++result.steps;
      const std::string line = format_log_line(report);
      if (files) {
        log << line << '\n';
        csv << format_loss_csv_row(report) << '\n';
      }
      if (options.echo) *options.echo << line << '\n';
      if (options.on_step) options.on_step(report);
      if (files && config.checkpoint_every > 0 && bundle.step % config.checkpoint_every == 0) {
        const fs::path dir = ckpt_root / checkpoint_name("step", bundle.step, 6);
        save_checkpoint(dir, bundle);
        result.step_checkpoints.push_back(dir);
      }
      if (config.max_steps > 0 && result.steps >= config.max_steps) {
        capped = s + 1 < steps_per_epoch;
        break;
      }
    }
    if (capped) break;
    ++bundle.epoch;
    ++result.epochs_completed;
    fs::path dir;
    if (files) {
      dir = ckpt_root / checkpoint_name("epoch", bundle.epoch, 3);
      save_checkpoint(dir, bundle);
      result.epoch_checkpoints.push_back(dir);
      log.flush();
      csv.flush();
    }
    run_validation(dir);
    if (config.max_steps > 0 && result.steps >= config.max_steps) break;
  }
  if (files) {
    const fs::path last = ckpt_root / "last";
    save_checkpoint(last, bundle);
    if (capped) run_validation(last);
  } else if (capped) {
    run_validation({});
  }
  return result;
}

TrainResult train(const TrainingData& data, const TrainingConfig& config, ModelBundle* out_bundle,
                  const TrainOptions& options) {
  config.validate();
  if (data.domain_a.empty() || data.domain_b.empty()) {
    throw Error(ErrorKind::EmptyDomain, "both domains need at least one image");
  }
  ModelBundle bundle = ModelBundle::create(config);
  TrainResult r = train(bundle, data, options);
  if (out_bundle) *out_bundle = std::move(bundle);
  return r;
}

TrainResult fine_tune(ModelBundle& bundle, const TrainingData& data, const std::vector<std::string>& freeze_spec,
                      int epochs, const TrainOptions& options) {
  if (epochs < 0) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 0");
  apply_freeze(bundle, freeze_spec);
  bundle.config.epochs = epochs;
  return train(bundle, data, options);
}

}  // namespace gazegan::engine
