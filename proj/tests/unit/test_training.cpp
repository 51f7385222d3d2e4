#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gazegan/checkpoint.hpp"
#include "gazegan/dataset.hpp"
#include "gazegan/error.hpp"
#include "gazegan/image_io.hpp"
#include "gazegan/training.hpp"
#include "synthetic_eyes.hpp"

using namespace gazegan;
using namespace gazegan::engine;
namespace fs = std::filesystem;
namespace synth = gazegan::testing;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gazegan_train_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

TrainingData small_data(int a_count, int b_count) {
  synth::SyntheticEyeOptions opt;
  opt.width = 32;
  opt.height = 32;
  opt.min_radius = 3;
  opt.max_radius = 4;
  const auto pairs = synth::make_synthetic_pairs(std::max(a_count, b_count), 17, opt);
  TrainingData d;
  for (int i = 0; i < a_count; ++i) d.domain_a.push_back(pairs[i].a);
  for (int i = 0; i < b_count; ++i) d.domain_b.push_back(pairs[i].b);
  return d;
}

TrainingConfig small_config() {
  TrainingConfig c;
  c.architecture = {4, 4, 1};
  c.seed = 3;
  c.epochs = 2;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(TrailingMean, WindowedAverage) {
  const auto m = trailing_mean({1, 2, 3, 4, 5, 6}, 3);
  const std::vector<double> expected = {1, 1.5, 2, 3, 4, 5};
  ASSERT_EQ(m.size(), expected.size());
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_DOUBLE_EQ(m[i], expected[i]);
  EXPECT_TRUE(trailing_mean({}, 4).empty());
  EXPECT_THROW(trailing_mean({1}, 0), Error);
}

TEST(Train, EpochLengthFollowsLargerDomain) {
  auto config = small_config();
  config.batch_size = 2;
  const auto r = train(small_data(5, 3), config);
  // ceil(5 / 2) = 3 steps per epoch.
  EXPECT_EQ(r.steps, 6);
  EXPECT_EQ(r.epochs_completed, 2);
  ASSERT_EQ(r.reports.size(), 6u);
  EXPECT_EQ(r.reports.back().step, 6);
}

TEST(Train, MaxStepsCapsMidEpoch) {
  auto config = small_config();
  config.epochs = 10;
  config.max_steps = 5;
  ModelBundle bundle;
  const auto r = train(small_data(4, 4), config, &bundle);
  EXPECT_EQ(r.steps, 5);
  EXPECT_EQ(r.epochs_completed, 1);
  EXPECT_EQ(bundle.step, 5);
  EXPECT_EQ(bundle.epoch, 1);
}

TEST(Train, EmptyDomainRejected) {
  try {
    train(small_data(2, 0), small_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyDomain);
  }
}

TEST(Train, SameSeedSameLog) {
  const auto data = small_data(3, 3);
  const auto a = train(data, small_config());
  const auto b = train(data, small_config());
  ASSERT_EQ(a.reports.size(), b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    EXPECT_EQ(format_loss_csv_row(a.reports[i]), format_loss_csv_row(b.reports[i]));
  }
  auto other = small_config();
  other.seed = 4;
  EXPECT_NE(format_loss_csv_row(train(data, other).reports.back()), format_loss_csv_row(a.reports.back()));
}

TEST(Train, WritesLogsCheckpointsAndBestMarker) {
  const auto out = scratch("outputs");
  auto data = small_data(3, 3);
  synth::SyntheticEyeOptions opt;
  opt.width = 32;
  opt.height = 32;
  opt.min_radius = 3;
  opt.max_radius = 4;
  for (const auto& p : synth::make_synthetic_pairs(2, 99, opt)) {
    data.validation_images.push_back(p.a);
    data.validation_centers.push_back(p.center);
  }
  auto config = small_config();
  config.checkpoint_every = 2;
  std::ostringstream echo;
  int callbacks = 0;
  TrainOptions options;
  options.output_dir = out;
  options.echo = &echo;
  options.on_step = [&](const LossReport&) { ++callbacks; };
  const auto r = train(data, config, nullptr, options);

  EXPECT_EQ(callbacks, 6);
  const std::string log = slurp(out / "train.log");
  EXPECT_EQ(log, echo.str());
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 6);
  const std::string csv = slurp(out / "loss_curves.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kLossCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);

  EXPECT_TRUE(fs::exists(out / "checkpoints" / "epoch_001" / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "epoch_002" / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "step_000002" / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "step_000006" / "manifest.json"));
  EXPECT_EQ(r.step_checkpoints.size(), 3u);
  EXPECT_EQ(load_checkpoint(out / "checkpoints" / "last").step, 6);

  ASSERT_TRUE(r.best_epoch.has_value());
  const auto best = nlohmann::json::parse(slurp(out / "best.json"));
  EXPECT_EQ(best.at("epoch"), *r.best_epoch);
  EXPECT_DOUBLE_EQ(best.at("success_rate").get<double>(), r.best_success_rate);
  EXPECT_TRUE(fs::exists(out / best.at("checkpoint").get<std::string>() / "manifest.json"));
  fs::remove_all(out);
}

TEST(Train, ContinuesFromCheckpointStep) {
  const auto data = small_data(2, 2);
  ModelBundle bundle;
  train(data, small_config(), &bundle);
  EXPECT_EQ(bundle.step, 4);
  bundle.config.epochs = 1;
  const auto r = train(bundle, data);
  EXPECT_EQ(r.reports.front().step, 5);
  EXPECT_EQ(bundle.step, 6);
  EXPECT_EQ(bundle.epoch, 3);
}

TEST(FineTune, FrozenLayersStayFixed) {
  const auto data = small_data(2, 2);
  ModelBundle bundle;
  train(data, small_config(), &bundle);
  const ModelBundle before = bundle;
  const auto r = fine_tune(bundle, data, {"G.down1", "G.down2", "F.down1", "F.down2"}, 1);
  EXPECT_EQ(r.steps, 2);
  const auto pb = before.g.parameters();
  const auto pa = bundle.g.parameters();
  bool some_changed = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const bool frozen = nn::has_component_prefix(pa[i]->name, "down1") || nn::has_component_prefix(pa[i]->name, "down2");
    if (frozen) {
      EXPECT_TRUE(pa[i]->value == pb[i]->value) << pa[i]->name;
    } else if (!(pa[i]->value == pb[i]->value)) {
      some_changed = true;
    }
  }
  EXPECT_TRUE(some_changed);
  EXPECT_THROW(fine_tune(bundle, data, {"G.bottleneck"}, 1), Error);
}

TEST(DetectionRate, CountsWithinTolerance) {
  // An identity-like "generator" cannot be built from layers without
  // training, so score the B images through a network that outputs its input.
  nn::Sequential<float> identity("G");
  synth::SyntheticEyeOptions opt;
  const auto pairs = synth::make_synthetic_pairs(3, 5, opt);
  std::vector<RgbImage> images;
  std::vector<Point2> centers;
  for (const auto& p : pairs) {
    images.push_back(p.b);
    centers.push_back(p.center);
  }
  EXPECT_DOUBLE_EQ(detection_success_rate(identity, images, centers, 1.0), 1.0);
  centers[0].x += 50;
  EXPECT_NEAR(detection_success_rate(identity, images, centers, 3.0), 2.0 / 3.0, 1e-12);
  centers.pop_back();
  EXPECT_THROW(detection_success_rate(identity, images, centers, 3.0), Error);
}

TEST(LoadTrainingData, UsesLabeledDomainAImages) {
  const auto root = scratch("data");
  const auto pairs = synth::make_synthetic_pairs(3, 8);
  std::vector<dataset::NamedEyeImage> raw;
  std::vector<dataset::LabelRow> labels;
  for (int i = 0; i < 3; ++i) {
    const std::string name = "eye_" + std::to_string(i) + ".png";
    raw.push_back({name, EyeImage(pairs[i].a)});
    if (i != 1) {
      labels.push_back({name, static_cast<int>(pairs[i].center.x), static_cast<int>(pairs[i].center.y), 12});
    }
  }
  const auto pair = dataset::build_domain_pair(raw, labels, root);
  const auto data = load_training_data(pair);
  EXPECT_EQ(data.domain_a.size(), 3u);
  EXPECT_EQ(data.domain_b.size(), 2u);
  ASSERT_EQ(data.validation_images.size(), 2u);
  EXPECT_EQ(data.validation_images[1], pairs[2].a);
  EXPECT_EQ(load_training_data(pair, 1).validation_images.size(), 1u);
  fs::remove_all(root);
}

TEST(Training, LinearRateDecay) {
  engine::TrainingConfig c;
  c.max_steps = 200;
  c.decay_start_step = 100;
  EXPECT_EQ(c.rate_factor(0), 1.0);
  EXPECT_EQ(c.rate_factor(99), 1.0);
  EXPECT_EQ(c.rate_factor(100), 1.0);
  EXPECT_DOUBLE_EQ(c.rate_factor(150), 0.5);
  EXPECT_DOUBLE_EQ(c.rate_factor(199), 0.01);
  EXPECT_NO_THROW(c.validate());
  c.max_steps = 100;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  EXPECT_EQ(c.rate_factor(1000), 1.0);
  EXPECT_EQ(c.discriminator_rate(), c.learning_rate);
  c.discriminator_learning_rate = 5e-5;
  EXPECT_EQ(c.discriminator_rate(), 5e-5);
  auto small = small_config();
  small.discriminator_learning_rate = 5e-5;
  const auto bundle = engine::ModelBundle::create(small);
  EXPECT_EQ(bundle.opt_g.options().learning_rate, small.learning_rate);
  EXPECT_EQ(bundle.opt_d_a.options().learning_rate, bundle.config.discriminator_rate());
  EXPECT_EQ(engine::training_config_from_json(engine::training_config_to_json(c)), c);
}
