#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "gazegan/checkpoint.hpp"
#include "gazegan/error.hpp"

using namespace gazegan;
using namespace gazegan::engine;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gazegan_ckpt_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

TrainingConfig small_config() {
  TrainingConfig c;
  c.architecture = {4, 4, 2};
  c.seed = 21;
  c.lambda_identity = 2.5;
  c.adversarial_form = AdversarialForm::LogLikelihood;
  return c;
}

ModelBundle trained_bundle(int steps) {
  auto config = small_config();
  auto bundle = ModelBundle::create(config);
  TrainerState state(config);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> d(-1, 1);
  Tensor<float> a(1, 3, 32, 32), b(1, 3, 32, 32);
  for (auto& v : a.span()) v = d(rng);
  for (auto& v : b.span()) v = d(rng);
  for (int i = 0; i < steps; ++i) train_step(a, b, bundle, state, config);
  bundle.epoch = 3;
  return bundle;
}

void expect_same_params(const nn::Sequential<float>& x, const nn::Sequential<float>& y) {
  const auto px = x.parameters();
  const auto py = y.parameters();
  ASSERT_EQ(px.size(), py.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    EXPECT_EQ(px[i]->name, py[i]->name);
    EXPECT_TRUE(px[i]->value == py[i]->value) << px[i]->name;
  }
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return ErrorKind::Io;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = scratch("rt");
  const auto bundle = trained_bundle(3);
  save_checkpoint(dir, bundle);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_FALSE(fs::exists(fs::path(dir.string() + ".partial")));

  const auto loaded = load_checkpoint(dir);
  EXPECT_EQ(loaded.config, bundle.config);
  EXPECT_EQ(loaded.step, 3);
  EXPECT_EQ(loaded.epoch, 3);
  expect_same_params(loaded.g, bundle.g);
  expect_same_params(loaded.f, bundle.f);
  expect_same_params(loaded.d_a, bundle.d_a);
  expect_same_params(loaded.d_b, bundle.d_b);
  EXPECT_EQ(loaded.opt_g.steps(), bundle.opt_g.steps());
  ASSERT_EQ(loaded.opt_d_b.first_moments().size(), bundle.opt_d_b.first_moments().size());
  for (std::size_t i = 0; i < bundle.opt_d_b.first_moments().size(); ++i) {
    EXPECT_TRUE(loaded.opt_d_b.first_moments()[i] == bundle.opt_d_b.first_moments()[i]);
    EXPECT_TRUE(loaded.opt_d_b.second_moments()[i] == bundle.opt_d_b.second_moments()[i]);
  }

  RgbImage img(kEyeWidth, kEyeHeight, {90, 140, 200});
  const EyeImage eye(img);
  EXPECT_EQ(translate(loaded, eye, Direction::AtoB).pixels(), translate(bundle, eye, Direction::AtoB).pixels());
  fs::remove_all(dir);
}

TEST(Checkpoint, FreshBundleHasNullAdamState) {
  const auto dir = scratch("fresh");
  save_checkpoint(dir, ModelBundle::create(small_config()));
  std::ifstream in(dir / "manifest.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("format_version"), kCheckpointFormatVersion);
  EXPECT_TRUE(j.at("networks").at("G").at("adam").is_null());
  const auto loaded = load_checkpoint(dir);
  EXPECT_EQ(loaded.opt_g.steps(), 0);
  fs::remove_all(dir);
}

TEST(Checkpoint, OverwritesExistingDirectory) {
  const auto dir = scratch("over");
  save_checkpoint(dir, trained_bundle(1));
  const auto second = trained_bundle(2);
  save_checkpoint(dir, second);
  EXPECT_EQ(load_checkpoint(dir).step, 2);
  fs::remove_all(dir);
}

TEST(Checkpoint, MissingManifest) {
  const auto dir = scratch("missing");
  fs::create_directories(dir);
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir); }), ErrorKind::MissingModelFile);
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir / "nope"); }), ErrorKind::MissingModelFile);
  fs::remove_all(dir);
}

TEST(Checkpoint, TruncatedBlobIsCorrupt) {
  const auto dir = scratch("trunc");
  save_checkpoint(dir, trained_bundle(1));
  const auto blob = dir / "G.down1.conv.bin";
  ASSERT_TRUE(fs::exists(blob)) << "expected per-layer blob";
  fs::resize_file(blob, fs::file_size(blob) - 4);
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir); }), ErrorKind::CorruptCheckpoint);
  fs::remove_all(dir);
}

TEST(Checkpoint, ManifestShapeDisagreementIsCorrupt) {
  const auto dir = scratch("shape");
  save_checkpoint(dir, trained_bundle(1));
  nlohmann::json j;
  {
    std::ifstream in(dir / "manifest.json");
    j = nlohmann::json::parse(in);
  }
  j["networks"]["F"]["layers"][0]["params"][0]["shape"][0] = 99;
  std::ofstream(dir / "manifest.json") << j.dump();
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir); }), ErrorKind::CorruptCheckpoint);

  j["format_version"] = 7;
  std::ofstream(dir / "manifest.json") << j.dump();
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir); }), ErrorKind::CorruptCheckpoint);
  std::ofstream(dir / "manifest.json") << "{not json";
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir); }), ErrorKind::CorruptCheckpoint);
  fs::remove_all(dir);
}

TEST(TrainingConfigJson, RoundTrip) {
  auto c = small_config();
  c.max_steps = 200;
  c.checkpoint_every = 50;
  c.real_label = 1.0;
  EXPECT_EQ(training_config_from_json(training_config_to_json(c)), c);
}

TEST(TrainingConfigJson, DefaultsAndStrictKeys) {
  const auto c = training_config_from_json(R"({"learning_rate": 0.001, "architecture": {"residual_blocks": 3}})");
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.architecture.residual_blocks, 3);
  EXPECT_EQ(c.architecture.generator_filters, TrainingConfig{}.architecture.generator_filters);
  EXPECT_DOUBLE_EQ(c.lambda_cycle, 10.0);
  EXPECT_EQ(kind_of([] { training_config_from_json(R"({"learning_rat": 0.1})"); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([] { training_config_from_json(R"({"architecture": {"depth": 2}})"); }),
            ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([] { training_config_from_json(R"({"batch_size": 0})"); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([] { training_config_from_json(R"({"adversarial_form": "hinge"})"); }), ErrorKind::InvalidConfig);
}
