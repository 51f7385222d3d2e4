#include <benchmark/benchmark.h>

#include <random>

#include "gazegan/calibration.hpp"
#include "gazegan/cyclegan.hpp"
#include "gazegan/dataset.hpp"
#include "gazegan/nn/layers.hpp"
#include "gazegan/pupil.hpp"

using namespace gazegan;

namespace {

nn::Tensor<float> noise(int n, int c, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  nn::Tensor<float> t(n, c, h, w);
  for (auto& v : t.span()) v = d(rng);
  return t;
}

EyeImage painted_eye() {
  EyeImage eye(RgbImage(kEyeWidth, kEyeHeight, {180, 150, 130}));
  return dataset::paint_pupil(eye, {210, 140, 14});
}

void BM_Conv3x3Forward(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  nn::Conv2d<float> conv("conv", ch, ch, 3, 1, 1, nn::Padding::Reflect);
  std::vector<nn::Parameter<float>*> params;
  conv.collect_parameters(params);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> d(0.0f, 0.02f);
  for (auto* p : params) {
    for (auto& v : p->value.span()) v = d(rng);
  }
  const auto x = noise(1, ch, 75, 100, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, nullptr));
}
BENCHMARK(BM_Conv3x3Forward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_GeneratorForward(benchmark::State& state) {
  const int filters = static_cast<int>(state.range(0));
  engine::ArchitectureConfig arch{filters, filters, 3};
  const auto g = engine::build_generator<float>(arch, "G", 1);
  const auto x = noise(1, 3, kEyeHeight, kEyeWidth, 3);
  for (auto _ : state) benchmark::DoNotOptimize(g(x));
}
BENCHMARK(BM_GeneratorForward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  engine::TrainingConfig config;
  config.architecture = {8, 8, 3};
  auto bundle = engine::ModelBundle::create(config);
  engine::TrainerState trainer(config);
  const auto a = noise(1, 3, kEyeHeight, kEyeWidth, 4);
  const auto b = noise(1, 3, kEyeHeight, kEyeWidth, 5);
  for (auto _ : state) benchmark::DoNotOptimize(engine::train_step(a, b, bundle, trainer, config));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_DetectPupil(benchmark::State& state) {
  const auto eye = painted_eye();
  for (auto _ : state) benchmark::DoNotOptimize(pupil::detect_pupil(eye));
}
BENCHMARK(BM_DetectPupil)->Unit(benchmark::kMicrosecond);

void BM_FitMapping(benchmark::State& state) {
  const calib::ScreenGeometry g;
  std::vector<Point2> pupils, screens;
  for (const auto& t : calib::calibration_targets(g)) {
    screens.push_back(t.center);
    pupils.push_back({200 + (t.center.x - 683) / 16, 150 + (t.center.y - 384) / 16});
  }
  for (auto _ : state) benchmark::DoNotOptimize(calib::fit_mapping(pupils, screens, g));
}
BENCHMARK(BM_FitMapping)->Unit(benchmark::kMicrosecond);

}  // namespace

// The packaged benchmark_main archive is LTO bytecode from another compiler build.
BENCHMARK_MAIN();
