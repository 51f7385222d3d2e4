// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <CLI11.hpp>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gazegan/calibration.hpp"
#include "gazegan/checkpoint.hpp"
#include "gazegan/cyclegan.hpp"
#include "gazegan/error.hpp"
#include "gazegan/pipeline.hpp"
#include "gazegan/pupil.hpp"
#include "gazegan/session.hpp"
#include "gazegan/training.hpp"
#include "gazegan_cli/cli.hpp"
#include "oracles.hpp"
#include "synthetic_eyes.hpp"

using namespace gazegan;
namespace fs = std::filesystem;
namespace oracle = gazegan::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool same_bytes(const nn::Tensor<float>& a, const nn::Tensor<float>& b) {
  return a.shape() == b.shape() && std::equal(a.span().begin(), a.span().end(), b.span().begin(),
                                              [](float x, float y) { return std::bit_cast<std::uint32_t>(x) ==
                                                                           std::bit_cast<std::uint32_t>(y); });
}

/// Training setup of the desk-scale overfit run.
engine::TrainingConfig desk_scale_config() {
  engine::TrainingConfig c;
  c.architecture = {8, 8, 3};
  c.learning_rate = 1e-3;
  c.discriminator_learning_rate = 2e-4;
  c.decay_start_step = 100;
  c.max_steps = 200;
  c.epochs = 13;  // 16 steps per epoch; the step cap ends the run
  c.seed = 12;
  return c;
}

engine::TrainingData desk_scale_data(const std::vector<oracle::SyntheticPair>& pairs) {
  engine::TrainingData d;
  for (const auto& p : pairs) {
    d.domain_a.push_back(p.a);
    d.domain_b.push_back(p.b);
    d.validation_images.push_back(p.a);
    d.validation_centers.push_back(p.center);
  }
  return d;
}

// ---------------------------------------------------------------- criteria

Outcome loss_formulas() {
  const std::vector<double> half(16, 0.5);
  const double adv = engine::adversarial_objective(half, half);
  const double adv_err = std::abs(adv - 2.0 * std::log(0.5));

  engine::TrainingConfig c;
  const double comp = engine::composite_generator_loss(0.3, 0.1, 0.1, 0.05, c);
  const double comp_err = std::abs(comp - 2.55);

  // Identity generators inside a real training step.
  engine::TrainingConfig small;
  small.architecture = {4, 4, 1};
  auto bundle = engine::ModelBundle::create(small);
  bundle.g = nn::Sequential<float>("G");
  bundle.f = nn::Sequential<float>("F");
  engine::TrainerState state(small);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    nn::Tensor<float> a(1, 3, 32, 32), b(1, 3, 32, 32);
    for (auto& v : a.span()) v = u(rng);
    for (auto& v : b.span()) v = u(rng);
    const auto r = engine::train_step(a, b, bundle, state, small);
    for (double v : {r.a_to_b.cycle_fwd, r.a_to_b.cycle_bwd, r.a_to_b.identity, r.b_to_a.cycle_fwd,
                     r.b_to_a.cycle_bwd, r.b_to_a.identity}) {
      worst = std::max(worst, std::abs(v));
    }
  }
  const bool ok = adv_err <= 1e-6 && comp_err <= 1e-6 && worst == 0.0;
  return {ok, "adv(0.5,0.5)=" + fmt("%.7f", adv) + " composite=" + fmt("%.7f", comp) +
                  " identity-generator cycle/id max=" + fmt("%g", worst)};
}

Outcome gradient_check() {
  double worst = 0.0;
  int kinks = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto g = oracle::composite_gradcheck(seed);
    worst = std::max({worst, g.g_error, g.f_error});
    kinks += g.kinks;
  }
  return {worst <= 1e-3, "20 draws, max relative error " + fmt("%.2e", worst) + ", " + std::to_string(kinks) +
                             " kink-straddling differences refined"};
}

Outcome labeling_round_trip() {
  const auto clean = oracle::labeling_round_trip(1000, 2024, 0);
  const auto speckled = oracle::labeling_round_trip(1000, 2025, 200);
  const bool ok = clean.rate() >= 0.99 && speckled.rate() >= 0.95;
  return {ok, "clean " + std::to_string(clean.within_1px) + "/1000, speckle " +
                  std::to_string(speckled.within_1px) + "/1000 within 1 px"};
}

Outcome desk_overfit(const fs::path& work) {
  const auto pairs = oracle::make_synthetic_pairs(16, 42);
  const auto config = desk_scale_config();
  engine::ModelBundle bundle;
  engine::TrainOptions opts;
  opts.output_dir = work / "overfit";
  fs::remove_all(opts.output_dir);
  const auto result = engine::train(desk_scale_data(pairs), config, &bundle, opts);

  std::vector<double> composite;
  for (const auto& r : result.reports) composite.push_back(r.g_a_to_b + r.g_b_to_a);
  bool loss_ok = false;
  double ratio = 0.0;
  if (composite.size() >= 200) {
    const auto smooth = engine::trailing_mean(composite, 20);
    ratio = smooth[199] / smooth[19];
    loss_ok = ratio <= 0.5;
  }

  int direct = 0;
  double worst = 0.0;
  for (const auto& p : pairs) {
    const auto out = engine::translate(bundle, EyeImage(p.a), engine::Direction::AtoB);
    const auto d = pupil::detect_pupil(out);
    const double e = d ? std::hypot(d->cx - p.center.x, d->cy - p.center.y) : INFINITY;
    worst = std::max(worst, e);
    if (e <= 3.0) ++direct;
  }

  // Full frame path with stub face/landmark stages and the trained generator.
  int framed = 0;
  for (const auto& p : pairs) {
    const auto f = oracle::make_frame_fixture(p.a);
    tracker::TrackerState state;
    state.face_detector = std::make_unique<oracle::StubFaceDetector>(std::vector<dataset::RegionBox>{f.face});
    state.landmark_predictor = std::make_unique<oracle::StubLandmarkPredictor>(f.landmarks);
    state.generator = bundle.g;
    const auto u = tracker::run_frame(f.frame, state);
    if (u.pupil && std::hypot(u.pupil->cx - p.center.x, u.pupil->cy - p.center.y) <= 3.0) ++framed;
  }
  const bool ok = result.steps == 200 && loss_ok && direct == 16 && framed == 16;
  return {ok, "steps=" + std::to_string(result.steps) + " smoothed loss ratio " + fmt("%.3f", ratio) +
                  " (need <= 0.5), translate+detect " + std::to_string(direct) + "/16 within 3 px (worst " +
                  fmt("%.1f", worst) + "), frame fixture " + std::to_string(framed) + "/16"};
}

Outcome frozen_fine_tune() {
  const auto pairs = oracle::make_synthetic_pairs(4, 9);
  auto config = desk_scale_config();
  config.decay_start_step = 0;
  config.max_steps = 5;
  auto bundle = engine::ModelBundle::create(config);
  const std::vector<std::string> freeze{"G.down1", "G.down2", "F.down1", "F.down2"};
  std::vector<std::pair<std::string, nn::Tensor<float>>> before;
  for (const char* id : {"G", "F"}) {
    for (auto* p : engine::named_network(bundle, id)) before.emplace_back(std::string(id) + "." + p->name, p->value);
  }
  engine::TrainingData data;
  for (const auto& p : pairs) {
    data.domain_a.push_back(p.a);
    data.domain_b.push_back(p.b);
  }
  const auto r = engine::fine_tune(bundle, data, freeze, engine::kFineTuneDefaultEpochs, {});
  int frozen_total = 0, frozen_same = 0, unfrozen_changed = 0;
  std::size_t k = 0;
  for (const char* id : {"G", "F"}) {
    for (auto* p : engine::named_network(bundle, id)) {
      const auto& [name, old] = before[k++];
      const bool is_frozen = name.find(".down1.") != std::string::npos || name.find(".down2.") != std::string::npos;
      const bool same = same_bytes(old, p->value);
      if (is_frozen) {
        ++frozen_total;
        if (same && p->frozen) ++frozen_same;
      } else if (!same) {
        ++unfrozen_changed;
      }
    }
  }
  const bool ok = r.steps == 5 && frozen_total > 0 && frozen_same == frozen_total && unfrozen_changed >= 1;
  return {ok, "steps=" + std::to_string(r.steps) + ", frozen tensors identical " + std::to_string(frozen_same) +
                  "/" + std::to_string(frozen_total) + ", unfrozen tensors changed " +
                  std::to_string(unfrozen_changed)};
}

Outcome reference_grid(const fs::path& work) {
  const calib::ScreenGeometry g;
  const auto direct = calib::ErrorGrid::from_cells(oracle::kReferenceGridCells);
  const auto targets = calib::calibration_targets(g);
  // Place one trial per target at the cell's angular offset and evaluate.
  std::vector<std::vector<Point2>> trials(20);
  for (int i = 0; i < 20; ++i) {
    const double px = g.viewing_distance_mm * std::tan(oracle::kReferenceGridCells[i] * M_PI / 180.0) /
                      calib::pixel_pitch(g);
    trials[i].push_back({targets[i].center.x + px, targets[i].center.y});
  }
  const auto grid = calib::evaluate_grid(trials, targets, g);

  const fs::path session = work / "reference_session.jsonl";
  tracker::write_session(session, oracle::session_with_cell_errors(oracle::kReferenceGridCells, g));
  std::ostringstream out, err;
  const int code = cli::dispatch({"evaluate", "--session", session.string()}, out, err);
  const bool cli_ok = code == 0 && out.str().find("mean_deg=1.7\n") != std::string::npos;
  const bool ok = direct.overall_mean() == 1.7 && std::abs(grid.overall_mean() - 1.7) <= 1e-9 &&
                  calib::format_degrees(grid.overall_mean()) == "1.7" &&
                  grid.rounded_cells() == direct.rounded_cells() && cli_ok;
  return {ok, "cell mean " + fmt("%.15g", direct.overall_mean()) + ", evaluated mean " +
                  fmt("%.12f", grid.overall_mean()) + ", CLI " + (cli_ok ? "prints mean_deg=1.7" : "mismatch")};
}

Outcome geometry() {
  const calib::ScreenGeometry g;
  const double pitch = calib::pixel_pitch(g);
  const double deg = calib::pixels_to_degrees(78.0, g);
  const int side = calib::square_side_px(g);
  const bool ok = std::abs(pitch - 0.3566) <= 0.001 && std::abs(deg - 3.19) <= 0.02 && std::abs(side - 78) <= 1;
  return {ok, "pitch=" + fmt("%.5f", pitch) + " mm, 78 px=" + fmt("%.3f", deg) + " deg, side=" +
                  std::to_string(side) + " px"};
}

Outcome calibration() {
  const auto noisy = oracle::calibration_oracle(8, 30, 1.0);
  const auto exact = oracle::calibration_oracle(8, 1, 0.0);
  const bool ok = noisy.mean_error_deg <= 0.5 && exact.max_coefficient_error <= 1e-6;
  return {ok, "20x30 trials at 1 px noise: mean " + fmt("%.3f", noisy.mean_error_deg) +
                  " deg; noiseless coefficient error " + fmt("%.1e", exact.max_coefficient_error)};
}

Outcome morphology() {
  const auto laws = oracle::check_morphology_laws(100, 77);
  return {laws.all_hold(), std::to_string(laws.masks) + " masks, failures: duality " +
                               std::to_string(laws.duality_failures) + ", monotonicity " +
                               std::to_string(laws.monotonicity_failures) + ", opening " +
                               std::to_string(laws.opening_failures) + ", oracle " +
                               std::to_string(laws.oracle_failures)};
}

Outcome determinism(const fs::path& work) {
  const auto pairs = oracle::make_synthetic_pairs(4, 31);
  engine::TrainingConfig c;
  c.architecture = {4, 4, 1};
  c.epochs = 2;
  c.seed = 11;
  engine::TrainingData data;
  for (const auto& p : pairs) {
    data.domain_a.push_back(p.a);
    data.domain_b.push_back(p.b);
  }
  std::string logs[2], curves[2];
  engine::ModelBundle bundle;
  for (int i = 0; i < 2; ++i) {
    engine::TrainOptions o;
    o.output_dir = work / ("det_run" + std::to_string(i));
    fs::remove_all(o.output_dir);
    engine::train(data, c, &bundle, o);
    logs[i] = slurp(o.output_dir / "train.log");
    curves[i] = slurp(o.output_dir / "loss_curves.csv");
  }
  const bool same_logs = !logs[0].empty() && logs[0] == logs[1] && curves[0] == curves[1];

  const std::regex grammar(R"(^>\d+, dA\[\d+\.\d{3},\d+\.\d{3}\] dB\[\d+\.\d{3},\d+\.\d{3}\] g\[\d+\.\d{3},\d+\.\d{3}\]$)");
  std::istringstream lines(logs[0]);
  std::string line;
  int total = 0, matching = 0;
  while (std::getline(lines, line)) {
    ++total;
    if (std::regex_match(line, grammar)) ++matching;
  }

  const fs::path ckpt = work / "det_ckpt";
  engine::save_checkpoint(ckpt, bundle);
  const auto loaded = engine::load_checkpoint(ckpt);
  const auto x = engine::image_to_tensor(pairs[0].a);
  const bool same_translation =
      same_bytes(bundle.g(x), loaded.g(x)) && same_bytes(bundle.f(x), loaded.f(x)) &&
      engine::translate(bundle, EyeImage(pairs[1].a), engine::Direction::AtoB).pixels() ==
          engine::translate(loaded, EyeImage(pairs[1].a), engine::Direction::AtoB).pixels();

  // calibrate --replay twice on the same recorded session.
  const auto truth = oracle::default_truth();
  std::vector<calib::GazeSample> session;
  for (const auto& t : calib::calibration_targets(calib::ScreenGeometry{})) {
    const auto fix = oracle::simulate_fixation(truth, t, (t.index - 1) * 5000, 1.0, 150, 900 + t.index);
    session.insert(session.end(), fix.begin(), fix.end());
  }
  tracker::write_session(work / "replay.jsonl", session);
  std::string replay[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out_dir = work / ("replay" + std::to_string(i));
    fs::remove_all(out_dir);
    std::ostringstream out, err;
    const int code = cli::dispatch(
        {"calibrate", "--replay", (work / "replay.jsonl").string(), "--out", out_dir.string()}, out, err);
    replay[i] = std::to_string(code) + out.str() + slurp(out_dir / "model.json") + slurp(out_dir / "report.csv");
  }
  const bool replay_same = replay[0] == replay[1] && replay[0].starts_with("0points=20");

  const bool ok = same_logs && total > 0 && matching == total && same_translation && replay_same;
  return {ok, std::string("same-seed logs ") + (same_logs ? "identical" : "differ") + ", " +
                  std::to_string(matching) + "/" + std::to_string(total) + " lines match grammar, checkpoint " +
                  (same_translation ? "bit-identical" : "differs") + ", calibrate --replay " +
                  (replay_same ? "byte-identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gazegan acceptance suite"};
  std::string work_dir = (fs::temp_directory_path() / "gazegan_acceptance").string();
  std::set<int> only;
  app.add_option("--work-dir", work_dir, "Scratch directory for training outputs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  const fs::path work = work_dir;
  fs::create_directories(work);

  const std::vector<Criterion> criteria = {
      {1, "loss formulas", 1, loss_formulas},
      {2, "composite loss gradient check", 60, gradient_check},
      {3, "labeling round trip", 120, labeling_round_trip},
      {4, "desk-scale overfit", 900, [&] { return desk_overfit(work); }},
      {5, "frozen fine-tune", 120, frozen_fine_tune},
      {6, "reference error grid", 1, [&] { return reference_grid(work); }},
      {7, "screen geometry", 1, geometry},
      {8, "calibration oracle", 10, calibration},
      {9, "morphology laws", 10, morphology},
      {10, "determinism and formats", 1200, [&] { return determinism(work); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %2d %s: %s; %.2f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(),
                secs, c.limit_seconds, in_time ? "" : " over time");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
