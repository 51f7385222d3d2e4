#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <thread>

#include <json.hpp>

#include "gazegan/error.hpp"
#include "gazegan/service.hpp"
#include "oracles.hpp"
#include "ws_client.hpp"

using namespace gazegan;
using namespace gazegan::tracker;
using nlohmann::json;
namespace fs = std::filesystem;
namespace oracle = gazegan::testing;
using namespace std::chrono_literals;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gazegan_svc_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

ServiceOptions ephemeral(const fs::path& sessions) {
  ServiceOptions o;
  o.port = 0;
  o.session_dir = sessions;
  o.config_json = "{\"test\": true}\n";
  return o;
}

template <typename Pred>
bool wait_for(Pred pred, std::chrono::milliseconds limit = 3000ms) {
  const auto end = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < end) {
    if (pred()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return pred();
}

/// Next message of the given type, skipping others.
std::optional<json> next_of_type(oracle::WsClient& c, const std::string& type) {
  for (int i = 0; i < 100000; ++i) {
    const auto m = c.receive();
    if (!m) return std::nullopt;
    auto j = json::parse(*m);
    if (j.at("type") == type) return j;
  }
  return std::nullopt;
}

std::vector<GazeSample> simulated_session(double noise) {
  const auto truth = oracle::default_truth();
  std::vector<GazeSample> out;
  for (const auto& t : calib::calibration_targets(calib::ScreenGeometry{})) {
    const auto fix = oracle::simulate_fixation(truth, t, (t.index - 1) * 5000, noise, 150, 70 + t.index);
    out.insert(out.end(), fix.begin(), fix.end());
  }
  return out;
}

}  // namespace

TEST(Protocol, LayoutMessage) {
  const auto j = json::parse(layout_message(calib::ScreenGeometry{}, 5.0));
  EXPECT_EQ(j.at("type"), "layout");
  EXPECT_EQ(j.at("screen").at("width"), 1366);
  EXPECT_EQ(j.at("screen").at("height"), 768);
  EXPECT_EQ(j.at("dwell_seconds"), 5.0);
  ASSERT_EQ(j.at("targets").size(), 20u);
  const auto targets = calib::calibration_targets(calib::ScreenGeometry{});
  for (int i = 0; i < 20; ++i) {
    const auto& t = j.at("targets").at(i);
    EXPECT_EQ(t.at("index"), i + 1);
    EXPECT_EQ(t.at("side"), 78);
    EXPECT_EQ(t.at("x").get<double>(), targets[i].center.x);
    const auto color = t.at("color").get<std::string>();
    EXPECT_EQ(color.size(), 7u);
    EXPECT_EQ(color[0], '#');
  }
}

TEST(Protocol, ReportMessage) {
  const auto grid = calib::ErrorGrid::from_cells(oracle::kReferenceGridCells);
  const auto j = json::parse(report_message(grid, "sessions/session_0001"));
  EXPECT_EQ(j.at("type"), "report");
  EXPECT_EQ(j.at("cells").size(), 20u);
  EXPECT_EQ(j.at("rounded").size(), 20u);
  EXPECT_EQ(j.at("mean_text"), "1.7");
  EXPECT_NEAR(j.at("mean_deg").get<double>(), 1.7, 1e-12);
  EXPECT_EQ(j.at("record"), "sessions/session_0001");
}

TEST(Controls, StateMachine) {
  GazeService svc(ephemeral(scratch("controls")));
  EXPECT_TRUE(svc.handle_control("nope"));
  EXPECT_TRUE(svc.handle_control(R"({"kind":"x"})"));
  EXPECT_TRUE(svc.handle_control(R"({"type":"dance"})"));
  EXPECT_TRUE(svc.handle_control(R"({"type":"calib_end"})"));
  EXPECT_FALSE(svc.handle_control(R"({"type":"calib_start"})"));
  EXPECT_TRUE(svc.calibrating());
  EXPECT_TRUE(svc.handle_control(R"({"type":"target","index":21})"));
  EXPECT_TRUE(svc.handle_control(R"({"type":"target"})"));
  EXPECT_FALSE(svc.handle_control(R"({"type":"target","index":4})"));
  EXPECT_EQ(svc.active_target(), 4);

  GazeUpdate u;
  u.timestamp_ms = 10;
  u.pupil = PupilFix{1, 2, 0.9};
  svc.publish(u);
  u.pupil.reset();
  u.timestamp_ms = 20;
  svc.publish(u);  // pupil-less updates are not recorded
  ASSERT_EQ(svc.recorded().size(), 1u);
  EXPECT_EQ(svc.recorded()[0].target_index, 4);
  EXPECT_EQ(svc.recorded()[0].confidence, 0.9);

  EXPECT_FALSE(svc.handle_control(R"({"type":"target","index":null})"));
  EXPECT_FALSE(svc.active_target());
  EXPECT_FALSE(svc.handle_control(R"({"type":"calib_abort"})"));
  EXPECT_FALSE(svc.calibrating());
  EXPECT_TRUE(svc.recorded().empty());
}

TEST(Replay, WritesSessionRecord) {
  const auto dir = scratch("replay");
  GazeService svc(ephemeral(dir));
  const auto samples = simulated_session(0.5);
  replay_through_service(samples, svc);
  ASSERT_TRUE(svc.last_record());
  EXPECT_EQ(svc.last_record()->samples, samples);
  EXPECT_EQ(*svc.last_record_dir(), dir / "session_0001");
  EXPECT_LE(svc.last_record()->report.overall_mean(), 0.5);
  for (const char* f : {"session.jsonl", "model.json", "report.csv", "config.json"}) {
    EXPECT_TRUE(fs::exists(dir / "session_0001" / f)) << f;
  }
  EXPECT_EQ(read_session(dir / "session_0001" / "session.jsonl"), samples);
  EXPECT_EQ(svc.stats().sessions_saved, 1u);
  fs::remove_all(dir);
}

TEST(Replay, FailedCalibrationKeepsRawSamples) {
  const auto dir = scratch("failed");
  GazeService svc(ephemeral(dir));
  auto samples = simulated_session(0.0);
  samples.resize(150 * 3);
  replay_through_service(samples, svc);
  EXPECT_FALSE(svc.last_record());
  EXPECT_EQ(read_session(dir / "session_0001" / "session.jsonl"), samples);
  EXPECT_FALSE(fs::exists(dir / "session_0001" / "model.json"));
  fs::remove_all(dir);
}

TEST(Service, WebSocketRoundTrip) {
  const auto dir = scratch("ws");
  GazeService svc(ephemeral(dir));
  svc.start();
  ASSERT_GT(svc.port(), 0);
  oracle::WsClient client("127.0.0.1", svc.port());
  const auto hello = next_of_type(client, "layout");
  ASSERT_TRUE(hello);
  EXPECT_EQ(hello->at("targets").size(), 20u);
  ASSERT_TRUE(wait_for([&] { return svc.client_count() == 1; }));

  GazeUpdate u;
  u.timestamp_ms = 5;
  u.seq = 9;
  u.pupil = PupilFix{200, 150, 1};
  svc.publish(u);
  const auto gaze = next_of_type(client, "gaze");
  ASSERT_TRUE(gaze);
  EXPECT_EQ(gaze->at("seq"), 9);
  EXPECT_EQ(gaze->at("px").get<double>(), 200);

  client.send(R"({"type":"calib_start"})");
  client.send(R"({"type":"target","index":2})");
  ASSERT_TRUE(wait_for([&] {
    svc.apply_pending_controls();
    return svc.active_target() == 2;
  }));
  EXPECT_TRUE(svc.calibrating());

  client.send(R"({"type":"bogus"})");
  client.send(R"({"type":"target","index":5})");
  ASSERT_TRUE(wait_for([&] {
    svc.apply_pending_controls();
    return svc.active_target() == 5;
  }));
  const auto err = next_of_type(client, "error");
  ASSERT_TRUE(err);
  EXPECT_NE(err->at("message").get<std::string>().find("bogus"), std::string::npos);

  client.send(R"({"type":"calib_abort"})");
  ASSERT_TRUE(wait_for([&] {
    svc.apply_pending_controls();
    return !svc.calibrating();
  }));

  replay_through_service(simulated_session(0.0), svc);
  const auto report = next_of_type(client, "report");
  ASSERT_TRUE(report);
  EXPECT_LT(report->at("mean_deg").get<double>(), 1e-6);
  EXPECT_EQ(report->at("cells").size(), 20u);

  EXPECT_GE(svc.stats().gaze_messages, 3001u);
  client.close();
  svc.stop();
  fs::remove_all(dir);
}

TEST(Service, PortInUse) {
  GazeService first(ephemeral(scratch("p1")));
  first.start();
  auto opts = ephemeral(scratch("p2"));
  opts.port = first.port();
  GazeService second(opts);
  try {
    second.start();
    FAIL() << "second bind succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PortInUse);
  }
}

TEST(Service, PreviewThrottle) {
  GazeService svc(ephemeral(scratch("preview")));
  const RgbImage img(40, 30, {1, 2, 3});
  EXPECT_TRUE(svc.publish_frame(img, 0));
  EXPECT_FALSE(svc.publish_frame(img, 50));
  EXPECT_TRUE(svc.publish_frame(img, 100));
  auto opts = ephemeral(scratch("preview_off"));
  opts.max_preview_fps = 0;
  GazeService off(opts);
  EXPECT_FALSE(off.publish_frame(img, 0));
}

TEST(Service, RejectsZeroQueue) {
  auto opts = ephemeral(scratch("q"));
  opts.queue_capacity = 0;
  EXPECT_THROW(GazeService{opts}, Error);
}
