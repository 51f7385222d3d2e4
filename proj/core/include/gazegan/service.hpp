#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gazegan/pipeline.hpp"
#include "gazegan/session.hpp"

namespace gazegan::tracker {

struct ServiceOptions {
  std::string address = "127.0.0.1";
  /// 0 binds an ephemeral port; see GazeService::port().
  int port = 8765;
  /// Per-client outbound queue bound; the oldest queued message is dropped.
  std::size_t queue_capacity = 256;
  std::filesystem::path session_dir = "sessions";
  calib::ScreenGeometry geometry;
  FixationWindow window;
  /// Stored verbatim as config.json in each session record.
  std::string config_json;
  double max_preview_fps = 10.0;
};

struct ServiceStats {
  std::size_t clients = 0;
  std::uint64_t gaze_messages = 0;
  std::uint64_t dropped = 0;
  std::uint64_t sessions_saved = 0;
};

/// Layout sent to every client on connect.
std::string layout_message(const calib::ScreenGeometry& geometry, double dwell_seconds);
/// Calibration result broadcast after calib_end.
std::string report_message(const calib::ErrorGrid& grid, const std::filesystem::path& record_dir);

/// WebSocket broadcaster plus calibration-session recorder. Network I/O runs
/// on an internal thread; publish(), publish_frame() and control handling
/// belong to the single producer thread.
class GazeService {
 public:
  explicit GazeService(ServiceOptions options);
  ~GazeService();
  GazeService(const GazeService&) = delete;
  GazeService& operator=(const GazeService&) = delete;

  /// Binds and starts accepting. Throws PortInUse.
  void start();
  void stop();
  int port() const noexcept { return bound_port_; }

  /// Applies control messages received from clients, in arrival order.
  void apply_pending_controls();
  /// Parses and applies one control message now (replay path). Returns an
  /// error description for malformed messages.
  std::optional<std::string> handle_control(const std::string& text);

  /// Tags and records the update when a sequence is active, then broadcasts it.
  void publish(const GazeUpdate& update);
  /// JPEG preview, throttled to max_preview_fps by timestamp. Returns true if sent.
  bool publish_frame(const RgbImage& image, std::int64_t timestamp_ms);

  bool calibrating() const noexcept { return calibrating_; }
  std::optional<int> active_target() const noexcept { return active_target_; }
  const std::vector<GazeSample>& recorded() const noexcept { return samples_; }
  std::optional<SessionRecord> last_record() const { return last_record_; }
  std::optional<std::filesystem::path> last_record_dir() const { return last_record_dir_; }
  ServiceStats stats() const;
  std::size_t client_count() const;

  struct Impl;

 private:
  void broadcast(std::string message);
  void finish_sequence();

  ServiceOptions options_;
  std::unique_ptr<Impl> impl_;
  int bound_port_ = 0;
  bool calibrating_ = false;
  std::optional<int> active_target_;
  std::vector<GazeSample> samples_;
  std::optional<SessionRecord> last_record_;
  std::optional<std::filesystem::path> last_record_dir_;
  std::int64_t last_preview_ms_ = -1;
  std::uint64_t sessions_saved_ = 0;
};

/// Producer loop: pulls frames until the source ends or `stop` is set.
void serve(FrameSource& source, TrackerState& state, GazeService& service, const std::atomic<bool>& stop);

/// Feeds a recorded session through the service's recording path: a
/// calib_start, target changes as control messages, every sample as a
/// gaze update, then calib_end.
void replay_through_service(const std::vector<GazeSample>& samples, GazeService& service);

}  // namespace gazegan::tracker
