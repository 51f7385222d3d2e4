#include "gazegan/service.hpp"

#include <chrono>
#include <cstdio>
#include <deque>
#include <iostream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/core/detail/base64.hpp>
#include <boost/beast/websocket.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gazegan/error.hpp"
#include "gazegan/image_io.hpp"
#include "json_util.hpp"

namespace gazegan::tracker {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

std::string layout_message(const calib::ScreenGeometry& geometry, double dwell_seconds) {
  json targets = json::array();
  for (const auto& t : calib::calibration_targets(geometry, dwell_seconds)) {
    char color[8];
    std::snprintf(color, sizeof(color), "#%02x%02x%02x", t.color.r, t.color.g, t.color.b);
    targets.push_back({{"index", t.index},
                       {"row", t.row},
                       {"col", t.col},
                       {"x", t.center.x},
                       {"y", t.center.y},
                       {"side", t.square_side},
                       {"color", color}});
  }
  json j{{"type", "layout"},
         {"screen", {{"width", geometry.horizontal_px}, {"height", geometry.vertical_px}}},
         {"dwell_seconds", dwell_seconds},
         {"targets", targets}};
  return j.dump();
}

std::string report_message(const calib::ErrorGrid& grid, const std::filesystem::path& record_dir) {
  json j{{"type", "report"},
         {"cells", grid.cells()},
         {"rounded", grid.rounded_cells()},
         {"mean_deg", grid.overall_mean()},
         {"mean_text", calib::format_degrees(grid.overall_mean())},
         {"record", record_dir.generic_string()}};
  return j.dump();
}

// ------------------------------------------------------------ transport

namespace {

class Client : public std::enable_shared_from_this<Client> {
 public:
  Client(tcp::socket socket, GazeService::Impl& owner, std::size_t capacity)
      : ws_(std::move(socket)), owner_(owner), capacity_(capacity) {}

  void run(std::string hello);
  void send(std::shared_ptr<const std::string> message);
  void close();
  std::uint64_t dropped() const noexcept { return dropped_; }

 private:
  void read();
  void write();

  websocket::stream<tcp::socket> ws_;
  GazeService::Impl& owner_;
  std::size_t capacity_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool writing_ = false;
  bool open_ = false;
  std::uint64_t dropped_ = 0;
};

}  // namespace

struct GazeService::Impl {
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::thread thread;
  std::vector<std::weak_ptr<Client>> clients;  // io thread only
  std::string hello;
  std::size_t capacity = 0;

  std::mutex control_mutex;
  std::deque<std::string> controls;

  std::atomic<std::size_t> client_count{0};
  std::atomic<std::uint64_t> gaze_messages{0};
  std::atomic<std::uint64_t> dropped{0};

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto c = std::make_shared<Client>(std::move(socket), *this, capacity);
      clients.push_back(c);
      c->run(hello);
      accept();
    });
  }

  void prune() {
    std::erase_if(clients, [](const std::weak_ptr<Client>& w) { return w.expired(); });
  }
};

namespace {

void Client::run(std::string hello) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept([self = shared_from_this(), hello = std::move(hello)](beast::error_code ec) {
    if (ec) return;
    self->open_ = true;
    ++self->owner_.client_count;
    self->send(std::make_shared<const std::string>(hello));
    self->read();
  });
}

void Client::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->open_ = false;
      if (self->dropped_ > 0) {
        std::cerr << "client closed; " << self->dropped_ << " updates dropped\n";
      }
      self->owner_.prune();
      if (self->owner_.client_count > 0) --self->owner_.client_count;
      return;
    }
    {
      std::lock_guard lock(self->owner_.control_mutex);
      self->owner_.controls.push_back(beast::buffers_to_string(self->buffer_.data()));
    }
    self->buffer_.consume(self->buffer_.size());
    self->read();
  });
}

void Client::send(std::shared_ptr<const std::string> message) {
  if (!open_) return;
  if (queue_.size() >= capacity_) {
    // Never drop the message currently being written.
    const std::size_t victim = writing_ ? 1 : 0;
    if (victim < queue_.size()) {
      queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(victim));
      ++dropped_;
      ++owner_.dropped;
    }
  }
  queue_.push_back(std::move(message));
  if (!writing_) write();
}

void Client::write() {
  writing_ = true;
  ws_.text(true);
  ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    self->queue_.pop_front();
    self->writing_ = false;
    if (ec) {
      self->open_ = false;
      return;
    }
    if (!self->queue_.empty()) self->write();
  });
}

void Client::close() {
  if (!open_) return;
  open_ = false;
  ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
}

}  // namespace

// -------------------------------------------------------------- service

GazeService::GazeService(ServiceOptions options) : options_(std::move(options)), impl_(std::make_unique<Impl>()) {
  if (options_.queue_capacity < 1) throw Error(ErrorKind::ConfigError, "queue_capacity must be >= 1");
  impl_->capacity = options_.queue_capacity;
  impl_->hello = layout_message(options_.geometry, options_.window.dwell_seconds);
}

GazeService::~GazeService() { stop(); }

void GazeService::start() {
  beast::error_code ec;
  const auto address = asio::ip::make_address(options_.address, ec);
  if (ec) throw Error(ErrorKind::ConfigError, "bad listen address " + options_.address);
  const tcp::endpoint endpoint(address, static_cast<unsigned short>(options_.port));
  auto& acc = impl_->acceptor;
  acc.open(endpoint.protocol(), ec);
  if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(endpoint, ec);
  if (ec == asio::error::address_in_use || ec == asio::error::access_denied) {
    throw Error(ErrorKind::PortInUse, "port " + std::to_string(options_.port) + " is unavailable");
  }
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw Error(ErrorKind::Io, "listen failed: " + ec.message());
  bound_port_ = acc.local_endpoint().port();
  impl_->accept();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

void GazeService::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  asio::post(impl_->io, [impl = impl_.get()] {
    beast::error_code ec;
    impl->acceptor.close(ec);
    for (auto& w : impl->clients) {
      if (auto c = w.lock()) c->close();
    }
  });
  // Give close frames a moment, then stop the loop.
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  impl_->io.stop();
  impl_->thread.join();
}

ServiceStats GazeService::stats() const {
  return {impl_->client_count.load(), impl_->gaze_messages.load(), impl_->dropped.load(), sessions_saved_};
}

std::size_t GazeService::client_count() const { return impl_->client_count.load(); }

void GazeService::broadcast(std::string message) {
  auto shared = std::make_shared<const std::string>(std::move(message));
  asio::post(impl_->io, [impl = impl_.get(), shared] {
    for (auto& w : impl->clients) {
      if (auto c = w.lock()) c->send(shared);
    }
  });
}

void GazeService::apply_pending_controls() {
  std::deque<std::string> pending;
  {
    std::lock_guard lock(impl_->control_mutex);
    pending.swap(impl_->controls);
  }
  for (const auto& text : pending) {
    if (auto err = handle_control(text)) {
      broadcast(json{{"type", "error"}, {"message", *err}}.dump());
    }
  }
}

std::optional<std::string> GazeService::handle_control(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    return "control message is not JSON";
  }
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) return "control message needs a type";
  const std::string type = j.at("type").get<std::string>();
  if (type == "calib_start") {
    calibrating_ = true;
    active_target_.reset();
    samples_.clear();
  } else if (type == "target") {
    if (!j.contains("index")) return "target message needs an index";
    const json& idx = j.at("index");
    if (idx.is_null()) {
      active_target_.reset();
    } else if (idx.is_number_integer() && idx.get<int>() >= 1 && idx.get<int>() <= calib::kTargetCount) {
      active_target_ = idx.get<int>();
    } else {
      return "target index must be 1..20";
    }
  } else if (type == "calib_end") {
    if (!calibrating_) return "calib_end without calib_start";
    finish_sequence();
  } else if (type == "calib_abort") {
    calibrating_ = false;
    active_target_.reset();
    samples_.clear();
  } else {
    return "unknown control type '" + type + "'";
  }
  return std::nullopt;
}

void GazeService::finish_sequence() {
  calibrating_ = false;
  active_target_.reset();
  SessionRecord record;
  record.config_json = options_.config_json;
  record.samples = std::move(samples_);
  samples_.clear();
  char name[32];
  std::snprintf(name, sizeof(name), "session_%04llu", static_cast<unsigned long long>(sessions_saved_ + 1));
  const auto dir = options_.session_dir / name;
  try {
    const auto outcome = calibrate_session(record.samples, options_.geometry, options_.window);
    record.model = outcome.model;
    record.report = outcome.report;
  } catch (const Error& e) {
    // Keep the raw samples so the sequence can be inspected or replayed.
    std::filesystem::create_directories(dir);
    write_session(dir / "session.jsonl", record.samples);
    ++sessions_saved_;
    broadcast(json{{"type", "error"}, {"message", std::string("calibration failed: ") + e.what()}}.dump());
    return;
  }
  save_session_record(dir, record);
  ++sessions_saved_;
  last_record_dir_ = dir;
  broadcast(report_message(record.report, dir));
  last_record_ = std::move(record);
}

void GazeService::publish(const GazeUpdate& update) {
  apply_pending_controls();
  if (calibrating_ && update.pupil) {
    GazeSample s;
    s.timestamp_ms = update.timestamp_ms;
    s.px = update.pupil->cx;
    s.py = update.pupil->cy;
    s.confidence = update.pupil->confidence;
    s.target_index = active_target_;
    s.screen = update.screen;
    if (samples_.empty() || samples_.back().timestamp_ms <= s.timestamp_ms) samples_.push_back(s);
  }
  ++impl_->gaze_messages;
  broadcast(gaze_message(update));
}

bool GazeService::publish_frame(const RgbImage& image, std::int64_t timestamp_ms) {
  if (options_.max_preview_fps <= 0) return false;
  const double min_gap = 1000.0 / options_.max_preview_fps;
  if (last_preview_ms_ >= 0 && static_cast<double>(timestamp_ms - last_preview_ms_) < min_gap) return false;
  last_preview_ms_ = timestamp_ms;
  std::vector<unsigned char> jpeg;
  cv::imencode(".jpg", io::to_bgr_mat(image), jpeg);
  std::string b64(beast::detail::base64::encoded_size(jpeg.size()), '\0');
  b64.resize(beast::detail::base64::encode(b64.data(), jpeg.data(), jpeg.size()));
  broadcast(json{{"type", "frame"}, {"t", timestamp_ms}, {"jpeg_b64", b64}}.dump());
  return true;
}

void serve(FrameSource& source, TrackerState& state, GazeService& service, const std::atomic<bool>& stop) {
  while (!stop) {
    auto frame = source.next();
    if (!frame) break;
    service.publish(run_frame(*frame, state));
    service.publish_frame(frame->pixels, frame->timestamp_ms);
  }
  service.apply_pending_controls();
}

void replay_through_service(const std::vector<GazeSample>& samples, GazeService& service) {
  service.handle_control(R"({"type":"calib_start"})");
  std::optional<int> current;
  std::uint64_t seq = 1;
  for (const auto& s : samples) {
    if (s.target_index != current) {
      current = s.target_index;
      service.handle_control(json{{"type", "target"}, {"index", current ? json(*current) : json(nullptr)}}.dump());
    }
    GazeUpdate u;
    u.timestamp_ms = s.timestamp_ms;
    u.pupil = PupilFix{s.px, s.py, s.confidence};
    u.screen = s.screen;
    u.seq = seq++;
    service.publish(u);
  }
  service.handle_control(R"({"type":"calib_end"})");
}

}  // namespace gazegan::tracker
