#include "gazegan_cli/cli.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gazegan/calibration.hpp"
#include "gazegan/checkpoint.hpp"
#include "gazegan/dataset.hpp"
#include "gazegan/error.hpp"
#include "gazegan/image_io.hpp"
#include "gazegan/pipeline.hpp"
#include "gazegan/service.hpp"
#include "gazegan/session.hpp"
#include "gazegan/training.hpp"

namespace gazegan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

std::string slurp(const fs::path& p, ErrorKind missing) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(missing, "cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
  out << text;
}

calib::ScreenGeometry parse_geometry(const std::string& arg) {
  if (arg.empty() || arg == "default") return {};
  return calib::geometry_from_json(slurp(arg, ErrorKind::ConfigError));
}

/// dataset + output_dir + training block.
struct TrainJob {
  fs::path dataset;
  fs::path output_dir;
  std::size_t validation_limit = 32;
  engine::TrainingConfig training;
};

TrainJob load_train_job(const fs::path& path) {
  const std::string text = slurp(path, ErrorKind::ConfigError);
  try {
    const json j = json::parse(text);
    TrainJob job;
    const fs::path base = path.parent_path();
    auto rel = [&](const std::string& key) -> fs::path {
      if (!j.contains(key)) throw Error(ErrorKind::ConfigError, "config is missing '" + key + "'");
      fs::path p = j.at(key).get<std::string>();
      return p.is_absolute() || base.empty() ? p : base / p;
    };
    job.dataset = rel("dataset");
    job.output_dir = rel("output_dir");
    job.validation_limit = j.value("validation_limit", job.validation_limit);
    if (j.contains("training")) job.training = engine::training_config_from_json(j.at("training").dump());
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      if (k != "dataset" && k != "output_dir" && k != "validation_limit" && k != "training") {
        throw Error(ErrorKind::ConfigError, "unknown key '" + k + "' in training job");
      }
    }
    return job;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("training job JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.family() == ErrorFamily::Config) throw;
    throw Error(ErrorKind::ConfigError, e.what());
  }
}

engine::TrainingData load_job_data(const TrainJob& job) {
  if (!fs::is_directory(job.dataset)) {
    throw Error(ErrorKind::ConfigError, "dataset not found: " + job.dataset.string());
  }
  return engine::load_training_data(dataset::load_dataset(job.dataset), job.validation_limit);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_result(std::ostream& out, const engine::TrainResult& r) {
  out << "steps=" << r.steps << " epochs=" << r.epochs_completed;
  if (r.best_epoch) out << " best_epoch=" << *r.best_epoch << " best_success_rate=" << r.best_success_rate;
  out << '\n';
}

void print_grid(std::ostream& out, const calib::ErrorGrid& grid) { out << calib::render_error_table(grid); }

int exit_code_for(ErrorFamily f) {
  switch (f) {
    case ErrorFamily::Usage: return kExitUsage;
    case ErrorFamily::Config: return kExitConfig;
    case ErrorFamily::Data: return kExitData;
    default: return kExitRuntime;
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Webcam pupil tracking with cycle-consistent image translation", "gazegan"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // prep
  auto* prep = app.add_subcommand("prep", "Crop 400x300 eye regions from face frames");
  std::string prep_frames, prep_out, face_model, landmark_model;
  int prep_pad = dataset::kDefaultEyePad;
  prep->add_option("--frames", prep_frames, "Directory of frames")->required();
  prep->add_option("--face-model", face_model, "Face cascade XML")->required();
  prep->add_option("--landmark-model", landmark_model, "68-point LBF model")->required();
  prep->add_option("--out", prep_out, "Output directory for eye crops")->required();
  prep->add_option("--pad", prep_pad, "Padding around eye landmarks in pixels");

  // label
  auto* label = app.add_subcommand("label", "Paint labeled pupils and write the trainA/trainB layout");
  std::string label_raw, label_csv, label_out;
  label->add_option("--raw", label_raw, "Directory of 400x300 eye crops")->required();
  label->add_option("--labels", label_csv, "CSV filename,cx,cy,radius")->required();
  label->add_option("--out", label_out, "Dataset root")->required();

  // convert
  auto* convert = app.add_subcommand("convert", "Build a dataset from a coordinate-annotated image set");
  std::string conv_images, conv_coords, conv_out;
  int conv_w = 1280, conv_h = 720, conv_radius = dataset::kDefaultPupilRadius;
  convert->add_option("--images", conv_images, "Source image directory")->required();
  convert->add_option("--coords", conv_coords, "CSV filename,px,py")->required();
  convert->add_option("--out", conv_out, "Dataset root")->required();
  convert->add_option("--source-width", conv_w);
  convert->add_option("--source-height", conv_h);
  convert->add_option("--radius", conv_radius);

  // train
  auto* trainc = app.add_subcommand("train", "Train G, F, D_A and D_B from scratch");
  std::string train_config;
  std::int64_t train_max_steps = -1;
  trainc->add_option("--config", train_config, "Training job JSON")->required();
  trainc->add_option("--max-steps", train_max_steps, "Override max_steps");

  // finetune
  auto* ft = app.add_subcommand("finetune", "Continue training a checkpoint with frozen layers");
  std::string ft_checkpoint, ft_config, ft_freeze;
  int ft_epochs = engine::kFineTuneDefaultEpochs;
  std::int64_t ft_max_steps = -1;
  ft->add_option("--checkpoint", ft_checkpoint, "Pretrained checkpoint directory")->required();
  ft->add_option("--config", ft_config, "Training job JSON (dataset, output_dir)")->required();
  ft->add_option("--freeze", ft_freeze, "Comma-separated <net>.<layer> prefixes, e.g. G.down1,G.down2");
  ft->add_option("--epochs", ft_epochs);
  ft->add_option("--max-steps", ft_max_steps);

  // infer
  auto* infer = app.add_subcommand("infer", "Translate eye images and locate the pupil");
  std::string infer_ckpt, infer_input, infer_out, infer_dir = "AtoB";
  infer->add_option("--checkpoint", infer_ckpt)->required();
  infer->add_option("--input", infer_input, "Image file or directory")->required();
  infer->add_option("--out", infer_out, "Directory for translated images");
  infer->add_option("--direction", infer_dir)->check(CLI::IsMember({"AtoB", "BtoA"}));

  // track
  auto* track = app.add_subcommand("track", "Run the live loop over a camera or a frame directory");
  std::string track_config, track_frames;
  int track_camera = -1, track_port = -1;
  bool track_serve = false;
  track->add_option("--config", track_config, "Pipeline config JSON")->required();
  track->add_option("--frames", track_frames, "Frame directory instead of a camera");
  track->add_option("--camera", track_camera, "Camera index (default from config)");
  track->add_flag("--serve", track_serve, "Serve updates over WebSocket");
  track->add_option("--port", track_port, "Override the service port");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit the gaze mapping from a recorded session");
  std::string cal_replay, cal_out = ".", cal_geometry = "default";
  double cal_dwell = calib::kDefaultDwellSeconds, cal_settle = calib::kDefaultSettleSeconds;
  cal->add_option("--replay", cal_replay, "Session JSONL")->required();
  cal->add_option("--out", cal_out, "Directory for model.json and report.csv");
  cal->add_option("--geometry", cal_geometry, "'default' or a geometry JSON file");
  cal->add_option("--dwell", cal_dwell);
  cal->add_option("--settle", cal_settle);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Report per-target angular error for a session");
  std::string ev_session, ev_model, ev_geometry = "default", ev_report;
  double ev_dwell = calib::kDefaultDwellSeconds, ev_settle = calib::kDefaultSettleSeconds;
  ev->add_option("--session", ev_session, "Session JSONL")->required();
  ev->add_option("--model", ev_model, "Calibration model JSON");
  ev->add_option("--geometry", ev_geometry, "'default' or a geometry JSON file");
  ev->add_option("--report", ev_report, "Also write the CSV report here");
  ev->add_option("--dwell", ev_dwell);
  ev->add_option("--settle", ev_settle);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*prep) {
      dataset::CascadeFaceDetector faces(face_model);
      dataset::LbfLandmarkPredictor marks(landmark_model);
      tracker::DirectoryFrameSource source(prep_frames);
      fs::create_directories(prep_out);
      std::size_t written = 0, skipped = 0;
      while (auto frame = source.next()) {
        const auto face = dataset::detect_face(*frame, faces);
        if (!face) {
          out << "prep," << frame->source_id << ",skip:no_face\n";
          ++skipped;
          continue;
        }
        try {
          const auto lm = dataset::locate_eye_landmarks(*frame, *face, marks);
          const auto box = dataset::eye_region_box(lm, prep_pad, frame->pixels.width(), frame->pixels.height());
          const auto eye = dataset::crop_resize(*frame, box);
          const fs::path name = fs::path(frame->source_id).replace_extension(".png");
          io::write_png(fs::path(prep_out) / name, eye.pixels());
          out << "prep," << frame->source_id << ",ok\n";
          ++written;
        } catch (const Error& e) {
          out << "prep," << frame->source_id << ",skip:" << to_string(e.kind()) << '\n';
          ++skipped;
        }
      }
      out << "written=" << written << " skipped=" << skipped << '\n';
      return kExitOk;
    }
    if (*label) {
      const auto rows = dataset::read_labels(label_csv);
      std::vector<dataset::NamedEyeImage> raw;
      for (const auto& row : rows) {
        const fs::path p = fs::path(label_raw) / row.filename;
        if (!fs::exists(p)) throw Error(ErrorKind::MissingImage, "no raw image " + p.string());
        const RgbImage img = io::read_image(p);
        if (img.width() != kEyeWidth || img.height() != kEyeHeight) {
          throw Error(ErrorKind::ShapeMismatch, row.filename + " is not 400x300");
        }
        raw.push_back({row.filename, EyeImage(img)});
      }
      const auto pair = dataset::build_domain_pair(raw, rows, label_out);
      out << "domain_a=" << pair.domain_a.size() << " domain_b=" << pair.domain_b.size() << '\n';
      return kExitOk;
    }
    if (*convert) {
      const auto result = dataset::convert_annotated_dataset(conv_images, conv_coords, conv_out, {conv_w, conv_h},
                                                             conv_radius);
      for (const auto& e : result.errors) out << "row," << e.line << ',' << e.filename << ',' << e.kind << '\n';
      out << "converted=" << result.pair.domain_a.size() << " errors=" << result.errors.size() << '\n';
      return result.pair.domain_a.empty() && !result.errors.empty() ? kExitData : kExitOk;
    }
    if (*trainc) {
      TrainJob job = load_train_job(train_config);
      if (train_max_steps >= 0) job.training.max_steps = train_max_steps;
      job.training.validate();
      const auto data = load_job_data(job);
      fs::create_directories(job.output_dir);
      engine::TrainOptions opts;
      opts.output_dir = job.output_dir;
      opts.echo = &out;
      print_result(out, engine::train(data, job.training, nullptr, opts));
      return kExitOk;
    }
    if (*ft) {
      TrainJob job = load_train_job(ft_config);
      auto bundle = engine::load_checkpoint(ft_checkpoint);
      if (ft_max_steps >= 0) bundle.config.max_steps = ft_max_steps;
      const auto data = load_job_data(job);
      const auto freeze = split_list(ft_freeze);
      engine::apply_freeze(bundle, freeze);  // validate names before any output
      fs::create_directories(job.output_dir);
      engine::TrainOptions opts;
      opts.output_dir = job.output_dir;
      opts.echo = &out;
      print_result(out, engine::fine_tune(bundle, data, freeze, ft_epochs, opts));
      return kExitOk;
    }
    if (*infer) {
      const auto bundle = engine::load_checkpoint(infer_ckpt);
      const auto dir = infer_dir == "AtoB" ? engine::Direction::AtoB : engine::Direction::BtoA;
      std::vector<fs::path> inputs;
      if (fs::is_directory(infer_input)) {
        for (const auto& e : fs::directory_iterator(infer_input)) {
          if (e.is_regular_file()) inputs.push_back(e.path());
        }
        std::sort(inputs.begin(), inputs.end());
      } else {
        inputs.emplace_back(infer_input);
      }
      if (!infer_out.empty()) fs::create_directories(infer_out);
      out << "file,cx,cy,conf\n";
      for (const auto& p : inputs) {
        const RgbImage img = io::read_image(p);
        if (img.width() != kEyeWidth || img.height() != kEyeHeight) {
          throw Error(ErrorKind::ShapeMismatch, p.filename().string() + " is not 400x300");
        }
        const EyeImage translated = engine::translate(bundle, EyeImage(img), dir);
        if (!infer_out.empty()) {
          io::write_png(fs::path(infer_out) / fs::path(p.filename()).replace_extension(".png"), translated.pixels());
        }
        const auto d = pupil::detect_pupil(translated);
        out << p.filename().string() << ',';
        if (d) {
          out << d->cx << ',' << d->cy << ',' << d->confidence << '\n';
        } else {
          out << ",,\n";
        }
      }
      return kExitOk;
    }
    if (*track) {
      auto config = tracker::load_pipeline_config(track_config);
      if (track_camera >= 0) config.camera_index = track_camera;
      if (track_port >= 0) config.port = track_port;
      auto state = tracker::make_tracker_state(config);
      std::unique_ptr<tracker::FrameSource> source;
      if (!track_frames.empty()) {
        source = std::make_unique<tracker::DirectoryFrameSource>(track_frames);
      } else {
        source = std::make_unique<tracker::CameraFrameSource>(config.camera_index);
      }
      if (!track_serve) {
        while (auto frame = source->next()) out << tracker::gaze_message(tracker::run_frame(*frame, state)) << '\n';
        return kExitOk;
      }
      tracker::ServiceOptions so;
      so.port = config.port;
      so.session_dir = config.session_dir;
      so.geometry = config.geometry;
      so.window = {config.dwell_seconds, config.settle_seconds};
      so.config_json = tracker::pipeline_config_to_json(config);
      tracker::GazeService service(so);
      service.start();
      out << "listening port=" << service.port() << std::endl;
      g_stop = false;
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      tracker::serve(*source, state, service, g_stop);
      const auto st = service.stats();
      out << "gaze_messages=" << st.gaze_messages << " dropped=" << st.dropped
          << " sessions_saved=" << st.sessions_saved << '\n';
      return kExitOk;
    }
    if (*cal) {
      const auto geometry = parse_geometry(cal_geometry);
      const auto samples = tracker::read_session(cal_replay);
      const auto outcome = tracker::calibrate_session(samples, geometry, {cal_dwell, cal_settle});
      fs::create_directories(cal_out);
      calib::save_model(fs::path(cal_out) / "model.json", outcome.model);
      spit(fs::path(cal_out) / "report.csv", calib::error_report_csv(outcome.report));
      out << "points=" << outcome.model.point_count << " residual_rms_px=" << outcome.model.residual_rms << '\n';
      print_grid(out, outcome.report);
      return kExitOk;
    }
    if (*ev) {
      const auto geometry = parse_geometry(ev_geometry);
      const auto samples = tracker::read_session(ev_session);
      std::optional<calib::CalibrationModel> model;
      if (!ev_model.empty()) model = calib::load_model(ev_model);
      const auto grid = tracker::evaluate_session(samples, geometry, model, {ev_dwell, ev_settle});
      if (!ev_report.empty()) spit(ev_report, calib::error_report_csv(grid));
      print_grid(out, grid);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.family());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace gazegan::cli
