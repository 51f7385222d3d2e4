#include "gazegan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "json_util.hpp"

namespace gazegan::engine {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

namespace {

const char* const kConfigKeys[] = {
    "architecture", "lambda_cycle", "lambda_identity", "adversarial_form", "learning_rate",
    "discriminator_learning_rate", "decay_start_step", "adam_beta1", "adam_beta2", "batch_size", "epochs", "pool_size", "label_noise_amplitude",
    "real_label", "init_stddev", "seed", "checkpoint_every", "max_steps", "validation_tolerance_px"};
const char* const kArchKeys[] = {"generator_filters", "discriminator_filters", "residual_blocks"};

json arch_json(const ArchitectureConfig& a) {
  return json{{"generator_filters", a.generator_filters},
              {"discriminator_filters", a.discriminator_filters},
              {"residual_blocks", a.residual_blocks}};
}

json config_json(const TrainingConfig& c) {
  return json{{"architecture", arch_json(c.architecture)},
              {"lambda_cycle", c.lambda_cycle},
              {"lambda_identity", c.lambda_identity},
              {"adversarial_form", to_string(c.adversarial_form)},
              {"learning_rate", c.learning_rate},
              {"discriminator_learning_rate", c.discriminator_learning_rate},
              {"decay_start_step", c.decay_start_step},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"pool_size", c.pool_size},
              {"label_noise_amplitude", c.label_noise_amplitude},
              {"real_label", c.real_label},
              {"init_stddev", c.init_stddev},
              {"seed", c.seed},
              {"checkpoint_every", c.checkpoint_every},
              {"max_steps", c.max_steps},
              {"validation_tolerance_px", c.validation_tolerance_px}};
}

TrainingConfig config_parse(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "training config must be a JSON object");
  detail::reject_unknown_keys(j, kConfigKeys, "training config");
  TrainingConfig c;
  if (j.contains("architecture")) {
    const json& a = j.at("architecture");
    detail::reject_unknown_keys(a, kArchKeys, "architecture");
    c.architecture.generator_filters = a.value("generator_filters", c.architecture.generator_filters);
    c.architecture.discriminator_filters = a.value("discriminator_filters", c.architecture.discriminator_filters);
    c.architecture.residual_blocks = a.value("residual_blocks", c.architecture.residual_blocks);
  }
  c.lambda_cycle = j.value("lambda_cycle", c.lambda_cycle);
  c.lambda_identity = j.value("lambda_identity", c.lambda_identity);
  if (j.contains("adversarial_form")) {
    c.adversarial_form = adversarial_form_from_string(j.at("adversarial_form").get<std::string>());
  }
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.discriminator_learning_rate = j.value("discriminator_learning_rate", c.discriminator_learning_rate);
  c.decay_start_step = j.value("decay_start_step", c.decay_start_step);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.label_noise_amplitude = j.value("label_noise_amplitude", c.label_noise_amplitude);
  c.real_label = j.value("real_label", c.real_label);
  c.init_stddev = j.value("init_stddev", c.init_stddev);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.validation_tolerance_px = j.value("validation_tolerance_px", c.validation_tolerance_px);
  c.validate();
  return c;
}

std::string layer_of(const std::string& param_name) {
  const auto dot = param_name.rfind('.');
  return dot == std::string::npos ? param_name : param_name.substr(0, dot);
}

struct NetRef {
  const char* id;
  const nn::Sequential<float>* net;
  const nn::Adam<float>* opt;
};

void write_floats(std::ofstream& out, const nn::Tensor<float>& t) {
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
}

json save_network(const fs::path& dir, const NetRef& ref) {
  json layers = json::array();
  std::map<std::string, std::vector<const nn::Parameter<float>*>> grouped;
  std::vector<std::string> order;
  for (const auto* p : ref.net->parameters()) {
    const std::string layer = layer_of(p->name);
    if (!grouped.count(layer)) order.push_back(layer);
    grouped[layer].push_back(p);
  }
  for (const auto& layer : order) {
    const std::string file = std::string(ref.id) + "." + layer + ".bin";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / file).string());
    json params = json::array();
    std::size_t offset = 0;
    for (const auto* p : grouped[layer]) {
      const auto& s = p->value.shape();
      params.push_back({{"name", p->name}, {"shape", {s.n, s.c, s.h, s.w}}, {"offset", offset}});
      write_floats(out, p->value);
      offset += p->value.size();
    }
    if (!out) throw Error(ErrorKind::Io, "write failed for " + file);
    layers.push_back({{"name", layer}, {"file", file}, {"params", params}});
  }
  json net{{"layers", layers}};
  const auto& m = ref.opt->first_moments();
  if (!m.empty()) {
    const std::string file = std::string(ref.id) + ".adam.bin";
    std::ofstream out(dir / file, std::ios::binary);
    for (const auto& t : m) write_floats(out, t);
    for (const auto& t : ref.opt->second_moments()) write_floats(out, t);
    if (!out) throw Error(ErrorKind::Io, "write failed for " + file);
    net["adam"] = {{"file", file}, {"steps", ref.opt->steps()}};
  } else {
    net["adam"] = nullptr;
  }
  return net;
}

std::vector<char> read_blob(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::CorruptCheckpoint, "missing blob " + path.filename().string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void copy_floats(const std::vector<char>& blob, std::size_t offset_floats, nn::Tensor<float>& t,
                 const std::string& what) {
  const std::size_t begin = offset_floats * sizeof(float);
  const std::size_t bytes = t.size() * sizeof(float);
  if (begin + bytes > blob.size()) throw Error(ErrorKind::CorruptCheckpoint, "blob too short for " + what);
  std::memcpy(t.data(), blob.data() + begin, bytes);
}

void load_network(const fs::path& dir, const json& j, const std::string& id, nn::Sequential<float>& net,
                  nn::Adam<float>& opt) {
  auto params = net.parameters();
  std::map<std::string, nn::Parameter<float>*> by_name;
  for (auto* p : params) by_name[p->name] = p;
  std::size_t seen = 0;
  for (const auto& layer : j.at("layers")) {
    const std::string file = layer.at("file").get<std::string>();
    const auto blob = read_blob(dir / file);
    std::size_t expected = 0;
    for (const auto& pj : layer.at("params")) {
      const std::string name = pj.at("name").get<std::string>();
      auto it = by_name.find(name);
      if (it == by_name.end()) {
        throw Error(ErrorKind::CorruptCheckpoint, id + " has no parameter '" + name + "'");
      }
      const auto shape = pj.at("shape").get<std::vector<int>>();
      const auto& s = it->second->value.shape();
      if (shape != std::vector<int>{s.n, s.c, s.h, s.w}) {
        throw Error(ErrorKind::CorruptCheckpoint, "shape mismatch for " + id + "." + name);
      }
      const std::size_t offset = pj.at("offset").get<std::size_t>();
      copy_floats(blob, offset, it->second->value, id + "." + name);
      expected += it->second->value.size();
      ++seen;
    }
    if (blob.size() != expected * sizeof(float)) {
      throw Error(ErrorKind::CorruptCheckpoint, "unexpected size of " + file);
    }
  }
  if (seen != params.size()) {
    throw Error(ErrorKind::CorruptCheckpoint, id + ": manifest lists " + std::to_string(seen) + " of " +
                                                  std::to_string(params.size()) + " parameters");
  }
  const json& adam = j.at("adam");
  if (adam.is_null()) return;
  opt.ensure_state(params);
  const auto blob = read_blob(dir / adam.at("file").get<std::string>());
  std::size_t offset = 0;
  for (auto& t : opt.first_moments()) {
    copy_floats(blob, offset, t, id + " adam m");
    offset += t.size();
  }
  for (auto& t : opt.second_moments()) {
    copy_floats(blob, offset, t, id + " adam v");
    offset += t.size();
  }
  if (offset * sizeof(float) != blob.size()) throw Error(ErrorKind::CorruptCheckpoint, id + " adam blob size");
  opt.set_steps(adam.at("steps").get<std::int64_t>());
}

}  // namespace

std::string training_config_to_json(const TrainingConfig& config) { return config_json(config).dump(2) + "\n"; }

TrainingConfig training_config_from_json(const std::string& text) {
  try {
    return config_parse(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("training config JSON: ") + e.what());
  }
}

void save_checkpoint(const fs::path& dir, const ModelBundle& bundle) {
  fs::path tmp = dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  json manifest{{"format_version", kCheckpointFormatVersion},
                {"architecture", arch_json(bundle.config.architecture)},
                {"config", config_json(bundle.config)},
                {"step", bundle.step},
                {"epoch", bundle.epoch}};
  const NetRef nets[] = {{"G", &bundle.g, &bundle.opt_g},
                         {"F", &bundle.f, &bundle.opt_f},
                         {"D_A", &bundle.d_a, &bundle.opt_d_a},
                         {"D_B", &bundle.d_b, &bundle.opt_d_b}};
  json nj = json::object();
  for (const auto& ref : nets) nj[ref.id] = save_network(tmp, ref);
  manifest["networks"] = nj;
  detail::write_file(tmp / "manifest.json", manifest.dump(2) + "\n");
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

ModelBundle load_checkpoint(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw Error(ErrorKind::MissingModelFile, "no checkpoint manifest at " + mpath.string());
  try {
    const json manifest = json::parse(detail::read_file(mpath, ErrorKind::MissingModelFile));
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw Error(ErrorKind::CorruptCheckpoint, "unsupported checkpoint format " + std::to_string(version));
    }
    TrainingConfig config = config_parse(manifest.at("config"));
    ModelBundle bundle = ModelBundle::create(config);
    bundle.step = manifest.at("step").get<std::int64_t>();
    bundle.epoch = manifest.at("epoch").get<int>();
    const json& nets = manifest.at("networks");
    load_network(dir, nets.at("G"), "G", bundle.g, bundle.opt_g);
    load_network(dir, nets.at("F"), "F", bundle.f, bundle.opt_f);
    load_network(dir, nets.at("D_A"), "D_A", bundle.d_a, bundle.opt_d_a);
    load_network(dir, nets.at("D_B"), "D_B", bundle.d_b, bundle.opt_d_b);
    return bundle;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptCheckpoint, std::string("checkpoint manifest: ") + e.what());
  }
}

}  // namespace gazegan::engine
