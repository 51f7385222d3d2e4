#include "gazegan/cyclegan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gazegan/error.hpp"

namespace gazegan::engine {

using nn::ActivationKind;
using nn::Padding;
using nn::Sequential;
using nn::Shape;

void ArchitectureConfig::validate() const {
  if (generator_filters < 1 || discriminator_filters < 1 || residual_blocks < 0) {
    throw Error(ErrorKind::InvalidConfig, "architecture filters must be >= 1 and blocks >= 0");
  }
}

void TrainingConfig::validate() const {
  architecture.validate();
  if (lambda_cycle < 0 || lambda_identity < 0 || label_noise_amplitude < 0) {
    throw Error(ErrorKind::InvalidConfig, "loss weights and noise amplitude must be >= 0");
  }
  if (!(learning_rate > 0) || adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1) {
    throw Error(ErrorKind::InvalidConfig, "bad optimizer settings");
  }
  if (batch_size < 1 || epochs < 0 || pool_size < 0 || checkpoint_every < 0 || max_steps < 0) {
    throw Error(ErrorKind::InvalidConfig, "batch_size >= 1; epochs, pool_size, intervals >= 0");
  }
  if (real_label < 0 || real_label > 1 || !(init_stddev > 0)) {
    throw Error(ErrorKind::InvalidConfig, "real_label in [0,1], init_stddev > 0");
  }
  if (discriminator_learning_rate < 0 || decay_start_step < 0) {
    throw Error(ErrorKind::InvalidConfig, "discriminator_learning_rate and decay_start_step must be >= 0");
  }
  if (decay_start_step > 0 && max_steps <= decay_start_step) {
    throw Error(ErrorKind::InvalidConfig, "decay_start_step needs max_steps beyond it");
  }
}

double TrainingConfig::rate_factor(std::int64_t run_step) const noexcept {
  if (decay_start_step <= 0 || run_step < decay_start_step) return 1.0;
  return static_cast<double>(max_steps - run_step) / static_cast<double>(max_steps - decay_start_step);
}

std::string to_string(AdversarialForm form) {
  return form == AdversarialForm::LeastSquares ? "least_squares" : "log_likelihood";
}

AdversarialForm adversarial_form_from_string(const std::string& s) {
  if (s == "least_squares") return AdversarialForm::LeastSquares;
  if (s == "log_likelihood") return AdversarialForm::LogLikelihood;
  throw Error(ErrorKind::InvalidConfig, "unknown adversarial form '" + s + "'");
}

// ------------------------------------------------------------- networks

template <typename T>
Sequential<T> build_generator(const ArchitectureConfig& arch, const std::string& id,
                              std::uint64_t seed, double init_stddev) {
  arch.validate();
  const int f = arch.generator_filters;
  Sequential<T> net(id);
  net.template emplace<nn::Conv2d<T>>("stem.conv", 3, f, 7, 1, 3, Padding::Reflect);
  net.template emplace<nn::InstanceNorm<T>>("stem.norm");
  net.template emplace<nn::Activation<T>>("stem.relu", ActivationKind::ReLU);
  net.template emplace<nn::Conv2d<T>>("down1.conv", f, 2 * f, 4, 2, 1);
  net.template emplace<nn::InstanceNorm<T>>("down1.norm");
  net.template emplace<nn::Activation<T>>("down1.relu", ActivationKind::ReLU);
  net.template emplace<nn::Conv2d<T>>("down2.conv", 2 * f, 4 * f, 4, 2, 1);
  net.template emplace<nn::InstanceNorm<T>>("down2.norm");
  net.template emplace<nn::Activation<T>>("down2.relu", ActivationKind::ReLU);
  for (int i = 1; i <= arch.residual_blocks; ++i) {
    net.template emplace<nn::ResidualBlock<T>>("res" + std::to_string(i), 4 * f);
  }
  auto& up1 = net.template emplace<nn::ConvTranspose2d<T>>("up1.conv", 4 * f, 2 * f, 4, 2, 1);
  net.template emplace<nn::InstanceNorm<T>>("up1.norm");
  net.template emplace<nn::Activation<T>>("up1.relu", ActivationKind::ReLU);
  auto& up2 = net.template emplace<nn::ConvTranspose2d<T>>("up2.conv", 2 * f, f, 4, 2, 1);
  net.template emplace<nn::InstanceNorm<T>>("up2.norm");
  net.template emplace<nn::Activation<T>>("up2.relu", ActivationKind::ReLU);
  net.template emplace<nn::Conv2d<T>>("head.conv", f, 3, 7, 1, 3, Padding::Reflect);
  net.template emplace<nn::Activation<T>>("head.tanh", ActivationKind::Tanh);
  nn::init_gaussian(net, seed, init_stddev);
  nn::init_interpolating(up1);
  nn::init_interpolating(up2);
  return net;
}

template <typename T>
Sequential<T> build_discriminator(const ArchitectureConfig& arch, const std::string& id,
                                  std::uint64_t seed, double init_stddev) {
  arch.validate();
  const int f = arch.discriminator_filters;
  Sequential<T> net(id);
  net.template emplace<nn::Conv2d<T>>("c1.conv", 3, f, 4, 2, 1);
  net.template emplace<nn::Activation<T>>("c1.lrelu", ActivationKind::LeakyReLU, 0.2);
  net.template emplace<nn::Conv2d<T>>("c2.conv", f, 2 * f, 4, 2, 1);
  net.template emplace<nn::InstanceNorm<T>>("c2.norm");
  net.template emplace<nn::Activation<T>>("c2.lrelu", ActivationKind::LeakyReLU, 0.2);
  net.template emplace<nn::Conv2d<T>>("c3.conv", 2 * f, 4 * f, 4, 2, 1);
  net.template emplace<nn::InstanceNorm<T>>("c3.norm");
  net.template emplace<nn::Activation<T>>("c3.lrelu", ActivationKind::LeakyReLU, 0.2);
  net.template emplace<nn::Conv2d<T>>("c4.conv", 4 * f, 8 * f, 4, 1, 1);
  net.template emplace<nn::InstanceNorm<T>>("c4.norm");
  net.template emplace<nn::Activation<T>>("c4.lrelu", ActivationKind::LeakyReLU, 0.2);
  net.template emplace<nn::Conv2d<T>>("score.conv", 8 * f, 1, 4, 1, 1);
  nn::init_gaussian(net, seed, init_stddev);
  return net;
}

// ---------------------------------------------------------------- losses

double adversarial_objective(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) {
    throw Error(ErrorKind::DomainError, "score maps must be non-empty");
  }
  double real_sum = 0.0;
  for (double s : real_scores) {
    if (!(s > 0.0 && s < 1.0)) throw Error(ErrorKind::DomainError, "real score outside (0,1)");
    real_sum += std::log(s);
  }
  double fake_sum = 0.0;
  for (double s : fake_scores) {
    if (!(s > 0.0 && s < 1.0)) throw Error(ErrorKind::DomainError, "fake score outside (0,1)");
    fake_sum += std::log1p(-s);
  }
  return real_sum / static_cast<double>(real_scores.size()) +
         fake_sum / static_cast<double>(fake_scores.size());
}

double least_squares_discriminator_objective(double real_score, double fake_score) {
  return 0.5 * ((real_score - 1.0) * (real_score - 1.0) + fake_score * fake_score);
}

double composite_generator_loss(double adv, double cycle_fwd, double cycle_bwd, double identity,
                                const TrainingConfig& config) {
  for (double v : {adv, cycle_fwd, cycle_bwd, identity}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteLoss, "non-finite loss component");
  }
  return adv + config.lambda_cycle * (cycle_fwd + cycle_bwd) + config.lambda_identity * identity;
}

template <typename T>
LossGrad<T> l1_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
  nn::require_same_shape(prediction.shape(), target.shape(), "l1_loss");
  LossGrad<T> out;
  out.grad = Tensor<T>(prediction.shape());
  const double inv_n = 1.0 / static_cast<double>(prediction.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = static_cast<double>(prediction[i]) - static_cast<double>(target[i]);
    sum += std::abs(d);
    out.grad[i] = static_cast<T>(d > 0 ? inv_n : (d < 0 ? -inv_n : 0.0));
  }
  out.value = sum * inv_n;
  return out;
}

double cycle_consistency_loss(const Tensor<float>& original, const Tensor<float>& reconstructed) {
  return l1_loss(reconstructed, original).value;
}

double identity_loss(const Tensor<float>& target_batch, const Tensor<float>& generator_output) {
  return l1_loss(generator_output, target_batch).value;
}

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

template <typename T>
LossGrad<T> generator_adversarial_loss(const Tensor<T>& raw_scores, AdversarialForm form) {
  LossGrad<T> out;
  out.grad = Tensor<T>(raw_scores.shape());
  const double inv_n = 1.0 / static_cast<double>(raw_scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < raw_scores.size(); ++i) {
    const double s = raw_scores[i];
    if (form == AdversarialForm::LeastSquares) {
      sum += (s - 1.0) * (s - 1.0);
      out.grad[i] = static_cast<T>(2.0 * (s - 1.0) * inv_n);
    } else {
      // Non-saturating form: -log sigmoid(s).
      sum += softplus(-s);
      out.grad[i] = static_cast<T>((sigmoid(s) - 1.0) * inv_n);
    }
  }
  out.value = sum * inv_n;
  return out;
}

template <typename T>
LossGrad<T> discriminator_loss(const Tensor<T>& raw_scores, const Tensor<T>& targets,
                               AdversarialForm form) {
  nn::require_same_shape(raw_scores.shape(), targets.shape(), "discriminator_loss");
  LossGrad<T> out;
  out.grad = Tensor<T>(raw_scores.shape());
  const double inv_n = 1.0 / static_cast<double>(raw_scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < raw_scores.size(); ++i) {
    const double s = raw_scores[i];
    const double t = targets[i];
    if (form == AdversarialForm::LeastSquares) {
      sum += 0.5 * (s - t) * (s - t);
      out.grad[i] = static_cast<T>((s - t) * inv_n);
    } else {
      // Binary cross-entropy on logits.
      sum += 0.5 * (softplus(s) - t * s);
      out.grad[i] = static_cast<T>(0.5 * (sigmoid(s) - t) * inv_n);
    }
  }
  out.value = sum * inv_n;
  return out;
}

namespace {

template <typename T>
void add_scaled(Tensor<T>& acc, const Tensor<T>& g, double scale) {
  nn::require_same_shape(acc.shape(), g.shape(), "gradient accumulation");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<T>(scale * g[i]);
}

template <typename T>
Tensor<T> scaled(const Tensor<T>& g, double scale) {
  Tensor<T> out(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = static_cast<T>(scale * g[i]);
  return out;
}

}  // namespace

template <typename T>
GeneratorLosses generator_pass(CycleNetworks<T> nets, const Tensor<T>& real_a, const Tensor<T>& real_b,
                               const TrainingConfig& config, bool backward, Tensor<T>* fake_a_out,
                               Tensor<T>* fake_b_out) {
  const double lc = config.lambda_cycle;
  const double li = config.lambda_identity;
  nn::Trace<T> t_fake_b, t_rec_a, t_fake_a, t_rec_b, t_id_b, t_id_a, t_score_b, t_score_a;
  nn::Trace<T>* tr = nullptr;
  auto trace = [&](nn::Trace<T>& t) { return backward ? &t : tr; };

  const Tensor<T> fake_b = nets.g.forward(real_a, trace(t_fake_b));
  const Tensor<T> rec_a = nets.f.forward(fake_b, trace(t_rec_a));
  const Tensor<T> fake_a = nets.f.forward(real_b, trace(t_fake_a));
  const Tensor<T> rec_b = nets.g.forward(fake_a, trace(t_rec_b));
  const Tensor<T> score_b = nets.d_b.forward(fake_b, trace(t_score_b));
  const Tensor<T> score_a = nets.d_a.forward(fake_a, trace(t_score_a));

  const auto adv_g = generator_adversarial_loss(score_b, config.adversarial_form);
  const auto adv_f = generator_adversarial_loss(score_a, config.adversarial_form);
  const auto cyc_a = l1_loss(rec_a, real_a);
  const auto cyc_b = l1_loss(rec_b, real_b);

  LossGrad<T> id_g, id_f;
  Tensor<T> id_b, id_a;
  if (li > 0.0) {
    id_b = nets.g.forward(real_b, trace(t_id_b));
    id_a = nets.f.forward(real_a, trace(t_id_a));
    id_g = l1_loss(id_b, real_b);
    id_f = l1_loss(id_a, real_a);
  }

  GeneratorLosses out;
  // G's forward cycle starts in A; F's forward cycle starts in B.
  out.a_to_b = {adv_g.value, cyc_a.value, cyc_b.value, id_g.value};
  out.b_to_a = {adv_f.value, cyc_b.value, cyc_a.value, id_f.value};
  out.g_a_to_b = composite_generator_loss(out.a_to_b.adv, out.a_to_b.cycle_fwd, out.a_to_b.cycle_bwd,
                                          out.a_to_b.identity, config);
  out.g_b_to_a = composite_generator_loss(out.b_to_a.adv, out.b_to_a.cycle_fwd, out.b_to_a.cycle_bwd,
                                          out.b_to_a.identity, config);

  if (backward) {
    // A -> G -> fake_b -> {D_B, F -> rec_a}
    Tensor<T> g_fake_b = nets.d_b.backward(adv_g.grad, t_score_b, false);
    add_scaled(g_fake_b, nets.f.backward(scaled(cyc_a.grad, lc), t_rec_a, true), 1.0);
    nets.g.backward(g_fake_b, t_fake_b, true);
    // B -> F -> fake_a -> {D_A, G -> rec_b}
    Tensor<T> g_fake_a = nets.d_a.backward(adv_f.grad, t_score_a, false);
    add_scaled(g_fake_a, nets.g.backward(scaled(cyc_b.grad, lc), t_rec_b, true), 1.0);
    nets.f.backward(g_fake_a, t_fake_a, true);
    if (li > 0.0) {
      nets.g.backward(scaled(id_g.grad, li), t_id_b, true);
      nets.f.backward(scaled(id_f.grad, li), t_id_a, true);
    }
  }
  if (fake_a_out) *fake_a_out = fake_a;
  if (fake_b_out) *fake_b_out = fake_b;
  return out;
}

// ----------------------------------------------------------- model state

ModelBundle ModelBundle::create(const TrainingConfig& config) {
  config.validate();
  ModelBundle b;
  b.config = config;
  const auto& arch = config.architecture;
  const std::uint64_t s = config.seed;
  b.g = build_generator<float>(arch, "G", s * 4 + 1, config.init_stddev);
  b.f = build_generator<float>(arch, "F", s * 4 + 2, config.init_stddev);
  b.d_a = build_discriminator<float>(arch, "D_A", s * 4 + 3, config.init_stddev);
  b.d_b = build_discriminator<float>(arch, "D_B", s * 4 + 4, config.init_stddev);
  const nn::AdamOptions opts{config.learning_rate, config.adam_beta1, config.adam_beta2, 1e-8};
  b.opt_g = nn::Adam<float>(opts);
  b.opt_f = nn::Adam<float>(opts);
  nn::AdamOptions d_opts = opts;
  d_opts.learning_rate = config.discriminator_rate();
  b.opt_d_a = nn::Adam<float>(d_opts);
  b.opt_d_b = nn::Adam<float>(d_opts);
  return b;
}

ImagePool::ImagePool(int capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity < 0) throw Error(ErrorKind::InvalidConfig, "pool capacity must be >= 0");
}

Tensor<float> ImagePool::query(const Tensor<float>& image) {
  last_stored_ = false;
  if (capacity_ == 0) return image;
  if (images_.size() < static_cast<std::size_t>(capacity_)) {
    images_.push_back(image);
    return image;
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng_) < 0.5) {
    std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
    const std::size_t i = pick(rng_);
    Tensor<float> old = std::move(images_[i]);
    images_[i] = image;
    last_stored_ = true;
    return old;
  }
  return image;
}

Tensor<float> ImagePool::query_batch(const Tensor<float>& batch) {
  if (batch.n() == 1) return query(batch);
  Tensor<float> out(batch.shape());
  const std::size_t item = static_cast<std::size_t>(batch.c()) * batch.h() * batch.w();
  for (int b = 0; b < batch.n(); ++b) {
    Tensor<float> one(1, batch.c(), batch.h(), batch.w());
    std::copy_n(batch.item(b), item, one.data());
    const Tensor<float> got = query(one);
    std::copy_n(got.data(), item, out.item(b));
  }
  return out;
}

TrainerState::TrainerState(const TrainingConfig& config)
    : pool_a(config.pool_size, config.seed * 7919 + 11),
      pool_b(config.pool_size, config.seed * 7919 + 13),
      rng(config.seed * 7919 + 17) {}

std::string format_log_line(const LossReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), ">%lld, dA[%.3f,%.3f] dB[%.3f,%.3f] g[%.3f,%.3f]",
                static_cast<long long>(r.step), r.d_a_real, r.d_a_fake, r.d_b_real, r.d_b_fake,
                r.g_a_to_b, r.g_b_to_a);
  return buf;
}

std::string format_loss_csv_row(const LossReport& r) {
  char buf[384];
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                static_cast<long long>(r.step), r.d_a_real, r.d_a_fake, r.d_b_real, r.d_b_fake,
                r.g_a_to_b, r.g_b_to_a, r.a_to_b.adv + r.b_to_a.adv, r.a_to_b.cycle_fwd,
                r.a_to_b.cycle_bwd, r.a_to_b.identity + r.b_to_a.identity);
  return buf;
}

Tensor<float> discriminator_targets(const Shape& shape, bool real, const TrainingConfig& config,
                                    std::mt19937_64& rng) {
  const double base = real ? config.real_label : 0.0;
  Tensor<float> t(shape, static_cast<float>(base));
  const double amp = config.label_noise_amplitude;
  if (amp > 0.0) {
    std::uniform_real_distribution<double> noise(-amp, amp);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = static_cast<float>(std::clamp(base + noise(rng), 0.0, 1.0));
    }
  }
  return t;
}

namespace {

struct DiscriminatorResult {
  double real = 0.0;
  double fake = 0.0;
};

DiscriminatorResult update_discriminator(Sequential<float>& d, nn::Adam<float>& opt,
                                         const Tensor<float>& real, const Tensor<float>& fake,
                                         const TrainingConfig& config, std::mt19937_64& rng) {
  d.zero_grad();
  nn::Trace<float> tr, tf;
  const Tensor<float> sr = d.forward(real, &tr);
  const Tensor<float> sf = d.forward(fake, &tf);
  const auto lr = discriminator_loss(sr, discriminator_targets(sr.shape(), true, config, rng),
                                     config.adversarial_form);
  const auto lf = discriminator_loss(sf, discriminator_targets(sf.shape(), false, config, rng),
                                     config.adversarial_form);
  d.backward(lr.grad, tr, true);
  d.backward(lf.grad, tf, true);
  opt.step(d.parameters());
  return {lr.value, lf.value};
}

}  // namespace

LossReport train_step(const Tensor<float>& batch_a, const Tensor<float>& batch_b, ModelBundle& bundle,
                      TrainerState& state, const TrainingConfig& config) {
  bundle.g.zero_grad();
  bundle.f.zero_grad();
  Tensor<float> fake_a, fake_b;
  const GeneratorLosses gl =
      generator_pass<float>({bundle.g, bundle.f, bundle.d_a, bundle.d_b}, batch_a, batch_b, config,
                            true, &fake_a, &fake_b);
  const std::int64_t step = bundle.step + 1;
  if (!std::isfinite(gl.g_a_to_b) || !std::isfinite(gl.g_b_to_a)) {
    throw Error(ErrorKind::NonFiniteLoss, "generator loss at step " + std::to_string(step));
  }
  bundle.opt_g.step(bundle.g.parameters());
  bundle.opt_f.step(bundle.f.parameters());

  const Tensor<float> pooled_a = state.pool_a.query_batch(fake_a);
  const Tensor<float> pooled_b = state.pool_b.query_batch(fake_b);
  const auto da = update_discriminator(bundle.d_a, bundle.opt_d_a, batch_a, pooled_a, config, state.rng);
  const auto db = update_discriminator(bundle.d_b, bundle.opt_d_b, batch_b, pooled_b, config, state.rng);

  LossReport r;
  r.step = step;
  r.d_a_real = da.real;
  r.d_a_fake = da.fake;
  r.d_b_real = db.real;
  r.d_b_fake = db.fake;
  r.g_a_to_b = gl.g_a_to_b;
  r.g_b_to_a = gl.g_b_to_a;
  r.a_to_b = gl.a_to_b;
  r.b_to_a = gl.b_to_a;
  for (double v : {r.d_a_real, r.d_a_fake, r.d_b_real, r.d_b_fake}) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::NonFiniteLoss, "discriminator loss at step " + std::to_string(step));
    }
  }
  bundle.step = step;
  return r;
}

// ------------------------------------------------------------ inference

Tensor<float> image_to_tensor(const RgbImage& image) {
  return images_to_batch({&image});
}

Tensor<float> images_to_batch(const std::vector<const RgbImage*>& images) {
  if (images.empty()) throw Error(ErrorKind::ShapeMismatch, "empty batch");
  const int w = images[0]->width();
  const int h = images[0]->height();
  Tensor<float> t(static_cast<int>(images.size()), 3, h, w);
  for (int b = 0; b < t.n(); ++b) {
    const RgbImage& img = *images[b];
    if (img.width() != w || img.height() != h) {
      throw Error(ErrorKind::ShapeMismatch, "batch images differ in size");
    }
    const auto px = img.bytes();
    for (int c = 0; c < 3; ++c) {
      float* plane = t.plane(b, c);
      for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        plane[i] = static_cast<float>(px[i * 3 + c]) / 127.5f - 1.0f;
      }
    }
  }
  return t;
}

RgbImage tensor_to_image(const Tensor<float>& tensor, int batch_index) {
  if (tensor.c() != 3) throw Error(ErrorKind::ShapeMismatch, "expected 3 channels");
  RgbImage img(tensor.w(), tensor.h());
  auto px = img.bytes();
  for (int c = 0; c < 3; ++c) {
    const float* plane = tensor.plane(batch_index, c);
    for (std::size_t i = 0; i < static_cast<std::size_t>(tensor.w()) * tensor.h(); ++i) {
      const double v = (static_cast<double>(plane[i]) + 1.0) * 127.5;
      px[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

EyeImage translate(const Sequential<float>& generator, const EyeImage& image) {
  const Tensor<float> out = generator(image_to_tensor(image.pixels()));
  return EyeImage(tensor_to_image(out), Provenance::Translated);
}

EyeImage translate(const ModelBundle& bundle, const EyeImage& image, Direction direction) {
  return translate(direction == Direction::AtoB ? bundle.g : bundle.f, image);
}

std::vector<nn::Parameter<float>*> named_network(ModelBundle& bundle, const std::string& id,
                                                 Sequential<float>** net) {
  Sequential<float>* n = nullptr;
  if (id == "G") n = &bundle.g;
  else if (id == "F") n = &bundle.f;
  else if (id == "D_A") n = &bundle.d_a;
  else if (id == "D_B") n = &bundle.d_b;
  else throw Error(ErrorKind::UnknownLayerName, "unknown network '" + id + "'");
  if (net) *net = n;
  return n->parameters();
}

void apply_freeze(ModelBundle& bundle, const std::vector<std::string>& freeze_spec) {
  // Validate everything first so a bad entry leaves the bundle untouched.
  std::vector<std::pair<std::vector<nn::Parameter<float>*>, std::string>> resolved;
  for (const auto& entry : freeze_spec) {
    const auto dot = entry.find('.');
    const std::string id = entry.substr(0, dot);
    const std::string prefix = dot == std::string::npos ? std::string() : entry.substr(dot + 1);
    auto params = named_network(bundle, id);
    std::vector<nn::Parameter<float>*> hit;
    for (auto* p : params) {
      if (prefix.empty() || nn::has_component_prefix(p->name, prefix)) hit.push_back(p);
    }
    if (hit.empty()) throw Error(ErrorKind::UnknownLayerName, "no layer matches '" + entry + "'");
    resolved.emplace_back(std::move(hit), entry);
  }
  for (auto& [params, entry] : resolved) {
    for (auto* p : params) p->frozen = true;
  }
}

#define GAZEGAN_ENGINE_INSTANTIATE(T)                                                              \
  template Sequential<T> build_generator<T>(const ArchitectureConfig&, const std::string&,         \
                                            std::uint64_t, double);                                \
  template Sequential<T> build_discriminator<T>(const ArchitectureConfig&, const std::string&,     \
                                                std::uint64_t, double);                            \
  template LossGrad<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template LossGrad<T> generator_adversarial_loss<T>(const Tensor<T>&, AdversarialForm);           \
  template LossGrad<T> discriminator_loss<T>(const Tensor<T>&, const Tensor<T>&, AdversarialForm); \
  template GeneratorLosses generator_pass<T>(CycleNetworks<T>, const Tensor<T>&, const Tensor<T>&, \
                                             const TrainingConfig&, bool, Tensor<T>*, Tensor<T>*);

GAZEGAN_ENGINE_INSTANTIATE(float)
GAZEGAN_ENGINE_INSTANTIATE(double)

#undef GAZEGAN_ENGINE_INSTANTIATE

}  // namespace gazegan::engine
