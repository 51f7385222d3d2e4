#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gazegan/image.hpp"
#include "gazegan/nn/adam.hpp"
#include "gazegan/nn/layers.hpp"

namespace gazegan::engine {

using nn::Tensor;

enum class AdversarialForm { LogLikelihood, LeastSquares };
enum class Direction { AtoB, BtoA };

struct ArchitectureConfig {
  int generator_filters = 32;
  int discriminator_filters = 32;
  int residual_blocks = 6;

  void validate() const;
  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

struct TrainingConfig {
  ArchitectureConfig architecture;
  double lambda_cycle = 10.0;
  double lambda_identity = 5.0;
  AdversarialForm adversarial_form = AdversarialForm::LeastSquares;
  double learning_rate = 2e-4;
  /// Rate for D_A and D_B; 0 uses learning_rate.
  double discriminator_learning_rate = 0.0;
  /// Step of a run after which all rates fall linearly to zero at max_steps;
  /// 0 keeps them constant.
  std::int64_t decay_start_step = 0;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 1;
  int epochs = 100;
  int pool_size = 50;
  double label_noise_amplitude = 0.05;
  /// Target for real images before noise; 1.0 disables smoothing.
  double real_label = 0.9;
  double init_stddev = 0.02;
  std::uint64_t seed = 1;
  /// Periodic checkpoint interval in steps; 0 keeps only epoch-end ones.
  int checkpoint_every = 0;
  /// Hard cap on optimizer steps across all epochs; 0 means no cap.
  std::int64_t max_steps = 0;
  /// Pixel radius within which a validation detection counts as a success.
  double validation_tolerance_px = 3.0;

  void validate() const;
  double discriminator_rate() const noexcept {
    return discriminator_learning_rate > 0 ? discriminator_learning_rate : learning_rate;
  }
  /// Multiplier on both rates before step `run_step` (0-based) of a run.
  double rate_factor(std::int64_t run_step) const noexcept;
  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

inline constexpr int kFineTuneDefaultEpochs = 20;

std::string to_string(AdversarialForm form);
AdversarialForm adversarial_form_from_string(const std::string& s);

// ------------------------------------------------------------- networks

/// Encoder (two stride-2 convolutions), residual blocks, decoder (two
/// stride-2 transposed convolutions), tanh head. Layer names: stem, down1,
/// down2, res1..resN, up1, up2, head.
template <typename T>
nn::Sequential<T> build_generator(const ArchitectureConfig& arch, const std::string& id,
                                  std::uint64_t seed, double init_stddev = 0.02);

/// Strided-convolution patch discriminator with LeakyReLU(0.2); emits a
/// raw score map.
template <typename T>
nn::Sequential<T> build_discriminator(const ArchitectureConfig& arch, const std::string& id,
                                      std::uint64_t seed, double init_stddev = 0.02);

// ---------------------------------------------------------------- losses

/// E[log D(real)] + E[log(1 - D(fake))] over probability score maps.
double adversarial_objective(std::span<const double> real_scores, std::span<const double> fake_scores);

/// 1/2 [(D(y) - 1)^2 + D(G(x))^2] evaluated on scalar scores.
double least_squares_discriminator_objective(double real_score, double fake_score);

double composite_generator_loss(double adv, double cycle_fwd, double cycle_bwd, double identity,
                                const TrainingConfig& config);

template <typename T>
struct LossGrad {
  double value = 0.0;
  Tensor<T> grad;  // d value / d prediction
};

/// Mean absolute difference and its gradient with respect to `prediction`.
template <typename T>
LossGrad<T> l1_loss(const Tensor<T>& prediction, const Tensor<T>& target);

double cycle_consistency_loss(const Tensor<float>& original, const Tensor<float>& reconstructed);
double identity_loss(const Tensor<float>& target_batch, const Tensor<float>& generator_output);

/// Generator-side adversarial loss on raw discriminator scores.
template <typename T>
LossGrad<T> generator_adversarial_loss(const Tensor<T>& raw_scores, AdversarialForm form);

/// Weighted (x 1/2) discriminator loss on raw scores against per-position targets.
template <typename T>
LossGrad<T> discriminator_loss(const Tensor<T>& raw_scores, const Tensor<T>& targets,
                               AdversarialForm form);

struct GeneratorComponents {
  double adv = 0.0;
  double cycle_fwd = 0.0;
  double cycle_bwd = 0.0;
  double identity = 0.0;
};

struct GeneratorLosses {
  GeneratorComponents a_to_b;  // G
  GeneratorComponents b_to_a;  // F
  double g_a_to_b = 0.0;
  double g_b_to_a = 0.0;
};

template <typename T>
struct CycleNetworks {
  nn::Sequential<T>& g;    // A -> B
  nn::Sequential<T>& f;    // B -> A
  nn::Sequential<T>& d_a;  // judges domain A
  nn::Sequential<T>& d_b;  // judges domain B
};

/// Runs both generators over a real A and a real B batch, computing every
/// generator loss component. With `backward` set, accumulates into the G and
/// F parameter gradients the gradient of both composites (each generator
/// receives the gradient of its own composite); discriminator parameters are
/// left untouched.
template <typename T>
GeneratorLosses generator_pass(CycleNetworks<T> nets, const Tensor<T>& real_a, const Tensor<T>& real_b,
                               const TrainingConfig& config, bool backward,
                               Tensor<T>* fake_a = nullptr, Tensor<T>* fake_b = nullptr);

// ----------------------------------------------------------- model state

struct ModelBundle {
  TrainingConfig config;
  nn::Sequential<float> g;
  nn::Sequential<float> f;
  nn::Sequential<float> d_a;
  nn::Sequential<float> d_b;
  nn::Adam<float> opt_g;
  nn::Adam<float> opt_f;
  nn::Adam<float> opt_d_a;
  nn::Adam<float> opt_d_b;
  std::int64_t step = 0;
  int epoch = 0;

  static ModelBundle create(const TrainingConfig& config);
};

/// Buffer of earlier generator outputs shown to the discriminators.
class ImagePool {
 public:
  ImagePool(int capacity, std::uint64_t seed);

  /// Returns the image to show the discriminator for one generated sample.
  Tensor<float> query(const Tensor<float>& image);
  /// Applies query() to each batch item.
  Tensor<float> query_batch(const Tensor<float>& batch);

  int capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return images_.size(); }
  bool last_returned_stored() const noexcept { return last_stored_; }

 private:
  int capacity_;
  std::vector<Tensor<float>> images_;
  std::mt19937_64 rng_;
  bool last_stored_ = false;
};

struct TrainerState {
  ImagePool pool_a;
  ImagePool pool_b;
  std::mt19937_64 rng;

  explicit TrainerState(const TrainingConfig& config);
};

struct LossReport {
  std::int64_t step = 0;
  double d_a_real = 0.0;
  double d_a_fake = 0.0;
  double d_b_real = 0.0;
  double d_b_fake = 0.0;
  double g_a_to_b = 0.0;
  double g_b_to_a = 0.0;
  GeneratorComponents a_to_b;
  GeneratorComponents b_to_a;
};

/// `>STEP, dA[real,fake] dB[real,fake] g[AtoB,BtoA]` with three decimals.
std::string format_log_line(const LossReport& report);
inline constexpr const char* kLossCsvHeader =
    "step,dA_real,dA_fake,dB_real,dB_fake,g_AtoB,g_BtoA,adv,cyc_f,cyc_b,id";
/// Loss-curve row; adv and id sum both generators' terms.
std::string format_loss_csv_row(const LossReport& report);

/// Per-position discriminator targets: `real_label` (or 0 for fakes) plus
/// uniform noise of the configured amplitude, clipped to [0, 1].
Tensor<float> discriminator_targets(const nn::Shape& shape, bool real, const TrainingConfig& config,
                                    std::mt19937_64& rng);

/// One optimizer update for G, F, D_A and D_B. Batches are in [-1, 1].
LossReport train_step(const Tensor<float>& batch_a, const Tensor<float>& batch_b, ModelBundle& bundle,
                      TrainerState& state, const TrainingConfig& config);

// ------------------------------------------------------------ inference

Tensor<float> image_to_tensor(const RgbImage& image);
RgbImage tensor_to_image(const Tensor<float>& tensor, int batch_index = 0);
/// Stacks images into one [N,3,H,W] batch.
Tensor<float> images_to_batch(const std::vector<const RgbImage*>& images);

EyeImage translate(const ModelBundle& bundle, const EyeImage& image, Direction direction);
EyeImage translate(const nn::Sequential<float>& generator, const EyeImage& image);

/// Marks parameters under the given "<net>.<layer prefix>" names as frozen
/// (net is G, F, D_A or D_B). Throws UnknownLayerName for unmatched entries.
void apply_freeze(ModelBundle& bundle, const std::vector<std::string>& freeze_spec);

/// Name-prefixed parameter list of one network ("G", "F", "D_A", "D_B").
std::vector<nn::Parameter<float>*> named_network(ModelBundle& bundle, const std::string& id,
                                                 nn::Sequential<float>** net = nullptr);

}  // namespace gazegan::engine
