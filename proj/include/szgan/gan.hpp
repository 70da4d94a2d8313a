#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "szgan/network.hpp"
#include "szgan/optimizer.hpp"
#include "szgan/preprocess.hpp"

namespace szgan {

/// A network together with its parameters.
struct Model {
  Sequential net;
  Parameters params;
};

/// Uniform noise -> dense -> reshape -> strided deconvolutions. The last deconvolution always
/// emits one map per EEG channel; `deconv_filters` lists the ones before it.
struct GeneratorConfig {
  Index z_dim = 100;
  Index hidden = 6272;
  Shape reshape{64, 7, 14};
  std::vector<Index> deconv_filters{32, 16};
  Extent2 kernel{5, 5};
  Extent2 stride{2, 2};

  void validate() const;
};

struct DiscriminatorConfig {
  std::vector<Index> conv_filters{16, 32, 64};
  Extent2 kernel{5, 5};
  Extent2 stride{2, 2};
  double leak = 0.2;

  void validate() const;
  /// Layers before the logit head: each conv with its activation, then flatten.
  std::size_t trunk_layers() const noexcept { return 2 * conv_filters.size() + 1; }
};

enum class GanScope { global, per_patient };

std::string_view to_string(GanScope scope);
GanScope gan_scope_from_string(std::string_view name);

struct GanTrainConfig {
  int batch_size = 8;
  int steps = 100;
  int d_steps_per_g_step = 1;
  OptimizerSettings optimizer{};
  std::uint64_t seed = 1;
  GanScope scope = GanScope::global;
  /// Training aborts when |loss| exceeds this or turns non-finite.
  double divergence_limit = 1e3;
  double init_std = 0.02;

  void validate() const;
};

struct GanStepLog {
  long step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double d_real = 0.0;
  double d_fake = 0.0;
};

struct GanTrainLog {
  std::vector<GanStepLog> steps;
  std::size_t sample_count = 0;
};

struct GanResult {
  Parameters generator;
  Parameters discriminator;
  GanTrainLog log;
};

/// Generator output is `[n_channels, reshape[1] * stride^k, reshape[2] * stride^k]`.
Model build_generator(const GeneratorConfig& cfg, Index n_channels, std::uint64_t seed, double init_std = 0.02);

/// Input `[n_channels, input.h, input.w]`, output one logit.
Model build_discriminator(const DiscriminatorConfig& cfg, Index n_channels, Extent2 input = {56, 112},
                          std::uint64_t seed = 1, double init_std = 0.02);

struct GanLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// D loss -[log D(x) + log(1 - D(G(z)))] and non-saturating G loss -log D(G(z)), batch means.
GanLosses gan_losses(const Tensor& real_logits, const Tensor& fake_logits);

/// Alternating discriminator/generator updates on batches drawn uniformly from `real`.
/// Labels are never read. Throws ArgumentError on empty data and DivergenceError on blow-up.
GanResult train_gan(const WindowSource& real, Model generator, Model discriminator, const GanTrainConfig& cfg);

struct GanSetup {
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  GanTrainConfig train;
};

/// Builds fresh networks for the shape of `real` (seeded from `train.seed`) and trains them.
GanResult train_gan(const WindowSource& real, const GanSetup& setup);

/// One independent run per patient; each run's seed is derived from the patient id alone.
std::vector<std::pair<std::string, GanResult>> train_gan_per_patient(
    const std::vector<std::pair<std::string, const WindowSource*>>& patients, const GanSetup& setup);

/// The frozen convolutional trunk of a trained discriminator.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(Sequential trunk, Parameters params);

  const Sequential& network() const noexcept { return trunk_; }
  const Parameters& parameters() const noexcept { return params_; }
  Index feature_size() const { return trunk_.output_shape().front(); }
  const Shape& input_shape() const { return trunk_.input_shape(); }

  /// `[B, C, H, W]` -> `[B, feature_size]`.
  Tensor features(const Tensor& batch) const;

 private:
  Sequential trunk_;
  Parameters params_;
};

FeatureExtractor export_feature_extractor(const Model& discriminator, const DiscriminatorConfig& cfg);

/// Features of every window, one row each.
RowMatrix<double> extract_features(const FeatureExtractor& trunk, const WindowSource& windows,
                                   std::size_t batch_size = 32);

}  // namespace szgan
