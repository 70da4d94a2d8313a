#include "szgan/gan.hpp"

#include <cmath>
#include <numeric>

#include "szgan/loss.hpp"

namespace szgan {

void GeneratorConfig::validate() const {
  if (z_dim < 1) throw ConfigError("generator z_dim must be positive");
  if (reshape.size() != 3) throw ConfigError("generator reshape must be [C, H, W]");
  if (hidden != shape_size(reshape)) {
    throw ConfigError("generator hidden size " + std::to_string(hidden) + " != product of reshape " +
                      shape_string(reshape));
  }
  if (kernel.h < 1 || kernel.w < 1 || stride.h < 1 || stride.w < 1) {
    throw ConfigError("generator kernel and stride must be positive");
  }
  for (Index f : deconv_filters) {
    if (f < 1) throw ConfigError("generator filter counts must be positive");
  }
}

void DiscriminatorConfig::validate() const {
  if (conv_filters.empty()) throw ConfigError("discriminator needs at least one convolution");
  for (Index f : conv_filters) {
    if (f < 1) throw ConfigError("discriminator filter counts must be positive");
  }
  if (kernel.h < 1 || kernel.w < 1 || stride.h < 1 || stride.w < 1) {
    throw ConfigError("discriminator kernel and stride must be positive");
  }
}

std::string_view to_string(GanScope scope) { return scope == GanScope::global ? "global" : "per_patient"; }

GanScope gan_scope_from_string(std::string_view name) {
  if (name == "global") return GanScope::global;
  if (name == "per_patient") return GanScope::per_patient;
  throw ConfigError("unknown GAN scope '" + std::string(name) + "'");
}

void GanTrainConfig::validate() const {
  if (batch_size < 1 || steps < 1 || d_steps_per_g_step < 1) {
    throw ConfigError("GAN batch size, steps and d_steps_per_g_step must be positive");
  }
}

Model build_generator(const GeneratorConfig& cfg, Index n_channels, std::uint64_t seed, double init_std) {
  cfg.validate();
  if (n_channels < 1) throw ConfigError("generator needs at least one output channel");
  std::vector<LayerSpec> layers{LayerSpec::dense("gen_fc", cfg.hidden), LayerSpec::activation(LayerKind::relu),
                                LayerSpec::reshape(cfg.reshape)};
  std::vector<Index> filters = cfg.deconv_filters;
  filters.push_back(n_channels);
  for (std::size_t i = 0; i < filters.size(); ++i) {
    layers.push_back(LayerSpec::deconv2d("gen_deconv" + std::to_string(i + 1), filters[i], cfg.kernel, cfg.stride));
    const bool last = i + 1 == filters.size();
    layers.push_back(LayerSpec::activation(last ? LayerKind::tanh : LayerKind::relu));
  }
  Sequential net({cfg.z_dim}, std::move(layers));
  Parameters params = net.init_parameters(seed, init_std);
  return {std::move(net), std::move(params)};
}

Model build_discriminator(const DiscriminatorConfig& cfg, Index n_channels, Extent2 input, std::uint64_t seed,
                          double init_std) {
  cfg.validate();
  if (n_channels < 1) throw ConfigError("discriminator needs at least one input channel");
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < cfg.conv_filters.size(); ++i) {
    layers.push_back(LayerSpec::conv2d("disc_conv" + std::to_string(i + 1), cfg.conv_filters[i], cfg.kernel,
                                       cfg.stride));
    layers.push_back(LayerSpec::leaky_relu(cfg.leak));
  }
  layers.push_back(LayerSpec::flatten());
  layers.push_back(LayerSpec::dense("disc_logit", 1));
  Sequential net({n_channels, input.h, input.w}, std::move(layers));
  Parameters params = net.init_parameters(seed, init_std);
  return {std::move(net), std::move(params)};
}

GanLosses gan_losses(const Tensor& real_logits, const Tensor& fake_logits) {
  return {bce_with_logits(real_logits, 1.0).value + bce_with_logits(fake_logits, 0.0).value,
          bce_with_logits(fake_logits, 1.0).value};
}

namespace {

double mean_probability(const Tensor& logits) {
  double s = 0.0;
  for (Index i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    s += z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return s / double(logits.size());
}

void guard(double loss, double limit, long step, std::string_view what) {
  if (!std::isfinite(loss) || std::abs(loss) > limit) {
    throw DivergenceError("GAN training diverged at step " + std::to_string(step) + ": " + std::string(what) +
                              " loss " + std::to_string(loss),
                          step);
  }
}

}  // namespace

GanResult train_gan(const WindowSource& real, Model generator, Model discriminator, const GanTrainConfig& cfg) {
  cfg.validate();
  if (real.size() == 0) throw ArgumentError("GAN training needs at least one real window");
  if (generator.net.output_shape() != discriminator.net.input_shape() ||
      real.input_shape() != discriminator.net.input_shape()) {
    throw DimensionError("generator output " + shape_string(generator.net.output_shape()) + ", discriminator input " +
                         shape_string(discriminator.net.input_shape()) + " and data " +
                         shape_string(real.input_shape()) + " must agree");
  }
  auto& g = generator;
  auto& d = discriminator;
  g.params.set_trainable(true);
  d.params.set_trainable(true);
  OptimizerState g_opt(cfg.optimizer), d_opt(cfg.optimizer);
  Rng rng(derive_seed(cfg.seed, "gan-batches"));
  std::uniform_int_distribution<std::size_t> pick(0, real.size() - 1);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  const Index z_dim = g.net.input_shape().front();
  const auto b = std::size_t(cfg.batch_size);

  auto sample_z = [&]() {
    Tensor z({Index(b), z_dim});
    for (Index i = 0; i < z.size(); ++i) z[i] = noise(rng);
    return z;
  };

  GanResult result;
  result.log.sample_count = real.size();
  std::vector<std::size_t> idx(b);
  for (long step = 1; step <= cfg.steps; ++step) {
    GanStepLog entry;
    entry.step = step;
    for (int k = 0; k < cfg.d_steps_per_g_step; ++k) {
      for (auto& i : idx) i = pick(rng);
      const Tensor x_real = real.batch(idx);
      const Tensor x_fake = g.net.infer(g.params, sample_z());

      const Tensor real_logits = d.net.forward(d.params, x_real, Mode::train, &rng);
      const Loss real_loss = bce_with_logits(real_logits, 1.0);
      d.net.backward(d.params, real_loss.grad, {.parameter_grads = true, .input_grad = false});
      const Tensor fake_logits = d.net.forward(d.params, x_fake, Mode::train, &rng);
      const Loss fake_loss = bce_with_logits(fake_logits, 0.0);
      d.net.backward(d.params, fake_loss.grad, {.parameter_grads = true, .input_grad = false});

      entry.d_loss = real_loss.value + fake_loss.value;
      entry.d_real = mean_probability(real_logits);
      entry.d_fake = mean_probability(fake_logits);
      guard(entry.d_loss, cfg.divergence_limit, step, "discriminator");
      optimizer_step(d_opt, d.params);
    }

    const Tensor fake = g.net.forward(g.params, sample_z(), Mode::train, &rng);
    const Tensor logits = d.net.forward(d.params, fake, Mode::train, &rng);
    const Loss g_loss = bce_with_logits(logits, 1.0);
    entry.g_loss = g_loss.value;
    guard(entry.g_loss, cfg.divergence_limit, step, "generator");
    const Tensor grad_fake = d.net.backward(d.params, g_loss.grad, {.parameter_grads = false, .input_grad = true});
    g.net.backward(g.params, grad_fake, {.parameter_grads = true, .input_grad = false});
    optimizer_step(g_opt, g.params);

    result.log.steps.push_back(entry);
  }
  if (!g.params.all_finite() || !d.params.all_finite()) {
    throw DivergenceError("GAN parameters became non-finite", cfg.steps);
  }
  result.generator = std::move(g.params);
  result.discriminator = std::move(d.params);
  return result;
}

GanResult train_gan(const WindowSource& real, const GanSetup& setup) {
  if (real.size() == 0) throw ArgumentError("GAN training needs at least one real window");
  const Shape in = real.input_shape();
  if (in.size() != 3) throw DimensionError("GAN input must be [C, H, W], got " + shape_string(in));
  Model g = build_generator(setup.generator, in[0], derive_seed(setup.train.seed, "generator"), setup.train.init_std);
  Model d = build_discriminator(setup.discriminator, in[0], {in[1], in[2]},
                                derive_seed(setup.train.seed, "discriminator"), setup.train.init_std);
  return train_gan(real, std::move(g), std::move(d), setup.train);
}

std::vector<std::pair<std::string, GanResult>> train_gan_per_patient(
    const std::vector<std::pair<std::string, const WindowSource*>>& patients, const GanSetup& setup) {
  std::vector<std::pair<std::string, GanResult>> out;
  for (const auto& [id, source] : patients) {
    GanSetup own = setup;
    own.train.seed = derive_seed(setup.train.seed, "patient:" + id);
    out.emplace_back(id, train_gan(*source, own));
  }
  return out;
}

FeatureExtractor::FeatureExtractor(Sequential trunk, Parameters params)
    : trunk_(std::move(trunk)), params_(std::move(params)) {
  trunk_.check_parameters(params_);
  params_.set_trainable(false);
  params_.clear_grad();
  if (trunk_.output_shape().size() != 1) throw DimensionError("feature extractor must end in a flat vector");
}

Tensor FeatureExtractor::features(const Tensor& batch) const { return trunk_.infer(params_, batch); }

FeatureExtractor export_feature_extractor(const Model& discriminator, const DiscriminatorConfig& cfg) {
  Sequential trunk = discriminator.net.head_layers(cfg.trunk_layers());
  return FeatureExtractor(trunk, select(discriminator.params, trunk.parameter_names()));
}

RowMatrix<double> extract_features(const FeatureExtractor& trunk, const WindowSource& windows,
                                   std::size_t batch_size) {
  if (windows.input_shape() != trunk.input_shape()) {
    throw DimensionError("windows of shape " + shape_string(windows.input_shape()) + " do not fit trunk input " +
                         shape_string(trunk.input_shape()));
  }
  const Index dim = trunk.feature_size();
  RowMatrix<double> out(Index(windows.size()), dim);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    idx.resize(std::min(batch_size, windows.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor f = trunk.features(windows.batch(idx));
    out.middleRows(Index(start), Index(idx.size())) = f.matrix(Index(idx.size()), dim);
  }
  return out;
}

}  // namespace szgan
