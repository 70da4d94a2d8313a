#include "szgan/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "szgan/loss.hpp"

namespace szgan {

void ClassifierConfig::validate() const {
  if (fc_sizes != std::vector<Index>{256, 2}) throw ConfigError("classifier fc_sizes must be [256, 2]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("classifier dropout must lie in [0, 1)");
  if (!(monitor_fraction > 0.0 && monitor_fraction < 1.0)) {
    throw ConfigError("classifier monitor_fraction must lie in (0, 1)");
  }
  if (patience < 1 || batch_size < 1 || max_epochs < 1) {
    throw ConfigError("classifier patience, batch_size and max_epochs must be positive");
  }
}

int class_index(Label label) {
  if (label == Label::preictal) return 1;
  if (label == Label::interictal) return 0;
  throw ArgumentError("window labelled '" + std::string(to_string(label)) + "' cannot be classified");
}

void LabeledFeatureSet::validate() const {
  if (features.rows() != Index(labels.size()) || start_s.size() != labels.size()) {
    throw DimensionError("feature set has " + std::to_string(features.rows()) + " rows, " +
                         std::to_string(labels.size()) + " labels and " + std::to_string(start_s.size()) +
                         " start times");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw ArgumentError("feature labels must be 0 or 1");
  }
  if (!features.allFinite()) throw DataError("feature set contains non-finite values");
}

LabeledFeatureSet LabeledFeatureSet::subset(std::span<const std::size_t> rows) const {
  LabeledFeatureSet out;
  out.patient_id = patient_id;
  out.features.resize(Index(rows.size()), features.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(Index(r)) = features.row(Index(rows[r]));
    out.labels.push_back(labels.at(rows[r]));
    out.start_s.push_back(start_s.at(rows[r]));
  }
  return out;
}

LabeledFeatureSet make_feature_set(const FeatureExtractor& trunk, const WindowSource& windows,
                                   std::string patient_id) {
  LabeledFeatureSet out;
  out.patient_id = std::move(patient_id);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    out.labels.push_back(class_index(windows.label(i)));
    out.start_s.push_back(windows.start_s(i));
  }
  out.features = extract_features(trunk, windows);
  return out;
}

MonitorSplit monitor_split(std::span<const int> labels, std::span<const double> start_s, double fraction) {
  if (labels.size() != start_s.size()) throw DimensionError("monitor_split: labels and start times differ in length");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ArgumentError("monitor fraction must lie in (0, 1)");
  MonitorSplit split;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != 0 && labels[i] != 1) throw ArgumentError("monitor_split: labels must be 0 or 1");
      if (labels[i] == cls) members.push_back(i);
    }
    if (members.size() < 2) {
      throw ArgumentError(std::string("monitor_split: class ") + (cls ? "preictal" : "interictal") + " has " +
                          std::to_string(members.size()) + " windows, need at least 2");
    }
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t a, std::size_t b) { return start_s[a] < start_s[b]; });
    const auto n_monitor = std::max<std::size_t>(1, std::size_t(std::floor(fraction * double(members.size()))));
    const auto cut = members.end() - std::ptrdiff_t(n_monitor);
    split.train.insert(split.train.end(), members.begin(), cut);
    split.monitor.insert(split.monitor.end(), cut, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.monitor.begin(), split.monitor.end());
  return split;
}

Model build_head(Index feature_size, const ClassifierConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<LayerSpec> layers{LayerSpec::dropout(cfg.dropout),
                                LayerSpec::dense("head_fc1", cfg.fc_sizes[0]),
                                LayerSpec::activation(LayerKind::sigmoid),
                                LayerSpec::dropout(cfg.dropout),
                                LayerSpec::dense("head_fc2", cfg.fc_sizes[1]),
                                LayerSpec::activation(LayerKind::softmax)};
  Sequential net({feature_size}, std::move(layers));
  Parameters params = net.init_parameters(seed);
  return {std::move(net), std::move(params)};
}

namespace {

using BatchFn = std::function<Tensor(std::span<const std::size_t>)>;

double mean_loss(const Sequential& net, const Parameters& params, const BatchFn& inputs, std::span<const int> labels,
                 std::span<const std::size_t> rows, std::size_t batch_size) {
  double total = 0.0;
  std::vector<int> y;
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const auto chunk = rows.subspan(start, std::min(batch_size, rows.size() - start));
    y.clear();
    for (auto r : chunk) y.push_back(labels[r]);
    total += cross_entropy(net.infer(params, inputs(chunk)), y).value * double(chunk.size());
  }
  return total / double(rows.size());
}

// Mini-batch training of `net` with early stopping on the monitor rows. On return `params`
// holds the best-monitor-loss snapshot.
ClassifierLog fit(Sequential& net, Parameters& params, const BatchFn& inputs, std::span<const int> labels,
                  const MonitorSplit& split, const ClassifierConfig& cfg, Rng& rng) {
  if (split.train.empty() || split.monitor.empty()) throw ArgumentError("classifier training split is empty");
  OptimizerState opt(cfg.optimizer);
  ClassifierLog log;
  log.best_monitor_loss = std::numeric_limits<double>::infinity();
  Parameters best = params;
  std::vector<std::size_t> order = split.train;
  const auto b = std::size_t(cfg.batch_size);
  int stale = 0;
  std::vector<int> y;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += b) {
      const auto chunk = std::span<const std::size_t>(order).subspan(start, std::min(b, order.size() - start));
      y.clear();
      for (auto r : chunk) y.push_back(labels[r]);
      const Tensor probs = net.forward(params, inputs(chunk), Mode::train, &rng);
      const Loss loss = cross_entropy(probs, y);
      if (!std::isfinite(loss.value)) {
        throw DivergenceError("classifier loss became non-finite in epoch " + std::to_string(epoch), epoch);
      }
      train_total += loss.value * double(chunk.size());
      net.backward(params, loss.grad, {.parameter_grads = true, .input_grad = false});
      optimizer_step(opt, params);
    }
    const double monitor = mean_loss(net, params, inputs, labels, split.monitor, b);
    if (!std::isfinite(monitor)) {
      throw DivergenceError("classifier monitor loss became non-finite in epoch " + std::to_string(epoch), epoch);
    }
    log.epochs.push_back({epoch, train_total / double(order.size()), monitor});
    if (monitor < log.best_monitor_loss) {
      log.best_monitor_loss = monitor;
      log.best_epoch = epoch;
      best = params;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      log.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  params = std::move(best);
  params.clear_grad();
  return log;
}

Tensor rows_tensor(const RowMatrix<double>& features, std::span<const std::size_t> rows) {
  Tensor out({Index(rows.size()), features.cols()});
  auto m = out.matrix(Index(rows.size()), features.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) m.row(Index(r)) = features.row(Index(rows[r]));
  return out;
}

}  // namespace

HeadResult train_head(const LabeledFeatureSet& data, const ClassifierConfig& cfg) {
  cfg.validate();
  data.validate();
  const MonitorSplit split = monitor_split(data.labels, data.start_s, cfg.monitor_fraction);
  Model head = build_head(data.features.cols(), cfg, derive_seed(cfg.seed, "head"));
  Rng rng(derive_seed(cfg.seed, "head-batches"));
  const BatchFn inputs = [&](std::span<const std::size_t> rows) { return rows_tensor(data.features, rows); };
  HeadResult out;
  out.log = fit(head.net, head.params, inputs, data.labels, split, cfg, rng);
  out.head = std::move(head.params);
  return out;
}

HeadResult train_classifier(const FeatureExtractor& trunk, const WindowSource& windows, const ClassifierConfig& cfg) {
  return train_head(make_feature_set(trunk, windows), cfg);
}

SupervisedResult train_supervised(const WindowSource& windows, const DiscriminatorConfig& trunk_cfg,
                                  const ClassifierConfig& cfg, double init_std) {
  cfg.validate();
  if (windows.size() == 0) throw ArgumentError("supervised training needs labeled windows");
  std::vector<int> labels;
  std::vector<double> starts;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    labels.push_back(class_index(windows.label(i)));
    starts.push_back(windows.start_s(i));
  }
  const MonitorSplit split = monitor_split(labels, starts, cfg.monitor_fraction);
  const Shape in = windows.input_shape();
  const Model disc =
      build_discriminator(trunk_cfg, in.at(0), {in.at(1), in.at(2)}, derive_seed(cfg.seed, "trunk"), init_std);
  const Sequential trunk = disc.net.head_layers(trunk_cfg.trunk_layers());
  Model head = build_head(trunk.output_shape().front(), cfg, derive_seed(cfg.seed, "head"));
  Sequential net = trunk.then(head.net);
  Parameters params = merge(select(disc.params, trunk.parameter_names()), head.params);
  Rng rng(derive_seed(cfg.seed, "supervised-batches"));
  // Every epoch revisits every window, so the inputs are materialized once.
  std::vector<Tensor> cache(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) cache[i] = windows.input(i);
  const BatchFn inputs = [&](std::span<const std::size_t> rows) {
    std::vector<Tensor> picked;
    picked.reserve(rows.size());
    for (auto r : rows) picked.push_back(cache[r]);
    return stack(picked);
  };
  SupervisedResult out;
  out.log = fit(net, params, inputs, labels, split, cfg, rng);
  out.trunk = select(params, trunk.parameter_names());
  out.head = select(params, head.net.parameter_names());
  return out;
}

std::vector<double> predict_features(const Model& head, const RowMatrix<double>& features) {
  if (head.net.input_shape() != Shape{features.cols()}) {
    throw DimensionError("head expects " + shape_string(head.net.input_shape()) + " features, got " +
                         std::to_string(features.cols()));
  }
  std::vector<double> out;
  std::vector<std::size_t> rows;
  constexpr std::size_t chunk = 64;
  for (std::size_t start = 0; start < std::size_t(features.rows()); start += chunk) {
    rows.resize(std::min(chunk, std::size_t(features.rows()) - start));
    std::iota(rows.begin(), rows.end(), start);
    const Tensor probs = head.net.infer(head.params, rows_tensor(features, rows));
    for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(probs[Index(2 * r + 1)]);
  }
  return out;
}

double predict(const FeatureExtractor& trunk, const Model& head, const Tensor& input) {
  if (input.shape() != trunk.input_shape()) {
    throw DimensionError("window of shape " + shape_string(input.shape()) + " does not fit trunk input " +
                         shape_string(trunk.input_shape()));
  }
  const Tensor f = trunk.features(input.reshaped(batched(1, input.shape())));
  const Tensor probs = head.net.infer(head.params, f);
  return probs[1];
}

double predict(const FeatureExtractor& trunk, const Model& head, const Spectrogram& window) {
  return predict(trunk, head, standardized(window));
}

std::vector<double> predict(const FeatureExtractor& trunk, const Model& head, const WindowSource& windows) {
  return predict_features(head, extract_features(trunk, windows));
}

}  // namespace szgan
