#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "szgan/gan.hpp"

namespace szgan {

struct ClassifierConfig {
  std::vector<Index> fc_sizes{256, 2};
  double dropout = 0.5;
  double monitor_fraction = 0.25;
  /// Epochs without monitor-loss improvement before stopping.
  int patience = 3;
  int batch_size = 32;
  int max_epochs = 20;
  OptimizerSettings optimizer{Algorithm::adam, 1e-3, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 1;

  void validate() const;
};

/// Trunk features of labeled windows, one row per window. Label 1 is preictal, 0 interictal.
struct LabeledFeatureSet {
  RowMatrix<double> features;
  std::vector<int> labels;
  std::vector<double> start_s;
  std::string patient_id;

  std::size_t size() const noexcept { return labels.size(); }
  void validate() const;
  LabeledFeatureSet subset(std::span<const std::size_t> rows) const;
};

/// 1 for preictal, 0 for interictal; anything else is an ArgumentError.
int class_index(Label label);

/// Trunk features of every window of `windows` with their labels and start times.
LabeledFeatureSet make_feature_set(const FeatureExtractor& trunk, const WindowSource& windows,
                                   std::string patient_id = {});

struct MonitorSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> monitor;
};

/// Per class, the chronologically latest max(1, floor(fraction * count)) windows are held out
/// for monitoring. Index lists are ascending. Each class needs at least two windows.
MonitorSplit monitor_split(std::span<const int> labels, std::span<const double> start_s, double fraction);

/// dropout -> dense(256) -> sigmoid -> dropout -> dense(2) -> softmax on `feature_size` inputs.
Model build_head(Index feature_size, const ClassifierConfig& cfg, std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double monitor_loss = 0.0;
};

struct ClassifierLog {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_monitor_loss = 0.0;
  bool stopped_early = false;
};

struct HeadResult {
  Parameters head;
  ClassifierLog log;
};

/// Trains a fresh head on precomputed trunk features with monitor-based early stopping and
/// returns the parameters from the epoch with the lowest monitor loss.
HeadResult train_head(const LabeledFeatureSet& data, const ClassifierConfig& cfg);

/// Same, computing features with the frozen `trunk` first. The trunk is never modified.
HeadResult train_classifier(const FeatureExtractor& trunk, const WindowSource& windows, const ClassifierConfig& cfg);

struct SupervisedResult {
  Parameters trunk;
  Parameters head;
  ClassifierLog log;
};

/// Baseline without a GAN: a freshly initialised discriminator trunk trained jointly with the head.
SupervisedResult train_supervised(const WindowSource& windows, const DiscriminatorConfig& trunk_cfg,
                                  const ClassifierConfig& cfg, double init_std = 0.02);

/// Preictal probability of each feature row (inference mode).
std::vector<double> predict_features(const Model& head, const RowMatrix<double>& features);

/// Preictal probability of one standardized `[C, H, W]` input.
double predict(const FeatureExtractor& trunk, const Model& head, const Tensor& input);
double predict(const FeatureExtractor& trunk, const Model& head, const Spectrogram& window);
std::vector<double> predict(const FeatureExtractor& trunk, const Model& head, const WindowSource& windows);

}  // namespace szgan
