#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "szgan/classifier.hpp"
#include "szgan/eval.hpp"
#include "szgan/gan.hpp"

namespace szgan {

namespace fs = std::filesystem;

struct PatientConfig {
  std::string id;
  /// Channels to keep, in order. Empty keeps every channel of the recordings.
  std::vector<std::string> channels;
  int line_freq = 60;
};

/// Layout of the generated synthetic patients: one recording with seizures and one seizure-free
/// recording placed `interictal_gap_h` after it.
struct SynthConfig {
  int n_channels = 6;
  double seizure_recording_h = 2.5;
  int seizures = 3;
  double seizure_duration_s = 60.0;
  double first_onset_min = 45.0;
  /// Seizure-free time kept after the last seizure's offset.
  double tail_min = 10.0;
  double interictal_h = 3.2;
  double interictal_gap_h = 5.0;
  std::uint64_t seed = 7;
  SyntheticProfile profile;

  void validate() const;
};

struct ExperimentConfig {
  /// Relative paths resolve against `base_dir` (the config file's directory).
  std::string dataset_root = "data";
  std::string output_dir = "runs";
  std::vector<PatientConfig> patients;
  StftConfig stft;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  GanTrainConfig gan;
  ClassifierConfig classifier;
  LabelPolicy labels;
  Scenario scenario = Scenario::gan_cnn;
  int oversample_factor = 10;
  /// Minority : majority ratio the training windows are balanced to.
  double balance_ratio = 1.0;
  double window_stride_s = 28.0;
  double gan_stride_s = 28.0;
  int repeats = 2;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::vector<double> alarm_thresholds{0.5};
  SynthConfig synth;

  fs::path base_dir = ".";

  void validate() const;
  fs::path dataset_path() const;
  fs::path output_path() const;
  fs::path scenario_path() const { return output_path() / std::string(to_string(scenario)); }
  const PatientConfig& patient(const std::string& id) const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Every field is optional; unknown keys are a ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, fs::path base_dir = ".");
ExperimentConfig load_experiment_config(const fs::path& path);

/// Log lines go to std::clog unless silenced.
void set_verbose(bool verbose);

/// Everything known about one patient's recordings.
struct PatientData {
  PatientConfig config;
  std::vector<fs::path> files;
  std::shared_ptr<const std::vector<Recording>> recordings;
  /// Leading seizures, absolute time.
  AnnotationSet merged;
  std::vector<std::vector<LabeledInterval>> intervals;
  double interictal_hours = 0.0;
  Eligibility eligibility;
  StftConfig stft;
  /// Content hash of the recording and annotation files.
  std::uint64_t input_hash = 0;

  Index n_channels() const { return recordings->front().n_channels(); }
};

/// Loads `<dataset>/<id>/*.szr|*.csv` with their `.ann.json` sidecars.
PatientData load_patient(const ExperimentConfig& cfg, const PatientConfig& patient);

/// Preictal and interictal windows of every recording, sorted by start time.
std::vector<WindowRef> labeled_windows(const PatientData& p, double stride_s);
/// Unlabeled windows tiling every recording, for GAN training.
std::vector<WindowRef> gan_windows(const PatientData& p, double stride_s);

struct FoldData {
  int seizure = 0;
  std::vector<WindowRef> train;
  std::vector<WindowRef> validation;
};

struct PatientFolds {
  CVPlan plan;
  /// Merged-seizure index held out in each fold.
  std::vector<int> seizures;
  std::vector<FoldData> folds;
};

/// Leave-one-seizure-out folds. Training windows are balanced; validation windows are not.
PatientFolds make_folds(const PatientData& p, const ExperimentConfig& cfg);

// ---- commands ----

struct SynthOptions {
  std::optional<double> duration_h;
  std::optional<int> seizures;
  std::optional<std::string> patient;
};

struct SynthOutcome {
  std::string patient_id;
  std::vector<fs::path> files;
  Eligibility eligibility;
};

std::vector<SynthOutcome> cmd_synth(const ExperimentConfig& cfg, const SynthOptions& opts = {});

struct PreprocessOutcome {
  std::string patient_id;
  bool eligible = false;
  bool reused = false;
  std::size_t windows = 0;
  Shape shape;
};

/// Writes `<out>/cache/<patient>/` with one SZS1 file per labeled window plus `index.json`.
/// An index whose input hash matches is left untouched.
std::vector<PreprocessOutcome> cmd_preprocess(const ExperimentConfig& cfg, bool force = false);

struct TrainOutcome {
  bool reused = false;
  std::vector<fs::path> trunks;
  std::vector<fs::path> heads;
  std::vector<std::string> skipped;
};

TrainOutcome cmd_train(const ExperimentConfig& cfg, bool force = false);

std::vector<PatientReport> cmd_evaluate(const ExperimentConfig& cfg, bool force = false);

/// Collects every scenario's reports under the output directory into one table.
std::string cmd_report(const ExperimentConfig& cfg);

}  // namespace szgan
