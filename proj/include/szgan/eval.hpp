#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "szgan/labeling.hpp"

namespace szgan {

// ---- leave-one-seizure-out cross-validation ----

struct Fold {
  int held_out = 0;
  std::vector<int> train_seizures;
  int validation_part = 0;
  std::vector<int> train_parts;
};

struct CVPlan {
  int n_seizures = 0;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
  /// Indices into the interictal pool, one part per fold.
  std::vector<std::vector<std::size_t>> parts;

  /// Pool indices used for training / validation in fold `f`.
  std::vector<std::size_t> train_interictal(std::size_t f) const;
  const std::vector<std::size_t>& validation_interictal(std::size_t f) const { return parts.at(folds.at(f).validation_part); }
};

/// The pool (given by window start times) is cut chronologically into `n_seizures` contiguous
/// parts of near-equal size, and a seeded shuffle decides which fold validates on which part.
/// Needs at least two seizures and one pool window per part.
CVPlan make_cv_plan(int n_seizures, std::span<const double> interictal_starts, std::uint64_t seed);

// ---- ROC / AUC ----

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  double auc = 0.0;
  /// From (0, 0) at threshold +inf down to (1, 1); one point per distinct score.
  std::vector<RocPoint> points;
};

/// Mann-Whitney AUC with midranks for ties; `labels` are 1 (positive) or 0. Throws
/// UndefinedMetricError unless both classes are present.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

double trapezoid_area(std::span<const RocPoint> points);

// ---- alarms ----

struct TimedScore {
  double time_s = 0.0;
  double score = 0.0;
};

enum class AlarmOutcome { true_prediction, false_alarm };

std::string_view to_string(AlarmOutcome outcome);

struct AlarmEvent {
  double raise_time_s = 0.0;
  /// raise + SPH + SOP.
  double expiry_time_s = 0.0;
  AlarmOutcome outcome = AlarmOutcome::false_alarm;
};

struct AlarmSummary {
  double threshold = 0.0;
  std::vector<AlarmEvent> alarms;
  int predicted_seizures = 0;
  int total_seizures = 0;
  /// predicted / total; 0 when there are no seizures.
  double sensitivity = 0.0;
  int false_alarms = 0;
  /// Union of [t, t + window_s) over the timeline.
  double scored_hours = 0.0;
  double false_alarms_per_hour = 0.0;
};

/// A score at or above `threshold` raises an alarm unless one is active. An alarm is a true
/// prediction iff some onset of `merged` lies in [raise + SPH, raise + SPH + SOP). The timeline
/// must be sorted by time.
AlarmSummary simulate_alarms(std::span<const TimedScore> timeline, double threshold, const LabelPolicy& policy,
                             const AnnotationSet& merged, double window_s = 28.0);

// ---- reports ----

enum class Scenario { cnn_supervised, gan_cnn, gan_ps_cnn, gan_ps_ospl_cnn };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view name);
/// Table column heading: CNN, GAN-CNN, GAN-PS-CNN, GAN-PS-OSPL-CNN.
std::string_view column_name(Scenario s);
inline constexpr Scenario all_scenarios[] = {Scenario::cnn_supervised, Scenario::gan_cnn, Scenario::gan_ps_cnn,
                                             Scenario::gan_ps_ospl_cnn};

struct WindowScore {
  int fold = 0;
  double start_s = 0.0;
  int label = 0;
  double score = 0.0;
};

/// One repeat of the cross-validation for one patient.
struct RunReport {
  std::string patient_id;
  Scenario scenario = Scenario::gan_cnn;
  int repeat = 0;
  /// AUC over the concatenated validation windows of every fold.
  double auc = 0.0;
  std::vector<double> fold_auc;
  std::vector<RocPoint> roc;
  std::vector<AlarmSummary> alarms;
  std::vector<WindowScore> scores;
};

struct PatientReport {
  std::string patient_id;
  Scenario scenario = Scenario::gan_cnn;
  double auc_mean = 0.0;
  /// Sample standard deviation over repeats; 0 for a single repeat.
  double auc_sd = 0.0;
  std::vector<RunReport> runs;
};

/// Mean and sample standard deviation of the run AUCs. Runs must share patient and scenario.
PatientReport aggregate(std::span<const RunReport> runs);

nlohmann::json to_json(const AlarmSummary& a);
nlohmann::json to_json(const RunReport& r);
nlohmann::json to_json(const PatientReport& r);
PatientReport patient_report_from_json(const nlohmann::json& j);

/// Rows per patient (sorted by id) plus an Average row, one "mean ± sd" column per scenario
/// present, in percent.
std::string format_auc_table(std::span<const PatientReport> reports);
std::string auc_table_csv(std::span<const PatientReport> reports);
std::string roc_csv(std::span<const RocPoint> points);
/// patient_id, window_start_s, label, score (plus repeat and fold).
std::string scores_csv(const PatientReport& report);

}  // namespace szgan
