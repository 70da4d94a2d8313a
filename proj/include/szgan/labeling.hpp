#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "szgan/signal_io.hpp"

namespace szgan {

/// Times are in minutes/hours as named; all must be positive.
struct LabelPolicy {
  double sop_min = 30.0;
  double sph_min = 5.0;
  double interictal_gap_h = 4.0;
  double lead_merge_min = 30.0;
  int max_seizures_per_day = 10;
  int min_lead_seizures = 3;
  double min_interictal_h = 3.0;

  void validate() const;
  double sop_s() const noexcept { return sop_min * 60.0; }
  double sph_s() const noexcept { return sph_min * 60.0; }
};

enum class Label { preictal, interictal, excluded, unlabeled };

std::string_view to_string(Label label);
Label label_from_string(std::string_view name);

struct TimeSpan {
  double begin_s = 0.0;
  double end_s = 0.0;
  double length() const noexcept { return end_s - begin_s; }
};

struct LabeledInterval {
  double begin_s = 0.0;
  double end_s = 0.0;
  Label label = Label::excluded;
  /// Index of the (merged) seizure a preictal interval precedes, else -1.
  int seizure = -1;
};

/// Seizures whose onset is less than `lead_merge_min` after the previous seizure's onset join
/// that seizure: the merged interval keeps the leading onset and the last member's offset.
AnnotationSet merge_leading_seizures(const AnnotationSet& ann, double lead_merge_min);

/// Partitions `span` into preictal [onset - (sph + sop), onset - sph) intervals, interictal
/// regions at least `interictal_gap_h` from every seizure, and excluded time. A preictal interval
/// reaching back into the previous seizure is truncated at that seizure's offset; each truncation
/// appends a note to `notes` when given.
std::vector<LabeledInterval> label_intervals(TimeSpan span, const AnnotationSet& merged, const LabelPolicy& policy,
                                             std::vector<std::string>* notes = nullptr);

struct Eligibility {
  bool eligible = true;
  /// Machine-readable: "min_lead_seizures", "max_seizures_per_day", "min_interictal_h".
  std::vector<std::string> reasons;
};

/// The per-day limit is checked over every rolling 24 h span.
Eligibility check_eligibility(const AnnotationSet& merged, double interictal_hours, const LabelPolicy& policy);

}  // namespace szgan
