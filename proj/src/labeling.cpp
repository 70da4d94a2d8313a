#include "szgan/labeling.hpp"

#include <algorithm>
#include <cmath>

namespace szgan {

void LabelPolicy::validate() const {
  if (!(sop_min > 0 && sph_min > 0 && interictal_gap_h > 0 && lead_merge_min > 0 && min_interictal_h > 0) ||
      max_seizures_per_day < 1 || min_lead_seizures < 1) {
    throw ConfigError("label policy values must all be positive");
  }
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::preictal: return "preictal";
    case Label::interictal: return "interictal";
    case Label::excluded: return "excluded";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label label_from_string(std::string_view name) {
  for (auto l : {Label::preictal, Label::interictal, Label::excluded, Label::unlabeled}) {
    if (to_string(l) == name) return l;
  }
  throw ParseError("unknown label '" + std::string(name) + "'");
}

AnnotationSet merge_leading_seizures(const AnnotationSet& ann, double lead_merge_min) {
  AnnotationSet out;
  const double threshold = lead_merge_min * 60.0;
  double previous_onset = 0.0;
  for (const auto& s : ann.seizures) {
    if (!out.seizures.empty() && s.onset_s - previous_onset < threshold) {
      auto& lead = out.seizures.back();
      lead.offset_s = std::max(lead.offset_s, s.offset_s);
    } else {
      out.seizures.push_back(s);
    }
    previous_onset = s.onset_s;
  }
  return out;
}

std::vector<LabeledInterval> label_intervals(TimeSpan span, const AnnotationSet& merged, const LabelPolicy& policy,
                                             std::vector<std::string>* notes) {
  policy.validate();
  if (!(span.begin_s < span.end_s)) return {};
  const double gap = policy.interictal_gap_h * 3600.0;

  struct Pre {
    double begin, end;
    int seizure;
  };
  std::vector<Pre> pre;
  std::vector<double> cuts{span.begin_s, span.end_s};
  for (std::size_t i = 0; i < merged.seizures.size(); ++i) {
    const auto& s = merged.seizures[i];
    double begin = s.onset_s - policy.sph_s() - policy.sop_s();
    const double end = s.onset_s - policy.sph_s();
    if (i > 0 && begin < merged.seizures[i - 1].offset_s) {
      begin = merged.seizures[i - 1].offset_s;
      if (notes) {
        notes->push_back("preictal interval of seizure " + std::to_string(i) + " truncated at offset of seizure " +
                         std::to_string(i - 1));
      }
    }
    if (begin < end) {
      pre.push_back({begin, end, int(i)});
      cuts.push_back(begin);
      cuts.push_back(end);
    }
    cuts.push_back(s.onset_s);
    cuts.push_back(s.offset_s);
    cuts.push_back(s.onset_s - gap);
    cuts.push_back(s.offset_s + gap);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto classify = [&](double t) -> std::pair<Label, int> {
    for (const auto& p : pre) {
      if (t >= p.begin && t < p.end) return {Label::preictal, p.seizure};
    }
    for (const auto& s : merged.seizures) {
      if (t > s.onset_s - gap && t < s.offset_s + gap) return {Label::excluded, -1};
    }
    return {Label::interictal, -1};
  };

  std::vector<LabeledInterval> out;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = std::max(cuts[k], span.begin_s);
    const double b = std::min(cuts[k + 1], span.end_s);
    if (!(a < b)) continue;
    const auto [label, seizure] = classify(0.5 * (a + b));
    if (!out.empty() && out.back().label == label && out.back().seizure == seizure && out.back().end_s == a) {
      out.back().end_s = b;
    } else {
      out.push_back({a, b, label, seizure});
    }
  }
  return out;
}

Eligibility check_eligibility(const AnnotationSet& merged, double interictal_hours, const LabelPolicy& policy) {
  Eligibility e;
  if (int(merged.size()) < policy.min_lead_seizures) e.reasons.emplace_back("min_lead_seizures");
  const auto& s = merged.seizures;
  for (std::size_t i = 0, j = 0; i < s.size(); ++i) {
    while (s[i].onset_s - s[j].onset_s >= 24.0 * 3600.0) ++j;
    if (int(i - j + 1) >= policy.max_seizures_per_day) {
      e.reasons.emplace_back("max_seizures_per_day");
      break;
    }
  }
  if (interictal_hours < policy.min_interictal_h) e.reasons.emplace_back("min_interictal_h");
  e.eligible = e.reasons.empty();
  return e;
}

}  // namespace szgan
