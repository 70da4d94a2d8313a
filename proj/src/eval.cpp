#include "szgan/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "szgan/random.hpp"

namespace szgan {

using nlohmann::json;

std::vector<std::size_t> CVPlan::train_interictal(std::size_t f) const {
  std::vector<std::size_t> out;
  for (int p : folds.at(f).train_parts) out.insert(out.end(), parts.at(std::size_t(p)).begin(), parts.at(std::size_t(p)).end());
  std::sort(out.begin(), out.end());
  return out;
}

CVPlan make_cv_plan(int n_seizures, std::span<const double> interictal_starts, std::uint64_t seed) {
  if (n_seizures < 2) {
    throw ArgumentError("cross-validation needs at least 2 seizures, got " + std::to_string(n_seizures));
  }
  const auto n = std::size_t(n_seizures);
  if (interictal_starts.size() < n) {
    throw ArgumentError("interictal pool of " + std::to_string(interictal_starts.size()) +
                        " windows cannot be split into " + std::to_string(n) + " parts");
  }
  std::vector<std::size_t> chrono(interictal_starts.size());
  std::iota(chrono.begin(), chrono.end(), 0);
  std::stable_sort(chrono.begin(), chrono.end(),
                   [&](std::size_t a, std::size_t b) { return interictal_starts[a] < interictal_starts[b]; });

  std::vector<std::vector<std::size_t>> chunks(n);
  const std::size_t base = chrono.size() / n, extra = chrono.size() % n;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    chunks[c].assign(chrono.begin() + std::ptrdiff_t(pos), chrono.begin() + std::ptrdiff_t(pos + len));
    std::sort(chunks[c].begin(), chunks[c].end());
    pos += len;
  }

  // Deterministic Fisher-Yates; std::shuffle's algorithm is implementation-defined.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "cv-plan"));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[std::size_t(rng() % (i + 1))]);

  CVPlan plan;
  plan.n_seizures = n_seizures;
  plan.seed = seed;
  for (std::size_t p = 0; p < n; ++p) plan.parts.push_back(std::move(chunks[perm[p]]));
  for (int i = 0; i < n_seizures; ++i) {
    Fold f;
    f.held_out = i;
    f.validation_part = i;
    for (int j = 0; j < n_seizures; ++j) {
      if (j == i) continue;
      f.train_seizures.push_back(j);
      f.train_parts.push_back(j);
    }
    plan.folds.push_back(std::move(f));
  }
  return plan;
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: scores and labels differ in length");
  std::uint64_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ArgumentError("roc_auc: labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw ArgumentError("roc_auc: non-finite score at index " + std::to_string(i));
    (labels[i] ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedMetricError("AUC is undefined with " + std::to_string(n_pos) + " positive and " +
                               std::to_string(n_neg) + " negative samples");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the positive rank sum, in integers: a tie group at 1-based positions lo..hi has
  // midrank (lo + hi) / 2.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo;
    while (hi + 1 < order.size() && scores[order[hi + 1]] == scores[order[lo]]) ++hi;
    std::uint64_t pos_in_group = 0;
    for (std::size_t k = lo; k <= hi; ++k) pos_in_group += std::uint64_t(labels[order[k]]);
    twice_rank_sum += pos_in_group * std::uint64_t(lo + 1 + hi + 1);
    lo = hi + 1;
  }
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);

  RocResult out;
  out.auc = double(twice_u) / (2.0 * double(n_pos) * double(n_neg));
  out.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = order.size(); k > 0;) {
    const double s = scores[order[k - 1]];
    while (k > 0 && scores[order[k - 1]] == s) {
      (labels[order[k - 1]] ? tp : fp) += 1;
      --k;
    }
    out.points.push_back({s, double(fp) / double(n_neg), double(tp) / double(n_pos)});
  }
  return out;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

std::string_view to_string(AlarmOutcome outcome) {
  return outcome == AlarmOutcome::true_prediction ? "true_prediction" : "false_alarm";
}

AlarmSummary simulate_alarms(std::span<const TimedScore> timeline, double threshold, const LabelPolicy& policy,
                             const AnnotationSet& merged, double window_s) {
  policy.validate();
  if (!(window_s > 0.0)) throw ArgumentError("alarm scoring window must be positive");
  for (std::size_t i = 1; i < timeline.size(); ++i) {
    if (timeline[i].time_s < timeline[i - 1].time_s) {
      throw ArgumentError("score timeline is not sorted at index " + std::to_string(i));
    }
  }
  AlarmSummary out;
  out.threshold = threshold;
  out.total_seizures = int(merged.size());
  std::vector<bool> predicted(merged.size(), false);
  const double sph = policy.sph_s(), horizon = policy.sph_s() + policy.sop_s();
  for (const TimedScore& p : timeline) {
    if (p.score < threshold) continue;
    if (!out.alarms.empty() && p.time_s < out.alarms.back().expiry_time_s) continue;
    AlarmEvent a{p.time_s, p.time_s + horizon, AlarmOutcome::false_alarm};
    for (std::size_t s = 0; s < merged.size(); ++s) {
      const double onset = merged.seizures[s].onset_s;
      if (onset >= a.raise_time_s + sph && onset < a.expiry_time_s) {
        a.outcome = AlarmOutcome::true_prediction;
        predicted[s] = true;
      }
    }
    if (a.outcome == AlarmOutcome::false_alarm) ++out.false_alarms;
    out.alarms.push_back(a);
  }
  out.predicted_seizures = int(std::count(predicted.begin(), predicted.end(), true));
  out.sensitivity = merged.empty() ? 0.0 : double(out.predicted_seizures) / double(merged.size());

  double covered = 0.0, run_begin = 0.0, run_end = -std::numeric_limits<double>::infinity();
  for (const TimedScore& p : timeline) {
    if (p.time_s > run_end) {
      covered += std::max(0.0, run_end - run_begin);
      run_begin = p.time_s;
    }
    run_end = std::max(run_end, p.time_s + window_s);
  }
  if (!timeline.empty()) covered += run_end - run_begin;
  out.scored_hours = covered / 3600.0;
  out.false_alarms_per_hour = out.scored_hours > 0.0 ? double(out.false_alarms) / out.scored_hours : 0.0;
  return out;
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::cnn_supervised: return "cnn_supervised";
    case Scenario::gan_cnn: return "gan_cnn";
    case Scenario::gan_ps_cnn: return "gan_ps_cnn";
    case Scenario::gan_ps_ospl_cnn: return "gan_ps_ospl_cnn";
  }
  return "?";
}

Scenario scenario_from_string(std::string_view name) {
  for (Scenario s : all_scenarios) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown scenario '" + std::string(name) +
                    "' (expected cnn_supervised, gan_cnn, gan_ps_cnn or gan_ps_ospl_cnn)");
}

std::string_view column_name(Scenario s) {
  switch (s) {
    case Scenario::cnn_supervised: return "CNN";
    case Scenario::gan_cnn: return "GAN-CNN";
    case Scenario::gan_ps_cnn: return "GAN-PS-CNN";
    case Scenario::gan_ps_ospl_cnn: return "GAN-PS-OSPL-CNN";
  }
  return "?";
}

PatientReport aggregate(std::span<const RunReport> runs) {
  if (runs.empty()) throw ArgumentError("aggregate needs at least one run");
  PatientReport out;
  out.patient_id = runs.front().patient_id;
  out.scenario = runs.front().scenario;
  double sum = 0.0;
  for (const RunReport& r : runs) {
    if (r.patient_id != out.patient_id || r.scenario != out.scenario) {
      throw ArgumentError("aggregate: runs mix patients or scenarios");
    }
    sum += r.auc;
  }
  const double n = double(runs.size());
  out.auc_mean = sum / n;
  if (runs.size() > 1) {
    double ss = 0.0;
    for (const RunReport& r : runs) ss += (r.auc - out.auc_mean) * (r.auc - out.auc_mean);
    out.auc_sd = std::sqrt(ss / (n - 1.0));
  }
  out.runs.assign(runs.begin(), runs.end());
  std::stable_sort(out.runs.begin(), out.runs.end(),
                   [](const RunReport& a, const RunReport& b) { return a.repeat < b.repeat; });
  return out;
}

namespace {

json threshold_json(double t) { return std::isfinite(t) ? json(t) : json("inf"); }

double threshold_from_json(const json& j) {
  return j.is_string() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

json to_json(const AlarmSummary& a) {
  json alarms = json::array();
  for (const AlarmEvent& e : a.alarms) {
    alarms.push_back({{"raise_time_s", e.raise_time_s},
                      {"expiry_time_s", e.expiry_time_s},
                      {"outcome", std::string(to_string(e.outcome))}});
  }
  return {{"threshold", a.threshold},
          {"alarms", alarms},
          {"predicted_seizures", a.predicted_seizures},
          {"total_seizures", a.total_seizures},
          {"sensitivity", a.sensitivity},
          {"false_alarms", a.false_alarms},
          {"scored_hours", a.scored_hours},
          {"false_alarms_per_hour", a.false_alarms_per_hour}};
}

static AlarmSummary alarm_summary_from_json(const json& j) {
  AlarmSummary a;
  a.threshold = j.at("threshold").get<double>();
  for (const json& e : j.at("alarms")) {
    a.alarms.push_back({e.at("raise_time_s").get<double>(), e.at("expiry_time_s").get<double>(),
                        e.at("outcome").get<std::string>() == "true_prediction" ? AlarmOutcome::true_prediction
                                                                               : AlarmOutcome::false_alarm});
  }
  a.predicted_seizures = j.at("predicted_seizures").get<int>();
  a.total_seizures = j.at("total_seizures").get<int>();
  a.sensitivity = j.at("sensitivity").get<double>();
  a.false_alarms = j.at("false_alarms").get<int>();
  a.scored_hours = j.at("scored_hours").get<double>();
  a.false_alarms_per_hour = j.at("false_alarms_per_hour").get<double>();
  return a;
}

json to_json(const RunReport& r) {
  json roc = json::array();
  for (const RocPoint& p : r.roc) roc.push_back({threshold_json(p.threshold), p.fpr, p.tpr});
  json alarms = json::array();
  for (const AlarmSummary& a : r.alarms) alarms.push_back(to_json(a));
  json scores = json::array();
  for (const WindowScore& s : r.scores) scores.push_back({s.fold, s.start_s, s.label, s.score});
  return {{"patient_id", r.patient_id},
          {"scenario", std::string(to_string(r.scenario))},
          {"repeat", r.repeat},
          {"auc", r.auc},
          {"fold_auc", r.fold_auc},
          {"roc", roc},
          {"alarms", alarms},
          {"scores", scores}};
}

json to_json(const PatientReport& r) {
  json runs = json::array();
  for (const RunReport& run : r.runs) runs.push_back(to_json(run));
  return {{"patient_id", r.patient_id},
          {"scenario", std::string(to_string(r.scenario))},
          {"auc_mean", r.auc_mean},
          {"auc_sd", r.auc_sd},
          {"runs", runs}};
}

PatientReport patient_report_from_json(const json& j) {
  try {
    PatientReport out;
    out.patient_id = j.at("patient_id").get<std::string>();
    out.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    out.auc_mean = j.at("auc_mean").get<double>();
    out.auc_sd = j.at("auc_sd").get<double>();
    for (const json& rj : j.at("runs")) {
      RunReport r;
      r.patient_id = rj.at("patient_id").get<std::string>();
      r.scenario = scenario_from_string(rj.at("scenario").get<std::string>());
      r.repeat = rj.at("repeat").get<int>();
      r.auc = rj.at("auc").get<double>();
      r.fold_auc = rj.at("fold_auc").get<std::vector<double>>();
      for (const json& p : rj.at("roc")) r.roc.push_back({threshold_from_json(p.at(0)), p.at(1), p.at(2)});
      for (const json& a : rj.at("alarms")) r.alarms.push_back(alarm_summary_from_json(a));
      for (const json& s : rj.at("scores")) r.scores.push_back({s.at(0), s.at(1), s.at(2), s.at(3)});
      out.runs.push_back(std::move(r));
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed patient report: ") + e.what());
  }
}

std::string format_auc_table(std::span<const PatientReport> reports) {
  std::set<std::string> patients;
  std::set<Scenario> present;
  std::map<std::pair<std::string, Scenario>, const PatientReport*> cell;
  for (const PatientReport& r : reports) {
    patients.insert(r.patient_id);
    present.insert(r.scenario);
    cell[{r.patient_id, r.scenario}] = &r;
  }
  std::vector<Scenario> columns;
  for (Scenario s : all_scenarios) {
    if (present.count(s)) columns.push_back(s);
  }

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Patient"});
  for (Scenario s : columns) rows.back().emplace_back(column_name(s));
  for (const std::string& p : patients) {
    rows.push_back({p});
    for (Scenario s : columns) {
      auto it = cell.find({p, s});
      rows.back().push_back(it == cell.end() ? "-"
                                             : percent(it->second->auc_mean) + " ± " + percent(it->second->auc_sd));
    }
  }
  rows.push_back({"Average"});
  for (Scenario s : columns) {
    double sum = 0.0;
    int n = 0;
    for (const std::string& p : patients) {
      if (auto it = cell.find({p, s}); it != cell.end()) {
        sum += it->second->auc_mean;
        ++n;
      }
    }
    rows.back().push_back(n ? percent(sum / n) : "-");
  }

  // Width in code points, so the two-byte "±" does not skew the alignment.
  auto width = [](const std::string& s) {
    return std::size_t(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> widths(columns.size() + 1, 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += "  ";
      const std::string pad(widths[c] - width(row[c]), ' ');
      out += c ? pad + row[c] : row[c] + pad;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
  return out;
}

std::string auc_table_csv(std::span<const PatientReport> reports) {
  std::vector<const PatientReport*> sorted;
  for (const PatientReport& r : reports) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
    return std::tie(a->patient_id, a->scenario) < std::tie(b->patient_id, b->scenario);
  });
  std::string out = "patient_id,scenario,auc_mean,auc_sd,repeats\n";
  for (const PatientReport* r : sorted) {
    out += r->patient_id + "," + std::string(to_string(r->scenario)) + "," + num(r->auc_mean) + "," +
           num(r->auc_sd) + "," + std::to_string(r->runs.size()) + "\n";
  }
  return out;
}

std::string roc_csv(std::span<const RocPoint> points) {
  std::string out = "threshold,fpr,tpr\n";
  for (const RocPoint& p : points) out += num(p.threshold) + "," + num(p.fpr) + "," + num(p.tpr) + "\n";
  return out;
}

std::string scores_csv(const PatientReport& report) {
  std::string out = "patient_id,window_start_s,label,score,repeat,fold\n";
  for (const RunReport& r : report.runs) {
    for (const WindowScore& s : r.scores) {
      out += r.patient_id + "," + num(s.start_s) + "," + (s.label ? "preictal" : "interictal") + "," +
             num(s.score) + "," + std::to_string(r.repeat) + "," + std::to_string(s.fold) + "\n";
    }
  }
  return out;
}

}  // namespace szgan
