// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers to run a subset.
//   acceptance [--workdir DIR] [1 2 ... 9]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "szgan/checkpoint.hpp"
#include "szgan/pipeline.hpp"

using namespace szgan;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes.
constexpr double kGradTolerance = 1e-4;
constexpr int kGradShapes = 5;
constexpr int kGradValues = 20;
constexpr double kGradSeconds = 60.0;
constexpr double kStftTolerance = 1e-9;
constexpr int kStftSignals = 10;
constexpr double kStftSeconds = 30.0;
constexpr int kAucInstances = 100;
constexpr std::size_t kAucMaxN = 200;
constexpr int kAlarmTimelines = 100;
constexpr double kMinAuc = 0.90;
constexpr double kSupervisedSlack = 0.05;
constexpr double kEndToEndSeconds = 15 * 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 ----
Outcome gradients() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  int checked = 0, kinds = 0;
  double worst = 0.0;
  std::string worst_at;
  for (LayerKind kind : gradcheck::all_kinds) {
    ++kinds;
    for (int s = 0; s < kGradShapes; ++s) {
      auto [net, in] = gradcheck::network_for(kind, rng);
      Parameters params = net.init_parameters(std::uint64_t(s) + 11);
      gradcheck::randomize(params, rng);
      const Tensor x = gradcheck::random_tensor(in, rng);
      const auto rep = gradcheck::run(net, params, x, 500 + std::uint64_t(s), kGradValues);
      checked += rep.checked;
      if (rep.checked < 2 * kGradValues) return {false, std::string(to_string(kind)) + ": too few values checked"};
      if (rep.worst > worst) {
        worst = rep.worst;
        worst_at = std::string(to_string(kind)) + " " + rep.worst_at;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kGradTolerance && secs < kGradSeconds,
          fmt("%d layer kinds x %d shapes, %d values, worst relative error %.2e at %s (limit %.0e), %.1f s (limit %.0f s)",
              kinds, kGradShapes, checked, worst, worst_at.c_str(), kGradTolerance, secs, kGradSeconds)};
}

// ---- 2 ----
Outcome stft_oracle() {
  const auto t0 = Clock::now();
  Rng rng(7);
  std::normal_distribution<double> normal(0.0, 30.0);
  double worst = 0.0;
  const StftConfig cfg;
  for (int k = 0; k < kStftSignals; ++k) {
    std::vector<double> x(std::size_t(cfg.segment_samples()));
    for (double& v : x) v = normal(rng);
    const Eigen::MatrixXcd got = stft(x, cfg);
    const auto want = oracle::stft(x, cfg.window_samples(), cfg.hop_samples());
    if (got.rows() != Index(want.size())) return {false, "frame count differs"};
    double diff = 0.0, scale = 0.0;
    for (Index f = 0; f < got.rows(); ++f)
      for (Index b = 0; b < got.cols(); ++b) {
        diff = std::max(diff, std::abs(got(f, b) - want[std::size_t(f)][std::size_t(b)]));
        scale = std::max(scale, std::abs(want[std::size_t(f)][std::size_t(b)]));
      }
    worst = std::max(worst, diff / scale);
  }
  const double secs = seconds_since(t0);
  return {worst < kStftTolerance && secs < kStftSeconds,
          fmt("%d random 28 s signals, worst relative error %.2e (limit %.0e), %.1f s (limit %.0f s)", kStftSignals,
              worst, kStftTolerance, secs, kStftSeconds)};
}

// ---- 3 ----
Outcome dimension_chain() {
  std::vector<std::string> bad;
  const StftConfig cfg;
  for (Index n : {16, 6}) {
    SyntheticProfile profile;
    const auto rec = generate_synthetic(profile, 40.0, int(n), {}).recording;
    const Spectrogram s = window_to_spectrogram(rec, 5.0, cfg);
    if (s.data.shape() != Shape{n, 56, 112}) bad.push_back("spectrogram " + shape_string(s.data.shape()));

    const std::vector<Shape> g_want{{100},        {6272},       {6272},       {64, 7, 14},  {32, 14, 28},
                                    {32, 14, 28}, {16, 28, 56}, {16, 28, 56}, {n, 56, 112}, {n, 56, 112}};
    const Model g = build_generator(GeneratorConfig{}, n, 1);
    if (g.net.shapes() != g_want) bad.push_back("generator chain for n=" + std::to_string(n));

    const std::vector<Shape> d_want{{n, 56, 112}, {16, 28, 56}, {16, 28, 56}, {32, 14, 28}, {32, 14, 28},
                                    {64, 7, 14},  {64, 7, 14},  {6272},       {1}};
    const Model d = build_discriminator(DiscriminatorConfig{}, n);
    if (d.net.shapes() != d_want) bad.push_back("discriminator chain for n=" + std::to_string(n));

    // the generated sample must be accepted by the discriminator unchanged
    const Tensor fake = g.net.infer(g.params, Tensor({1, 100}));
    if (d.net.infer(d.params, fake).shape() != Shape{1, 1}) bad.push_back("G -> D composition");
  }
  std::string detail = "16x56x112 and 6x56x112 spectrograms; G 100->6272->64x7x14->32x14x28->16x28x56->nx56x112; "
                       "D mirrors to 64x7x14 -> 6272 -> 1";
  for (const auto& b : bad) detail += "; MISMATCH " + b;
  return {bad.empty(), detail};
}

// ---- 4 ----
Outcome bin_masks() {
  auto excluded = [](const BinMask& m) {
    std::set<Index> out;
    for (Index b = 0; b < m.n_bins; ++b) {
      if (!m.keeps(b)) out.insert(b);
    }
    return out;
  };
  auto want = [](Index f) {
    std::set<Index> s{0, 127, 128};
    for (Index b = f - 3; b <= f + 3; ++b) s.insert(b);
    for (Index b = 2 * f - 3; b <= 2 * f + 3; ++b) s.insert(b);
    return s;
  };
  const BinMask m60 = build_bin_mask(60), m50 = build_bin_mask(50);
  const bool ok = m60.size() == 112 && m50.size() == 112 && excluded(m60) == want(60) && excluded(m50) == want(50);
  return {ok, fmt("60 Hz mask keeps %ld bins, 50 Hz mask keeps %ld bins; excluded sets %s", long(m60.size()),
                  long(m50.size()), ok ? "match exactly" : "DIFFER")};
}

// ---- 5 ----
Outcome auc_oracle() {
  Rng rng(99);
  int exact = 0, ties = 0;
  for (int k = 0; k < kAucInstances; ++k) {
    const std::size_t n = 2 + rng() % (kAucMaxN - 1);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    // a coarse score grid so that most instances contain ties
    const unsigned levels = 2 + unsigned(rng() % 60);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = double(rng() % levels) / double(levels);
      labels[i] = int(rng() % 2);
    }
    labels[0] = 0;
    labels[1] = 1;
    ties += std::set<double>(scores.begin(), scores.end()).size() < n;
    exact += roc_auc(scores, labels).auc == oracle::pair_auc(scores, labels);
  }
  return {exact == kAucInstances, fmt("%d/%d random instances (n <= %zu, %d with ties) equal the pair-count oracle "
                                      "exactly",
                                      exact, kAucInstances, kAucMaxN, ties)};
}

// ---- 6 ----
Outcome alarms() {
  LabelPolicy policy;
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree = 0, total_alarms = 0;
  for (int k = 0; k < kAlarmTimelines; ++k) {
    std::vector<TimedScore> tl;
    long t = long(rng() % 500);
    const int n = 20 + int(rng() % 400);
    for (int i = 0; i < n; ++i) {
      tl.push_back({double(t), u(rng)});
      t += long(rng() % 90);
    }
    AnnotationSet ann;
    std::vector<double> onsets;
    for (double on = double(rng() % 4000); on < double(t) + 3000; on += 100.0 + double(rng() % 5000)) {
      ann.seizures.push_back({on, on + 40});
      onsets.push_back(on);
    }
    const double threshold = u(rng);
    const auto got = simulate_alarms(tl, threshold, policy, ann);
    const auto want = oracle::alarms(tl, threshold, policy.sph_s(), policy.sop_s(), onsets, 28);
    bool same = got.alarms.size() == want.raises.size() && got.false_alarms == want.false_alarms &&
                got.predicted_seizures == want.predicted && std::abs(got.scored_hours * 3600 - want.scored_s) < 1e-6;
    for (std::size_t a = 0; same && a < want.raises.size(); ++a) {
      same = got.alarms[a].raise_time_s == want.raises[a] &&
             (got.alarms[a].outcome == AlarmOutcome::true_prediction) == want.correct[a];
    }
    agree += same;
    total_alarms += int(got.alarms.size());
  }

  const double t = 10000.0;
  auto one = [&](std::vector<TimedScore> tl, double onset) {
    return simulate_alarms(tl, 0.5, policy, AnnotationSet{{{onset, onset + 60}}});
  };
  const auto in_sop = one({{t, 0.9}}, t + 10 * 60);
  const auto in_sph = one({{t, 0.9}}, t + 3 * 60);
  const auto twice = one({{t, 0.9}, {t + 60, 0.2}, {t + 120, 0.9}}, t + 10 * 60);
  const bool case1 = in_sop.alarms.size() == 1 && in_sop.alarms[0].outcome == AlarmOutcome::true_prediction;
  const bool case2 = in_sph.alarms.size() == 1 && in_sph.alarms[0].outcome == AlarmOutcome::false_alarm &&
                     in_sph.predicted_seizures == 0;
  const bool case3 = twice.alarms.size() == 1;
  return {agree == kAlarmTimelines && case1 && case2 && case3,
          fmt("%d/%d random timelines agree with the brute-force checker (%d alarms); onset in SOP -> true: %s; "
              "onset in SPH -> not correct: %s; crossings 2 min apart -> one alarm: %s",
              agree, kAlarmTimelines, total_alarms, case1 ? "yes" : "NO", case2 ? "yes" : "NO", case3 ? "yes" : "NO")};
}

// ---- 7 ----
Outcome unsupervised_contract() {
  SyntheticProfile profile;
  const std::vector<SeizureInterval> sz{{2300, 2360}};
  const auto rec = generate_synthetic(profile, 2400.0, 2, sz).recording;
  std::vector<Spectrogram> windows;
  for (int i = 0; i < 24; ++i) {
    windows.push_back(window_to_spectrogram(rec, 100.0 + 84.0 * i, StftConfig{}));
    windows.back().window_start_s = 100.0 + 84.0 * i;
    windows.back().label = i % 3 ? Label::interictal : Label::preictal;
  }
  GanSetup setup;
  setup.train.steps = 4;
  setup.train.seed = 17;
  const GanResult base = train_gan(SpectrogramWindows(windows), setup);

  Rng rng(5);
  auto permuted = windows;
  for (std::size_t i = permuted.size() - 1; i > 0; --i) {
    std::swap(permuted[i].label, permuted[std::size_t(rng() % (i + 1))].label);
  }
  auto unlabeled = windows;
  for (auto& w : unlabeled) w.label = Label::unlabeled;
  const GanResult p = train_gan(SpectrogramWindows(permuted), setup);
  const GanResult q = train_gan(SpectrogramWindows(unlabeled), setup);
  const bool gan_ok = base.generator.same_values(p.generator) && base.discriminator.same_values(p.discriminator) &&
                      base.generator.same_values(q.generator) && base.discriminator.same_values(q.discriminator);

  Model d = build_discriminator(setup.discriminator, 2);
  d.params = base.discriminator;
  const FeatureExtractor trunk = export_feature_extractor(d, setup.discriminator);
  const std::uint64_t before = fingerprint(trunk.parameters());
  const Parameters copy = trunk.parameters();
  ClassifierConfig cc;
  cc.max_epochs = 3;
  const SpectrogramWindows labeled(windows);
  const Tensor probe = labeled.batch(std::vector<std::size_t>{0, 5});
  const Tensor f_before = trunk.features(probe);
  train_classifier(trunk, labeled, cc);
  const bool trunk_ok =
      fingerprint(trunk.parameters()) == before && trunk.parameters().same_values(copy) && trunk.features(probe) == f_before;
  return {gan_ok && trunk_ok,
          fmt("train_gan bitwise identical under label permutation and label removal: %s; trunk parameters and "
              "probe features bitwise unchanged by classifier training: %s",
              gan_ok ? "yes" : "NO", trunk_ok ? "yes" : "NO")};
}

// ---- 8 / 9 ----
struct EndToEnd {
  double seconds = 0.0;
  std::map<std::string, double> gan_auc, supervised_auc;
  std::map<std::string, std::uint64_t> digest;
  std::string error;
};

std::map<std::string, std::uint64_t> digest_tree(const fs::path& dir) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = fnv1a(read_file(e.path()));
  }
  return out;
}

EndToEnd end_to_end(const fs::path& work) {
  EndToEnd r;
  const auto t0 = Clock::now();
  try {
    fs::remove_all(work);
    auto cfg = load_experiment_config(fs::path(SZGAN_SOURCE_DIR) / "configs" / "synthetic.json");
    cfg.dataset_root = (work / "data").string();
    cfg.output_dir = (work / "runs").string();
    cfg.jobs = int(std::max(1u, std::thread::hardware_concurrency()));
    cfg.repeats = 2;
    cfg.validate();
    cmd_synth(cfg);
    cmd_preprocess(cfg);
    for (Scenario s : {Scenario::gan_cnn, Scenario::cnn_supervised}) {
      cfg.scenario = s;
      cmd_train(cfg);
      for (const auto& p : cmd_evaluate(cfg)) {
        (s == Scenario::gan_cnn ? r.gan_auc : r.supervised_auc)[p.patient_id] = p.auc_mean;
      }
    }
    std::printf("%s", cmd_report(cfg).c_str());
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = seconds_since(t0);
  if (r.error.empty()) r.digest = digest_tree(work);
  return r;
}

Outcome judge_end_to_end(const EndToEnd& r) {
  if (!r.error.empty()) return {false, "run failed: " + r.error};
  bool ok = r.gan_auc.size() == 2 && r.supervised_auc.size() == 2 && r.seconds < kEndToEndSeconds;
  std::ostringstream d;
  d << "2 patients, LOOCV, repeats=2;";
  for (const auto& [id, auc] : r.gan_auc) {
    const double sup = r.supervised_auc.count(id) ? r.supervised_auc.at(id) : -1.0;
    ok = ok && auc >= kMinAuc && sup >= auc - kSupervisedSlack;
    d << " " << id << ": GAN-CNN AUC " << fmt("%.4f", auc) << ", CNN AUC " << fmt("%.4f", sup) << ";";
  }
  d << fmt(" limits: GAN-CNN >= %.2f, CNN >= GAN-CNN - %.2f; runtime %.0f s (limit %.0f s)", kMinAuc, kSupervisedSlack,
           r.seconds, kEndToEndSeconds);
  return {ok, d.str()};
}

Outcome judge_determinism(const EndToEnd& a, const EndToEnd& b) {
  if (!a.error.empty() || !b.error.empty()) return {false, "a run failed: " + a.error + b.error};
  std::vector<std::string> differ;
  std::set<std::string> names;
  for (const auto& [k, v] : a.digest) names.insert(k);
  for (const auto& [k, v] : b.digest) names.insert(k);
  std::size_t checkpoints = 0, reports = 0;
  for (const auto& k : names) {
    const auto ia = a.digest.find(k), ib = b.digest.find(k);
    if (ia == a.digest.end() || ib == b.digest.end() || ia->second != ib->second) differ.push_back(k);
    checkpoints += k.ends_with(".szg");
    reports += k.find("/reports/") != std::string::npos;
  }
  std::string detail = fmt("%zu files compared (%zu checkpoints, %zu report files), %zu differ", names.size(),
                           checkpoints, reports, differ.size());
  for (std::size_t i = 0; i < std::min<std::size_t>(differ.size(), 5); ++i) detail += "; " + differ[i];
  return {differ.empty() && checkpoints > 0 && reports > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::current_path() / "acceptance_work";
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      work = argv[++i];
    } else {
      wanted.insert(std::stoi(a));
    }
  }
  if (wanted.empty()) wanted = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  set_verbose(false);

  int failures = 0;
  auto report = [&](int n, const char* name, const Outcome& o) {
    std::printf("criterion %d %s  %s: %s\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  if (wanted.count(1)) report(1, "gradient oracle", guarded(gradients));
  if (wanted.count(2)) report(2, "STFT oracle", guarded(stft_oracle));
  if (wanted.count(3)) report(3, "dimension chain", guarded(dimension_chain));
  if (wanted.count(4)) report(4, "bin-mask arithmetic", guarded(bin_masks));
  if (wanted.count(5)) report(5, "AUC oracle", guarded(auc_oracle));
  if (wanted.count(6)) report(6, "alarm semantics", guarded(alarms));
  if (wanted.count(7)) report(7, "unsupervised contract", guarded(unsupervised_contract));
  if (wanted.count(8) || wanted.count(9)) {
    const EndToEnd first = end_to_end(work);
    if (wanted.count(8)) report(8, "end-to-end synthetic run", judge_end_to_end(first));
    if (wanted.count(9)) {
      const EndToEnd second = end_to_end(work);
      report(9, "determinism", judge_determinism(first, second));
    }
    fs::remove_all(work);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
