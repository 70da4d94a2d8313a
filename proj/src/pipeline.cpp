#include "szgan/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "szgan/checkpoint.hpp"
#include "szgan/random.hpp"

namespace szgan {

using nlohmann::json;

// ---------------------------------------------------------------------------------------------
// configuration

namespace {

class Fields {
 public:
  Fields(const json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) throw ConfigError("'" + ctx_ + "' must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = sub(key);
    if (!v) return;
    try {
      out = v->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + path(key) + "': " + e.what());
    }
  }

  void extent(const char* key, Extent2& out) {
    std::vector<Index> v{out.h, out.w};
    get(key, v);
    if (v.size() != 2) throw ConfigError("config key '" + path(key) + "' must be [h, w]");
    out = {v[0], v[1]};
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return ctx_.empty() ? key : ctx_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + path(item.key()) + "'");
    }
  }

 private:
  const json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

json extent_json(Extent2 e) { return json::array({e.h, e.w}); }

json optimizer_json(const OptimizerSettings& o) {
  return {{"algorithm", std::string(to_string(o.algorithm))},
          {"learning_rate", o.learning_rate},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon}};
}

void read_optimizer(const json& j, OptimizerSettings& o, const std::string& ctx) {
  Fields f(j, ctx);
  std::string algo(to_string(o.algorithm));
  f.get("algorithm", algo);
  try {
    o.algorithm = algorithm_from_string(algo);
  } catch (const Error& e) {
    throw ConfigError(f.path("algorithm") + ": " + e.what());
  }
  f.get("learning_rate", o.learning_rate);
  f.get("beta1", o.beta1);
  f.get("beta2", o.beta2);
  f.get("epsilon", o.epsilon);
  f.finish();
}

json profile_json(const SyntheticProfile& p) {
  return {{"spectral_slope", p.spectral_slope},
          {"amplitude", p.amplitude},
          {"channel_amplitude", p.channel_amplitude},
          {"line_freq", p.line_freq},
          {"line_amplitude", p.line_amplitude},
          {"preictal",
           {{"band_low_hz", p.preictal.band_low_hz},
            {"band_high_hz", p.preictal.band_high_hz},
            {"gain", p.preictal.gain},
            {"onset_lead_s", p.preictal.onset_lead_s}}}};
}

void read_profile(const json& j, SyntheticProfile& p, const std::string& ctx) {
  Fields f(j, ctx);
  f.get("spectral_slope", p.spectral_slope);
  f.get("amplitude", p.amplitude);
  f.get("channel_amplitude", p.channel_amplitude);
  f.get("line_freq", p.line_freq);
  f.get("line_amplitude", p.line_amplitude);
  if (const json* pre = f.sub("preictal")) {
    Fields g(*pre, f.path("preictal"));
    g.get("band_low_hz", p.preictal.band_low_hz);
    g.get("band_high_hz", p.preictal.band_high_hz);
    g.get("gain", p.preictal.gain);
    g.get("onset_lead_s", p.preictal.onset_lead_s);
    g.finish();
  }
  f.finish();
}

json policy_json(const LabelPolicy& p) {
  return {{"sop_min", p.sop_min},
          {"sph_min", p.sph_min},
          {"interictal_gap_h", p.interictal_gap_h},
          {"lead_merge_min", p.lead_merge_min},
          {"max_seizures_per_day", p.max_seizures_per_day},
          {"min_lead_seizures", p.min_lead_seizures},
          {"min_interictal_h", p.min_interictal_h}};
}

void read_policy(const json& j, LabelPolicy& p, const std::string& ctx) {
  Fields f(j, ctx);
  f.get("sop_min", p.sop_min);
  f.get("sph_min", p.sph_min);
  f.get("interictal_gap_h", p.interictal_gap_h);
  f.get("lead_merge_min", p.lead_merge_min);
  f.get("max_seizures_per_day", p.max_seizures_per_day);
  f.get("min_lead_seizures", p.min_lead_seizures);
  f.get("min_interictal_h", p.min_interictal_h);
  f.finish();
}

}  // namespace

void SynthConfig::validate() const {
  if (n_channels < 1) throw ConfigError("synth.n_channels must be positive");
  if (seizures < 0) throw ConfigError("synth.seizures must be >= 0");
  if (!(seizure_recording_h > 0 && interictal_h >= 0 && interictal_gap_h >= 0 && seizure_duration_s > 0 &&
        first_onset_min >= 0 && tail_min >= 0)) {
    throw ConfigError("synth durations must be positive");
  }
  profile.validate();
}

void ExperimentConfig::validate() const {
  if (patients.empty()) throw ConfigError("config lists no patients");
  std::set<std::string> ids;
  for (const auto& p : patients) {
    if (p.id.empty()) throw ConfigError("patient id must not be empty");
    if (!ids.insert(p.id).second) throw ConfigError("patient '" + p.id + "' is listed twice");
    if (p.line_freq != 50 && p.line_freq != 60) {
      throw ConfigError("patient '" + p.id + "': line_freq must be 50 or 60");
    }
  }
  stft.validate();
  generator.validate();
  discriminator.validate();
  gan.validate();
  classifier.validate();
  labels.validate();
  synth.validate();
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (oversample_factor < 1) throw ConfigError("oversample_factor must be >= 1");
  if (scenario == Scenario::gan_ps_ospl_cnn && oversample_factor < 2) {
    throw ConfigError("scenario gan_ps_ospl_cnn needs oversample_factor >= 2");
  }
  if (!(balance_ratio > 0)) throw ConfigError("balance_ratio must be positive");
  if (!(window_stride_s > 0 && gan_stride_s > 0)) throw ConfigError("window strides must be positive");
  for (double t : alarm_thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("alarm thresholds must lie in [0, 1]");
  }
}

fs::path ExperimentConfig::dataset_path() const {
  const fs::path p(dataset_root);
  return p.is_absolute() ? p : base_dir / p;
}

fs::path ExperimentConfig::output_path() const {
  const fs::path p(output_dir);
  return p.is_absolute() ? p : base_dir / p;
}

const PatientConfig& ExperimentConfig::patient(const std::string& id) const {
  for (const auto& p : patients) {
    if (p.id == id) return p;
  }
  throw ConfigError("no patient '" + id + "' in config");
}

json to_json(const ExperimentConfig& c) {
  json patients = json::array();
  for (const auto& p : c.patients) {
    patients.push_back({{"id", p.id}, {"channels", p.channels}, {"line_freq", p.line_freq}});
  }
  json stft = to_json(c.stft);
  stft.erase("line_freq");
  return {
      {"dataset_root", c.dataset_root},
      {"output_dir", c.output_dir},
      {"patients", patients},
      {"stft", stft},
      {"generator",
       {{"z_dim", c.generator.z_dim},
        {"hidden", c.generator.hidden},
        {"reshape", c.generator.reshape},
        {"deconv_filters", c.generator.deconv_filters},
        {"kernel", extent_json(c.generator.kernel)},
        {"stride", extent_json(c.generator.stride)}}},
      {"discriminator",
       {{"conv_filters", c.discriminator.conv_filters},
        {"kernel", extent_json(c.discriminator.kernel)},
        {"stride", extent_json(c.discriminator.stride)},
        {"leak", c.discriminator.leak}}},
      {"gan",
       {{"batch_size", c.gan.batch_size},
        {"steps", c.gan.steps},
        {"d_steps_per_g_step", c.gan.d_steps_per_g_step},
        {"optimizer", optimizer_json(c.gan.optimizer)},
        {"divergence_limit", c.gan.divergence_limit},
        {"init_std", c.gan.init_std}}},
      {"classifier",
       {{"fc_sizes", c.classifier.fc_sizes},
        {"dropout", c.classifier.dropout},
        {"monitor_fraction", c.classifier.monitor_fraction},
        {"patience", c.classifier.patience},
        {"batch_size", c.classifier.batch_size},
        {"max_epochs", c.classifier.max_epochs},
        {"optimizer", optimizer_json(c.classifier.optimizer)}}},
      {"labels", policy_json(c.labels)},
      {"scenario", std::string(to_string(c.scenario))},
      {"oversample_factor", c.oversample_factor},
      {"balance_ratio", c.balance_ratio},
      {"window_stride_s", c.window_stride_s},
      {"gan_stride_s", c.gan_stride_s},
      {"repeats", c.repeats},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"alarm_thresholds", c.alarm_thresholds},
      {"synth",
       {{"n_channels", c.synth.n_channels},
        {"seizure_recording_h", c.synth.seizure_recording_h},
        {"seizures", c.synth.seizures},
        {"seizure_duration_s", c.synth.seizure_duration_s},
        {"first_onset_min", c.synth.first_onset_min},
        {"tail_min", c.synth.tail_min},
        {"interictal_h", c.synth.interictal_h},
        {"interictal_gap_h", c.synth.interictal_gap_h},
        {"seed", c.synth.seed},
        {"profile", profile_json(c.synth.profile)}}},
  };
}

ExperimentConfig experiment_config_from_json(const json& j, fs::path base_dir) {
  ExperimentConfig c;
  c.base_dir = std::move(base_dir);
  Fields f(j, "");
  f.get("dataset_root", c.dataset_root);
  f.get("output_dir", c.output_dir);
  if (const json* ps = f.sub("patients")) {
    if (!ps->is_array()) throw ConfigError("'patients' must be an array");
    for (std::size_t i = 0; i < ps->size(); ++i) {
      PatientConfig p;
      Fields g((*ps)[i], "patients[" + std::to_string(i) + "]");
      g.get("id", p.id);
      g.get("channels", p.channels);
      g.get("line_freq", p.line_freq);
      g.finish();
      c.patients.push_back(std::move(p));
    }
  }
  if (const json* s = f.sub("stft")) {
    Fields g(*s, "stft");
    g.get("window_len_s", c.stft.window_len_s);
    g.get("overlap", c.stft.overlap);
    g.get("window_fn", c.stft.window_fn);
    g.get("sample_rate", c.stft.sample_rate);
    g.get("segment_s", c.stft.segment_s);
    g.finish();
  }
  if (const json* s = f.sub("generator")) {
    Fields g(*s, "generator");
    g.get("z_dim", c.generator.z_dim);
    g.get("hidden", c.generator.hidden);
    g.get("reshape", c.generator.reshape);
    g.get("deconv_filters", c.generator.deconv_filters);
    g.extent("kernel", c.generator.kernel);
    g.extent("stride", c.generator.stride);
    g.finish();
  }
  if (const json* s = f.sub("discriminator")) {
    Fields g(*s, "discriminator");
    g.get("conv_filters", c.discriminator.conv_filters);
    g.extent("kernel", c.discriminator.kernel);
    g.extent("stride", c.discriminator.stride);
    g.get("leak", c.discriminator.leak);
    g.finish();
  }
  if (const json* s = f.sub("gan")) {
    Fields g(*s, "gan");
    g.get("batch_size", c.gan.batch_size);
    g.get("steps", c.gan.steps);
    g.get("d_steps_per_g_step", c.gan.d_steps_per_g_step);
    if (const json* o = g.sub("optimizer")) read_optimizer(*o, c.gan.optimizer, "gan.optimizer");
    g.get("divergence_limit", c.gan.divergence_limit);
    g.get("init_std", c.gan.init_std);
    g.finish();
  }
  if (const json* s = f.sub("classifier")) {
    Fields g(*s, "classifier");
    g.get("fc_sizes", c.classifier.fc_sizes);
    g.get("dropout", c.classifier.dropout);
    g.get("monitor_fraction", c.classifier.monitor_fraction);
    g.get("patience", c.classifier.patience);
    g.get("batch_size", c.classifier.batch_size);
    g.get("max_epochs", c.classifier.max_epochs);
    if (const json* o = g.sub("optimizer")) read_optimizer(*o, c.classifier.optimizer, "classifier.optimizer");
    g.finish();
  }
  if (const json* s = f.sub("labels")) read_policy(*s, c.labels, "labels");
  std::string scenario(to_string(c.scenario));
  f.get("scenario", scenario);
  c.scenario = scenario_from_string(scenario);
  f.get("oversample_factor", c.oversample_factor);
  f.get("balance_ratio", c.balance_ratio);
  f.get("window_stride_s", c.window_stride_s);
  f.get("gan_stride_s", c.gan_stride_s);
  f.get("repeats", c.repeats);
  f.get("seed", c.seed);
  f.get("jobs", c.jobs);
  f.get("alarm_thresholds", c.alarm_thresholds);
  if (const json* s = f.sub("synth")) {
    Fields g(*s, "synth");
    g.get("n_channels", c.synth.n_channels);
    g.get("seizure_recording_h", c.synth.seizure_recording_h);
    g.get("seizures", c.synth.seizures);
    g.get("seizure_duration_s", c.synth.seizure_duration_s);
    g.get("first_onset_min", c.synth.first_onset_min);
    g.get("tail_min", c.synth.tail_min);
    g.get("interictal_h", c.synth.interictal_h);
    g.get("interictal_gap_h", c.synth.interictal_gap_h);
    g.get("seed", c.synth.seed);
    if (const json* p = g.sub("profile")) read_profile(*p, c.synth.profile, "synth.profile");
    g.finish();
  }
  f.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config '" + path.string() + "' at byte " + std::to_string(e.byte) + ": " +
                      e.what());
  }
  return experiment_config_from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

// ---------------------------------------------------------------------------------------------
// helpers

namespace {

std::atomic<bool> g_verbose{true};
std::mutex g_log_mutex;

void log(const std::string& msg) {
  if (!g_verbose) return;
  std::lock_guard lock(g_log_mutex);
  std::clog << "[szgan] " << msg << '\n';
}

/// Runs `task(i)` for i in [0, n) on up to `jobs` threads. The first failure (by index) is
/// rethrown after every worker has finished.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(std::size_t(std::max(jobs, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path.string() + "' byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
}

bool stamp_matches(const fs::path& stamp, std::uint64_t hash) {
  if (!fs::exists(stamp)) return false;
  try {
    const json j = read_json(stamp);
    if (j.at("input_hash").get<std::string>() != hex(hash)) return false;
    for (const auto& f : j.at("outputs")) {
      if (!fs::exists(stamp.parent_path() / f.get<std::string>())) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void write_stamp(const fs::path& stamp, std::uint64_t hash, const std::vector<fs::path>& outputs) {
  json files = json::array();
  for (const auto& p : outputs) files.push_back(fs::relative(p, stamp.parent_path()).generic_string());
  write_json(stamp, {{"input_hash", hex(hash)}, {"outputs", files}});
}

bool is_recording_file(const fs::path& p) {
  const auto name = p.filename().string();
  if (name.size() > 9 && name.ends_with(".ann.json")) return false;
  return p.extension() == ".szr" || p.extension() == ".csv";
}

Index sample_key(const WindowRef& w, int sample_rate) { return Index(std::llround(w.start_s * sample_rate)); }

bool by_start(const WindowRef& a, const WindowRef& b) {
  return std::tie(a.start_s, a.recording) < std::tie(b.start_s, b.recording);
}

/// Windows of several sources back to back.
class ConcatenatedWindows final : public WindowSource {
 public:
  explicit ConcatenatedWindows(std::vector<std::shared_ptr<const WindowSource>> parts) : parts_(std::move(parts)) {
    for (const auto& p : parts_) {
      if (p->input_shape() != parts_.front()->input_shape()) {
        throw ConfigError("patients with inputs " + shape_string(parts_.front()->input_shape()) + " and " +
                          shape_string(p->input_shape()) + " cannot share one GAN; select equal channel counts");
      }
      offsets_.push_back(total_);
      total_ += p->size();
    }
  }

  std::size_t size() const override { return total_; }
  Shape input_shape() const override { return parts_.front()->input_shape(); }
  Tensor input(std::size_t i) const override { return locate(i).first->input(locate(i).second); }
  Label label(std::size_t i) const override { return locate(i).first->label(locate(i).second); }
  double start_s(std::size_t i) const override { return locate(i).first->start_s(locate(i).second); }

 private:
  std::pair<const WindowSource*, std::size_t> locate(std::size_t i) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), i);
    const auto k = std::size_t(it - offsets_.begin()) - 1;
    return {parts_[k].get(), i - offsets_[k]};
  }

  std::vector<std::shared_ptr<const WindowSource>> parts_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

}  // namespace

void set_verbose(bool verbose) { g_verbose = verbose; }

// ---------------------------------------------------------------------------------------------
// patient data

PatientData load_patient(const ExperimentConfig& cfg, const PatientConfig& patient) {
  PatientData p;
  p.config = patient;
  p.stft = cfg.stft;
  p.stft.line_freq = patient.line_freq;
  const fs::path dir = cfg.dataset_path() / patient.id;
  if (!fs::is_directory(dir)) throw MissingArtifactError("no recordings for patient '" + patient.id + "' in " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_recording_file(entry.path())) p.files.push_back(entry.path());
  }
  std::sort(p.files.begin(), p.files.end());
  if (p.files.empty()) throw MissingArtifactError("no recordings for patient '" + patient.id + "' in " + dir.string());

  auto recordings = std::make_shared<std::vector<Recording>>();
  AnnotationSet all;
  std::uint64_t h = fnv1a(patient.id);
  for (const auto& file : p.files) {
    Recording rec = load_recording(file, format_from_path(file));
    h = fnv1a(read_file(file), h);
    if (rec.sample_rate != cfg.stft.sample_rate) {
      throw ConfigError("patient '" + patient.id + "': " + file.filename().string() + " is sampled at " +
                        std::to_string(rec.sample_rate) + " Hz but the config expects " +
                        std::to_string(cfg.stft.sample_rate) + " Hz");
    }
    if (!patient.channels.empty()) {
      try {
        rec = select_channels(rec, patient.channels);
      } catch (const DataError& e) {
        throw ConfigError("patient '" + patient.id + "', " + file.filename().string() + ": " + e.what());
      }
    }
    if (!recordings->empty() && rec.channels != recordings->front().channels) {
      throw ConfigError("patient '" + patient.id + "': recordings disagree on channels; list them in the config");
    }
    const fs::path ann_path = annotation_path(file);
    if (fs::exists(ann_path)) {
      h = fnv1a(read_file(ann_path), h);
      for (const auto& s : load_annotations(ann_path).shifted(rec.start_time).seizures) all.seizures.push_back(s);
    }
    recordings->push_back(std::move(rec));
  }
  std::sort(all.seizures.begin(), all.seizures.end(),
            [](const SeizureInterval& a, const SeizureInterval& b) { return a.onset_s < b.onset_s; });
  try {
    all.validate();
  } catch (const Error& e) {
    throw DataError("patient '" + patient.id + "': " + e.what());
  }
  p.merged = merge_leading_seizures(all, cfg.labels.lead_merge_min);
  for (const auto& rec : *recordings) {
    p.intervals.push_back(label_intervals({rec.start_time, rec.end_time()}, p.merged, cfg.labels));
    for (const auto& iv : p.intervals.back()) {
      if (iv.label == Label::interictal) p.interictal_hours += (iv.end_s - iv.begin_s) / 3600.0;
    }
  }
  p.eligibility = check_eligibility(p.merged, p.interictal_hours, cfg.labels);
  p.recordings = std::move(recordings);
  p.input_hash = h;
  return p;
}

std::vector<WindowRef> labeled_windows(const PatientData& p, double stride_s) {
  constexpr Label kLabeled[] = {Label::preictal, Label::interictal};
  std::vector<WindowRef> out;
  for (std::size_t r = 0; r < p.recordings->size(); ++r) {
    auto w = plan_windows((*p.recordings)[r], p.intervals[r], stride_s, p.stft, kLabeled, int(r));
    out.insert(out.end(), w.begin(), w.end());
  }
  std::stable_sort(out.begin(), out.end(), by_start);
  return out;
}

std::vector<WindowRef> gan_windows(const PatientData& p, double stride_s) {
  constexpr Label kAll[] = {Label::unlabeled};
  std::vector<WindowRef> out;
  for (std::size_t r = 0; r < p.recordings->size(); ++r) {
    const Recording& rec = (*p.recordings)[r];
    const LabeledInterval whole{rec.start_time, rec.end_time(), Label::unlabeled, -1};
    auto w = plan_windows(rec, std::span(&whole, 1), stride_s, p.stft, kAll, int(r));
    out.insert(out.end(), w.begin(), w.end());
  }
  std::stable_sort(out.begin(), out.end(), by_start);
  return out;
}

PatientFolds make_folds(const PatientData& p, const ExperimentConfig& cfg) {
  const auto base = labeled_windows(p, cfg.window_stride_s);
  std::map<int, std::vector<WindowRef>> preictal;
  std::vector<WindowRef> pool;
  for (const auto& w : base) {
    if (w.label == Label::preictal) preictal[w.seizure].push_back(w);
    if (w.label == Label::interictal) pool.push_back(w);
  }
  PatientFolds out;
  for (const auto& [s, ws] : preictal) out.seizures.push_back(s);
  std::vector<double> pool_starts;
  for (const auto& w : pool) pool_starts.push_back(w.start_s);
  try {
    out.plan = make_cv_plan(int(out.seizures.size()), pool_starts, derive_seed(cfg.seed, "cv:" + p.config.id));
  } catch (const ArgumentError& e) {
    throw DataError("patient '" + p.config.id + "': " + e.what());
  }

  const double seg = cfg.stft.segment_s;
  for (std::size_t f = 0; f < out.plan.folds.size(); ++f) {
    const Fold& fold = out.plan.folds[f];
    FoldData d;
    d.seizure = out.seizures[std::size_t(fold.held_out)];
    d.validation = preictal[d.seizure];
    for (auto i : out.plan.validation_interictal(f)) d.validation.push_back(pool[i]);

    std::vector<WindowRef> train;
    for (int k : fold.train_seizures) {
      const auto& ws = preictal[out.seizures[std::size_t(k)]];
      train.insert(train.end(), ws.begin(), ws.end());
    }
    // Time ranges of the training interictal parts; re-windowed interictal windows must stay inside.
    std::vector<std::pair<double, double>> ranges;
    for (int part : fold.train_parts) {
      const auto& idx = out.plan.parts[std::size_t(part)];
      double lo = pool[idx.front()].start_s, hi = lo;
      for (auto i : idx) {
        train.push_back(pool[i]);
        lo = std::min(lo, pool[i].start_s);
        hi = std::max(hi, pool[i].start_s);
      }
      ranges.emplace_back(lo, hi + seg);
    }
    auto balanced = balance_and_oversample(train, cfg.balance_ratio, 1, cfg.window_stride_s, p.stft);
    for (const auto& w : balanced) {
      const bool inside = w.label != Label::interictal ||
                          std::any_of(ranges.begin(), ranges.end(), [&](const auto& r) {
                            return w.start_s >= r.first && w.start_s + seg <= r.second + 1e-9;
                          });
      if (inside) d.train.push_back(w);
    }
    std::stable_sort(d.train.begin(), d.train.end(), by_start);
    std::stable_sort(d.validation.begin(), d.validation.end(), by_start);
    out.folds.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// synth

std::vector<SynthOutcome> cmd_synth(const ExperimentConfig& cfg, const SynthOptions& opts) {
  const SynthConfig& sc = cfg.synth;
  const double duration_s = opts.duration_h.value_or(sc.seizure_recording_h) * 3600.0;
  const int n_seizures = opts.seizures.value_or(sc.seizures);
  if (!(duration_s > 0)) throw ArgumentError("synthetic recording duration must be positive");
  if (n_seizures < 0) throw ArgumentError("seizure count must be >= 0");

  std::vector<SeizureInterval> seizures;
  if (n_seizures > 0) {
    const double first = sc.first_onset_min * 60.0;
    const double room = duration_s - first - sc.seizure_duration_s - sc.tail_min * 60.0;
    if (room < 0) {
      throw ArgumentError("a " + std::to_string(duration_s / 3600.0) + " h recording cannot hold " +
                          std::to_string(n_seizures) + " seizures after the first onset at " +
                          std::to_string(sc.first_onset_min) + " min");
    }
    const double spacing = n_seizures > 1 ? room / (n_seizures - 1) : 0.0;
    for (int i = 0; i < n_seizures; ++i) {
      const double onset = std::round(first + i * spacing);
      seizures.push_back({onset, onset + sc.seizure_duration_s});
    }
  }

  std::vector<SynthOutcome> out;
  for (const PatientConfig& pc : cfg.patients) {
    if (opts.patient && *opts.patient != pc.id) continue;
    SyntheticProfile profile = sc.profile;
    profile.line_freq = pc.line_freq;
    const fs::path dir = cfg.dataset_path() / pc.id;
    SynthOutcome o;
    o.patient_id = pc.id;

    profile.seed = derive_seed(sc.seed, pc.id + ":seizures");
    const auto with = generate_synthetic(profile, duration_s, sc.n_channels, seizures, 0.0, pc.id, cfg.stft.sample_rate);
    const fs::path a = dir / (pc.id + "_a_seizures.szr");
    save_recording(a, with.recording, RecordingFormat::raw_f64);
    save_annotations(annotation_path(a), with.annotations);
    o.files = {a, annotation_path(a)};

    if (sc.interictal_h > 0) {
      profile.seed = derive_seed(sc.seed, pc.id + ":interictal");
      const double start = duration_s + sc.interictal_gap_h * 3600.0;
      const auto without =
          generate_synthetic(profile, sc.interictal_h * 3600.0, sc.n_channels, {}, start, pc.id, cfg.stft.sample_rate);
      const fs::path b = dir / (pc.id + "_b_interictal.szr");
      save_recording(b, without.recording, RecordingFormat::raw_f64);
      save_annotations(annotation_path(b), without.annotations);
      o.files.push_back(b);
      o.files.push_back(annotation_path(b));
    }
    o.eligibility = load_patient(cfg, pc).eligibility;
    log("synth " + pc.id + ": " + std::to_string(seizures.size()) + " seizures, " +
        (o.eligibility.eligible ? "eligible" : "not eligible"));
    out.push_back(std::move(o));
  }
  if (opts.patient && out.empty()) throw ConfigError("no patient '" + *opts.patient + "' in config");
  return out;
}

// ---------------------------------------------------------------------------------------------
// preprocess

namespace {

fs::path cache_dir(const ExperimentConfig& cfg, const std::string& id) { return cfg.output_path() / "cache" / id; }

std::uint64_t preprocess_hash(const ExperimentConfig& cfg, const PatientData& p) {
  const json relevant = {{"stft", to_json(p.stft)},
                         {"labels", policy_json(cfg.labels)},
                         {"window_stride_s", cfg.window_stride_s},
                         {"channels", p.config.channels}};
  return fnv1a(relevant.dump(), p.input_hash);
}

/// The cache hash a patient's index must carry, or a MissingArtifactError.
std::uint64_t require_cache(const ExperimentConfig& cfg, const PatientData& p) {
  const std::uint64_t h = preprocess_hash(cfg, p);
  if (!stamp_matches(cache_dir(cfg, p.config.id) / "index.json", h)) {
    throw MissingArtifactError("spectrogram cache for patient '" + p.config.id +
                               "' is missing or stale; run `szgan preprocess` first");
  }
  return h;
}

}  // namespace

std::vector<PreprocessOutcome> cmd_preprocess(const ExperimentConfig& cfg, bool force) {
  std::vector<PreprocessOutcome> out(cfg.patients.size());
  for (std::size_t i = 0; i < cfg.patients.size(); ++i) {
    const PatientData p = load_patient(cfg, cfg.patients[i]);
    PreprocessOutcome& o = out[i];
    o.patient_id = p.config.id;
    o.eligible = p.eligibility.eligible;
    const fs::path dir = cache_dir(cfg, p.config.id);
    const std::uint64_t h = preprocess_hash(cfg, p);
    const auto windows = labeled_windows(p, cfg.window_stride_s);
    const BinMask mask = build_bin_mask(p.stft.line_freq);
    o.shape = {p.n_channels(), p.stft.frames_per_segment(), mask.size()};
    o.windows = windows.size();
    if (!force && stamp_matches(dir / "index.json", h)) {
      o.reused = true;
      log("preprocess " + p.config.id + ": cache up to date");
      continue;
    }
    std::vector<fs::path> files(windows.size());
    parallel_for(windows.size(), cfg.jobs, [&](std::size_t k) {
      const WindowRef& w = windows[k];
      Spectrogram s = window_to_spectrogram((*p.recordings)[std::size_t(w.recording)], w.start_s, p.stft, mask);
      s.label = w.label;
      s.patient_id = p.config.id;
      char name[32];
      std::snprintf(name, sizeof name, "w%06zu.szs", k);
      files[k] = dir / name;
      save_spectrogram(files[k], s, mask, p.stft);
    });
    json entries = json::array();
    json outputs = json::array();
    for (std::size_t k = 0; k < windows.size(); ++k) {
      entries.push_back({{"file", files[k].filename().string()},
                         {"start_s", windows[k].start_s},
                         {"label", std::string(to_string(windows[k].label))},
                         {"seizure", windows[k].seizure},
                         {"recording", windows[k].recording}});
      outputs.push_back(files[k].filename().string());
    }
    json recordings = json::array();
    for (const auto& f : p.files) recordings.push_back(f.filename().string());
    write_json(dir / "index.json", {{"patient_id", p.config.id},
                                    {"input_hash", hex(h)},
                                    {"recordings", recordings},
                                    {"shape", o.shape},
                                    {"line_freq", p.stft.line_freq},
                                    {"mask", mask.kept},
                                    {"cfg", to_json(p.stft)},
                                    {"tail_padding_samples", p.stft.hop_samples()},
                                    {"eligible", p.eligibility.eligible},
                                    {"ineligible_reasons", p.eligibility.reasons},
                                    {"interictal_hours", p.interictal_hours},
                                    {"leading_seizures", p.merged.size()},
                                    {"windows", entries},
                                    {"outputs", outputs}});
    log("preprocess " + p.config.id + ": " + std::to_string(windows.size()) + " windows of shape " +
        shape_string(o.shape));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// train

namespace {

bool is_gan_scenario(Scenario s) { return s != Scenario::cnn_supervised; }
bool is_per_patient(Scenario s) { return s == Scenario::gan_ps_cnn || s == Scenario::gan_ps_ospl_cnn; }

std::string gan_name(const ExperimentConfig& cfg, const std::string& patient) {
  return is_per_patient(cfg.scenario) ? "gan_" + patient : std::string("gan_global");
}

fs::path trunk_path(const ExperimentConfig& cfg, const std::string& patient, int repeat, int fold) {
  if (is_gan_scenario(cfg.scenario)) return cfg.scenario_path() / "checkpoints" / gan_name(cfg, patient) / "trunk.szg";
  return cfg.scenario_path() / "checkpoints" / patient /
         ("r" + std::to_string(repeat) + "_f" + std::to_string(fold) + "_trunk.szg");
}

fs::path head_path(const ExperimentConfig& cfg, const std::string& patient, int repeat, int fold) {
  return cfg.scenario_path() / "checkpoints" / patient /
         ("r" + std::to_string(repeat) + "_f" + std::to_string(fold) + "_head.szg");
}

/// Scenario-relevant config (jobs and paths excluded) plus the cache hashes.
std::uint64_t scenario_hash(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& cache_hashes) {
  json j = to_json(cfg);
  j.erase("jobs");
  j.erase("output_dir");
  j.erase("dataset_root");
  j.erase("synth");
  j.erase("alarm_thresholds");
  std::uint64_t h = fnv1a(j.dump());
  for (auto c : cache_hashes) h = fnv1a(hex(c), h);
  return h;
}

json gan_log_json(const GanTrainLog& log) {
  json steps = json::array();
  for (const auto& s : log.steps) steps.push_back({s.step, s.d_loss, s.g_loss, s.d_real, s.d_fake});
  return {{"sample_count", log.sample_count}, {"columns", {"step", "d_loss", "g_loss", "d_real", "d_fake"}},
          {"steps", steps}};
}

json classifier_log_json(const ClassifierLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs) epochs.push_back({e.epoch, e.train_loss, e.monitor_loss});
  return {{"columns", {"epoch", "train_loss", "monitor_loss"}},
          {"epochs", epochs},
          {"best_epoch", log.best_epoch},
          {"best_monitor_loss", log.best_monitor_loss},
          {"stopped_early", log.stopped_early}};
}

json checkpoint_meta(const ExperimentConfig& cfg, const std::string& patient, int repeat, int fold) {
  return {{"scenario", std::string(to_string(cfg.scenario))}, {"patient", patient}, {"repeat", repeat}, {"fold", fold}};
}

Model trunk_model(const ExperimentConfig& cfg, Index n_channels, Extent2 input) {
  Model d = build_discriminator(cfg.discriminator, n_channels, input, 0, cfg.gan.init_std);
  Sequential trunk = d.net.head_layers(cfg.discriminator.trunk_layers());
  return {trunk, select(d.params, trunk.parameter_names())};
}

struct LoadedPatient {
  PatientData data;
  PatientFolds folds;
  std::shared_ptr<const RecordingWindows> gan_source;
};

std::vector<LoadedPatient> load_eligible(const ExperimentConfig& cfg, std::vector<std::uint64_t>& cache_hashes,
                                         std::vector<std::string>& skipped) {
  std::vector<LoadedPatient> out;
  for (const PatientConfig& pc : cfg.patients) {
    PatientData p = load_patient(cfg, pc);
    cache_hashes.push_back(require_cache(cfg, p));
    if (!p.eligibility.eligible) {
      std::string why;
      for (const auto& r : p.eligibility.reasons) why += (why.empty() ? "" : ", ") + r;
      log("skipping " + pc.id + ": not eligible (" + why + ")");
      skipped.push_back(pc.id);
      continue;
    }
    PatientFolds folds = make_folds(p, cfg);
    out.push_back({std::move(p), std::move(folds), nullptr});
  }
  return out;
}

}  // namespace

TrainOutcome cmd_train(const ExperimentConfig& cfg, bool force) {
  TrainOutcome outcome;
  std::vector<std::uint64_t> cache_hashes;
  std::vector<LoadedPatient> patients = load_eligible(cfg, cache_hashes, outcome.skipped);
  const fs::path root = cfg.scenario_path();
  const std::uint64_t h = scenario_hash(cfg, cache_hashes);
  if (!force && stamp_matches(root / "train_stamp.json", h)) {
    outcome.reused = true;
    log("train " + std::string(to_string(cfg.scenario)) + ": checkpoints up to date");
    return outcome;
  }
  write_json(root / "config.json", to_json(cfg));
  std::vector<fs::path> written;
  const Extent2 input{cfg.stft.frames_per_segment(), build_bin_mask(cfg.stft.line_freq).size()};

  // Frozen trunks of the GAN scenarios, one per patient (possibly shared).
  std::vector<FeatureExtractor> trunks(patients.size());
  if (is_gan_scenario(cfg.scenario)) {
    const double stride = cfg.gan_stride_s / (cfg.scenario == Scenario::gan_ps_ospl_cnn ? cfg.oversample_factor : 1);
    for (auto& lp : patients) {
      lp.gan_source = std::make_shared<RecordingWindows>(lp.data.recordings, gan_windows(lp.data, stride), lp.data.stft);
    }
    GanSetup setup{cfg.generator, cfg.discriminator, cfg.gan};
    auto train_one = [&](const std::string& name, const WindowSource& src) {
      setup.train.seed = derive_seed(cfg.seed, name);
      log("train " + name + " on " + std::to_string(src.size()) + " unlabeled windows");
      const GanResult r = train_gan(src, setup);
      const fs::path dir = root / "checkpoints" / name;
      const json meta = {{"scenario", std::string(to_string(cfg.scenario))}, {"sample_count", r.log.sample_count}};
      save_checkpoint(dir / "generator.szg", {CheckpointRole::generator, r.generator, meta});
      save_checkpoint(dir / "discriminator.szg", {CheckpointRole::discriminator, r.discriminator, meta});
      Model disc = build_discriminator(cfg.discriminator, src.input_shape()[0], input, 0, cfg.gan.init_std);
      disc.params = r.discriminator;
      FeatureExtractor fx = export_feature_extractor(disc, cfg.discriminator);
      save_checkpoint(dir / "trunk.szg", {CheckpointRole::trunk, fx.parameters(), meta});
      write_json(root / "logs" / (name + ".json"), gan_log_json(r.log));
      for (const char* f : {"generator.szg", "discriminator.szg", "trunk.szg"}) written.push_back(dir / f);
      written.push_back(root / "logs" / (name + ".json"));
      outcome.trunks.push_back(dir / "trunk.szg");
      return fx;
    };
    if (is_per_patient(cfg.scenario)) {
      for (std::size_t i = 0; i < patients.size(); ++i) {
        trunks[i] = train_one(gan_name(cfg, patients[i].data.config.id), *patients[i].gan_source);
      }
    } else if (!patients.empty()) {
      std::vector<std::shared_ptr<const WindowSource>> parts;
      for (const auto& lp : patients) parts.push_back(lp.gan_source);
      const FeatureExtractor shared = train_one("gan_global", ConcatenatedWindows(parts));
      std::fill(trunks.begin(), trunks.end(), shared);
    }
  }

  // Feature rows of every training window per patient, computed once with the frozen trunk.
  struct FeatureTable {
    std::map<std::pair<int, Index>, Index> row;
    RowMatrix<double> features;
  };
  std::vector<FeatureTable> tables(patients.size());
  if (is_gan_scenario(cfg.scenario)) {
    parallel_for(patients.size(), cfg.jobs, [&](std::size_t i) {
      const auto& lp = patients[i];
      std::vector<WindowRef> unique;
      for (const auto& fold : lp.folds.folds) {
        for (const auto& w : fold.train) {
          const auto key = std::make_pair(w.recording, sample_key(w, lp.data.stft.sample_rate));
          if (tables[i].row.emplace(key, Index(unique.size())).second) unique.push_back(w);
        }
      }
      tables[i].features = extract_features(trunks[i], RecordingWindows(lp.data.recordings, unique, lp.data.stft));
    });
  }

  struct Job {
    std::size_t patient;
    int repeat;
    int fold;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    for (int r = 0; r < cfg.repeats; ++r) {
      for (int f = 0; f < int(patients[i].folds.folds.size()); ++f) jobs.push_back({i, r, f});
    }
  }
  std::vector<json> fold_logs(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t j) {
    const Job job = jobs[j];
    const LoadedPatient& lp = patients[job.patient];
    const std::string& id = lp.data.config.id;
    const FoldData& fold = lp.folds.folds[std::size_t(job.fold)];
    ClassifierConfig cc = cfg.classifier;
    cc.seed = derive_seed(cfg.seed, id + ":r" + std::to_string(job.repeat) + ":f" + std::to_string(job.fold));
    const json meta = checkpoint_meta(cfg, id, job.repeat, job.fold);
    ClassifierLog log_entry;
    if (is_gan_scenario(cfg.scenario)) {
      const FeatureTable& table = tables[job.patient];
      std::vector<std::size_t> rows;
      LabeledFeatureSet data;
      data.patient_id = id;
      for (const auto& w : fold.train) {
        rows.push_back(std::size_t(table.row.at({w.recording, sample_key(w, lp.data.stft.sample_rate)})));
        data.labels.push_back(class_index(w.label));
        data.start_s.push_back(w.start_s);
      }
      data.features.resize(Index(rows.size()), table.features.cols());
      for (std::size_t k = 0; k < rows.size(); ++k) data.features.row(Index(k)) = table.features.row(Index(rows[k]));
      HeadResult r = train_head(data, cc);
      save_checkpoint(head_path(cfg, id, job.repeat, job.fold), {CheckpointRole::head, r.head, meta});
      log_entry = r.log;
    } else {
      const RecordingWindows windows(lp.data.recordings, fold.train, lp.data.stft);
      SupervisedResult r = train_supervised(windows, cfg.discriminator, cc, cfg.gan.init_std);
      save_checkpoint(trunk_path(cfg, id, job.repeat, job.fold), {CheckpointRole::trunk, r.trunk, meta});
      save_checkpoint(head_path(cfg, id, job.repeat, job.fold), {CheckpointRole::head, r.head, meta});
      log_entry = r.log;
    }
    json entry = classifier_log_json(log_entry);
    entry["repeat"] = job.repeat;
    entry["fold"] = job.fold;
    entry["held_out_seizure"] = fold.seizure;
    entry["train_windows"] = fold.train.size();
    fold_logs[j] = std::move(entry);
    log("train " + id + " repeat " + std::to_string(job.repeat) + " fold " + std::to_string(job.fold) +
        ": best monitor loss " + std::to_string(log_entry.best_monitor_loss) + " at epoch " +
        std::to_string(log_entry.best_epoch));
  });

  for (std::size_t i = 0; i < patients.size(); ++i) {
    const std::string& id = patients[i].data.config.id;
    json folds = json::array();
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].patient != i) continue;
      folds.push_back(fold_logs[j]);
      outcome.heads.push_back(head_path(cfg, id, jobs[j].repeat, jobs[j].fold));
      if (!is_gan_scenario(cfg.scenario)) outcome.trunks.push_back(trunk_path(cfg, id, jobs[j].repeat, jobs[j].fold));
    }
    const fs::path log_path = root / "logs" / (id + ".json");
    write_json(log_path, {{"patient_id", id},
                          {"leading_seizures", patients[i].data.merged.size()},
                          {"interictal_hours", patients[i].data.interictal_hours},
                          {"held_out_seizures", patients[i].folds.seizures},
                          {"folds", folds}});
    written.push_back(log_path);
  }
  written.insert(written.end(), outcome.heads.begin(), outcome.heads.end());
  if (!is_gan_scenario(cfg.scenario)) written.insert(written.end(), outcome.trunks.begin(), outcome.trunks.end());
  write_stamp(root / "train_stamp.json", h, written);
  return outcome;
}

// ---------------------------------------------------------------------------------------------
// evaluate and report

std::vector<PatientReport> cmd_evaluate(const ExperimentConfig& cfg, bool force) {
  std::vector<std::uint64_t> cache_hashes;
  std::vector<std::string> skipped;
  const std::vector<LoadedPatient> patients = load_eligible(cfg, cache_hashes, skipped);
  const fs::path root = cfg.scenario_path();
  const fs::path train_stamp = root / "train_stamp.json";
  if (!fs::exists(train_stamp)) {
    throw MissingArtifactError("no checkpoints for scenario " + std::string(to_string(cfg.scenario)) +
                               "; run `szgan train` first");
  }
  const std::uint64_t h = fnv1a(read_file(train_stamp), scenario_hash(cfg, cache_hashes)) ^
                          fnv1a(json(cfg.alarm_thresholds).dump());
  const fs::path report_dir = root / "reports";
  if (!force && stamp_matches(report_dir / "evaluate_stamp.json", h)) {
    log("evaluate " + std::string(to_string(cfg.scenario)) + ": reports up to date");
    std::vector<PatientReport> out;
    for (const auto& lp : patients) {
      out.push_back(patient_report_from_json(read_json(report_dir / (lp.data.config.id + ".json"))));
    }
    return out;
  }

  const Extent2 input{cfg.stft.frames_per_segment(), build_bin_mask(cfg.stft.line_freq).size()};
  auto load_trunk = [&](const LoadedPatient& lp, int repeat, int fold) {
    Model t = trunk_model(cfg, lp.data.n_channels(), input);
    const fs::path path = trunk_path(cfg, lp.data.config.id, repeat, fold);
    if (!fs::exists(path)) {
      throw MissingArtifactError("missing trunk checkpoint for patient '" + lp.data.config.id + "' repeat " +
                                 std::to_string(repeat) + " fold " + std::to_string(fold) + ": " + path.string());
    }
    return FeatureExtractor(t.net, load_checkpoint(path).params);
  };

  struct Job {
    std::size_t patient;
    int repeat;
    int fold;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    for (int r = 0; r < cfg.repeats; ++r) {
      for (int f = 0; f < int(patients[i].folds.folds.size()); ++f) jobs.push_back({i, r, f});
    }
  }
  // Validation features depend only on the trunk, which the GAN scenarios share across folds.
  std::vector<std::vector<double>> scores(jobs.size());
  std::map<std::pair<std::size_t, int>, RowMatrix<double>> shared_features;
  if (is_gan_scenario(cfg.scenario)) {
    std::vector<RowMatrix<double>> per_fold;
    std::vector<std::pair<std::size_t, int>> keys;
    for (std::size_t i = 0; i < patients.size(); ++i) {
      for (int f = 0; f < int(patients[i].folds.folds.size()); ++f) keys.emplace_back(i, f);
    }
    per_fold.resize(keys.size());
    parallel_for(keys.size(), cfg.jobs, [&](std::size_t k) {
      const auto& lp = patients[keys[k].first];
      const auto& fold = lp.folds.folds[std::size_t(keys[k].second)];
      per_fold[k] = extract_features(load_trunk(lp, 0, keys[k].second),
                                     RecordingWindows(lp.data.recordings, fold.validation, lp.data.stft));
    });
    for (std::size_t k = 0; k < keys.size(); ++k) shared_features[keys[k]] = std::move(per_fold[k]);
  }
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t j) {
    const Job job = jobs[j];
    const LoadedPatient& lp = patients[job.patient];
    const FoldData& fold = lp.folds.folds[std::size_t(job.fold)];
    const fs::path hp = head_path(cfg, lp.data.config.id, job.repeat, job.fold);
    if (!fs::exists(hp)) {
      throw MissingArtifactError("missing head checkpoint for patient '" + lp.data.config.id + "' repeat " +
                                 std::to_string(job.repeat) + " fold " + std::to_string(job.fold) + ": " +
                                 hp.string());
    }
    Model head;
    if (is_gan_scenario(cfg.scenario)) {
      const RowMatrix<double>& features = shared_features.at({job.patient, job.fold});
      head = build_head(features.cols(), cfg.classifier, 0);
      head.params = load_checkpoint(hp).params;
      head.net.check_parameters(head.params);
      scores[j] = predict_features(head, features);
    } else {
      const FeatureExtractor trunk = load_trunk(lp, job.repeat, job.fold);
      head = build_head(trunk.feature_size(), cfg.classifier, 0);
      head.params = load_checkpoint(hp).params;
      head.net.check_parameters(head.params);
      scores[j] = predict(trunk, head, RecordingWindows(lp.data.recordings, fold.validation, lp.data.stft));
    }
  });

  std::vector<PatientReport> reports;
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const LoadedPatient& lp = patients[i];
    const std::string& id = lp.data.config.id;
    std::vector<RunReport> runs;
    for (int r = 0; r < cfg.repeats; ++r) {
      RunReport run;
      run.patient_id = id;
      run.scenario = cfg.scenario;
      run.repeat = r;
      std::vector<double> all_scores;
      std::vector<int> all_labels;
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].patient != i || jobs[j].repeat != r) continue;
        const FoldData& fold = lp.folds.folds[std::size_t(jobs[j].fold)];
        std::vector<int> labels;
        for (std::size_t k = 0; k < fold.validation.size(); ++k) {
          labels.push_back(class_index(fold.validation[k].label));
          run.scores.push_back({jobs[j].fold, fold.validation[k].start_s, labels.back(), scores[j][k]});
        }
        run.fold_auc.push_back(roc_auc(scores[j], labels).auc);
        all_scores.insert(all_scores.end(), scores[j].begin(), scores[j].end());
        all_labels.insert(all_labels.end(), labels.begin(), labels.end());
      }
      const RocResult roc = roc_auc(all_scores, all_labels);
      run.auc = roc.auc;
      run.roc = roc.points;
      std::vector<TimedScore> timeline;
      for (const auto& s : run.scores) timeline.push_back({s.start_s, s.score});
      std::stable_sort(timeline.begin(), timeline.end(),
                       [](const TimedScore& a, const TimedScore& b) { return a.time_s < b.time_s; });
      for (double t : cfg.alarm_thresholds) {
        run.alarms.push_back(simulate_alarms(timeline, t, cfg.labels, lp.data.merged, cfg.stft.segment_s));
      }
      write_file(report_dir / (id + "_roc_r" + std::to_string(r) + ".csv"), roc_csv(run.roc));
      written.push_back(report_dir / (id + "_roc_r" + std::to_string(r) + ".csv"));
      runs.push_back(std::move(run));
    }
    PatientReport rep = aggregate(runs);
    write_json(report_dir / (id + ".json"), to_json(rep));
    write_file(report_dir / (id + "_scores.csv"), scores_csv(rep));
    written.push_back(report_dir / (id + ".json"));
    written.push_back(report_dir / (id + "_scores.csv"));
    char line[160];
    std::snprintf(line, sizeof line, "evaluate %s: AUC %.4f ± %.4f over %d repeats", id.c_str(), rep.auc_mean,
                  rep.auc_sd, cfg.repeats);
    log(line);
    reports.push_back(std::move(rep));
  }
  json summary = json::array();
  for (const auto& r : reports) {
    summary.push_back({{"patient_id", r.patient_id}, {"auc_mean", r.auc_mean}, {"auc_sd", r.auc_sd}});
  }
  write_json(report_dir / "summary.json",
             {{"scenario", std::string(to_string(cfg.scenario))}, {"patients", summary}, {"skipped", skipped}});
  written.push_back(report_dir / "summary.json");
  write_stamp(report_dir / "evaluate_stamp.json", h, written);
  return reports;
}

std::string cmd_report(const ExperimentConfig& cfg) {
  std::vector<PatientReport> reports;
  for (Scenario s : all_scenarios) {
    const fs::path dir = cfg.output_path() / std::string(to_string(s)) / "reports";
    for (const auto& pc : cfg.patients) {
      const fs::path path = dir / (pc.id + ".json");
      if (fs::exists(path)) reports.push_back(patient_report_from_json(read_json(path)));
    }
  }
  if (reports.empty()) {
    throw MissingArtifactError("no evaluation reports under " + cfg.output_path().string() +
                               "; run `szgan evaluate` first");
  }
  const std::string table = format_auc_table(reports);
  write_file(cfg.output_path() / "report" / "auc_table.txt", table);
  write_file(cfg.output_path() / "report" / "auc_table.csv", auc_table_csv(reports));
  return table;
}

}  // namespace szgan
