#include "szgan/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

#include <unsupported/Eigen/FFT>

#include "szgan/checkpoint.hpp"

namespace szgan {

void StftConfig::validate() const {
  if (window_fn != "cosine") throw ConfigError("unsupported STFT window '" + window_fn + "'");
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (!(overlap > 0.0 && overlap < 1.0)) throw ConfigError("STFT overlap must lie in (0, 1)");
  const double w = window_len_s * sample_rate;
  if (!(w >= 2.0) || std::abs(w - std::round(w)) > 1e-9) {
    throw ConfigError("STFT window length times sample rate must be an integer >= 2");
  }
  const double hop = w * (1.0 - overlap);
  if (std::abs(hop - std::round(hop)) > 1e-9 || hop < 1.0) throw ConfigError("STFT hop must be a whole sample count");
  if (line_freq != 50 && line_freq != 60) throw ConfigError("line frequency must be 50 or 60 Hz");
  if (!(segment_s * sample_rate >= w)) throw ConfigError("segment must hold at least one STFT window");
}

Index StftConfig::window_samples() const { return Index(std::llround(window_len_s * sample_rate)); }
Index StftConfig::hop_samples() const { return Index(std::llround(window_len_s * sample_rate * (1.0 - overlap))); }
Index StftConfig::segment_samples() const { return Index(std::llround(segment_s * sample_rate)); }
Index StftConfig::frames_per_segment() const {
  return (segment_samples() + hop_samples() - window_samples()) / hop_samples() + 1;
}

Eigen::VectorXd cosine_window(Index length) {
  Eigen::VectorXd w(length);
  if (length == 1) {
    w[0] = 1.0;
    return w;
  }
  for (Index k = 0; k < length; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * double(k) / double(length - 1)));
  }
  return w;
}

Eigen::MatrixXcd stft(std::span<const double> signal, const StftConfig& cfg) {
  cfg.validate();
  const Index len = cfg.window_samples();
  const Index hop = cfg.hop_samples();
  const auto n = Index(signal.size());
  if (n < len) {
    throw ArgumentError("signal of " + std::to_string(n) + " samples is shorter than one " + std::to_string(len) +
                        "-sample window");
  }
  const Index padded = n + hop;
  const Index frames = (padded - len) / hop + 1;
  const Index bins = len / 2 + 1;
  // Plans and the window are reused across calls on the same thread.
  thread_local Eigen::FFT<double> fft(Eigen::default_fft_impl<double>(), Eigen::FFT<double>::HalfSpectrum);
  thread_local Eigen::VectorXd window;
  if (window.size() != len) window = cosine_window(len);
  std::vector<double> buf(std::size_t(len), 0.0);
  std::vector<std::complex<double>> spectrum;
  Eigen::MatrixXcd out(frames, bins);
  for (Index f = 0; f < frames; ++f) {
    const Index begin = f * hop;
    for (Index k = 0; k < len; ++k) {
      const Index t = begin + k;
      buf[std::size_t(k)] = t < n ? signal[std::size_t(t)] * window[k] : 0.0;
    }
    fft.fwd(spectrum, buf);
    for (Index b = 0; b < bins; ++b) out(f, b) = spectrum[std::size_t(b)];
  }
  return out;
}

Eigen::MatrixXd stft_magnitude(std::span<const double> signal, const StftConfig& cfg) {
  return stft(signal, cfg).cwiseAbs();
}

bool BinMask::keeps(Index bin) const { return std::binary_search(kept.begin(), kept.end(), bin); }

BinMask build_bin_mask(int line_freq) {
  if (line_freq != 50 && line_freq != 60) {
    throw ArgumentError("unsupported line frequency " + std::to_string(line_freq) + " Hz (expected 50 or 60)");
  }
  BinMask mask;
  auto in_band = [](Index bin, Index center) { return bin >= center - 3 && bin <= center + 3; };
  for (Index b = 0; b < mask.n_bins; ++b) {
    if (b == 0 || b >= mask.n_bins - 2) continue;
    if (in_band(b, line_freq) || in_band(b, 2 * line_freq)) continue;
    mask.kept.push_back(b);
  }
  return mask;
}

void Spectrogram::validate() const {
  if (data.rank() != 3) throw DimensionError("spectrogram must be channels x frames x bins");
  if (!data.data().allFinite() || (data.data().array() < 0.0).any()) {
    throw DataError("spectrogram magnitudes must be finite and nonnegative");
  }
}

Tensor standardized(const Tensor& t) {
  Tensor out(t.shape(), t.data());
  const double mean = out.data().mean();
  out.data().array() -= mean;
  const double sd = std::sqrt(out.data().squaredNorm() / double(out.size()));
  if (sd > 0.0) out.data() /= sd;
  return out;
}

Tensor standardized(const Spectrogram& s) { return standardized(s.data); }

Spectrogram window_to_spectrogram(const Recording& rec, double start_s, const StftConfig& cfg) {
  return window_to_spectrogram(rec, start_s, cfg, build_bin_mask(cfg.line_freq));
}

Spectrogram window_to_spectrogram(const Recording& rec, double start_s, const StftConfig& cfg, const BinMask& mask) {
  cfg.validate();
  if (rec.sample_rate != cfg.sample_rate) {
    throw ConfigError("recording '" + rec.patient_id + "' is sampled at " + std::to_string(rec.sample_rate) +
                      " Hz, configuration expects " + std::to_string(cfg.sample_rate) + " Hz");
  }
  const Index len = cfg.segment_samples();
  const auto first = Index(std::llround((start_s - rec.start_time) * rec.sample_rate));
  if (first < 0 || first + len > rec.n_samples()) {
    throw ArgumentError("window at " + std::to_string(start_s) + " s falls outside recording '" + rec.patient_id +
                        "'");
  }
  const Index frames = cfg.frames_per_segment();
  Spectrogram out;
  out.window_start_s = start_s;
  out.patient_id = rec.patient_id;
  out.data = Tensor({rec.n_channels(), frames, mask.size()});
  for (Index c = 0; c < rec.n_channels(); ++c) {
    const double* row = rec.samples.data() + c * rec.n_samples() + first;
    const Eigen::MatrixXd mag = stft_magnitude(std::span<const double>(row, std::size_t(len)), cfg);
    double* dst = out.data.ptr() + c * frames * mask.size();
    for (Index f = 0; f < frames; ++f) {
      for (Index k = 0; k < mask.size(); ++k) *dst++ = mag(f, mask.kept[std::size_t(k)]);
    }
  }
  return out;
}

std::vector<WindowRef> plan_windows(const Recording& rec, std::span<const LabeledInterval> intervals, double stride_s,
                                    const StftConfig& cfg, std::span<const Label> labels, int recording) {
  if (!(stride_s > 0)) throw ArgumentError("window stride must be positive");
  const double fs = rec.sample_rate;
  const Index len = cfg.segment_samples();
  const auto stride = Index(std::llround(stride_s * fs));
  if (stride < 1) throw ArgumentError("window stride is below one sample");
  std::vector<WindowRef> out;
  for (const auto& iv : intervals) {
    if (std::find(labels.begin(), labels.end(), iv.label) == labels.end()) continue;
    const auto a = std::max<Index>(0, Index(std::ceil((iv.begin_s - rec.start_time) * fs - 1e-6)));
    const auto b = std::min<Index>(rec.n_samples(), Index(std::floor((iv.end_s - rec.start_time) * fs + 1e-6)));
    if (b - a < len) continue;
    const double seg_start = rec.start_time + double(a) / fs;
    const double seg_end = rec.start_time + double(b) / fs;
    for (Index s = a; s + len <= b; s += stride) {
      out.push_back({rec.start_time + double(s) / fs, iv.label, iv.seizure, recording, seg_start, seg_end});
    }
  }
  return out;
}

std::vector<WindowRef> plan_labeled_windows(const Recording& rec, const AnnotationSet& ann, const LabelPolicy& policy,
                                            double stride_s, const StftConfig& cfg, int recording) {
  const AnnotationSet merged = merge_leading_seizures(ann, policy.lead_merge_min);
  const auto intervals = label_intervals({rec.start_time, rec.end_time()}, merged, policy);
  constexpr Label kLabeled[] = {Label::preictal, Label::interictal};
  return plan_windows(rec, intervals, stride_s, cfg, kLabeled, recording);
}

std::vector<Spectrogram> extract_windows(const Recording& rec, const AnnotationSet& ann, const LabelPolicy& policy,
                                         double stride_s, const StftConfig& cfg) {
  const BinMask mask = build_bin_mask(cfg.line_freq);
  std::vector<Spectrogram> out;
  for (const auto& ref : plan_labeled_windows(rec, ann, policy, stride_s, cfg)) {
    out.push_back(window_to_spectrogram(rec, ref.start_s, cfg, mask));
    out.back().label = ref.label;
  }
  return out;
}

std::vector<WindowRef> balance_and_oversample(std::span<const WindowRef> windows, double target_ratio, int factor,
                                              double stride_s, const StftConfig& cfg) {
  if (factor < 1) throw ArgumentError("oversampling factor must be >= 1");
  if (!(target_ratio > 0)) throw ArgumentError("target ratio must be positive");
  std::size_t n_pre = 0, n_inter = 0;
  for (const auto& w : windows) {
    n_pre += w.label == Label::preictal;
    n_inter += w.label == Label::interictal;
  }
  Label minority = Label::unlabeled;
  long k = 1;
  if (n_pre > 0 && n_inter > 0) {
    const bool pre_minor = n_pre <= n_inter;
    const double minor = double(pre_minor ? n_pre : n_inter);
    const double major = double(pre_minor ? n_inter : n_pre);
    if (minor < target_ratio * major) {
      minority = pre_minor ? Label::preictal : Label::interictal;
      k = long(std::ceil(target_ratio * major / minor - 1e-12));
    }
  }
  if (k == 1 && factor == 1) return {windows.begin(), windows.end()};

  const double fs = cfg.sample_rate;
  const Index len = cfg.segment_samples();
  const double base = stride_s * fs;
  auto stride_for = [&](Label label) {
    const double divisor = double(factor) * (label == minority ? double(k) : 1.0);
    const auto s = Index(std::llround(base / divisor));
    if (base / divisor < 1.0 || s < 1) {
      throw ArgumentError("oversampling would need a stride below one sample (" + std::to_string(base / divisor) +
                          " samples)");
    }
    return s;
  };

  // Segments in first-appearance order.
  using Key = std::tuple<int, double, double, int, int>;
  std::map<Key, std::size_t> seen;
  std::vector<const WindowRef*> segments;
  for (const auto& w : windows) {
    const Key key{w.recording, w.segment_start_s, w.segment_end_s, int(w.label), w.seizure};
    if (seen.emplace(key, segments.size()).second) segments.push_back(&w);
  }
  std::vector<WindowRef> out;
  for (const WindowRef* seg : segments) {
    const Index stride = stride_for(seg->label);
    const auto span_samples = Index(std::llround((seg->segment_end_s - seg->segment_start_s) * fs));
    for (Index s = 0; s + len <= span_samples; s += stride) {
      WindowRef w = *seg;
      w.start_s = seg->segment_start_s + double(s) / fs;
      out.push_back(w);
    }
  }
  return out;
}

nlohmann::json to_json(const StftConfig& cfg) {
  return {{"window_len_s", cfg.window_len_s}, {"overlap", cfg.overlap},       {"window_fn", cfg.window_fn},
          {"line_freq", cfg.line_freq},       {"sample_rate", cfg.sample_rate}, {"segment_s", cfg.segment_s}};
}

StftConfig stft_config_from_json(const nlohmann::json& j) {
  StftConfig cfg;
  cfg.window_len_s = j.value("window_len_s", cfg.window_len_s);
  cfg.overlap = j.value("overlap", cfg.overlap);
  cfg.window_fn = j.value("window_fn", cfg.window_fn);
  cfg.line_freq = j.value("line_freq", cfg.line_freq);
  cfg.sample_rate = j.value("sample_rate", cfg.sample_rate);
  cfg.segment_s = j.value("segment_s", cfg.segment_s);
  return cfg;
}

std::string encode_spectrogram(const Spectrogram& s, const BinMask& mask, const StftConfig& cfg) {
  const json header = {{"patient_id", s.patient_id},
                       {"label", to_string(s.label)},
                       {"start_s", s.window_start_s},
                       {"shape", s.data.shape()},
                       {"mask", mask.kept},
                       {"cfg", to_json(cfg)},
                       {"tail_padding_samples", cfg.hop_samples()}};
  return encode_container("SZS1", header, s.data.values());
}

Spectrogram decode_spectrogram(std::string_view bytes) {
  Container c = decode_container("SZS1", bytes);
  Spectrogram s;
  try {
    s.patient_id = c.header.at("patient_id").get<std::string>();
    s.label = label_from_string(c.header.at("label").get<std::string>());
    s.window_start_s = c.header.at("start_s").get<double>();
    const auto shape = c.header.at("shape").get<Shape>();
    s.data = Tensor(shape, Eigen::Map<const Eigen::VectorXd>(c.payload.data(), Index(c.payload.size())));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed spectrogram header: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("spectrogram payload does not match its shape: ") + e.what());
  }
  return s;
}

void save_spectrogram(const std::filesystem::path& path, const Spectrogram& s, const BinMask& mask,
                      const StftConfig& cfg) {
  write_file(path, encode_spectrogram(s, mask, cfg));
}

Spectrogram load_spectrogram(const std::filesystem::path& path) { return decode_spectrogram(read_file(path)); }

Tensor WindowSource::batch(std::span<const std::size_t> indices) const {
  const Shape shape = input_shape();
  const Index n = shape_size(shape);
  Tensor out(batched(Index(indices.size()), shape));
  for (std::size_t i = 0; i < indices.size(); ++i) out.data().segment(Index(i) * n, n) = input(indices[i]).data();
  return out;
}

SpectrogramWindows::SpectrogramWindows(std::vector<Spectrogram> windows) : windows_(std::move(windows)) {
  if (windows_.empty()) return;
  for (const auto& w : windows_) {
    if (w.data.shape() != windows_.front().data.shape()) {
      throw DimensionError("window shapes differ: " + shape_string(w.data.shape()) + " vs " +
                           shape_string(windows_.front().data.shape()));
    }
  }
}

Shape SpectrogramWindows::input_shape() const {
  if (windows_.empty()) throw DataError("no windows");
  return windows_.front().data.shape();
}

RecordingWindows::RecordingWindows(std::shared_ptr<const std::vector<Recording>> recordings, std::vector<WindowRef> refs,
                                   StftConfig cfg)
    : recordings_(std::move(recordings)), refs_(std::move(refs)), cfg_(std::move(cfg)), mask_(build_bin_mask(cfg_.line_freq)) {
  cfg_.validate();
  if (!recordings_ || recordings_->empty()) throw DataError("window source needs at least one recording");
  for (const auto& r : refs_) {
    if (r.recording < 0 || std::size_t(r.recording) >= recordings_->size()) {
      throw ArgumentError("window refers to recording " + std::to_string(r.recording) + " which does not exist");
    }
  }
}

Shape RecordingWindows::input_shape() const {
  return {recordings_->front().n_channels(), cfg_.frames_per_segment(), mask_.size()};
}

Spectrogram RecordingWindows::spectrogram(std::size_t i) const {
  const auto& ref = refs_.at(i);
  Spectrogram s = window_to_spectrogram((*recordings_)[std::size_t(ref.recording)], ref.start_s, cfg_, mask_);
  s.label = ref.label;
  return s;
}

Tensor RecordingWindows::input(std::size_t i) const { return standardized(spectrogram(i)); }

}  // namespace szgan
