#pragma once

#include <complex>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "szgan/labeling.hpp"
#include "szgan/signal_io.hpp"
#include "szgan/tensor.hpp"

namespace szgan {

struct StftConfig {
  double window_len_s = 1.0;
  double overlap = 0.5;
  /// Only "cosine" (the raised-cosine/Hann window) is supported.
  std::string window_fn = "cosine";
  int line_freq = 60;
  int sample_rate = 256;
  /// Length of one spectrogram window.
  double segment_s = 28.0;

  void validate() const;
  Index window_samples() const;
  Index hop_samples() const;
  Index segment_samples() const;
  Index n_bins() const { return window_samples() / 2 + 1; }
  /// Frames of one segment after the one-hop tail padding (56 for the defaults).
  Index frames_per_segment() const;
};

/// w[k] = 0.5 (1 - cos(2 pi k / (L - 1))).
Eigen::VectorXd cosine_window(Index length);

/// One-sided STFT, frames x (L/2 + 1). The signal is zero-padded by one hop at the tail, so a
/// 28 s signal at 256 Hz yields 56 frames of 129 bins.
Eigen::MatrixXcd stft(std::span<const double> signal, const StftConfig& cfg);
Eigen::MatrixXd stft_magnitude(std::span<const double> signal, const StftConfig& cfg);

/// Frequency bins kept after removing DC, both line-noise bands (f +- 3 Hz, 2f +- 3 Hz) and the
/// top two bins. Assumes 1 Hz bins (129 of them).
struct BinMask {
  std::vector<Index> kept;
  Index n_bins = 129;
  Index size() const noexcept { return Index(kept.size()); }
  bool keeps(Index bin) const;
};

BinMask build_bin_mask(int line_freq);

/// channels x time frames (56) x kept frequency bins (112) of STFT magnitudes.
struct Spectrogram {
  Tensor data;
  double window_start_s = 0.0;
  Label label = Label::unlabeled;
  std::string patient_id;

  void validate() const;
};

/// Zero-mean, unit-variance copy of the data, the form fed to the networks.
Tensor standardized(const Spectrogram& s);
Tensor standardized(const Tensor& t);

/// `start_s` is absolute time; the window must lie inside the recording.
Spectrogram window_to_spectrogram(const Recording& rec, double start_s, const StftConfig& cfg);
Spectrogram window_to_spectrogram(const Recording& rec, double start_s, const StftConfig& cfg, const BinMask& mask);

/// A window position inside a labeled segment. Window starts in one segment lie on the sample
/// grid anchored at `segment_start_s` (the first window start).
struct WindowRef {
  double start_s = 0.0;
  Label label = Label::unlabeled;
  int seizure = -1;
  int recording = 0;
  double segment_start_s = 0.0;
  double segment_end_s = 0.0;
};

/// Consecutive windows at `stride_s` inside each interval of `intervals` whose label is in
/// `labels`; windows that would straddle an interval boundary are dropped.
std::vector<WindowRef> plan_windows(const Recording& rec, std::span<const LabeledInterval> intervals, double stride_s,
                                    const StftConfig& cfg, std::span<const Label> labels, int recording = 0);

/// Preictal and interictal windows of `rec`, labeled by `policy` against absolute-time `ann`.
std::vector<WindowRef> plan_labeled_windows(const Recording& rec, const AnnotationSet& ann, const LabelPolicy& policy,
                                            double stride_s, const StftConfig& cfg, int recording = 0);

std::vector<Spectrogram> extract_windows(const Recording& rec, const AnnotationSet& ann, const LabelPolicy& policy,
                                         double stride_s, const StftConfig& cfg);

/// Re-windows the segments behind `windows`. If the preictal/interictal ratio falls short of
/// `target_ratio` (minority : majority) the minority class is re-windowed at stride / k with
/// k = ceil(target_ratio * majority / minority); every class is further re-windowed at
/// stride / `factor`. Returns `windows` unchanged when neither applies.
std::vector<WindowRef> balance_and_oversample(std::span<const WindowRef> windows, double target_ratio, int factor,
                                              double stride_s, const StftConfig& cfg);

// "SZS1" spectrogram cache: header {patient_id, label, start_s, shape, mask, cfg}, float64 payload.
nlohmann::json to_json(const StftConfig& cfg);
StftConfig stft_config_from_json(const nlohmann::json& j);
std::string encode_spectrogram(const Spectrogram& s, const BinMask& mask, const StftConfig& cfg);
Spectrogram decode_spectrogram(std::string_view bytes);
void save_spectrogram(const std::filesystem::path& path, const Spectrogram& s, const BinMask& mask,
                      const StftConfig& cfg);
Spectrogram load_spectrogram(const std::filesystem::path& path);

/// Indexable collection of model inputs with their labels and start times.
class WindowSource {
 public:
  virtual ~WindowSource() = default;
  virtual std::size_t size() const = 0;
  virtual Shape input_shape() const = 0;
  /// Standardized network input for window i.
  virtual Tensor input(std::size_t i) const = 0;
  virtual Label label(std::size_t i) const = 0;
  virtual double start_s(std::size_t i) const = 0;

  /// `[B, ...]` stack of the given windows.
  Tensor batch(std::span<const std::size_t> indices) const;
};

class SpectrogramWindows final : public WindowSource {
 public:
  explicit SpectrogramWindows(std::vector<Spectrogram> windows);

  std::size_t size() const override { return windows_.size(); }
  Shape input_shape() const override;
  Tensor input(std::size_t i) const override { return standardized(windows_.at(i)); }
  Label label(std::size_t i) const override { return windows_.at(i).label; }
  double start_s(std::size_t i) const override { return windows_.at(i).window_start_s; }

  const std::vector<Spectrogram>& windows() const noexcept { return windows_; }

 private:
  std::vector<Spectrogram> windows_;
};

/// Windows computed on demand from shared recordings.
class RecordingWindows final : public WindowSource {
 public:
  RecordingWindows(std::shared_ptr<const std::vector<Recording>> recordings, std::vector<WindowRef> refs,
                   StftConfig cfg);

  std::size_t size() const override { return refs_.size(); }
  Shape input_shape() const override;
  Tensor input(std::size_t i) const override;
  Label label(std::size_t i) const override { return refs_.at(i).label; }
  double start_s(std::size_t i) const override { return refs_.at(i).start_s; }

  Spectrogram spectrogram(std::size_t i) const;
  const std::vector<WindowRef>& refs() const noexcept { return refs_; }
  const StftConfig& config() const noexcept { return cfg_; }

 private:
  std::shared_ptr<const std::vector<Recording>> recordings_;
  std::vector<WindowRef> refs_;
  StftConfig cfg_;
  BinMask mask_;
};

}  // namespace szgan
