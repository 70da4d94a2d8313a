#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "szgan/tensor.hpp"

namespace szgan {

using SampleMatrix = RowMatrix<double>;

/// Multichannel EEG. Rows of `samples` are channels (µV), columns are time steps.
struct Recording {
  std::string patient_id;
  std::vector<std::string> channels;
  int sample_rate = 256;
  SampleMatrix samples;
  /// Seconds since the epoch of the first sample.
  double start_time = 0.0;

  Index n_channels() const noexcept { return samples.rows(); }
  Index n_samples() const noexcept { return samples.cols(); }
  double duration_s() const noexcept { return double(n_samples()) / sample_rate; }
  double end_time() const noexcept { return start_time + duration_s(); }

  void validate() const;
};

struct SeizureInterval {
  double onset_s = 0.0;
  double offset_s = 0.0;
  friend bool operator==(const SeizureInterval&, const SeizureInterval&) = default;
};

/// Seizure intervals sorted by onset. Intervals may touch but not overlap.
struct AnnotationSet {
  std::vector<SeizureInterval> seizures;

  std::size_t size() const noexcept { return seizures.size(); }
  bool empty() const noexcept { return seizures.empty(); }
  void validate() const;
  AnnotationSet shifted(double dt) const;
  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

enum class RecordingFormat { raw_f64, csv };

/// `.csv` maps to csv, anything else to raw_f64.
RecordingFormat format_from_path(const std::filesystem::path& path);

// raw_f64: "SZR1" container, header {patient_id, channels, sample_rate, n_samples, start_time},
// channel-major float64 payload.
// csv: optional "# {json metadata}" line, a header row of channel names, one row per time step.
Recording load_recording(const std::filesystem::path& path, RecordingFormat format);
void save_recording(const std::filesystem::path& path, const Recording& rec, RecordingFormat format);

/// `<dir>/<stem>.ann.json` beside a recording file.
std::filesystem::path annotation_path(const std::filesystem::path& recording_path);

/// Sidecar annotations: a JSON array of {onset_s, offset_s}, seconds from recording start.
AnnotationSet load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, const AnnotationSet& ann);

/// Rows reordered to `wanted`. Throws DataError listing every missing name.
Recording select_channels(const Recording& rec, std::span<const std::string> wanted);

struct PreictalSignature {
  double band_low_hz = 10.0;
  double band_high_hz = 20.0;
  /// RMS of the injected band activity relative to the channel's background RMS.
  double gain = 1.5;
  /// The signature occupies [onset - onset_lead_s, onset).
  double onset_lead_s = 2400.0;
};

struct SyntheticProfile {
  /// Exponent beta of the 1/f^beta background.
  double spectral_slope = 1.0;
  /// Background RMS in µV; per-channel values override it when present.
  double amplitude = 20.0;
  std::vector<double> channel_amplitude;
  int line_freq = 60;
  double line_amplitude = 10.0;
  PreictalSignature preictal;
  std::uint64_t seed = 1;

  void validate() const;
  double amplitude_of(Index channel) const;
};

struct SyntheticRecording {
  Recording recording;
  /// Relative to the recording start.
  AnnotationSet annotations;
};

/// Seeded colored noise plus a line-noise sinusoid, with band-limited activity added before each
/// seizure onset. `seizures` are seconds from the recording start.
SyntheticRecording generate_synthetic(const SyntheticProfile& profile, double duration_s, int n_channels,
                                      std::span<const SeizureInterval> seizures, double start_time = 0.0,
                                      std::string patient_id = "synthetic", int sample_rate = 256);

}  // namespace szgan
