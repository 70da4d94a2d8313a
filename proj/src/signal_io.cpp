#include "szgan/signal_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "szgan/checkpoint.hpp"
#include "szgan/random.hpp"

namespace szgan {

void Recording::validate() const {
  if (sample_rate <= 0) throw DataError("recording '" + patient_id + "': sample rate must be positive");
  if (Index(channels.size()) != samples.rows()) {
    throw DataError("recording '" + patient_id + "': " + std::to_string(channels.size()) + " channel names for " +
                    std::to_string(samples.rows()) + " sample rows");
  }
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (!seen.insert(c).second) throw DataError("recording '" + patient_id + "': duplicate channel '" + c + "'");
  }
  if (!samples.allFinite()) throw DataError("recording '" + patient_id + "' contains non-finite samples");
}

void AnnotationSet::validate() const {
  for (std::size_t i = 0; i < seizures.size(); ++i) {
    const auto& s = seizures[i];
    if (!(s.onset_s < s.offset_s)) {
      throw DataError("seizure " + std::to_string(i) + ": onset must precede offset");
    }
    if (i > 0 && s.onset_s < seizures[i - 1].offset_s) {
      throw DataError("seizure " + std::to_string(i) + " overlaps or precedes seizure " + std::to_string(i - 1));
    }
  }
}

AnnotationSet AnnotationSet::shifted(double dt) const {
  AnnotationSet out = *this;
  for (auto& s : out.seizures) {
    s.onset_s += dt;
    s.offset_s += dt;
  }
  return out;
}

RecordingFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? RecordingFormat::csv : RecordingFormat::raw_f64;
}

namespace {

json metadata(const Recording& rec) {
  return {{"patient_id", rec.patient_id},
          {"channels", rec.channels},
          {"sample_rate", rec.sample_rate},
          {"n_samples", rec.n_samples()},
          {"start_time", rec.start_time}};
}

Recording load_raw(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Container c = decode_container("SZR1", bytes);
  Recording rec;
  Index n = 0;
  try {
    rec.patient_id = c.header.at("patient_id").get<std::string>();
    rec.channels = c.header.at("channels").get<std::vector<std::string>>();
    rec.sample_rate = c.header.at("sample_rate").get<int>();
    rec.start_time = c.header.at("start_time").get<double>();
    n = c.header.at("n_samples").get<Index>();
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": byte offset 12: malformed recording header: " + e.what());
  }
  if (rec.sample_rate <= 0) throw ParseError(path.string() + ": byte offset 12: sample_rate must be positive");
  const auto n_ch = Index(rec.channels.size());
  if (n < 0 || Index(c.payload.size()) != n_ch * n) {
    const std::size_t expect_end = c.payload_offset + std::size_t(std::max<Index>(n_ch * n, 0)) * sizeof(double);
    throw ParseError(path.string() + ": byte offset " + std::to_string(std::min(expect_end, bytes.size())) +
                     ": payload holds " + std::to_string(c.payload.size()) + " samples, header declares " +
                     std::to_string(n_ch) + " x " + std::to_string(n));
  }
  for (std::size_t i = 0; i < c.payload.size(); ++i) {
    if (!std::isfinite(c.payload[i])) {
      throw ParseError(path.string() + ": byte offset " + std::to_string(c.payload_offset + i * sizeof(double)) +
                       ": non-finite sample (channel " + std::to_string(Index(i) / n) + ", index " +
                       std::to_string(Index(i) % n) + ")");
    }
  }
  rec.samples = Eigen::Map<const SampleMatrix>(c.payload.data(), n_ch, n);
  try {
    rec.validate();
  } catch (const DataError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return rec;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

Recording load_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::string_view rest(text);
  auto next_line = [&rest]() {
    const auto pos = rest.find('\n');
    std::string_view line = rest.substr(0, pos);
    rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
    return trim(line);
  };
  Recording rec;
  rec.patient_id = path.stem().string();
  std::string_view line = next_line();
  if (!line.empty() && line.front() == '#') {
    try {
      const json meta = json::parse(line.substr(1));
      rec.patient_id = meta.value("patient_id", rec.patient_id);
      rec.sample_rate = meta.value("sample_rate", rec.sample_rate);
      rec.start_time = meta.value("start_time", rec.start_time);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": row 0: malformed metadata comment: " + e.what());
    }
    line = next_line();
  }
  if (line.empty()) throw ParseError(path.string() + ": missing channel header row");
  for (auto name : split(line, ',')) rec.channels.emplace_back(trim(name));
  const auto n_ch = Index(rec.channels.size());

  std::vector<double> values;
  Index row = 0;
  while (!rest.empty()) {
    line = next_line();
    if (line.empty()) continue;
    ++row;
    const auto cells = split(line, ',');
    if (Index(cells.size()) != n_ch) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + ": expected " + std::to_string(n_ch) +
                       " columns, found " + std::to_string(cells.size()));
    }
    for (Index col = 0; col < n_ch; ++col) {
      const auto cell = trim(cells[std::size_t(col)]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError(path.string() + ": row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                         " (" + rec.channels[std::size_t(col)] + "): invalid sample '" + std::string(cell) + "'");
      }
      values.push_back(v);
    }
  }
  // values are time-major; samples are channel rows
  rec.samples = Eigen::Map<const RowMatrix<double>>(values.data(), row, n_ch).transpose();
  try {
    rec.validate();
  } catch (const DataError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return rec;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

Recording load_recording(const std::filesystem::path& path, RecordingFormat format) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("missing recording '" + path.string() + "'");
  return format == RecordingFormat::csv ? load_csv(path) : load_raw(path);
}

void save_recording(const std::filesystem::path& path, const Recording& rec, RecordingFormat format) {
  rec.validate();
  if (format == RecordingFormat::raw_f64) {
    write_file(path, encode_container("SZR1", metadata(rec),
                                      std::span<const double>(rec.samples.data(), std::size_t(rec.samples.size()))));
    return;
  }
  json meta = metadata(rec);
  meta.erase("channels");
  meta.erase("n_samples");
  std::string out = "# " + meta.dump() + "\n";
  for (std::size_t c = 0; c < rec.channels.size(); ++c) {
    if (c) out += ',';
    out += rec.channels[c];
  }
  out += '\n';
  for (Index t = 0; t < rec.n_samples(); ++t) {
    for (Index c = 0; c < rec.n_channels(); ++c) {
      if (c) out += ',';
      append_double(out, rec.samples(c, t));
    }
    out += '\n';
  }
  write_file(path, out);
}

std::filesystem::path annotation_path(const std::filesystem::path& recording_path) {
  auto p = recording_path;
  p.replace_extension(".ann.json");
  return p;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("missing annotations '" + path.string() + "'");
  AnnotationSet ann;
  try {
    const json doc = json::parse(read_file(path));
    for (const auto& s : doc) {
      ann.seizures.push_back({s.at("onset_s").get<double>(), s.at("offset_s").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": malformed annotations: " + e.what());
  }
  try {
    ann.validate();
  } catch (const DataError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return ann;
}

void save_annotations(const std::filesystem::path& path, const AnnotationSet& ann) {
  ann.validate();
  json doc = json::array();
  for (const auto& s : ann.seizures) doc.push_back({{"onset_s", s.onset_s}, {"offset_s", s.offset_s}});
  write_file(path, doc.dump(2) + "\n");
}

Recording select_channels(const Recording& rec, std::span<const std::string> wanted) {
  std::vector<Index> rows;
  std::vector<std::string> missing;
  for (const auto& name : wanted) {
    const auto it = std::find(rec.channels.begin(), rec.channels.end(), name);
    if (it == rec.channels.end()) {
      missing.push_back(name);
    } else {
      rows.push_back(Index(it - rec.channels.begin()));
    }
  }
  if (!missing.empty()) {
    std::string msg = "recording '" + rec.patient_id + "' lacks channels:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  Recording out;
  out.patient_id = rec.patient_id;
  out.channels.assign(wanted.begin(), wanted.end());
  out.sample_rate = rec.sample_rate;
  out.start_time = rec.start_time;
  out.samples.resize(Index(rows.size()), rec.n_samples());
  for (std::size_t i = 0; i < rows.size(); ++i) out.samples.row(Index(i)) = rec.samples.row(rows[i]);
  out.validate();
  return out;
}

void SyntheticProfile::validate() const {
  if (line_freq != 50 && line_freq != 60) throw ArgumentError("line-noise frequency must be 50 or 60 Hz");
  if (!(preictal.onset_lead_s > 0)) throw ArgumentError("preictal onset lead must be positive");
  if (!(preictal.band_low_hz > 0 && preictal.band_low_hz <= preictal.band_high_hz)) {
    throw ArgumentError("preictal band must satisfy 0 < low <= high");
  }
  if (spectral_slope < 0 || spectral_slope > 2) throw ArgumentError("spectral slope must lie in [0, 2]");
}

double SyntheticProfile::amplitude_of(Index channel) const {
  if (channel_amplitude.empty()) return amplitude;
  return channel_amplitude[std::size_t(channel) % channel_amplitude.size()];
}

namespace {

// Fractional-integration FIR approximating a 1/f^beta power spectrum (Kasdin 1995), normalized to
// unit white-noise gain.
std::vector<double> colored_noise_filter(double beta, std::size_t taps) {
  std::vector<double> h(taps);
  h[0] = 1.0;
  for (std::size_t k = 1; k < taps; ++k) h[k] = h[k - 1] * (double(k) - 1.0 + beta / 2.0) / double(k);
  double norm = 0.0;
  for (double v : h) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : h) v /= norm;
  return h;
}

}  // namespace

SyntheticRecording generate_synthetic(const SyntheticProfile& profile, double duration_s, int n_channels,
                                      std::span<const SeizureInterval> seizures, double start_time,
                                      std::string patient_id, int sample_rate) {
  profile.validate();
  if (n_channels < 1) throw ArgumentError("synthetic recording needs at least one channel");
  if (!(duration_s > 0) || sample_rate <= 0) throw ArgumentError("duration and sample rate must be positive");
  AnnotationSet ann{std::vector<SeizureInterval>(seizures.begin(), seizures.end())};
  ann.validate();
  for (const auto& s : ann.seizures) {
    if (s.onset_s < 0 || s.offset_s > duration_s) {
      throw ArgumentError("seizure [" + std::to_string(s.onset_s) + ", " + std::to_string(s.offset_s) +
                          ") lies outside the " + std::to_string(duration_s) + " s recording");
    }
  }

  const auto n = Index(std::llround(duration_s * sample_rate));
  const double fs = sample_rate;
  const double two_pi = 2.0 * std::numbers::pi;
  const auto filter = colored_noise_filter(profile.spectral_slope, 64);
  const auto& sig = profile.preictal;

  std::vector<double> band;
  for (double f = sig.band_low_hz; f <= sig.band_high_hz + 1e-9; f += 0.5) band.push_back(f);
  const double component_scale = std::sqrt(2.0 / double(band.size()));

  Recording rec;
  rec.patient_id = std::move(patient_id);
  rec.sample_rate = sample_rate;
  rec.start_time = start_time;
  rec.samples.setZero(n_channels, n);
  for (int c = 0; c < n_channels; ++c) rec.channels.push_back("CH" + std::to_string(c + 1));

  for (int c = 0; c < n_channels; ++c) {
    Rng rng(derive_seed(profile.seed, std::uint64_t(c)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, two_pi);
    const double amp = profile.amplitude_of(c);
    auto row = rec.samples.row(c);

    if (amp != 0.0) {
      std::vector<double> white(std::size_t(n) + filter.size());
      for (double& w : white) w = normal(rng);
      for (Index t = 0; t < n; ++t) {
        double acc = 0.0;
        const std::size_t base = std::size_t(t) + filter.size() - 1;
        for (std::size_t k = 0; k < filter.size(); ++k) acc += filter[k] * white[base - k];
        row[t] = amp * acc;
      }
    }

    const double line_phase = phase(rng);
    if (profile.line_amplitude != 0.0) {
      for (Index t = 0; t < n; ++t) {
        row[t] += profile.line_amplitude * std::sin(two_pi * profile.line_freq * double(t) / fs + line_phase);
      }
    }

    for (const auto& s : ann.seizures) {
      const auto begin = std::max<Index>(0, Index(std::llround((s.onset_s - sig.onset_lead_s) * fs)));
      const auto end = std::min<Index>(n, Index(std::llround(s.onset_s * fs)));
      const double a = sig.gain * (amp != 0.0 ? amp : 1.0) * component_scale;
      for (double f : band) {
        const double ph = phase(rng);
        const double w = two_pi * f / fs;
        for (Index t = begin; t < end; ++t) row[t] += a * std::sin(w * double(t) + ph);
      }
    }
  }
  return {std::move(rec), std::move(ann)};
}

}  // namespace szgan
