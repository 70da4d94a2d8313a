#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "szgan/checkpoint.hpp"
#include "szgan/preprocess.hpp"
#include "szgan/signal_io.hpp"

using namespace szgan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("szgan_signal_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Recording small_recording(Index channels, Index samples, std::uint64_t seed) {
  Recording r;
  r.patient_id = "p1";
  r.sample_rate = 256;
  r.start_time = 1234.5;
  for (Index c = 0; c < channels; ++c) r.channels.push_back("ch" + std::to_string(c));
  r.samples.resize(channels, samples);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 30.0);
  for (Index i = 0; i < r.samples.size(); ++i) r.samples.data()[i] = normal(rng);
  return r;
}

}  // namespace

TEST_CASE("raw recording of 10 s at 256 Hz") {
  const fs::path dir = scratch("raw");
  const Recording r = small_recording(2, 2560, 1);
  save_recording(dir / "a.szr", r, RecordingFormat::raw_f64);
  const Recording back = load_recording(dir / "a.szr", RecordingFormat::raw_f64);
  CHECK(back.samples.rows() == 2);
  CHECK(back.samples.cols() == 2560);
  CHECK(back.samples == r.samples);
  CHECK(back.channels == r.channels);
  CHECK(back.start_time == r.start_time);
  CHECK(back.duration_s() == 10.0);
  CHECK(format_from_path("x.csv") == RecordingFormat::csv);
  CHECK(format_from_path("x.szr") == RecordingFormat::raw_f64);
}

TEST_CASE("csv round trip is bit-identical") {
  const fs::path dir = scratch("csv");
  const Recording r = small_recording(3, 300, 2);
  save_recording(dir / "a.csv", r, RecordingFormat::csv);
  const Recording back = load_recording(dir / "a.csv", RecordingFormat::csv);
  CHECK(back.samples == r.samples);
  CHECK(back.channels == r.channels);
  CHECK(back.sample_rate == 256);
}

TEST_CASE("malformed files are parse errors with a location") {
  const fs::path dir = scratch("bad");
  {
    std::ofstream f(dir / "nan.csv");
    f << "a,b\n1,2\n3,nan\n";
  }
  try {
    load_recording(dir / "nan.csv", RecordingFormat::csv);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
  {
    std::ofstream f(dir / "short.csv");
    f << "a,b\n1,2\n3\n";
  }
  CHECK_THROWS_AS(load_recording(dir / "short.csv", RecordingFormat::csv), ParseError);

  const Recording r = small_recording(1, 10, 3);
  save_recording(dir / "t.szr", r, RecordingFormat::raw_f64);
  std::string bytes = read_file(dir / "t.szr");
  write_file(dir / "t.szr", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_recording(dir / "t.szr", RecordingFormat::raw_f64), ParseError);
  CHECK_THROWS_AS(load_recording(dir / "missing.szr", RecordingFormat::raw_f64), MissingArtifactError);
}

TEST_CASE("annotations") {
  const fs::path dir = scratch("ann");
  AnnotationSet a{{{10, 20}, {20, 35}}};
  CHECK_NOTHROW(a.validate());
  save_annotations(dir / "x.ann.json", a);
  CHECK(load_annotations(dir / "x.ann.json") == a);
  CHECK(annotation_path("/d/rec01.szr") == fs::path("/d/rec01.ann.json"));
  CHECK_THROWS_AS((AnnotationSet{{{10, 30}, {20, 40}}}).validate(), DataError);
  CHECK_THROWS_AS((AnnotationSet{{{10, 5}}}).validate(), DataError);
  CHECK(a.shifted(100).seizures[0].onset_s == 110);
}

TEST_CASE("select_channels") {
  Recording r = small_recording(22, 16, 4);
  std::vector<std::string> wanted;
  for (int i = 0; i < 16; ++i) wanted.push_back("ch" + std::to_string(i * 22 / 16));
  CHECK(select_channels(r, wanted).n_channels() == 16);

  const Recording same = select_channels(r, r.channels);
  CHECK(same.samples == r.samples);

  const Recording three = small_recording(3, 5, 5);
  const std::vector<std::string> rev{"ch2", "ch1", "ch0"};
  const Recording flipped = select_channels(three, rev);
  for (Index c = 0; c < 3; ++c) CHECK(flipped.samples(c, 0) == three.samples(2 - c, 0));

  const std::vector<std::string> bad{"ch0", "T7", "P8"};
  try {
    select_channels(three, bad);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("T7") != std::string::npos);
    CHECK(msg.find("P8") != std::string::npos);
  }
}

TEST_CASE("synthetic generator") {
  SyntheticProfile profile;
  SUBCASE("60 Hz line noise dominates its neighbours") {
    profile.line_amplitude = 40.0;
    const auto s = generate_synthetic(profile, 28.0, 1, {});
    const std::vector<double> x(s.recording.samples.data(), s.recording.samples.data() + s.recording.n_samples());
    const Eigen::MatrixXd mag = stft_magnitude(x, StftConfig{});
    const double line = mag.col(60).mean();
    CHECK(line > 10.0 * mag.col(55).mean());
    CHECK(line > 10.0 * mag.col(65).mean());
  }
  SUBCASE("silent profile gives all-zero samples") {
    profile.amplitude = 0.0;
    profile.line_amplitude = 0.0;
    const auto s = generate_synthetic(profile, 10.0, 3, {});
    CHECK(s.recording.samples.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("seizures are kept in order") {
    const std::vector<SeizureInterval> sz{{3000, 3060}, {3600, 3660}};
    const auto s = generate_synthetic(profile, 4000.0, 2, sz);
    REQUIRE(s.annotations.size() == 2);
    CHECK(s.annotations.seizures[0].onset_s == 3000);
    CHECK(s.annotations.seizures[1].onset_s == 3600);
  }
  SUBCASE("seeded and deterministic") {
    const auto a = generate_synthetic(profile, 30.0, 2, {});
    const auto b = generate_synthetic(profile, 30.0, 2, {});
    CHECK(a.recording.samples == b.recording.samples);
    profile.seed = 2;
    const auto c = generate_synthetic(profile, 30.0, 2, {});
    CHECK_FALSE(a.recording.samples == c.recording.samples);
  }
  SUBCASE("invalid profiles") {
    profile.line_freq = 55;
    CHECK_THROWS_AS(profile.validate(), ArgumentError);
  }
}
