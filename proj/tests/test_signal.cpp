#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "emgnet/errors.hpp"
#include "emgnet/rng.hpp"
#include "emgnet/signal.hpp"

using namespace emgnet;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("emgnet_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

Signal make_signal(Index n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  Signal s;
  s.samples.resize(n);
  for (Index i = 0; i < n; ++i) s.samples[i] = rng::gaussian(g);
  return s;
}

}  // namespace

TEST_CASE("class label mapping") {
  CHECK(class_label_from_int(0) == ClassLabel::Normal);
  CHECK(class_label_from_int(1) == ClassLabel::Myopathy);
  CHECK(class_label_from_int(2) == ClassLabel::Als);
  CHECK_THROWS_AS(class_label_from_int(3), BadLabel);
  CHECK_THROWS_AS(class_label_from_int(-1), BadLabel);
  CHECK(std::string(class_label_name(ClassLabel::Normal)) == "normal");
  CHECK(std::string(class_label_name(ClassLabel::Myopathy)) == "myopathy");
  CHECK(std::string(class_label_name(ClassLabel::Als)) == "als");
}

TEST_CASE("segmentation arithmetic") {
  Signal s = make_signal(10, 1);

  auto w = segment(s, 4, 2);
  REQUIRE(w.size() == 4);  // starts 0, 2, 4, 6
  for (std::size_t k = 0; k < w.size(); ++k) {
    CHECK(w[k].samples.size() == 4);
    CHECK(w[k].samples[0] == s.samples[static_cast<Index>(2 * k)]);
  }

  CHECK(segment(s, 10, 10).size() == 1);
  CHECK(segment(s, 3, 1).size() == 8);
  CHECK(segment(s, 4, 100).size() == 1);
  CHECK_THROWS_AS(segment(make_signal(5, 2), 6, 6), EmptySegmentation);
  CHECK_THROWS_AS(segment(s, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(segment(s, 4, 0), std::invalid_argument);
}

TEST_CASE("windows inherit the signal label") {
  Signal s = make_signal(8, 3);
  s.label = ClassLabel::Als;
  const auto w = segment(s, 4, 4);
  REQUIRE(w.size() == 2);
  CHECK(w[0].label == ClassLabel::Als);
  CHECK(w[1].label == ClassLabel::Als);

  const auto unlabeled = segment(make_signal(8, 3), 4, 4);
  CHECK_FALSE(unlabeled[0].label.has_value());
}

TEST_CASE("signal CSV round trip is bit-exact") {
  TempDir tmp;
  const auto file = tmp.path / "sig.csv";
  Signal s = make_signal(37, 4);
  save_signal(s, file, SignalFormat::Csv);
  const Signal back = load_signal(file, SignalFormat::Csv);
  REQUIRE(back.samples.size() == s.samples.size());
  for (Index i = 0; i < s.samples.size(); ++i) CHECK(back.samples[i] == s.samples[i]);
}

TEST_CASE("signal CSV accepts a headerless file and reports bad lines") {
  TempDir tmp;
  const auto file = tmp.path / "raw.csv";
  {
    std::ofstream out(file);
    out << "1.5\n-2.25\n\n3\n";
  }
  const Signal s = load_signal(file, SignalFormat::Csv);
  REQUIRE(s.samples.size() == 3);
  CHECK(s.samples[0] == 1.5);
  CHECK(s.samples[2] == 3.0);

  {
    std::ofstream out(file);
    out << "amplitude\n1.0\nnot_a_number\n";
  }
  try {
    load_signal(file, SignalFormat::Csv);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }

  {
    std::ofstream out(file);
    out << "amplitude\n";
  }
  CHECK_THROWS_AS(load_signal(file, SignalFormat::Csv), EmptyInput);
}

TEST_CASE("signal binary round trip and validation") {
  TempDir tmp;
  const auto file = tmp.path / "sig.f64";
  Signal s = make_signal(64, 5);
  save_signal(s, file, SignalFormat::F64Binary);
  CHECK(std::filesystem::file_size(file) == 64 * 8);
  const Signal back = load_signal(file, SignalFormat::F64Binary);
  for (Index i = 0; i < s.samples.size(); ++i) CHECK(back.samples[i] == s.samples[i]);

  {
    std::ofstream out(file, std::ios::binary);
    out << "12345";  // not a multiple of 8
  }
  CHECK_THROWS_AS(load_signal(file, SignalFormat::F64Binary), ParseError);

  {
    std::ofstream out(file, std::ios::binary);
  }
  CHECK_THROWS_AS(load_signal(file, SignalFormat::F64Binary), EmptyInput);

  CHECK_THROWS_AS(load_signal(tmp.path / "missing.f64", SignalFormat::F64Binary), IoError);
}

TEST_CASE("synthetic windows are deterministic and class-dependent") {
  const auto a = synth_generate(ClassLabel::Normal, 3, 42, 256);
  const auto b = synth_generate(ClassLabel::Normal, 3, 42, 256);
  const auto c = synth_generate(ClassLabel::Als, 3, 42, 256);

  REQUIRE(a.size() == 3);
  REQUIRE(a[0].samples.size() == 256);
  CHECK(a[0].label == ClassLabel::Normal);
  CHECK(c[0].label == ClassLabel::Als);

  for (std::size_t k = 0; k < 3; ++k)
    CHECK((a[k].samples - b[k].samples).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a[0].samples - c[0].samples).cwiseAbs().maxCoeff() > 0.0);
  // windows within a run differ
  CHECK((a[0].samples - a[1].samples).cwiseAbs().maxCoeff() > 0.0);
  // different seeds differ
  const auto d = synth_generate(ClassLabel::Normal, 1, 43, 256);
  CHECK((a[0].samples - d[0].samples).cwiseAbs().maxCoeff() > 0.0);

  CHECK_THROWS_AS(synth_generate(ClassLabel::Normal, 0, 1, 256), std::invalid_argument);
}

TEST_CASE("windows container round trip") {
  TempDir tmp;
  const auto file = tmp.path / "w.emgwin";
  std::vector<Window> windows = synth_generate(ClassLabel::Myopathy, 2, 7, 128);
  windows.push_back(Window{Vec::LinSpaced(128, 0.0, 1.0), std::nullopt});

  save_windows(windows, file);
  const auto back = load_windows(file);
  REQUIRE(back.size() == 3);
  CHECK(back[0].label == ClassLabel::Myopathy);
  CHECK_FALSE(back[2].label.has_value());
  for (std::size_t k = 0; k < 3; ++k)
    CHECK((back[k].samples - windows[k].samples).cwiseAbs().maxCoeff() == 0.0);

  // mixed lengths rejected at save time
  windows.push_back(Window{Vec::Zero(64), std::nullopt});
  CHECK_THROWS_AS(save_windows(windows, file), BadInput);
  CHECK_THROWS_AS(save_windows({}, file), EmptyInput);
}

TEST_CASE("windows container rejects corrupt files") {
  TempDir tmp;
  const auto file = tmp.path / "w.emgwin";
  save_windows(synth_generate(ClassLabel::Normal, 1, 9, 64), file);

  // truncate
  auto bytes = [&] {
    std::ifstream in(file, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }();
  {
    std::ofstream out(file, std::ios::binary);
    out << bytes.substr(0, bytes.size() - 5);
  }
  CHECK_THROWS_AS(load_windows(file), ModelFormatError);

  // bad magic
  {
    std::ofstream out(file, std::ios::binary);
    out << "NOTMAG" << bytes.substr(6);
  }
  CHECK_THROWS_AS(load_windows(file), ModelFormatError);

  // trailing junk
  {
    std::ofstream out(file, std::ios::binary);
    out << bytes << "x";
  }
  CHECK_THROWS_AS(load_windows(file), ModelFormatError);
}

TEST_CASE("dataset CSV round trip is bit-exact") {
  TempDir tmp;
  const auto file = tmp.path / "ds.csv";
  std::mt19937_64 g(11);
  Dataset ds;
  ds.features.resize(5, kFeatureCount);
  for (Index r = 0; r < 5; ++r)
    for (Index c = 0; c < kFeatureCount; ++c) ds.features(r, c) = rng::gaussian(g) * 1e3;
  ds.labels = {ClassLabel::Normal, ClassLabel::Als, ClassLabel::Myopathy, ClassLabel::Normal,
               ClassLabel::Als};

  save_dataset_csv(ds, file);
  const Dataset back = load_dataset_csv(file);
  REQUIRE(back.rows() == 5);
  CHECK((back.features - ds.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.labels == ds.labels);

  // header is f01..f27,label
  std::ifstream in(file);
  std::string header;
  std::getline(in, header);
  CHECK(header.substr(0, 8) == "f01,f02,");
  CHECK(header.substr(header.size() - 10) == ",f27,label");
}

TEST_CASE("dataset CSV validation") {
  TempDir tmp;
  const auto file = tmp.path / "bad.csv";

  {
    std::ofstream out(file);
    out << "wrong,header\n";
  }
  CHECK_THROWS_AS(load_dataset_csv(file), ParseError);

  {
    std::ofstream out(file);
  }
  CHECK_THROWS_AS(load_dataset_csv(file), EmptyInput);

  // right header, short row
  std::string header;
  {
    Dataset ds;
    ds.features = Mat::Zero(1, kFeatureCount);
    ds.labels = {ClassLabel::Normal};
    save_dataset_csv(ds, file);
    std::ifstream in(file);
    std::getline(in, header);
  }
  {
    std::ofstream out(file);
    out << header << "\n1,2,3\n";
  }
  try {
    load_dataset_csv(file);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  // bad label value
  {
    std::ofstream out(file);
    out << header << "\n";
    for (int c = 0; c < kFeatureCount; ++c) out << "0,";
    out << "7\n";
  }
  CHECK_THROWS_AS(load_dataset_csv(file), BadLabel);
}

TEST_CASE("dataset validation") {
  Dataset ds;
  ds.features = Mat::Zero(2, kFeatureCount);
  ds.labels = {ClassLabel::Normal, ClassLabel::Als};
  CHECK_NOTHROW(validate(ds));

  Dataset wrong_cols;
  wrong_cols.features = Mat::Zero(2, 5);
  wrong_cols.labels = {ClassLabel::Normal, ClassLabel::Als};
  CHECK_THROWS_AS(validate(wrong_cols), BadInput);

  Dataset mismatch = ds;
  mismatch.labels.pop_back();
  CHECK_THROWS_AS(validate(mismatch), BadInput);

  Dataset nonfinite = ds;
  nonfinite.features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(nonfinite), BadInput);
}

TEST_CASE("signal validation") {
  Signal ok = make_signal(4, 1);
  CHECK_NOTHROW(validate(ok));

  Signal empty;
  CHECK_THROWS_AS(validate(empty), BadInput);

  Signal bad_rate = make_signal(4, 1);
  bad_rate.sample_rate_hz = 0.0;
  CHECK_THROWS_AS(validate(bad_rate), BadInput);

  Signal inf = make_signal(4, 1);
  inf.samples[2] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate(inf), BadInput);
}
