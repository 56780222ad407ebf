#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "imo/errors.hpp"
#include "imo/io.hpp"

using namespace imo;
using namespace imo::cli;
namespace fs = std::filesystem;

namespace {

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "imo_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// One synthetic corpus shared by every case in this file.
const fs::path& corpus() {
  static const fs::path dir = [] {
    const fs::path d = work_dir("corpus");
    RunConfig c;
    c.out = d;
    cmd_synth(c);
    return d;
  }();
  return dir;
}

RunConfig attribute_config(const std::string& input, const std::string& method, const std::string& out) {
  RunConfig c;
  c.input = corpus() / input;
  c.dataset = corpus() / "dataset.txt";
  c.method = method;
  c.out = work_dir(out);
  return c;
}

int run_args(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "imo-attr");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("synth writes the dataset, model and labelled anomalies") {
  const fs::path& d = corpus();
  for (const char* name : {"dataset.txt", "model.json", "synth_config.json", "clean.txt", "population.txt",
                           "anomaly_double_peak.txt", "anomaly_calibration.txt", "manifest.json"}) {
    CHECK(fs::exists(d / name));
  }
  CHECK(load_dataset(d / "dataset.txt").size() == 100);
  CHECK(load_spectrum(d / "clean.txt").labels.empty());

  const Scenario s = build_scenario(SynthConfig::defaults(), 100, 42, kTestRedshift);
  const SpectrumFile dp = load_spectrum(d / "anomaly_double_peak.txt");
  REQUIRE(dp.labels.size() == 1);
  CHECK(dp.labels[0] == s.double_peak.label);
  CHECK(dp.spectrum.flux == s.double_peak.spectrum.flux);
  const SpectrumFile cal = load_spectrum(d / "anomaly_calibration.txt");
  REQUIRE(cal.labels.size() == 1);
  CHECK(cal.labels[0] == s.calibration.label);

  const auto manifest = load_json(d / "manifest.json");
  CHECK(manifest["command"] == "synth");
  CHECK(manifest["labels"]["anomaly_double_peak.txt"]["peak_pixels"] ==
        nlohmann::json(s.double_peak.label.peak_pixels));
  for (const auto& o : manifest["outputs"]) {
    CHECK(o["sha256"] == sha256_file(d / o["path"].get<std::string>()));
  }

  SUBCASE("same seed, same bytes") {
    RunConfig c;
    c.out = work_dir("synth_again");
    cmd_synth(c);
    for (const char* name : {"dataset.txt", "model.json", "anomaly_double_peak.txt", "manifest.json"}) {
      CHECK(slurp(c.out / name) == slurp(d / name));
    }
    c.out = work_dir("synth_other");
    c.seed = 43;
    c.count = 10;
    cmd_synth(c);
    CHECK(load_dataset(c.out / "dataset.txt").size() == 10);
    CHECK(slurp(c.out / "anomaly_double_peak.txt") != slurp(d / "anomaly_double_peak.txt"));
  }
}

TEST_CASE("attribute: imo on the test spectra") {
  const auto dp = cmd_attribute(attribute_config("anomaly_double_peak.txt", "imo", "imo_dp"));
  REQUIRE(dp.noise_floor);
  REQUIRE(dp.argmax_in_label);
  CHECK(*dp.argmax_in_label);
  CHECK(dp.max_abs > *dp.noise_floor);
  CHECK(fs::exists(dp.result_path));
  CHECK(fs::exists(dp.plot_path));

  const ResultFile r = load_result(dp.result_path);
  CHECK(r.method == "imo");
  CHECK(r.k() == 4);
  CHECK(r.m == 8);
  CHECK(r.per_baseline.size() == 4);

  const auto null = cmd_attribute(attribute_config("population.txt", "imo", "imo_null"));
  REQUIRE(null.noise_floor);
  CHECK(null.max_abs < *null.noise_floor);
  CHECK_FALSE(null.argmax_in_label.has_value());

  const auto cal = cmd_attribute(attribute_config("anomaly_calibration.txt", "imo", "imo_cal"));
  CHECK(cal.max_abs > *cal.noise_floor);
}

TEST_CASE("attribute: every method writes a result") {
  for (const auto& method : kMethods) {
    CAPTURE(method);
    const auto s = cmd_attribute(attribute_config("anomaly_double_peak.txt", method, "each_" + method));
    const ResultFile r = load_result(s.result_path);
    CHECK(r.method == method);
    CHECK(r.n == 512);
    CHECK(r.combined.allFinite());
    CHECK(r.m == (method == "saliency" ? 0u : 8u));
    CHECK(fs::exists(s.plot_path));
  }
}

TEST_CASE("attribute: occlusion defaults to a 64-pixel window") {
  const auto s = cmd_attribute(attribute_config("anomaly_double_peak.txt", "occlusion", "occ"));
  const ResultFile r = load_result(s.result_path);
  CHECK(r.windows == std::vector<std::size_t>{64});
  const AnomalyLabel label = load_spectrum(corpus() / "anomaly_double_peak.txt").labels.at(0);
  bool flagged = false;
  for (Eigen::Index i = 0; i < 512; ++i) {
    flagged = flagged || (std::abs(r.combined[i]) == s.max_abs && label.covers(static_cast<std::size_t>(i)));
  }
  CHECK(flagged);
  for (Eigen::Index start = 0; start < 512; start += 64) {
    for (Eigen::Index i = start; i < start + 64; ++i) CHECK(r.combined[i] == r.combined[start]);
  }
}

TEST_CASE("attribute: flag validation") {
  RunConfig c = attribute_config("clean.txt", "saliency", "flags");
  c.windows_set = true;
  CHECK_THROWS_AS(cmd_attribute(c), UsageError);
  c = attribute_config("clean.txt", "fa", "flags");
  c.steps_set = true;
  CHECK_THROWS_AS(cmd_attribute(c), UsageError);
  c = attribute_config("clean.txt", "occlusion", "flags");
  c.windows = {4, 8};
  c.windows_set = true;
  CHECK_THROWS_AS(cmd_attribute(c), UsageError);
  c = attribute_config("clean.txt", "lime", "flags");
  CHECK_THROWS_AS(cmd_attribute(c), UsageError);
}

TEST_CASE("exit codes") {
  const std::string in = (corpus() / "clean.txt").string();
  const std::string ds = (corpus() / "dataset.txt").string();
  const std::string out = work_dir("codes").string();
  std::string err;

  CHECK(run_args({"attribute", "--input", in, "--dataset", ds, "--out", out, "--method", "saliency"}) == kOk);
  CHECK(run_args({"attribute", "--input", in, "--dataset", ds, "--out", out, "--method", "saliency", "--windows",
                  "1,4"},
                 &err) == kUsage);
  CHECK(err.find("--windows") != std::string::npos);
  CHECK(run_args({"attribute", "--input", in, "--dataset", ds, "--out", out, "--stride", "sideways"}) == kUsage);
  CHECK(run_args({"attribute", "--input", in}) == kUsage);
  CHECK(run_args({}) == kUsage);
  CHECK(run_args({"attribute", "--input", in, "--dataset", ds, "--out", out, "--windows", "16,4"}) == kInput);

  const fs::path broken = fs::path(out) / "broken.txt";
  std::ofstream(broken) << "format_version 1\nkind spectrum\nn 3\n";
  CHECK(run_args({"attribute", "--input", broken.string(), "--dataset", ds, "--out", out}) == kFormat);
}

TEST_CASE("compare") {
  RunConfig c = attribute_config("anomaly_double_peak.txt", "imo", "compare_a");
  const auto a = cmd_compare(c);
  CHECK(a.results.size() == 6);
  CHECK(load_result(c.out / "eg.result.txt").source_ids == load_result(c.out / "imo.result.txt").source_ids);
  CHECK(load_result(c.out / "imo.result.txt").source_ids == a.source_ids);

  std::istringstream csv(slurp(a.csv));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "saliency,ig,eg,fa,occlusion,imo,imo_w1,imo_w4,imo_w16,imo_w64");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line); ++rows) {
    CHECK(std::count(line.begin(), line.end(), ',') == 9);
  }
  CHECK(rows == 512);

  RunConfig again = c;
  again.out = work_dir("compare_b");
  const auto b = cmd_compare(again);
  CHECK(slurp(b.csv) == slurp(a.csv));
  for (std::size_t i = 0; i < a.results.size(); ++i) CHECK(slurp(b.results[i]) == slurp(a.results[i]));
  CHECK(slurp(b.plot) == slurp(a.plot));
}
