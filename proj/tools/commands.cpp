#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include "imo/errors.hpp"
#include "imo/synth.hpp"
#include "imo/toy_model.hpp"
#include "svg_plot.hpp"

namespace imo::cli {
namespace fs = std::filesystem;
namespace {

constexpr const char* kBaselineGray = "#b0b0b0";
constexpr const char* kMethodBlue = "#1f5fbf";
constexpr const char* kImoRed = "#d62728";
const std::vector<std::string> kWindowColors{"#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#e377c2"};

std::vector<double> to_std(const Eigen::Ref<const Vector>& v) { return {v.data(), v.data() + v.size()}; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

fs::path model_path(const RunConfig& config) {
  if (!config.model.empty()) return config.model;
  return config.dataset.parent_path() / "model.json";
}

void write_manifest(const fs::path& out_dir, const std::string& command, const nlohmann::json& parameters,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                    nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["command"] = command;
  manifest["parameters"] = parameters;
  nlohmann::json in = nlohmann::json::array();
  for (const auto& p : inputs) in.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  manifest["inputs"] = in;
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : outputs) out.push_back({{"path", p.filename().string()}, {"sha256", sha256_file(p)}});
  manifest["outputs"] = out;
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
  save_json(out_dir / "manifest.json", manifest);
}

nlohmann::json label_json(const AnomalyLabel& label) {
  nlohmann::json ranges = nlohmann::json::array();
  for (const auto& r : label.affected_pixels) ranges.push_back({r.begin, r.end});
  return {{"kind", to_string(label.kind)},
          {"affected_pixels", ranges},
          {"peak_pixels", label.peak_pixels},
          {"parameters", label.parameters}};
}

// Everything one attribution run needs, loaded once and shared by all methods.
struct Session {
  SpectrumFile input;
  std::vector<Spectrum> dataset;
  std::unique_ptr<ToyModel> model;
  BaselineEnsemble ensemble;
  fs::path model_file;
};

Session open_session(const RunConfig& config) {
  if (config.input.empty()) throw UsageError("--input is required");
  if (config.dataset.empty()) throw UsageError("--dataset is required");
  if (config.baselines < 1) throw UsageError("--baselines must be >= 1");
  Session s;
  s.input = load_spectrum(config.input);
  s.dataset = load_dataset(config.dataset);
  s.model_file = model_path(config);
  s.model = std::make_unique<ToyModel>(toy_model_spec_from_json(load_json(s.model_file)), s.input.spectrum.redshift);
  if (s.input.spectrum.size() != s.model->input_size()) {
    throw InputError("input spectrum length differs from the model grid");
  }
  s.ensemble = sample_baselines(s.dataset, config.baselines, *s.model, s.input.spectrum.redshift, config.seed);
  return s;
}

bool uses_windows(const std::string& method) { return method == "occlusion" || method == "imo"; }
bool uses_steps(const std::string& method) { return method == "ig" || method == "eg"; }
bool uses_baselines(const std::string& method) { return method != "saliency"; }

void check_method_flags(const RunConfig& config) {
  const auto& m = config.method;
  if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
    throw UsageError("unknown method '" + m + "'");
  }
  if (config.windows_set && !uses_windows(m)) throw UsageError("--windows does not apply to method " + m);
  if (config.stride_set && !uses_windows(m)) throw UsageError("--stride does not apply to method " + m);
  if (config.steps_set && !uses_steps(m)) throw UsageError("--steps does not apply to method " + m);
  if (config.baselines_set && !uses_baselines(m)) throw UsageError("--baselines does not apply to method " + m);
  if (m == "occlusion" && config.windows_set && config.windows.size() != 1) {
    throw UsageError("occlusion takes exactly one window size");
  }
  if (uses_steps(m) && config.steps < 2) throw UsageError("--steps must be >= 2");
}

struct MethodOutcome {
  ResultFile result;
  AttributionStack stack;  // IMO only
};

MethodOutcome run_method(const std::string& method, const RunConfig& config, const Session& s,
                         std::size_t occlusion_window) {
  const Spectrum& x = s.input.spectrum;
  const std::size_t n = x.size();
  const auto cols = static_cast<Eigen::Index>(n);

  MethodOutcome out;
  ResultFile& r = out.result;
  r.method = method;
  r.n = n;
  r.stride = config.stride;
  r.seed = config.seed;
  r.model_fingerprint = s.model->fingerprint();
  r.input_path = config.input.string();
  r.dataset_path = config.dataset.string();
  r.per_window_mean = Matrix(0, cols);
  r.per_window_var = Matrix(0, cols);
  if (uses_baselines(method)) {
    r.m = s.ensemble.size();
    r.source_ids = s.ensemble.source_ids;
  }
  if (uses_steps(method)) r.steps = config.steps;

  if (method == "saliency") {
    r.combined = saliency(*s.model, x.flux);
  } else if (method == "ig") {
    r.combined = integrated_gradients(*s.model, x.flux, s.ensemble.mean_reconstruction(), config.steps);
  } else if (method == "eg") {
    r.combined = expected_gradients(*s.model, x.flux, s.ensemble, config.steps);
  } else if (method == "fa") {
    r.combined = feature_ablation(*s.model, x.flux, s.ensemble.mean_reconstruction());
  } else if (method == "occlusion") {
    r.windows = {occlusion_window};
    r.combined = occlusion(*s.model, x.flux, s.ensemble.mean_reconstruction(), occlusion_window,
                           stride_for(config.stride, occlusion_window));
    r.per_window_mean = r.combined.transpose();
    r.per_window_var = Matrix::Zero(1, cols);
  } else {
    const WindowSet windows(config.windows, n);
    ImoOptions options;
    options.stride = config.stride;
    options.keep_per_baseline = true;
    options.threads = config.threads;
    out.stack = inverse_multiscale_occlusion(*s.model, x, s.ensemble, windows, options);
    r.windows = windows.sizes();
    r.per_window_mean = out.stack.per_window_mean;
    r.per_window_var = out.stack.per_window_var;
    r.per_baseline = out.stack.per_baseline;
    r.combined = out.stack.combined;
  }
  return out;
}

plot::Panel spectrum_panel(const Session& s) {
  plot::Panel panel;
  panel.title = "input spectrum (z = " + format_double(s.input.spectrum.redshift).substr(0, 6) + ") and baselines";
  const auto x = to_std(s.input.spectrum.wavelengths);
  for (const auto& b : s.ensemble.reconstructions) panel.series.push_back({x, to_std(b), kBaselineGray, 0.8, 0.7});
  panel.series.push_back({x, to_std(s.input.spectrum.flux), "black", 1.0, 1.0});
  return panel;
}

plot::Panel window_panel(const Session& s, const AttributionStack& stack, std::size_t k, std::size_t window) {
  plot::Panel panel;
  panel.title = "IMO W=" + std::to_string(window);
  panel.zero_line = true;
  const auto x = to_std(s.input.spectrum.wavelengths);
  if (k < stack.per_baseline.size()) {
    const Matrix& pb = stack.per_baseline[k];
    for (Eigen::Index j = 0; j < pb.rows(); ++j) {
      panel.series.push_back({x, to_std(pb.row(j).transpose()), kBaselineGray, 0.6, 0.6});
    }
  }
  panel.series.push_back({x, to_std(stack.per_window_mean.row(static_cast<Eigen::Index>(k)).transpose()),
                          kWindowColors[k % kWindowColors.size()], 1.2, 1.0});
  return panel;
}

plot::Panel attribution_panel(const Session& s, const std::string& title, const Vector& values, const char* color) {
  plot::Panel panel;
  panel.title = title;
  panel.zero_line = true;
  panel.series.push_back({to_std(s.input.spectrum.wavelengths), to_std(values), color, 1.2, 1.0});
  return panel;
}

std::string method_title(const std::string& method, std::size_t occlusion_window) {
  if (method == "saliency") return "instantaneous gradients";
  if (method == "ig") return "integrated gradients";
  if (method == "eg") return "expected gradients";
  if (method == "fa") return "feature ablation";
  if (method == "occlusion") return "occlusion W=" + std::to_string(occlusion_window);
  return "IMO (combined)";
}

constexpr double kNoiseFloorSigmas = 3.0;

// kNoiseFloorSigmas times the largest per-pixel baseline spread of the
// inverse-variance combination.
std::optional<double> imo_noise_floor(const AttributionStack& stack) {
  if (stack.per_window_var.size() == 0) return std::nullopt;
  double floor = 0.0;
  for (Eigen::Index i = 0; i < stack.per_window_var.cols(); ++i) {
    const auto v = stack.per_window_var.col(i);
    const double eps = 1e-12 * (v.maxCoeff() + 1.0);
    const double precision = (1.0 / v.array().max(eps)).sum();
    floor = std::max(floor, std::sqrt(1.0 / precision));
  }
  return kNoiseFloorSigmas * floor;
}

nlohmann::json parameters_json(const RunConfig& config) {
  return {{"method", config.method},
          {"windows", config.windows},
          {"stride", to_string(config.stride)},
          {"baselines", config.baselines},
          {"steps", config.steps},
          {"seed", config.seed},
          {"input", config.input.string()},
          {"dataset", config.dataset.string()},
          {"model", model_path(config).string()}};
}

}  // namespace

SynthOutputs cmd_synth(const RunConfig& config) {
  SynthConfig synth = config.synth_config.empty() ? SynthConfig::defaults()
                                                  : synth_config_from_json(load_json(config.synth_config));
  if (config.count < 1) throw UsageError("--count must be >= 1");
  ensure_dir(config.out);

  const Scenario scenario = build_scenario(synth, config.count, config.seed, kTestRedshift);

  SynthOutputs out;
  out.dataset = config.out / "dataset.txt";
  save_dataset(out.dataset, scenario.dataset);
  out.model = config.out / "model.json";
  save_json(out.model, to_json(scenario.model));
  save_json(config.out / "synth_config.json", to_json(scenario.config));
  save_spectrum(config.out / "clean.txt", {scenario.clean, {}});
  save_spectrum(config.out / "population.txt", {scenario.population, {}});

  const Injection& double_peak = scenario.double_peak;
  const Injection& calibration = scenario.calibration;
  out.anomalies = {config.out / "anomaly_double_peak.txt", config.out / "anomaly_calibration.txt"};
  save_spectrum(out.anomalies[0], {double_peak.spectrum, {double_peak.label}});
  save_spectrum(out.anomalies[1], {calibration.spectrum, {calibration.label}});
  out.labels = {double_peak.label, calibration.label};

  std::vector<fs::path> outputs{out.dataset, out.model, config.out / "synth_config.json", config.out / "clean.txt",
                                config.out / "population.txt", out.anomalies[0], out.anomalies[1]};
  std::vector<fs::path> inputs;
  if (!config.synth_config.empty()) inputs.push_back(config.synth_config);
  nlohmann::json labels = {{"anomaly_double_peak.txt", label_json(double_peak.label)},
                           {"anomaly_calibration.txt", label_json(calibration.label)}};
  write_manifest(config.out, "synth",
                 {{"seed", config.seed}, {"count", config.count}, {"z_range", {kDatasetRedshiftRange.first, kDatasetRedshiftRange.second}},
                  {"test_redshift", kTestRedshift}},
                 inputs, outputs, {{"labels", labels}});
  return out;
}

AttributeSummary cmd_attribute(const RunConfig& config) {
  check_method_flags(config);
  ensure_dir(config.out);
  const Session s = open_session(config);
  const std::size_t occlusion_window = config.windows_set ? config.windows.front() : 64;
  const MethodOutcome outcome = run_method(config.method, config, s, occlusion_window);

  AttributeSummary summary;
  summary.method = config.method;
  const Vector& values = outcome.result.combined;
  // Sign conventions differ between methods, so the summary points at the
  // largest magnitude.
  Eigen::Index argmax = 0;
  summary.max_abs = values.cwiseAbs().maxCoeff(&argmax);
  summary.max_value = values.maxCoeff();
  summary.argmax_pixel = static_cast<std::size_t>(argmax);
  summary.argmax_wavelength = s.input.spectrum.wavelengths[argmax];
  if (config.method == "imo") summary.noise_floor = imo_noise_floor(outcome.stack);
  if (!s.input.labels.empty()) {
    summary.argmax_in_label = std::any_of(s.input.labels.begin(), s.input.labels.end(),
                                          [&](const AnomalyLabel& l) { return l.covers(summary.argmax_pixel); });
  }

  summary.result_path = config.out / (config.method + ".result.txt");
  save_result(summary.result_path, outcome.result);

  plot::Figure figure("attribution: " + method_title(config.method, occlusion_window));
  figure.place(0, 0, spectrum_panel(s));
  int row = 1;
  if (config.method == "imo") {
    for (std::size_t k = 0; k < outcome.result.windows.size(); ++k) {
      figure.place(row++, 0, window_panel(s, outcome.stack, k, outcome.result.windows[k]));
    }
    figure.place(row, 0, attribution_panel(s, "IMO (combined)", values, kImoRed));
  } else {
    figure.place(row, 0, attribution_panel(s, method_title(config.method, occlusion_window), values, kMethodBlue));
  }
  summary.plot_path = config.out / (config.method + ".svg");
  figure.save(summary.plot_path);

  nlohmann::json sj = {{"method", summary.method},
                       {"argmax_pixel", summary.argmax_pixel},
                       {"argmax_wavelength", summary.argmax_wavelength},
                       {"max_value", summary.max_value},
                       {"max_abs", summary.max_abs}};
  if (summary.noise_floor) {
    sj["noise_floor"] = *summary.noise_floor;
    sj["above_noise_floor"] = summary.max_abs > *summary.noise_floor;
  }
  if (summary.argmax_in_label) sj["argmax_in_label"] = *summary.argmax_in_label;
  const fs::path summary_path = config.out / (config.method + ".summary.json");
  save_json(summary_path, sj);

  write_manifest(config.out, "attribute", parameters_json(config), {config.input, config.dataset, s.model_file},
                 {summary.result_path, summary.plot_path, summary_path},
                 {{"source_ids", s.ensemble.source_ids}});
  return summary;
}

CompareOutputs cmd_compare(const RunConfig& config) {
  if (config.steps < 2) throw UsageError("--steps must be >= 2");
  ensure_dir(config.out);
  const Session s = open_session(config);
  const std::size_t n = s.input.spectrum.size();
  const WindowSet windows(config.windows, n);
  const std::size_t occlusion_window = windows.sizes().back();

  CompareOutputs out;
  out.source_ids = s.ensemble.source_ids;
  std::map<std::string, MethodOutcome> outcomes;
  for (const auto& method : kMethods) {
    outcomes.emplace(method, run_method(method, config, s, occlusion_window));
    const fs::path path = config.out / (method + ".result.txt");
    save_result(path, outcomes.at(method).result);
    out.results.push_back(path);
  }
  const AttributionStack& stack = outcomes.at("imo").stack;

  out.csv = config.out / "compare.csv";
  {
    std::ofstream csv(out.csv, std::ios::binary);
    if (!csv) throw FormatError("cannot open '" + out.csv.string() + "' for writing");
    for (std::size_t c = 0; c < kMethods.size(); ++c) csv << (c ? "," : "") << kMethods[c];
    for (auto w : windows.sizes()) csv << ",imo_w" << w;
    csv << '\n';
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      for (std::size_t c = 0; c < kMethods.size(); ++c) {
        csv << (c ? "," : "") << format_double(outcomes.at(kMethods[c]).result.combined[idx]);
      }
      for (Eigen::Index k = 0; k < stack.per_window_mean.rows(); ++k) {
        csv << ',' << format_double(stack.per_window_mean(k, idx));
      }
      csv << '\n';
    }
    if (!csv) throw FormatError("failed writing '" + out.csv.string() + "'");
  }

  plot::Figure figure("comparison of attribution methods");
  figure.place(0, 0, spectrum_panel(s));
  int row = 1;
  for (const auto& method : kMethods) {
    const bool is_imo = method == "imo";
    figure.place(row++, 0, attribution_panel(s, method_title(method, occlusion_window), outcomes.at(method).result.combined,
                                             is_imo ? kImoRed : kMethodBlue));
  }
  for (std::size_t k = 0; k < windows.size(); ++k) {
    figure.place(static_cast<int>(k) + 1, 1, window_panel(s, stack, k, windows.sizes()[k]));
  }
  out.plot = config.out / "compare.svg";
  figure.save(out.plot);

  std::vector<fs::path> outputs = out.results;
  outputs.push_back(out.csv);
  outputs.push_back(out.plot);
  auto params = parameters_json(config);
  params["method"] = "all";
  params["occlusion_window"] = occlusion_window;
  write_manifest(config.out, "compare", params, {config.input, config.dataset, s.model_file}, outputs,
                 {{"source_ids", s.ensemble.source_ids}});
  return out;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature attribution for spectral outliers (inverse multiscale occlusion and baselines)"};
  app.require_subcommand(1);
  RunConfig config;
  std::string stride = "disjoint";

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset, toy model and anomalous test spectra");
  synth->add_option("--out", config.out, "Output directory")->required();
  synth->add_option("--seed", config.seed, "Random seed");
  synth->add_option("--count", config.count, "Number of dataset spectra");
  synth->add_option("--config", config.synth_config, "Synth config JSON (defaults built in)");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--input", config.input, "Spectrum file to explain")->required();
    cmd->add_option("--dataset", config.dataset, "Dataset file used for baselines")->required();
    cmd->add_option("--model", config.model, "Toy model JSON (default: model.json next to the dataset)");
    cmd->add_option("--out", config.out, "Output directory")->required();
    cmd->add_option("--seed", config.seed, "Baseline sampling seed");
    cmd->add_option("--threads", config.threads, "Worker threads for IMO");
  };

  auto* attribute = app.add_subcommand("attribute", "Run one attribution method");
  add_common(attribute);
  attribute->add_option("--method", config.method, "saliency | ig | eg | fa | occlusion | imo");
  auto* windows_opt = attribute->add_option("--windows", config.windows, "Window sizes")->delimiter(',');
  auto* stride_opt = attribute->add_option("--stride", stride, "disjoint | dense");
  auto* baselines_opt = attribute->add_option("--baselines", config.baselines, "Number of baselines M");
  auto* steps_opt = attribute->add_option("--steps", config.steps, "Integration steps for ig/eg");

  auto* compare = app.add_subcommand("compare", "Run all methods on a shared baseline ensemble");
  add_common(compare);
  compare->add_option("--windows", config.windows, "Window sizes")->delimiter(',');
  compare->add_option("--stride", stride, "disjoint | dense");
  compare->add_option("--baselines", config.baselines, "Number of baselines M");
  compare->add_option("--steps", config.steps, "Integration steps for ig/eg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    config.stride = stride_policy_from_string(stride);
  } catch (const InputError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
  config.windows_set = windows_opt->count() > 0;
  config.stride_set = stride_opt->count() > 0;
  config.steps_set = steps_opt->count() > 0;
  config.baselines_set = baselines_opt->count() > 0;

  try {
    if (synth->parsed()) {
      config.subcommand = "synth";
      const auto o = cmd_synth(config);
      out << "dataset: " << o.dataset.string() << "\nmodel: " << o.model.string() << '\n';
      for (const auto& a : o.anomalies) out << "anomaly: " << a.string() << '\n';
    } else if (attribute->parsed()) {
      config.subcommand = "attribute";
      const auto s = cmd_attribute(config);
      out << "method: " << s.method << '\n';
      out << "argmax_pixel: " << s.argmax_pixel << " (" << s.argmax_wavelength << " A)\n";
      out << "max_value: " << s.max_value << "\nmax_abs: " << s.max_abs << '\n';
      if (s.noise_floor) {
        out << "noise_floor: " << *s.noise_floor << (s.max_abs > *s.noise_floor ? " (exceeded)" : " (not exceeded)")
            << '\n';
      }
      if (s.argmax_in_label) out << "argmax_in_label: " << (*s.argmax_in_label ? "yes" : "no") << '\n';
      out << "result: " << s.result_path.string() << "\nplot: " << s.plot_path.string() << '\n';
    } else {
      config.subcommand = "compare";
      const auto o = cmd_compare(config);
      out << "csv: " << o.csv.string() << "\nplot: " << o.plot.string() << '\n';
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kFormat;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DegenerateModelError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

}  // namespace imo::cli
