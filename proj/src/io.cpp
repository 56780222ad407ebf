#include "imo/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "imo/errors.hpp"

namespace imo {
namespace {

// Line-oriented reader over the text formats. Keeps a 1-based line counter
// for error messages.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::size_t line() const { return line_; }

  bool next(std::string& out) {
    if (!std::getline(in_, out)) return false;
    ++line_;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

  // Reads the next line and requires it to start with `key`. Returns the rest
  // of the line after one separating space.
  std::string expect(const std::string& key, const std::string& section) {
    std::string text;
    if (!next(text)) {
      throw FormatError("unexpected end of file: missing " + section + " ('" + key + "')", line_ + 1);
    }
    if (text == key) return {};
    if (text.rfind(key + " ", 0) != 0) {
      throw FormatError("expected '" + key + "' in " + section + ", found '" + text.substr(0, 40) + "'", line_);
    }
    return text.substr(key.size() + 1);
  }

  FormatError error(const std::string& what) const { return FormatError(what, line_); }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const LineReader& reader) {
  double value = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw reader.error("invalid number '" + tok + "'");
  if (!std::isfinite(value)) throw reader.error("non-finite value '" + tok + "'");
  return value;
}

std::uint64_t parse_uint(const std::string& tok, const LineReader& reader) {
  std::uint64_t value = 0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw reader.error("invalid integer '" + tok + "'");
  return value;
}

std::size_t parse_count(const std::string& text, const LineReader& reader) {
  const auto toks = split(text);
  if (toks.size() != 1) throw reader.error("expected a single integer");
  return static_cast<std::size_t>(parse_uint(toks[0], reader));
}

Vector parse_row(const std::string& text, std::size_t n, const LineReader& reader, const std::string& what) {
  const auto toks = split(text);
  if (toks.size() != n) {
    throw reader.error(what + " has " + std::to_string(toks.size()) + " values, expected " + std::to_string(n));
  }
  Vector row(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) row[static_cast<Eigen::Index>(i)] = parse_double(toks[i], reader);
  return row;
}

void write_row(std::ostream& out, const Eigen::Ref<const Vector>& row) {
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (i > 0) out << ' ';
    out << format_double(row[i]);
  }
  out << '\n';
}

void read_version(LineReader& reader, const std::string& kind) {
  const auto version = reader.expect("format_version", "header");
  if (split(version) != std::vector<std::string>{std::to_string(kFormatVersion)}) {
    throw reader.error("unsupported format_version '" + version + "'");
  }
  const auto found = reader.expect("kind", "header");
  if (found != kind) throw reader.error("expected kind '" + kind + "', found '" + found + "'");
}

void read_end(LineReader& reader) {
  std::string text;
  if (!reader.next(text)) throw FormatError("unexpected end of file: missing 'end' marker", reader.line() + 1);
  if (text != "end") throw reader.error("expected 'end', found '" + text.substr(0, 40) + "'");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

template <typename T>
T json_get(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("config is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config field '") + key + "': " + e.what());
  }
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                       std::chars_format::general, 17);
  if (ec != std::errc()) throw NumericalError("cannot format number");
  return {buf.data(), ptr};
}

bool SpectrumFile::operator==(const SpectrumFile& other) const {
  return same(spectrum.wavelengths, other.spectrum.wavelengths) && same(spectrum.flux, other.spectrum.flux) &&
         spectrum.redshift == other.spectrum.redshift && labels == other.labels;
}

// ---------------------------------------------------------------- spectrum

void write_spectrum(std::ostream& out, const SpectrumFile& file) {
  file.spectrum.validate();
  out << "format_version " << kFormatVersion << '\n';
  out << "kind spectrum\n";
  out << "n " << file.spectrum.size() << '\n';
  out << "redshift " << format_double(file.spectrum.redshift) << '\n';
  out << "labels " << file.labels.size() << '\n';
  for (const auto& label : file.labels) {
    out << "label " << to_string(label.kind) << '\n';
    for (const auto& r : label.affected_pixels) out << "range " << r.begin << ' ' << r.end << '\n';
    for (auto p : label.peak_pixels) out << "peak " << p << '\n';
    for (const auto& [key, value] : label.parameters) out << "param " << key << ' ' << format_double(value) << '\n';
    out << "end_label\n";
  }
  out << "columns wavelength flux\n";
  for (std::size_t i = 0; i < file.spectrum.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out << format_double(file.spectrum.wavelengths[idx]) << ' ' << format_double(file.spectrum.flux[idx]) << '\n';
  }
  out << "end\n";
}

SpectrumFile read_spectrum(std::istream& in) {
  LineReader reader(in);
  read_version(reader, "spectrum");
  const std::size_t n = parse_count(reader.expect("n", "header"), reader);
  if (n == 0) throw reader.error("spectrum length must be >= 1");

  SpectrumFile file;
  const auto z_tokens = split(reader.expect("redshift", "header"));
  if (z_tokens.size() != 1) throw reader.error("redshift needs one value");
  file.spectrum.redshift = parse_double(z_tokens[0], reader);
  if (file.spectrum.redshift < 0.0) throw reader.error("redshift must be >= 0");

  const std::size_t label_count = parse_count(reader.expect("labels", "header"), reader);
  for (std::size_t l = 0; l < label_count; ++l) {
    AnomalyLabel label;
    try {
      label.kind = anomaly_kind_from_string(reader.expect("label", "labels section"));
    } catch (const InputError& e) {
      throw reader.error(e.what());
    }
    for (;;) {
      std::string text;
      if (!reader.next(text)) {
        throw FormatError("unexpected end of file: missing 'end_label' in labels section", reader.line() + 1);
      }
      if (text == "end_label") break;
      const auto toks = split(text);
      if (toks.size() == 3 && toks[0] == "range") {
        const PixelRange r{parse_uint(toks[1], reader), parse_uint(toks[2], reader)};
        if (r.end < r.begin || r.end > n) throw reader.error("label range outside [0, n)");
        label.affected_pixels.push_back(r);
      } else if (toks.size() == 2 && toks[0] == "peak") {
        const auto p = parse_uint(toks[1], reader);
        if (p >= n) throw reader.error("peak pixel outside [0, n)");
        label.peak_pixels.push_back(p);
      } else if (toks.size() == 3 && toks[0] == "param") {
        label.parameters[toks[1]] = parse_double(toks[2], reader);
      } else {
        throw reader.error("unrecognized label entry '" + text.substr(0, 40) + "'");
      }
    }
    file.labels.push_back(std::move(label));
  }

  if (reader.expect("columns", "data section") != "wavelength flux") {
    throw reader.error("expected columns 'wavelength flux'");
  }
  file.spectrum.wavelengths.resize(static_cast<Eigen::Index>(n));
  file.spectrum.flux.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    if (!reader.next(text)) {
      throw FormatError("unexpected end of file: data section truncated after " + std::to_string(i) + " of " +
                            std::to_string(n) + " rows",
                        reader.line() + 1);
    }
    const Vector row = parse_row(text, 2, reader, "data row");
    file.spectrum.wavelengths[static_cast<Eigen::Index>(i)] = row[0];
    file.spectrum.flux[static_cast<Eigen::Index>(i)] = row[1];
  }
  read_end(reader);
  try {
    file.spectrum.validate();
  } catch (const InputError& e) {
    throw FormatError(e.what());
  }
  return file;
}

void save_spectrum(const std::filesystem::path& path, const SpectrumFile& file) {
  auto out = open_out(path);
  write_spectrum(out, file);
  finish(out, path);
}

SpectrumFile load_spectrum(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_spectrum(in);
}

// ---------------------------------------------------------------- dataset

void write_dataset(std::ostream& out, const std::vector<Spectrum>& dataset) {
  if (dataset.empty()) throw InputError("dataset is empty");
  const auto& grid = dataset.front().wavelengths;
  for (const auto& s : dataset) {
    s.validate();
    if (!same(s.wavelengths, grid)) throw InputError("dataset spectra must share one wavelength grid");
  }
  out << "format_version " << kFormatVersion << '\n';
  out << "kind dataset\n";
  out << "count " << dataset.size() << '\n';
  out << "n " << grid.size() << '\n';
  out << "wavelengths ";
  write_row(out, grid);
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    out << "spectrum " << j << ' ' << format_double(dataset[j].redshift) << ' ';
    write_row(out, dataset[j].flux);
  }
  out << "end\n";
}

std::vector<Spectrum> read_dataset(std::istream& in) {
  LineReader reader(in);
  read_version(reader, "dataset");
  const std::size_t count = parse_count(reader.expect("count", "header"), reader);
  const std::size_t n = parse_count(reader.expect("n", "header"), reader);
  if (count == 0 || n == 0) throw reader.error("dataset must have count >= 1 and n >= 1");
  const Vector grid = parse_row(reader.expect("wavelengths", "header"), n, reader, "wavelengths");

  std::vector<Spectrum> dataset;
  dataset.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const auto text = reader.expect("spectrum", "spectra section (" + std::to_string(j) + " of " +
                                                    std::to_string(count) + " read)");
    const auto toks = split(text);
    if (toks.size() != n + 2) throw reader.error("spectrum row has wrong number of values");
    if (parse_uint(toks[0], reader) != j) throw reader.error("spectrum ids must be 0..count-1 in order");
    Spectrum s;
    s.wavelengths = grid;
    s.redshift = parse_double(toks[1], reader);
    s.flux.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) s.flux[static_cast<Eigen::Index>(i)] = parse_double(toks[i + 2], reader);
    try {
      s.validate();
    } catch (const InputError& e) {
      throw reader.error(e.what());
    }
    dataset.push_back(std::move(s));
  }
  read_end(reader);
  return dataset;
}

void save_dataset(const std::filesystem::path& path, const std::vector<Spectrum>& dataset) {
  auto out = open_out(path);
  write_dataset(out, dataset);
  finish(out, path);
}

std::vector<Spectrum> load_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

// ---------------------------------------------------------------- result

void ResultFile::validate() const {
  const auto rows = static_cast<Eigen::Index>(k());
  const auto cols = static_cast<Eigen::Index>(n);
  if (n == 0) throw FormatError("result has n = 0");
  if (per_window_mean.rows() != rows || per_window_mean.cols() != cols) {
    throw FormatError("per_window_mean is not K x N");
  }
  if (per_window_var.rows() != per_window_mean.rows() || per_window_var.cols() != per_window_mean.cols()) {
    throw FormatError("per_window_var is not K x N");
  }
  if (combined.size() != cols) throw FormatError("combined vector length differs from n");
  if (source_ids.size() != m) throw FormatError("source_ids length differs from m");
  if (!per_baseline.empty()) {
    if (per_baseline.size() != k()) throw FormatError("per_baseline must have K matrices");
    for (const auto& pb : per_baseline) {
      if (pb.rows() != static_cast<Eigen::Index>(m) || pb.cols() != cols) {
        throw FormatError("per_baseline matrix is not M x N");
      }
    }
  }
}

bool ResultFile::operator==(const ResultFile& other) const {
  if (per_baseline.size() != other.per_baseline.size()) return false;
  for (std::size_t k = 0; k < per_baseline.size(); ++k) {
    if (!same(per_baseline[k], other.per_baseline[k])) return false;
  }
  return method == other.method && n == other.n && m == other.m && windows == other.windows &&
         stride == other.stride && steps == other.steps && seed == other.seed &&
         model_fingerprint == other.model_fingerprint && input_path == other.input_path &&
         dataset_path == other.dataset_path && source_ids == other.source_ids &&
         same(per_window_mean, other.per_window_mean) && same(per_window_var, other.per_window_var) &&
         same(combined, other.combined);
}

void write_result(std::ostream& out, const ResultFile& file) {
  file.validate();
  out << "format_version " << kFormatVersion << '\n';
  out << "kind result\n";
  out << "method " << file.method << '\n';
  out << "n " << file.n << '\n';
  out << "k " << file.k() << '\n';
  out << "m " << file.m << '\n';
  out << "windows";
  for (auto w : file.windows) out << ' ' << w;
  out << '\n';
  out << "stride " << to_string(file.stride) << '\n';
  out << "steps " << file.steps << '\n';
  out << "seed " << file.seed << '\n';
  out << "model_fingerprint " << file.model_fingerprint << '\n';
  out << "input " << file.input_path << '\n';
  out << "dataset " << file.dataset_path << '\n';
  out << "source_ids";
  for (auto id : file.source_ids) out << ' ' << id;
  out << '\n';
  out << "per_baseline " << (file.per_baseline.empty() ? 0 : 1) << '\n';
  out << "per_window_mean\n";
  for (Eigen::Index k = 0; k < file.per_window_mean.rows(); ++k) write_row(out, file.per_window_mean.row(k).transpose());
  out << "per_window_var\n";
  for (Eigen::Index k = 0; k < file.per_window_var.rows(); ++k) write_row(out, file.per_window_var.row(k).transpose());
  if (!file.per_baseline.empty()) {
    out << "per_baseline_rows\n";
    for (const auto& pb : file.per_baseline) {
      for (Eigen::Index j = 0; j < pb.rows(); ++j) write_row(out, pb.row(j).transpose());
    }
  }
  out << "combined\n";
  write_row(out, file.combined);
  out << "end\n";
}

ResultFile read_result(std::istream& in) {
  LineReader reader(in);
  read_version(reader, "result");
  ResultFile file;
  file.method = reader.expect("method", "header");
  if (file.method.empty()) throw reader.error("method is empty");
  file.n = parse_count(reader.expect("n", "header"), reader);
  if (file.n == 0) throw reader.error("n must be >= 1");
  const std::size_t k = parse_count(reader.expect("k", "header"), reader);
  file.m = parse_count(reader.expect("m", "header"), reader);
  for (const auto& tok : split(reader.expect("windows", "header"))) {
    file.windows.push_back(static_cast<std::size_t>(parse_uint(tok, reader)));
  }
  if (file.windows.size() != k) {
    throw reader.error("windows lists " + std::to_string(file.windows.size()) + " sizes, k = " + std::to_string(k));
  }
  try {
    file.stride = stride_policy_from_string(reader.expect("stride", "header"));
  } catch (const InputError& e) {
    throw reader.error(e.what());
  }
  file.steps = static_cast<int>(parse_count(reader.expect("steps", "header"), reader));
  file.seed = parse_uint(reader.expect("seed", "header"), reader);
  file.model_fingerprint = reader.expect("model_fingerprint", "header");
  file.input_path = reader.expect("input", "header");
  file.dataset_path = reader.expect("dataset", "header");
  for (const auto& tok : split(reader.expect("source_ids", "header"))) {
    file.source_ids.push_back(static_cast<std::size_t>(parse_uint(tok, reader)));
  }
  if (file.source_ids.size() != file.m) throw reader.error("source_ids count differs from m");
  const std::size_t has_per_baseline = parse_count(reader.expect("per_baseline", "header"), reader);
  if (has_per_baseline > 1) throw reader.error("per_baseline must be 0 or 1");

  auto read_matrix = [&](const std::string& section, std::size_t rows) {
    reader.expect(section, section + " section");
    Matrix mat(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(file.n));
    for (std::size_t r = 0; r < rows; ++r) {
      std::string text;
      if (!reader.next(text)) {
        throw FormatError("unexpected end of file: " + section + " has " + std::to_string(r) + " rows, expected " +
                              std::to_string(rows),
                          reader.line() + 1);
      }
      if (text.empty() || !(std::isdigit(static_cast<unsigned char>(text[0])) || text[0] == '-' || text[0] == '+' ||
                            text[0] == '.')) {
        throw reader.error(section + " has " + std::to_string(r) + " rows, expected " + std::to_string(rows));
      }
      mat.row(static_cast<Eigen::Index>(r)) = parse_row(text, file.n, reader, section + " row").transpose();
    }
    return mat;
  };

  file.per_window_mean = read_matrix("per_window_mean", k);
  file.per_window_var = read_matrix("per_window_var", k);
  if (has_per_baseline == 1) {
    const Matrix all = read_matrix("per_baseline_rows", k * file.m);
    for (std::size_t kk = 0; kk < k; ++kk) {
      file.per_baseline.push_back(all.middleRows(static_cast<Eigen::Index>(kk * file.m),
                                                 static_cast<Eigen::Index>(file.m)));
    }
  }
  file.combined = read_matrix("combined", 1).row(0).transpose();
  read_end(reader);
  file.validate();
  return file;
}

void save_result(const std::filesystem::path& path, const ResultFile& file) {
  auto out = open_out(path);
  write_result(out, file);
  finish(out, path);
}

ResultFile load_result(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_result(in);
}

// ---------------------------------------------------------------- json configs

nlohmann::json to_json(const ToyModelSpec& spec) {
  nlohmann::json basis = nlohmann::json::array();
  for (const auto& t : spec.basis) {
    nlohmann::json bumps = nlohmann::json::array();
    for (const auto& b : t.bumps) bumps.push_back({{"center", b.center}, {"width", b.width}, {"weight", b.weight}});
    basis.push_back({{"name", t.name}, {"poly", t.poly}, {"bumps", bumps}});
  }
  return {{"format_version", kFormatVersion},
          {"kind", "toy_model"},
          {"poly_pivot", spec.poly_pivot},
          {"poly_scale", spec.poly_scale},
          {"canonical_grid", to_std(spec.canonical_grid)},
          {"latent_mean", to_std(spec.latent_mean)},
          {"latent_variances", to_std(spec.latent_variances)},
          {"basis", basis}};
}

ToyModelSpec toy_model_spec_from_json(const nlohmann::json& j) {
  if (json_get<int>(j, "format_version") != kFormatVersion) throw FormatError("unsupported toy model format_version");
  if (json_get<std::string>(j, "kind") != "toy_model") throw FormatError("config kind is not 'toy_model'");
  ToyModelSpec spec;
  spec.poly_pivot = json_get<double>(j, "poly_pivot");
  spec.poly_scale = json_get<double>(j, "poly_scale");
  spec.canonical_grid = to_vector(json_get<std::vector<double>>(j, "canonical_grid"));
  spec.latent_mean = to_vector(json_get<std::vector<double>>(j, "latent_mean"));
  spec.latent_variances = to_vector(json_get<std::vector<double>>(j, "latent_variances"));
  for (const auto& t : json_get<nlohmann::json>(j, "basis")) {
    Template tmpl;
    tmpl.name = json_get<std::string>(t, "name");
    tmpl.poly = json_get<std::vector<double>>(t, "poly");
    for (const auto& b : json_get<nlohmann::json>(t, "bumps")) {
      tmpl.bumps.push_back({json_get<double>(b, "center"), json_get<double>(b, "width"), json_get<double>(b, "weight")});
    }
    spec.basis.push_back(std::move(tmpl));
  }
  try {
    spec.validate();
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid toy model: ") + e.what());
  }
  return spec;
}

nlohmann::json to_json(const SynthConfig& config) {
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& l : config.lines) {
    lines.push_back({{"rest_center", l.rest_center}, {"amplitude", l.amplitude}, {"width", l.width}, {"group", l.group}});
  }
  return {{"format_version", kFormatVersion},
          {"kind", "synth_config"},
          {"grid", to_std(config.grid)},
          {"continuum_coeffs", config.continuum_coeffs},
          {"continuum_pivot", config.continuum_pivot},
          {"continuum_scale", config.continuum_scale},
          {"continuum_jitter", config.continuum_jitter},
          {"line_jitter", config.line_jitter},
          {"noise_sigma", config.noise_sigma},
          {"seed", config.seed},
          {"lines", lines}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  if (json_get<int>(j, "format_version") != kFormatVersion) throw FormatError("unsupported synth config format_version");
  if (json_get<std::string>(j, "kind") != "synth_config") throw FormatError("config kind is not 'synth_config'");
  SynthConfig c;
  const auto& grid = j.at("grid");
  if (grid.is_object()) {
    c.grid = linear_grid(json_get<double>(grid, "lo"), json_get<double>(grid, "hi"), json_get<std::size_t>(grid, "n"));
  } else {
    c.grid = to_vector(json_get<std::vector<double>>(j, "grid"));
  }
  c.continuum_coeffs = json_get<std::vector<double>>(j, "continuum_coeffs");
  c.continuum_pivot = json_get<double>(j, "continuum_pivot");
  c.continuum_scale = json_get<double>(j, "continuum_scale");
  c.continuum_jitter = json_get<std::vector<double>>(j, "continuum_jitter");
  c.line_jitter = json_get<double>(j, "line_jitter");
  c.noise_sigma = json_get<double>(j, "noise_sigma");
  c.seed = json_get<std::uint64_t>(j, "seed");
  for (const auto& l : json_get<nlohmann::json>(j, "lines")) {
    c.lines.push_back({json_get<double>(l, "rest_center"), json_get<double>(l, "amplitude"),
                       json_get<double>(l, "width"), json_get<std::string>(l, "group")});
  }
  try {
    c.validate();
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid synth config: ") + e.what());
  }
  return c;
}

void save_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

nlohmann::json load_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------- sampling

BaselineEnsemble sample_baselines(const std::vector<Spectrum>& dataset, std::size_t m,
                                  const ModelBundle& model, double z, std::uint64_t seed) {
  if (dataset.empty()) throw InputError("cannot sample baselines from an empty dataset");
  if (m < 1) throw InputError("need at least one baseline");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> ids;
  if (m <= dataset.size()) {
    std::vector<std::size_t> pool(dataset.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    for (std::size_t j = 0; j < m; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
      std::swap(pool[j], pool[pick(rng)]);
    }
    ids.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    for (std::size_t j = 0; j < m; ++j) ids.push_back(pick(rng));
  }

  BaselineEnsemble ensemble;
  for (auto id : ids) {
    const Spectrum& source = dataset[id];
    source.validate();
    Vector recon = model.reconstruct(source.flux, source.redshift, z);
    ensemble.scores.push_back(model.score(recon));
    ensemble.reconstructions.push_back(std::move(recon));
    ensemble.source_ids.push_back(id);
  }
  return ensemble;
}

// ---------------------------------------------------------------- hashing

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < length; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
  return hex.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

}  // namespace imo
