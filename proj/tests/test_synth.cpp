#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "imo/errors.hpp"
#include "imo/synth.hpp"
#include "imo/toy_model.hpp"

using namespace imo;

namespace {

SynthConfig bare_config() {
  SynthConfig c = SynthConfig::defaults();
  c.continuum_coeffs = {0.0, 0.0};
  c.lines.clear();
  c.noise_sigma = 0.0;
  return c;
}

SynthConfig single_line(double amplitude = 2.0, double width = 5.0) {
  SynthConfig c = bare_config();
  c.lines = {{6563.0, amplitude, width, "halpha"}};
  return c;
}

Eigen::Index argmax(const Vector& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return i;
}

bool inside(const std::vector<PixelRange>& ranges, std::size_t i) {
  return std::any_of(ranges.begin(), ranges.end(), [&](const PixelRange& r) { return r.contains(i); });
}

}  // namespace

TEST_CASE("default configuration") {
  const SynthConfig c = SynthConfig::defaults();
  CHECK_NOTHROW(c.validate());
  CHECK(c.grid.size() == 512);
  CHECK(c.grid[0] == 3600.0);
  CHECK(c.grid[511] == doctest::Approx(9800.0).epsilon(1e-15));
  CHECK(c.line_groups() == std::vector<std::string>{"halpha", "hbeta", "oiii", "oii"});
}

TEST_CASE("generate_spectrum") {
  SUBCASE("nothing to render gives zeros") {
    const auto g = generate_spectrum(bare_config(), 0.0);
    CHECK(g.spectrum.flux.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.warnings.empty());
  }

  SUBCASE("a line peaks at its nearest pixel") {
    const SynthConfig c = single_line();
    const auto rest = generate_spectrum(c, 0.0);
    CHECK(static_cast<std::size_t>(argmax(rest.spectrum.flux)) == nearest_pixel(c.grid, 6563.0));
    const auto shifted = generate_spectrum(c, 0.05);
    CHECK(static_cast<std::size_t>(argmax(shifted.spectrum.flux)) == nearest_pixel(c.grid, 6891.15));
    CHECK(shifted.spectrum.redshift == 0.05);
  }

  SUBCASE("continuum follows the polynomial in rest wavelength") {
    SynthConfig c = bare_config();
    c.continuum_coeffs = {1.5, -0.25, 0.1};
    c.continuum_jitter.clear();
    const auto g = generate_spectrum(c, 0.2);
    for (Eigen::Index i = 0; i < 512; i += 37) {
      const double t = (c.grid[i] / 1.2 - 6000.0) / 2000.0;
      CHECK(g.spectrum.flux[i] == doctest::Approx(1.5 - 0.25 * t + 0.1 * t * t).epsilon(1e-13));
    }
  }

  SUBCASE("lines off the grid are skipped with a warning") {
    SynthConfig c = single_line();
    c.lines.push_back({9700.0, 1.0, 5.0, "far"});
    const auto g = generate_spectrum(c, 0.1);
    REQUIRE(g.warnings.size() == 1);
    CHECK(g.spectrum.flux.allFinite());
  }

  SUBCASE("noise is seeded") {
    SynthConfig c = SynthConfig::defaults();
    c.seed = 5;
    const auto a = generate_spectrum(c, 0.1);
    const auto b = generate_spectrum(c, 0.1);
    CHECK(a.spectrum.flux == b.spectrum.flux);
    c.seed = 6;
    CHECK(generate_spectrum(c, 0.1).spectrum.flux != a.spectrum.flux);
    const Vector residual = a.spectrum.flux - [&] {
      SynthConfig quiet = c;
      quiet.noise_sigma = 0.0;
      return generate_spectrum(quiet, 0.1).spectrum.flux;
    }();
    const double rms = std::sqrt(residual.squaredNorm() / 512.0);
    CHECK(rms == doctest::Approx(0.02).epsilon(0.15));
  }

  SUBCASE("invalid configurations") {
    SynthConfig c = bare_config();
    c.noise_sigma = -1.0;
    CHECK_THROWS_AS(generate_spectrum(c, 0.0), InputError);
    c = bare_config();
    c.lines = {{6563.0, 1.0, 0.0, "halpha"}};
    CHECK_THROWS_AS(generate_spectrum(c, 0.0), InputError);
    CHECK_THROWS_AS(generate_spectrum(bare_config(), -0.1), InputError);
  }
}

TEST_CASE("calibration jump") {
  const SynthConfig c = SynthConfig::defaults();
  const Spectrum base = generate_spectrum(c, 0.1).spectrum;

  SUBCASE("zero jump leaves the spectrum alone") {
    const auto inj = inject_calibration_jump(base, 5800.0, 0.0, 0.0);
    CHECK(inj.spectrum.flux == base.flux);
  }

  SUBCASE("blue side shifts and red side is untouched") {
    const double offset = -2.0 * base.flux.cwiseAbs().maxCoeff();
    const auto inj = inject_calibration_jump(base, 5800.0, offset, 0.0);
    for (Eigen::Index i = 0; i < 512; ++i) {
      if (c.grid[i] < 5800.0) {
        CHECK(inj.spectrum.flux[i] < 0.0);
      } else {
        CHECK(inj.spectrum.flux[i] == base.flux[i]);
      }
    }
    REQUIRE(inj.label.affected_pixels.size() == 1);
    CHECK(inj.label.affected_pixels[0].begin == 0);
    CHECK(c.grid[static_cast<Eigen::Index>(inj.label.affected_pixels[0].end) - 1] < 5800.0);
    CHECK(c.grid[static_cast<Eigen::Index>(inj.label.affected_pixels[0].end)] >= 5800.0);
  }

  SUBCASE("slope term grows toward the pivot") {
    const auto inj = inject_calibration_jump(generate_spectrum(bare_config(), 0.0).spectrum, 5800.0, 0.0, 1e-3);
    const auto end = static_cast<Eigen::Index>(inj.label.affected_pixels[0].end);
    for (Eigen::Index i = 1; i < end; ++i) CHECK(inj.spectrum.flux[i] > inj.spectrum.flux[i - 1]);
    CHECK(inj.spectrum.flux[0] == doctest::Approx(1e-3 * (3600.0 - 5800.0)));
  }

  CHECK_THROWS_AS(inject_calibration_jump(base, 100.0, -1.0, 0.0), InputError);
  CHECK(inject_calibration_jump(base, 5800.0, -3.0, 1e-3).label.kind == AnomalyKind::calibration_jump);
}

TEST_CASE("double peak") {
  SUBCASE("zero separation stacks both peaks") {
    const SynthConfig c = bare_config();
    const Spectrum base = generate_spectrum(c, 0.1).spectrum;
    const auto inj = inject_double_peak(base, c, 6563.0, 0.0, 1.0, 10.0);
    const std::size_t p = nearest_pixel(c.grid, 6563.0 * 1.1);
    CHECK(inj.label.peak_pixels == std::vector<std::size_t>{p, p});
    CHECK(static_cast<std::size_t>(argmax(inj.spectrum.flux)) == p);
    const double sigma = 11.0;
    const double d = c.grid[static_cast<Eigen::Index>(p)] - 6563.0 * 1.1;
    CHECK(inj.spectrum.flux[static_cast<Eigen::Index>(p)] ==
          doctest::Approx(2.0 * std::exp(-0.5 * d * d / (sigma * sigma))));
  }

  SUBCASE("peaks sit at rest_center -/+ separation / 2") {
    const SynthConfig c = single_line();
    const Spectrum base = generate_spectrum(c, 0.0).spectrum;
    const auto inj = inject_double_peak(base, c, 6563.0, 20.0, 1.0, 2.0);
    CHECK(inj.label.peak_pixels ==
          std::vector<std::size_t>{nearest_pixel(c.grid, 6553.0), nearest_pixel(c.grid, 6573.0)});
  }

  SUBCASE("the original line is removed") {
    const SynthConfig c = single_line(2.0, 5.0);
    const Spectrum base = generate_spectrum(c, 0.1).spectrum;
    const auto inj = inject_double_peak(base, c, 6563.0, 40.0, 0.0, 5.0);
    CHECK(inj.spectrum.flux.cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("zero amplitude with no matching line changes nothing") {
    const SynthConfig c = bare_config();
    const Spectrum base = generate_spectrum(SynthConfig::defaults(), 0.1).spectrum;
    CHECK(inject_double_peak(base, c, 6563.0, 40.0, 0.0, 5.0).spectrum.flux == base.flux);
  }

  SUBCASE("errors") {
    const SynthConfig c = SynthConfig::defaults();
    const Spectrum base = generate_spectrum(c, 0.1).spectrum;
    CHECK_THROWS_AS(inject_double_peak(base, c, 9500.0, 60.0, 1.0, 10.0), InputError);
    CHECK_THROWS_AS(inject_double_peak(base, c, 6563.0, 60.0, 1.0, 0.0), InputError);
    CHECK_THROWS_AS(inject_double_peak(base, c, 6563.0, -1.0, 1.0, 10.0), InputError);
  }
}

TEST_CASE("injections stay local and labels cover every change") {
  const SynthConfig c = SynthConfig::defaults();
  for (double z : {0.0, 0.05, 0.1, 0.17}) {
    CAPTURE(z);
    const Spectrum base = generate_spectrum(c, z).spectrum;
    const DoublePeakParams dp;
    const auto inj = inject_double_peak(base, c, dp.rest_center, dp.separation, dp.amplitude, dp.width);
    const double stretch = 1.0 + z;
    const std::vector<std::pair<double, double>> components{
        {(dp.rest_center - dp.separation / 2) * stretch, dp.width * stretch},
        {(dp.rest_center + dp.separation / 2) * stretch, dp.width * stretch},
        {6563.0 * stretch, 20.0 * stretch}};
    for (Eigen::Index i = 0; i < 512; ++i) {
      const double lambda = c.grid[i];
      const bool far = std::all_of(components.begin(), components.end(), [&](const auto& comp) {
        return std::abs(lambda - comp.first) > 5.0 * comp.second;
      });
      const double change = std::abs(inj.spectrum.flux[i] - base.flux[i]);
      if (far) CHECK(change < 1e-5 * dp.amplitude);
      if (change > 1e-9) CHECK(inside(inj.label.affected_pixels, static_cast<std::size_t>(i)));
    }
    for (std::size_t p : inj.label.peak_pixels) CHECK(inj.label.covers(p));

    const auto cal = inject_calibration_jump(base, 5800.0, -3.0, 1e-3);
    for (Eigen::Index i = 0; i < 512; ++i) {
      if (cal.spectrum.flux[i] != base.flux[i]) CHECK(inside(cal.label.affected_pixels, static_cast<std::size_t>(i)));
    }
  }
}

TEST_CASE("build_dataset") {
  const SynthConfig c = SynthConfig::defaults();
  const auto one = build_dataset(c, 1, {0.0, 0.2}, 3);
  REQUIRE(one.size() == 1);
  CHECK(one[0].flux.allFinite());

  const auto a = build_dataset(c, 20, {0.0, 0.2}, 3);
  const auto b = build_dataset(c, 20, {0.0, 0.2}, 3);
  const auto other = build_dataset(c, 20, {0.0, 0.2}, 4);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(a[i].flux == b[i].flux);
    CHECK(a[i].redshift == b[i].redshift);
    CHECK(a[i].redshift >= 0.0);
    CHECK(a[i].redshift <= 0.2);
    CHECK(a[i].flux != other[i].flux);
  }
  CHECK(a[0].flux == one[0].flux);
  CHECK(a[0].flux != a[1].flux);

  const auto fixed = build_dataset(c, 5, {0.1, 0.1}, 9);
  for (const auto& s : fixed) CHECK(s.redshift == 0.1);

  CHECK_THROWS_AS(build_dataset(c, 0, {0.0, 0.2}, 1), InputError);
  CHECK_THROWS_AS(build_dataset(c, 3, {0.2, 0.1}, 1), InputError);
  CHECK_THROWS_AS(build_dataset(c, 3, {-0.1, 0.1}, 1), InputError);
}

TEST_CASE("toy model fitted to the generator") {
  const SynthConfig c = SynthConfig::defaults();
  const auto dataset = build_dataset(c, 100, kDatasetRedshiftRange, 42);
  const ToyModelSpec spec = toy_model_spec(c, dataset);
  CHECK(spec.basis.size() == 6);
  CHECK(spec.latent_mean.size() == 6);
  CHECK(spec.latent_variances.minCoeff() > 0.0);
  CHECK(spec.latent_mean[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(spec.latent_mean[1] == doctest::Approx(-0.2).epsilon(0.1));

  const ToyModel model(spec, 0.1);
  const Vector clean = generate_spectrum(c, 0.1).spectrum.flux;
  const Vector code = model.encode(clean);
  for (Eigen::Index s = 2; s < 6; ++s) CHECK(code[s] == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("scenario") {
  const Scenario s = build_scenario(SynthConfig::defaults(), 100, 42);
  CHECK(s.dataset.size() == 100);
  CHECK(s.clean.redshift == 0.1);
  CHECK(s.population.redshift == 0.1);
  CHECK(s.double_peak.label.kind == AnomalyKind::double_peak);
  CHECK(s.calibration.label.kind == AnomalyKind::calibration_jump);

  const ToyModel model(s.model, 0.1);
  std::vector<double> scores;
  for (const auto& item : s.dataset) {
    scores.push_back(model.score(model.reconstruct(item.flux, item.redshift, 0.1)));
  }
  std::nth_element(scores.begin(), scores.begin() + 50, scores.end());
  const double median = scores[50];
  CHECK(model.score(s.double_peak.spectrum.flux) <= median - 10.0);
  CHECK(model.score(s.calibration.spectrum.flux) <= median - 10.0);
  CHECK(model.score(s.population.flux) > median - 10.0);

  const Scenario again = build_scenario(SynthConfig::defaults(), 100, 42);
  CHECK(again.double_peak.spectrum.flux == s.double_peak.spectrum.flux);
  CHECK(again.model.latent_mean == s.model.latent_mean);
}
