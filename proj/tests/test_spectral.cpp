#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "ssvep/spectral.hpp"
#include "ssvep/synth.hpp"

using namespace ssvep;
using namespace ssvep::spectral;

namespace {

TrialEpoch make_epoch(const Matrix& samples, double fs) {
  TrialEpoch e;
  e.samples = samples;
  e.sample_rate_hz = fs;
  std::vector<std::string> names;
  for (Eigen::Index c = 0; c < samples.rows(); ++c) names.push_back("C" + std::to_string(c));
  e.layout = ChannelLayout(names);
  return e;
}

Matrix white(Eigen::Index ch, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Matrix m(ch, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(gen);
  return m;
}

PowerSpectrum constant_psd(std::size_t bins, double value) {
  PowerSpectrum p;
  p.resolution_hz = 0.25;
  for (std::size_t k = 0; k < bins; ++k) p.freqs_hz.push_back(0.25 * static_cast<double>(k));
  p.power = Matrix::Constant(1, static_cast<Eigen::Index>(bins), value);
  return p;
}

}  // namespace

TEST_CASE("5 s epoch with 1 s skip has 0.25 Hz bins and 72 Hz at bin 288") {
  const auto e = make_epoch(white(1, 2500, 1), 500.0);
  const auto p = psd_boxcar(e, 1.0);
  CHECK(p.resolution_hz == Catch::Approx(0.25).epsilon(1e-15));
  CHECK(p.n_bins() == 1001);
  CHECK(nearest_bin(p.freqs_hz, 72.0) == 288);
  CHECK(p.freqs_hz[288] == 72.0);
  for (std::size_t k = 1; k < p.n_bins(); ++k) CHECK(p.freqs_hz[k] - p.freqs_hz[k - 1] == Catch::Approx(0.25));
  CHECK((p.power.array() >= 0.0).all());
}

TEST_CASE("on-bin 10 Hz tone holds at least 99% of the power") {
  const double fs = 500.0;
  Matrix x(1, 2000);
  for (Eigen::Index i = 0; i < x.cols(); ++i) x(0, i) = std::sin(2.0 * std::numbers::pi * 10.0 * static_cast<double>(i) / fs);
  const auto p = psd_boxcar(x, fs);
  const auto k = static_cast<Eigen::Index>(nearest_bin(p.freqs_hz, 10.0));
  CHECK(p.power(0, k) >= 0.99 * p.power.sum());
  Eigen::Index arg = 0;
  p.power.row(0).maxCoeff(&arg);
  CHECK(arg == k);
}

TEST_CASE("Parseval: summed power times resolution equals the segment variance") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (Eigen::Index n : {2000, 1999, 512}) {
      Matrix x = white(2, n, seed);
      x.row(1).array() += 7.0;  // mean is removed
      const auto p = psd_boxcar(x, 500.0);
      for (Eigen::Index c = 0; c < 2; ++c) {
        const double mean = x.row(c).mean();
        const double var = (x.row(c).array() - mean).square().mean();
        CHECK(p.power.row(c).sum() * p.resolution_hz == Catch::Approx(var).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("PSD argument errors") {
  const auto e = make_epoch(white(1, 500, 1), 500.0);
  CHECK_THROWS_AS(psd_boxcar(e, 1.0), ArgumentError);
  CHECK_THROWS_AS(psd_boxcar(e, -0.1), ArgumentError);
  CHECK_THROWS_AS(psd_boxcar(Matrix::Zero(1, 1), 500.0), ArgumentError);
}

TEST_CASE("concatenated epochs change resolution but not tone dominance") {
  const double fs = 500.0;
  Matrix x = white(1, 1000, 4) * 0.1;
  for (Eigen::Index i = 0; i < x.cols(); ++i) x(0, i) += std::sin(2.0 * std::numbers::pi * 12.0 * static_cast<double>(i) / fs);
  Matrix xx(1, 2000);
  xx << x, x;
  const auto p1 = psd_boxcar(x, fs);
  const auto p2 = psd_boxcar(xx, fs);
  CHECK(p2.resolution_hz == Catch::Approx(p1.resolution_hz / 2.0));
  Eigen::Index a1 = 0, a2 = 0;
  p1.power.row(0).maxCoeff(&a1);
  p2.power.row(0).maxCoeff(&a2);
  CHECK(p1.freqs_hz[static_cast<std::size_t>(a1)] == 12.0);
  CHECK(p2.freqs_hz[static_cast<std::size_t>(a2)] == 12.0);
}

TEST_CASE("flat spectrum has 0 dB SNR everywhere defined") {
  const auto s = snr_spectrum(constant_psd(40, 3.5));
  for (std::size_t k = 0; k < s.n_bins(); ++k) {
    const double v = s.snr_db(0, static_cast<Eigen::Index>(k));
    if (s.defined(k))
      CHECK(v == Catch::Approx(0.0).margin(1e-12));
    else
      CHECK(std::isnan(v));
  }
}

TEST_CASE("target 8 against neighbors 2 gives 10·log10(4)") {
  auto p = constant_psd(30, 2.0);
  p.power(0, 15) = 8.0;
  p.power(0, 14) = 100.0;  // skipped bins do not count
  p.power(0, 16) = 100.0;
  const auto s = snr_spectrum(p);
  CHECK(s.snr_linear(0, 15) == Catch::Approx(4.0).epsilon(1e-15));
  CHECK(s.snr_db(0, 15) == Catch::Approx(6.020599913279624).epsilon(1e-12));
  // Neighborhood runs over k±2…k±4 with the defaults.
  p.power(0, 20) = 50.0;
  p.power(0, 10) = 50.0;
  CHECK(snr_spectrum(p).snr_linear(0, 15) == Catch::Approx(4.0));
  p.power(0, 19) = 50.0;
  CHECK(snr_spectrum(p).snr_linear(0, 15) == Catch::Approx(8.0 / ((50.0 + 5 * 2.0) / 6.0)));
}

TEST_CASE("edge bins lacking a neighborhood are absent, not zero") {
  const auto s = snr_spectrum(constant_psd(20, 1.0), {3, 1});
  CHECK(s.first_defined() == 4);
  CHECK(s.last_defined() == 15);
  for (std::size_t k : {0u, 1u, 2u, 3u, 16u, 17u, 18u, 19u}) {
    CHECK_FALSE(s.defined(k));
    CHECK(std::isnan(s.snr_db(0, static_cast<Eigen::Index>(k))));
    CHECK(std::isnan(s.snr_linear(0, static_cast<Eigen::Index>(k))));
  }
  CHECK_THROWS_AS(snr_at(s, 0.25), ArgumentError);
  CHECK_NOTHROW(snr_at(s, 1.0));
}

TEST_CASE("SNR parameter errors") {
  const auto p = constant_psd(20, 1.0);
  CHECK_THROWS_AS(snr_spectrum(p, {0, 1}), ArgumentError);
  CHECK_THROWS_AS(snr_spectrum(p, {3, -1}), ArgumentError);
  CHECK_THROWS_AS(snr_spectrum(constant_psd(8, 1.0), {3, 1}), ArgumentError);
}

TEST_CASE("SNR is invariant to scaling the PSD") {
  auto p = psd_boxcar(white(3, 2000, 9), 500.0);
  const auto s1 = snr_spectrum(p);
  for (double c : {1e-6, 0.3, 42.0, 1e9}) {
    auto q = p;
    q.power *= c;
    const auto s2 = snr_spectrum(q);
    for (Eigen::Index i = 0; i < s1.snr_db.size(); ++i) {
      const double a = s1.snr_db.data()[i], b = s2.snr_db.data()[i];
      if (std::isnan(a))
        CHECK(std::isnan(b));
      else
        CHECK(std::abs(a - b) <= 1e-12);
    }
  }
}

TEST_CASE("white-noise SNR averages to 0 dB within 1 dB over 100 draws") {
  // Pooled linear mean is 6/5 in expectation (+0.79 dB); the mean of dB
  // values is (ln 6 − H5) nepers, about −2.135 dB.
  double lin_sum = 0.0, db_sum = 0.0, count = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = snr_spectrum(psd_boxcar(make_epoch(white(1, 2500, seed), 500.0), 1.0));
    for (std::size_t k = s.first_defined(); k <= s.last_defined(); ++k) {
      lin_sum += s.snr_linear(0, static_cast<Eigen::Index>(k));
      db_sum += s.snr_db(0, static_cast<Eigen::Index>(k));
      count += 1.0;
    }
  }
  const double pooled_db = 10.0 * std::log10(lin_sum / count);
  CHECK(std::abs(pooled_db) <= 1.0);
  CHECK(pooled_db == Catch::Approx(10.0 * std::log10(1.2)).margin(0.1));
  const double h5 = 1.0 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5;
  const double expect_db = 10.0 / std::log(10.0) * (std::log(6.0) - h5);
  CHECK(db_sum / count == Catch::Approx(expect_db).margin(0.05));
}

TEST_CASE("mean_snr_db averages linear values over defined bins") {
  auto p = constant_psd(30, 2.0);
  p.power(0, 15) = 8.0;
  const auto s = snr_spectrum(p);
  // Bin 15 reads 4; bins 11-13 and 17-19 see one neighbor at 8 (mean 3, ratio 2/3).
  const double defined = static_cast<double>(s.last_defined() - s.first_defined() + 1);
  const double expect = (4.0 + 6.0 * (2.0 / 3.0) + (defined - 7.0)) / defined;
  CHECK(mean_snr_db(s) == Catch::Approx(10.0 * std::log10(expect)).epsilon(1e-12));
}

TEST_CASE("nearest-bin readout") {
  const auto p = psd_boxcar(white(2, 2000, 3), 500.0);  // 0.25 Hz grid
  const auto s = snr_spectrum(p);
  auto r = snr_at(s, 72.0);
  CHECK(r.bin == 288);
  CHECK(r.freq_hz == 72.0);
  REQUIRE(r.snr_db.size() == 2);
  CHECK(r.snr_db[1] == s.snr_db(1, 288));
  CHECK(snr_at(s, 72.1).bin == 288);
  CHECK(snr_at(s, 72.2).bin == 289);
  CHECK(snr_at(s, 72.125).bin == 288);  // tie goes low
  CHECK_THROWS_AS(snr_at(s, 300.0), ArgumentError);
  CHECK_THROWS_AS(snr_at(s, -1.0), ArgumentError);
  CHECK_THROWS_AS(nearest_bin(std::vector<double>{}, 1.0), ArgumentError);
}

TEST_CASE("72 Hz evoked epoch peaks at bin 288") {
  synth::SynthConfig cfg;
  cfg.evoked_amp_uV = 3.0;
  cfg.artifact_rate_per_min = 0.0;
  cfg.line_amp_uV = 0.0;
  cfg.n_harmonics = 1;
  cfg.channels = {"Oz"};
  for (std::uint64_t t = 0; t < 5; ++t) {
    const auto e = synth::synth_trial(cfg, 72.0, 5.0, 500.0, t);
    const auto s = snr_spectrum(psd_boxcar(e, 1.0));
    Eigen::Index best = -1;
    double best_v = -1e300;
    for (std::size_t k = s.first_defined(); k <= s.last_defined(); ++k) {
      const double v = s.snr_db(0, static_cast<Eigen::Index>(k));
      if (v > best_v) {
        best_v = v;
        best = static_cast<Eigen::Index>(k);
      }
    }
    CHECK(best == 288);
    CHECK(best_v - s.snr_db(0, 287) >= 6.0);
    CHECK(best_v - s.snr_db(0, 289) >= 6.0);
  }
}

TEST_CASE("spectrum CSV dump") {
  auto p = constant_psd(10, 1.0);
  p.layout = ChannelLayout({"POz"});
  const auto s = snr_spectrum(p, {1, 1});
  const auto csv = format_spectrum_csv(s.freqs_hz, s.snr_db, p.layout);
  CHECK(csv.rfind("freq_hz,POz\n0,\n0.25,\n0.5,0\n", 0) == 0);
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 11);
  const auto anon = format_spectrum_csv(p.freqs_hz, p.power, ChannelLayout{});
  CHECK(anon.rfind("freq_hz,ch0\n", 0) == 0);
}
