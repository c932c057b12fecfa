#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "ssvep/stimgen.hpp"

using namespace ssvep;
using namespace ssvep::stimgen;
constexpr double pi = std::numbers::pi;

TEST_CASE("radial phase at quarter and half cycles") {
  for (double fc : {8.0, 12.0, 16.0}) {
    CHECK(std::abs(radial_phase(0.0, fc)) <= 1e-12);
    CHECK(std::abs(radial_phase(1.0 / (4.0 * fc), fc) - pi / 2.0) <= 1e-12);
    CHECK(std::abs(radial_phase(1.0 / (2.0 * fc), fc) - pi) <= 1e-12);
  }
  CHECK_THROWS_AS(radial_phase(0.1, 0.0), ArgumentError);
  CHECK_THROWS_AS(radial_phase(0.1, -3.0), ArgumentError);
}

TEST_CASE("radial phase stays within [0, pi] and is periodic") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ut(-100.0, 100.0);
  std::uniform_real_distribution<double> uf(0.5, 40.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = ut(gen);
    const double fc = uf(gen);
    const double v = radial_phase(t, fc);
    CHECK(v >= 0.0);
    CHECK(v <= pi);
    CHECK(std::abs(radial_phase(t + 1.0 / fc, fc) - v) <= 1e-9);
  }
}

TEST_CASE("7.2 Hz reversal at 144 Hz has a 20-frame period") {
  const auto spec = StimulusSpec::make(Paradigm::pattern_reversal, 7.2, 144.0, 1.0);
  const auto s = build_frame_schedule(spec);
  REQUIRE(s.frames.size() == 144);
  for (std::size_t n = 0; n + 20 < s.frames.size(); ++n) CHECK(s.frames[n].state == s.frames[n + 20].state);
  CHECK(s.frames[0].state == 0.0);
  CHECK(s.frames[9].state == 0.0);
  CHECK(s.frames[10].state == 1.0);
  CHECK(s.frames[19].state == 1.0);
  for (const auto& f : s.frames) CHECK(f.t_s == static_cast<double>(f.n) / 144.0);
}

TEST_CASE("reversal schedule flips 2·f·duration times for integer frames per cycle") {
  for (double f : {7.2, 9.0, 12.0, 18.0}) {
    const auto spec = StimulusSpec::make(Paradigm::pattern_reversal, f, 144.0, 5.0);
    const auto n_frames = frame_count(spec);
    int flips = 0;
    // Reversal instants in (0, duration], including the one closing the last frame.
    for (long long n = 1; n <= n_frames; ++n)
      if (frame_state(spec, n) != frame_state(spec, n - 1)) ++flips;
    CHECK(flips == static_cast<int>(std::llround(2.0 * f * 5.0)));
  }
}

TEST_CASE("72 Hz gabor pulse alternates over a two-frame cycle") {
  const auto spec = StimulusSpec::make(Paradigm::gabor_pulse, 72.0, 144.0, 0.5);
  const auto s = build_frame_schedule(spec);
  const double depth = GaborParams{}.pulse_depth;
  for (const auto& f : s.frames) {
    const double expect = f.n % 2 == 0 ? 1.0 + depth : 1.0 - depth;
    CHECK(std::abs(f.state - expect) <= 1e-12);
  }
}

TEST_CASE("14 Hz radial schedule samples the ideal waveform without drift") {
  const auto spec = StimulusSpec::make(Paradigm::radial_motion, 14.0, 144.0, 5.0);
  const auto s = build_frame_schedule(spec);
  REQUIRE(s.frames.size() == 720);
  for (const auto& f : s.frames) {
    // Extended-precision oracle with the phase reduced modulo one cycle.
    const long double cycles = 14.0L * static_cast<long double>(f.n) / 144.0L;
    const long double frac = cycles - std::floor(cycles);
    const long double lpi = 3.141592653589793238462643383279503L;
    const long double ref = lpi / 2 + (lpi / 2) * std::sin(2 * lpi * frac - lpi / 2);
    CHECK(std::abs(static_cast<long double>(f.state) - ref) <= 1e-12L);
  }
}

TEST_CASE("schedule length is round(duration × refresh) for all paradigms") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> ud(0.01, 3.0);
  for (int i = 0; i < 50; ++i) {
    const double dur = ud(gen);
    for (auto p : {Paradigm::pattern_reversal, Paradigm::radial_motion, Paradigm::gabor_pulse}) {
      const auto spec = StimulusSpec::make(p, 9.0, 120.0, dur);
      CHECK(build_frame_schedule(spec).frames.size() == static_cast<std::size_t>(std::llround(dur * 120.0)));
    }
  }
}

TEST_CASE("spec validation") {
  SECTION("72 Hz at 144 Hz refresh is valid") {
    const auto c = validate_spec(StimulusSpec::make(Paradigm::gabor_pulse, 72.0, 144.0));
    CHECK(c.warnings.empty());
  }
  SECTION("80 Hz at 144 Hz refresh violates Nyquist") {
    CHECK_THROWS_AS(validate_spec(StimulusSpec::make(Paradigm::gabor_pulse, 80.0, 144.0)), SpecError);
    CHECK_THROWS_AS(build_frame_schedule(StimulusSpec::make(Paradigm::radial_motion, 80.0, 144.0)), SpecError);
  }
  SECTION("14 Hz at 144 Hz warns about non-integer frames per cycle") {
    const auto c = validate_spec(StimulusSpec::make(Paradigm::pattern_reversal, 14.0, 144.0));
    REQUIRE(c.warnings.size() == 1);
    CHECK(c.warnings.front().find("10.285714") != std::string::npos);
  }
  SECTION("degenerate inputs") {
    CHECK_THROWS_AS(validate_spec(StimulusSpec::make(Paradigm::radial_motion, 8.0, 144.0, 0.0)), SpecError);
    CHECK_THROWS_AS(validate_spec(StimulusSpec::make(Paradigm::radial_motion, 8.0, 144.0, -1.0)), SpecError);
    auto bad = StimulusSpec::make(Paradigm::radial_motion, 8.0);
    bad.geometry = CheckerGeometry{0, 12, 256, 8};
    CHECK_THROWS_AS(validate_spec(bad), SpecError);
    auto mismatch = StimulusSpec::make(Paradigm::radial_motion, 8.0);
    mismatch.geometry = GaborParams{};
    CHECK_THROWS_AS(validate_spec(mismatch), SpecError);
    auto deep = StimulusSpec::make(Paradigm::gabor_pulse, 72.0);
    std::get<GaborParams>(deep.geometry).pulse_depth = 1.0;
    CHECK_THROWS_AS(validate_spec(deep), SpecError);
    std::get<GaborParams>(deep.geometry).mode = PulseMode::amplitude;
    CHECK_NOTHROW(validate_spec(deep));
  }
}

TEST_CASE("checkerboard at phase 0 and pi are negatives inside the annulus") {
  const CheckerGeometry g{5, 12, 64, 4};
  const auto a = render_checkerboard(g, 0.0);
  const auto b = render_checkerboard(g, pi);
  REQUIRE(a.width == 129);
  int annulus = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      const double r = std::hypot(x - 64.0, y - 64.0);
      if (r > g.fixation_radius_px && r <= g.outer_radius_px) {
        CHECK(a.at(x, y) == -b.at(x, y));
        ++annulus;
      }
    }
  CHECK(annulus > 10000);
}

TEST_CASE("checkerboard fixation disk is white and the outside is zero") {
  const CheckerGeometry g{5, 12, 64, 6};
  for (double phase : {0.0, 0.7, pi / 2.0, 2.9, pi}) {
    const auto img = render_checkerboard(g, phase);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double r = std::hypot(x - 64.0, y - 64.0);
        if (r <= g.fixation_radius_px) CHECK(img.at(x, y) == 1.0);
        if (r > g.outer_radius_px) CHECK(img.at(x, y) == 0.0);
        CHECK(std::abs(img.at(x, y)) <= 1.0);
      }
  }
  CHECK_THROWS_AS(render_checkerboard({5, 12, 0, 0}, 0.0), ArgumentError);
}

TEST_CASE("ring count along a radius equals radial cycles") {
  for (int cycles : {3, 5, 7}) {
    const CheckerGeometry g{cycles, 12, 256, 8};
    const auto img = render_checkerboard(g, 0.0);
    // Lattice ray (4, -1) per step: angle atan(1/4) keeps the angular factor away from zero.
    int changes = 0;
    double prev = 0.0;
    for (int k = 1;; ++k) {
      const int dx = 4 * k, dy = k;
      if (std::hypot(dx, dy) > g.outer_radius_px) break;
      if (std::hypot(dx, dy) <= g.fixation_radius_px) continue;
      const double v = img.at(256 + dx, 256 - dy);
      if (v == 0.0) continue;
      if (prev != 0.0 && v != prev) ++changes;
      prev = v;
    }
    CHECK((changes + 1) / 2 == cycles);
  }
}

TEST_CASE("gabor center value equals contrast at zero phase") {
  GaborParams p;
  p.phase = 0.0;
  p.size_px = 65;
  p.contrast = 0.3;
  const auto img = render_gabor(p, 1.0);
  CHECK(img.at(32, 32) == Catch::Approx(0.3).margin(1e-15));
}

TEST_CASE("gabor with a very wide mask approaches the pure grating") {
  GaborParams p;
  p.size_px = 64;
  const auto img = render_gabor(p, 1e9);
  const double c = (p.size_px - 1) / 2.0;
  for (int y = 0; y < p.size_px; y += 7)
    for (int x = 0; x < p.size_px; ++x) {
      const double grating = p.contrast * std::cos(2.0 * pi * p.spatial_freq * (x - c) / p.size_px + p.phase);
      CHECK(img.at(x, y) == Catch::Approx(grating).margin(1e-12));
    }
  CHECK_THROWS_AS(render_gabor(p, 0.0), ArgumentError);
}

TEST_CASE("gabor patch energy grows with mask scale") {
  GaborParams p;
  p.size_px = 64;
  p.mask_sigma_px = 10.0;
  double prev = 0.0;
  for (double s : {0.5, 1.0, 1.5}) {
    const auto img = render_gabor(p, s);
    double e = 0.0;
    for (double v : img.values) e += v * v;
    CHECK(e > prev);
    prev = e;
  }
}

TEST_CASE("rendered frames stay within [-1, 1] and map to gray affinely") {
  for (auto p : {Paradigm::pattern_reversal, Paradigm::radial_motion, Paradigm::gabor_pulse}) {
    auto spec = StimulusSpec::make(p, 12.0, 144.0, 0.1);
    if (auto* g = std::get_if<CheckerGeometry>(&spec.geometry)) g->outer_radius_px = 40;
    if (auto* g = std::get_if<GaborParams>(&spec.geometry)) g->size_px = 48;
    for (const auto& f : build_frame_schedule(spec).frames) {
      const auto img = render_frame(spec, f.state);
      for (double v : img.values) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
    }
  }
  CHECK(to_gray(-1.0) == 0);
  CHECK(to_gray(1.0) == 255);
  CHECK(to_gray(0.0) == 128);
  LuminanceImage img(3, 2, 0.0);
  img.at(0, 0) = -1.0;
  img.at(2, 1) = 1.0;
  const auto pgm = encode_pgm(img);
  REQUIRE(pgm.substr(0, 11) == "P5\n3 2\n255\n");
  CHECK(static_cast<unsigned char>(pgm[11]) == 0);
  CHECK(static_cast<unsigned char>(pgm[16]) == 255);
}

TEST_CASE("amplitude-mode pulsing scales contrast instead of the mask") {
  auto spec = StimulusSpec::make(Paradigm::gabor_pulse, 72.0);
  auto& g = std::get<GaborParams>(spec.geometry);
  g.size_px = 33;
  g.phase = 0.0;
  g.mode = PulseMode::amplitude;
  const auto img = render_frame(spec, 1.2);
  CHECK(img.at(16, 16) == Catch::Approx(0.36).margin(1e-12));
}

TEST_CASE("schedule JSON round-trip") {
  const auto spec = StimulusSpec::make(Paradigm::radial_motion, 8.0, 144.0, 0.25);
  const auto s = build_frame_schedule(spec);
  const auto j = schedule_to_json(s);
  CHECK(j.at("paradigm") == "radial");
  const auto back = schedule_from_json(nlohmann::json::parse(j.dump()));
  REQUIRE(back.frames.size() == s.frames.size());
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    CHECK(back.frames[i].n == s.frames[i].n);
    CHECK(back.frames[i].t_s == s.frames[i].t_s);
    CHECK(back.frames[i].state == s.frames[i].state);
  }
  CHECK_THROWS_AS(parse_paradigm("flicker"), ArgumentError);
}
