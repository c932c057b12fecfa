#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "ssvep/stats.hpp"

using namespace ssvep;
using namespace ssvep::stats;

namespace {

Eigen::MatrixXd random_design(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double subj = 3.0 * nd(gen);
    for (Eigen::Index j = 0; j < k; ++j) m(i, j) = subj + 0.4 * static_cast<double>(j) + nd(gen);
  }
  return m;
}

}  // namespace

TEST_CASE("F, t and beta functions match reference values") {
  // Reference values from an established scientific library.
  const std::vector<std::array<double, 4>> f_ref{
      {0.5, 1, 2, 0.44721359549995804},  {3.0, 1, 2, 0.7745966692414836},   {3.29, 6, 78, 0.9938569654309795},
      {1.0, 2, 12, 0.6034305433960339},  {2.5, 3, 30, 0.9215260420853613},   {0.2, 4, 10, 0.06734895221300492},
      {5.0, 2, 5, 0.9358499700900416},   {1.7, 6, 78, 0.8678836293212429},   {10.0, 1, 13, 0.9925075735824086},
      {0.05, 3, 3, 0.017386670470187163}};
  for (const auto& [x, d1, d2, cdf] : f_ref) {
    CHECK(f_cdf(x, d1, d2) == Catch::Approx(cdf).margin(1e-6));
    CHECK(f_sf(x, d1, d2) == Catch::Approx(1.0 - cdf).margin(1e-6));
  }
  const std::vector<std::array<double, 3>> t_ref{
      {2.449489742783178, 3, 0.9541394433442141}, {-2.87, 13, 0.00657155991363861}, {0.0, 5, 0.5},
      {1.0, 1, 0.7500000000000002},               {-1.5, 2, 0.13619656244550046},   {3.0, 10, 0.9933281724887152},
      {0.3, 30, 0.6168769473578236},              {-0.7, 7, 0.2532587760977999},    {2.0, 100, 0.9758939106344332},
      {5.0, 4, 0.9962547830593628}};
  for (const auto& [t, df, cdf] : t_ref) CHECK(t_cdf(t, df) == Catch::Approx(cdf).margin(1e-6));
  const std::vector<std::array<double, 4>> b_ref{{0.5, 0.5, 0.3, 0.36901011956554536},
                                                 {2, 3, 0.4, 0.5247999999999999},
                                                 {10, 1.5, 0.9, 0.5401970065018546},
                                                 {0.1, 5, 0.01, 0.7690889207843462},
                                                 {30, 40, 0.45, 0.6447480085585666}};
  for (const auto& [a, b, x, v] : b_ref) CHECK(incomplete_beta(a, b, x) == Catch::Approx(v).margin(1e-10));
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
  CHECK(f_cdf(0.0, 3, 4) == 0.0);
  CHECK(t_two_sided_p(0.0, 4) == Catch::Approx(1.0));
}

TEST_CASE("t with one and two degrees of freedom follows closed forms") {
  for (double t : {-4.0, -1.3, -0.2, 0.5, 2.0, 7.5}) {
    CHECK(t_cdf(t, 1) == Catch::Approx(0.5 + std::atan(t) / std::numbers::pi).margin(1e-12));
    CHECK(t_cdf(t, 2) == Catch::Approx(0.5 + t / (2.0 * std::sqrt(2.0 + t * t))).margin(1e-12));
  }
}

TEST_CASE("rm_anova degrees of freedom for 14 subjects and 7 conditions") {
  const auto r = rm_anova(random_design(14, 7, 1));
  CHECK(r.df1 == 6);
  CHECK(r.df2 == 78);
  CHECK(r.F >= 0.0);
  CHECK(r.p >= 0.0);
  CHECK(r.p <= 1.0);
  CHECK(r.eta_sq_partial >= 0.0);
  CHECK(r.eta_sq_partial <= 1.0);
}

TEST_CASE("rm_anova on the hand-computed 3×2 example") {
  Eigen::MatrixXd d(3, 2);
  d << 1, 2, 2, 4, 3, 3;
  const auto r = rm_anova(d);
  CHECK(r.ss_condition == Catch::Approx(1.5).epsilon(1e-12));
  CHECK(r.ss_error == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(r.ss_subject == Catch::Approx(3.0).epsilon(1e-12));
  CHECK(r.ss_total == Catch::Approx(5.5).epsilon(1e-12));
  CHECK(r.F == Catch::Approx(3.0).epsilon(1e-12));
  CHECK(r.df1 == 1);
  CHECK(r.df2 == 2);
  // p = P(|t₂| ≥ √3) = 1 − √3/√5 in closed form.
  CHECK(r.p == Catch::Approx(1.0 - std::sqrt(3.0 / 5.0)).margin(1e-9));
  CHECK(r.p == Catch::Approx(0.225).margin(1e-3));
  CHECK(r.eta_sq_partial == Catch::Approx(0.6));
}

TEST_CASE("rm_anova sum-of-squares decomposition") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = rm_anova(random_design(5 + static_cast<Eigen::Index>(seed), 3 + static_cast<Eigen::Index>(seed % 4), seed));
    CHECK(r.ss_subject + r.ss_condition + r.ss_error == Catch::Approx(r.ss_total).epsilon(1e-12));
  }
}

TEST_CASE("rm_anova errors") {
  CHECK_THROWS_AS(rm_anova(Eigen::MatrixXd::Constant(4, 3, 2.5)), DegenerateError);
  CHECK_THROWS_AS(rm_anova(Eigen::MatrixXd::Zero(1, 3)), ArgumentError);
  CHECK_THROWS_AS(rm_anova(Eigen::MatrixXd::Zero(4, 1)), ArgumentError);
  Eigen::MatrixXd nan = random_design(4, 3, 2);
  nan(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(rm_anova(nan), ArgumentError);
  // Purely additive subject and condition effects leave no error term.
  Eigen::MatrixXd additive(3, 3);
  additive << 1, 2, 3, 11, 12, 13, 5, 6, 7;
  CHECK_THROWS_AS(rm_anova(additive), DegenerateError);
}

TEST_CASE("rm_anova invariances") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto d = random_design(10, 4, seed + 100);
    const auto base = rm_anova(d);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 20.0);
    Eigen::MatrixXd shifted = d;
    for (Eigen::Index i = 0; i < d.rows(); ++i) shifted.row(i).array() += nd(gen);
    CHECK(rm_anova(shifted).F == Catch::Approx(base.F).epsilon(1e-9));
    const Eigen::MatrixXd affine = (3.7 * d.array() - 12.0).matrix();
    CHECK(rm_anova(affine).F == Catch::Approx(base.F).epsilon(1e-9));
    CHECK(rm_anova(affine).p == Catch::Approx(base.p).epsilon(1e-9));
  }
}

TEST_CASE("Holm adjustment") {
  const auto a = holm_adjust({0.01, 0.04});
  CHECK(a[0] == Catch::Approx(0.02).epsilon(1e-15));
  CHECK(a[1] == Catch::Approx(0.04).epsilon(1e-15));
  const auto b = holm_adjust({0.01, 0.01, 0.30});
  CHECK(b[0] == Catch::Approx(0.03).epsilon(1e-15));
  CHECK(b[1] == Catch::Approx(0.03).epsilon(1e-15));
  CHECK(b[2] == Catch::Approx(0.30).epsilon(1e-15));
  // Input order preserved; monotone step-down; cap at 1.
  const auto c = holm_adjust({0.30, 0.01, 0.04, 0.5});
  CHECK(c[1] == Catch::Approx(0.04));
  CHECK(c[2] == Catch::Approx(0.12));
  CHECK(c[0] == Catch::Approx(0.6));
  CHECK(c[3] == Catch::Approx(0.6));
  CHECK(holm_adjust({0.6, 0.7})[0] == 1.0);
  CHECK(holm_adjust({}).empty());
  CHECK_THROWS_AS(holm_adjust({0.1, 1.2}), ArgumentError);
  CHECK_THROWS_AS(holm_adjust({-0.1}), ArgumentError);
}

TEST_CASE("Holm is element-wise at least raw and permutation-equivariant") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> ud(0.0, 0.2);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> p(7);
    for (auto& v : p) v = ud(gen);
    const auto adj = holm_adjust(p);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(adj[i] >= p[i]);
    std::vector<std::size_t> perm(p.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<double> pp(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) pp[i] = p[perm[i]];
    const auto adj2 = holm_adjust(pp);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(adj2[i] == adj[perm[i]]);
  }
}

TEST_CASE("paired t-test") {
  const auto r = paired_t({3, 5, 7, 4}, {2, 5, 5, 3});  // differences 1, 0, 2, 1
  CHECK(r.mean_diff == Catch::Approx(1.0));
  CHECK(r.sd_diff == Catch::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(r.t == Catch::Approx(2.449489742783178).epsilon(1e-12));
  CHECK(r.df == 3);
  CHECK(r.p == Catch::Approx(0.09172111331157187).margin(1e-9));
  CHECK(r.cohen_d == Catch::Approx(1.0 / std::sqrt(2.0 / 3.0)));

  const auto flipped = paired_t({2, 5, 5, 3}, {3, 5, 7, 4});
  CHECK(flipped.t == -r.t);
  CHECK(flipped.cohen_d == -r.cohen_d);
  CHECK(flipped.p == r.p);

  CHECK_THROWS_AS(paired_t({1, 2, 3}, {1, 2, 3}), DegenerateError);
  CHECK_THROWS_AS(paired_t({1, 2, 3}, {0, 1, 2}), DegenerateError);
  CHECK_THROWS_AS(paired_t({1}, {2}), ArgumentError);
  CHECK_THROWS_AS(paired_t({1, 2}, {2}), ArgumentError);
}

TEST_CASE("VAS-F scoring") {
  const auto s = score_vasf(std::vector<double>(18, 5.0));
  CHECK(s.fatigue == 5.0);
  CHECK(s.energy == 5.0);
  CHECK_FALSE(s.baseline_corrected);

  const auto base = score_vasf(std::vector<double>(18, 4.0));
  const auto corr = score_vasf(std::vector<double>(18, 5.0), base);
  CHECK(corr.fatigue == 1.0);
  CHECK(corr.baseline_corrected);

  // One-point shifts on eight fatigue items land on the 1/13 grid.
  std::vector<double> items(18, 4.0);
  for (int i = 0; i < 8; ++i) items[static_cast<std::size_t>(i)] = 5.0;
  const auto grid = score_vasf(items, base);
  CHECK(grid.fatigue == Catch::Approx(8.0 / 13.0));
  CHECK(std::round(grid.fatigue * 1e4) / 1e4 == 0.6154);
  CHECK(grid.energy == 0.0);

  std::vector<double> split(18, 0.0);
  for (int i = 13; i < 18; ++i) split[static_cast<std::size_t>(i)] = 10.0;
  CHECK(score_vasf(split).fatigue == 0.0);
  CHECK(score_vasf(split).energy == 10.0);

  CHECK_THROWS_AS(score_vasf(std::vector<double>(17, 1.0)), ArgumentError);
  VasfPartition bad = VasfPartition::standard();
  bad.energy_items.pop_back();
  CHECK_THROWS_AS(score_vasf(std::vector<double>(18, 1.0), std::nullopt, bad), ArgumentError);
  VasfPartition custom;
  for (int i = 0; i < 18; ++i) (i % 18 < 5 ? custom.energy_items : custom.fatigue_items).push_back(i);
  CHECK(score_vasf(split, std::nullopt, custom).fatigue == Catch::Approx(50.0 / 13.0));
}

TEST_CASE("mean and standard error") {
  const auto m = mean_se({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.se == Catch::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(mean_se({7.0}).se == 0.0);
  CHECK_THROWS_AS(mean_se({}), ArgumentError);
}
