// Effective small parameter, catalog residuals, exact-solution transcription.

#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "tsnn/problem.hpp"

using namespace tsnn;

namespace {

// Residual evaluated on plain doubles.
std::vector<double> resid(const ProblemSpec& p, double tau, std::vector<double> u,
                          std::vector<double> du, std::vector<double> ddu = {}) {
  if (ddu.empty()) ddu.assign(p.n, 0.0);
  std::vector<double> out(p.n);
  p.residual<double>()(tau, u, du, ddu, out);
  return out;
}

}  // namespace

// ===== effective epsilon =====

TEST(EffectiveEps, SingleParameterPassesThrough) {
  const std::array<double, 1> e = {3.7e-4};
  EXPECT_DOUBLE_EQ(effective_epsilon(e), 3.7e-4);
}

TEST(EffectiveEps, ThreeScaleValues) {
  // (1e-1, eps2, 1e-2) swept over the recovery-scale values used in the
  // experiments; expected numbers to three significant figures.
  const std::array<std::pair<double, double>, 6> cases = {{
      {1e-2, 2.15e-2},
      {2.5e-3, 1.36e-2},
      {1.25e-3, 1.08e-2},
      {6.25e-4, 8.55e-3},
      {3.125e-4, 6.79e-3},
      {2.5e-4, 6.30e-3},
  }};
  for (const auto& [eps2, expected] : cases) {
    const std::array<double, 3> e = {1e-1, eps2, 1e-2};
    EXPECT_NEAR(effective_epsilon(e), expected, 5e-3 * expected);
  }
}

TEST(EffectiveEps, RobertsonCoefficientVector) {
  // Derivative coefficients (eps1/eps2, eps1); their geometric mean is
  // eps1/sqrt(eps2) = 4e-2/sqrt(k2).
  const auto p10 = robertson_reduced(10.0);
  ASSERT_EQ(p10.eps_vec.size(), 2u);
  EXPECT_NEAR(p10.eps_vec[0], 4e-2, 1e-15);
  EXPECT_NEAR(p10.eps_vec[1], 4e-3, 1e-15);
  EXPECT_NEAR(effective_epsilon(p10.eps_vec), 1.26e-2, 5e-3 * 1.26e-2);
  EXPECT_NEAR(effective_epsilon(robertson_reduced(50.0).eps_vec), 5.66e-3, 5e-3 * 5.66e-3);
  EXPECT_NEAR(effective_epsilon(robertson_reduced(60.0).eps_vec), 5.16e-3, 5e-3 * 5.16e-3);
  EXPECT_NEAR(effective_epsilon(robertson_reduced(100.0).eps_vec), 4.00e-3, 5e-3 * 4.00e-3);
}

TEST(EffectiveEps, RejectsDegenerateInput) {
  EXPECT_THROW(effective_epsilon({}), ConfigError);
  const std::array<double, 2> bad = {1e-2, 0.0};
  EXPECT_THROW(effective_epsilon(bad), ConfigError);
  const std::array<double, 2> neg = {1e-2, -1e-3};
  EXPECT_THROW(effective_epsilon(neg), ConfigError);
}

TEST(EffectiveEps, PolicyModes) {
  const auto p = robertson_reduced(10.0);
  EffectiveEpsilon geo;
  EXPECT_NEAR(geo.resolve(p.eps_vec), 1.2649e-2, 1e-5);
  EffectiveEpsilon sm{EffectiveEpsilon::Mode::Smallest};
  EXPECT_DOUBLE_EQ(sm.resolve(p.eps_vec), 4e-3);
  EffectiveEpsilon fx{EffectiveEpsilon::Mode::Fixed, 7e-3};
  EXPECT_DOUBLE_EQ(fx.resolve(p.eps_vec), 7e-3);
  EffectiveEpsilon bad{EffectiveEpsilon::Mode::Fixed, 0.0};
  EXPECT_THROW(bad.resolve(p.eps_vec), ConfigError);
}

// ===== residual arithmetic spot checks =====

TEST(Problems, MichaelisMentenResidual) {
  const auto p = michaelis_menten(1e-2);
  const auto r = resid(p, 0.3, {0.8, 0.3}, {-0.5, 2.0});
  EXPECT_NEAR(r[0], -0.24, 1e-14);
  EXPECT_NEAR(r[1], 0.06, 1e-14);
  EXPECT_EQ(p.conditions.size(), 2u);
  EXPECT_EQ(p.conditions[0].value, 1.0);
  EXPECT_EQ(p.conditions[1].value, 0.0);
}

TEST(Problems, RobertsonResidual) {
  const auto p = robertson_reduced(10.0);
  const auto r = resid(p, 0.0, {0.1, 0.2}, {1.5, -0.7});
  EXPECT_NEAR(r[0], 0.152, 1e-14);
  EXPECT_NEAR(r[1], -0.0128, 1e-14);
}

TEST(Problems, FitzHughNagumoResidual) {
  const auto p = fitzhugh_nagumo(1e-2);
  const auto r = resid(p, 0.0, {1.5, 0.0, 0.2}, {2.0, 1.0, -1.0});
  EXPECT_NEAR(r[0], 0.025, 1e-14);
  EXPECT_NEAR(r[1], -1.49, 1e-14);
  EXPECT_NEAR(r[2], -1.31, 1e-14);
  ASSERT_EQ(p.eps_vec.size(), 3u);
  EXPECT_DOUBLE_EQ(p.eps_vec[0], 1e-1);
  EXPECT_DOUBLE_EQ(p.eps_vec[1], 1e-2);
  EXPECT_DOUBLE_EQ(p.eps_vec[2], 1e-2);
}

// ===== linear BVP: manufactured forcing against the closed form =====

TEST(Problems, LinearBvpExactSolutionSatisfiesBoundaryConditions) {
  for (double eps : {1e-1, 1e-3}) {
    const auto p = linear_bvp(eps);
    std::vector<double> out(2);
    p.exact(0.0, out);
    EXPECT_NEAR(out[0], 0.0, 1e-12);
    EXPECT_NEAR(out[1], 0.0, 1e-12);
    p.exact(1.0, out);
    EXPECT_NEAR(out[0], 0.0, 1e-12);
    EXPECT_NEAR(out[1], 0.0, 1e-12);
  }
}

// The forcing terms are transcribed independently of the closed form;
// plugging the exact solution's jets into the residual must give ~0. This is
// the transcription oracle for both.
TEST(Problems, LinearBvpResidualVanishesOnExactSolution) {
  const double eps = 1e-1;
  const auto p = linear_bvp(eps);
  for (int i = 1; i <= 9; ++i) {
    const double tau = i / 10.0;
    const auto s = detail::linear_bvp_solution(eps, lift_input(tau));
    const auto r = resid(p, tau, {s[0].v, s[1].v}, {s[0].d1, s[1].d1}, {s[0].d2, s[1].d2});
    EXPECT_NEAR(r[0], 0.0, 1e-8) << "tau=" << tau;
    EXPECT_NEAR(r[1], 0.0, 1e-8) << "tau=" << tau;
  }
}

TEST(Problems, LinearBvpResidualStillVanishesAtSmallerEps) {
  const double eps = 1e-2;
  const auto p = linear_bvp(eps);
  for (double tau : {0.005, 0.02, 0.3, 0.7, 0.995}) {
    const auto s = detail::linear_bvp_solution(eps, lift_input(tau));
    const auto r = resid(p, tau, {s[0].v, s[1].v}, {s[0].d1, s[1].d1}, {s[0].d2, s[1].d2});
    EXPECT_NEAR(r[0], 0.0, 1e-6) << "tau=" << tau;
    EXPECT_NEAR(r[1], 0.0, 1e-6) << "tau=" << tau;
  }
}

// ===== jet instantiation consistency =====

TEST(Problems, JetResidualValueSlotMatchesDoubles) {
  const auto p = fitzhugh_nagumo(2.5e-3);
  const double tau = 0.42;
  std::vector<double> u = {0.9, -0.4, 0.1}, du = {1.2, 0.3, -2.0}, dd(3, 0.0);
  std::vector<Jet2> uj, duj, ddj(3);
  for (double x : u) uj.push_back(lift_constant(x));
  for (double x : du) duj.push_back(lift_constant(x));
  std::vector<double> rd(3);
  std::vector<Jet2> rj(3);
  p.residual<double>()(tau, u, du, dd, rd);
  p.residual<Jet2>()(lift_constant(tau), uj, duj, ddj, rj);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(rj[i].v, rd[i]);
}

// ===== registry =====

TEST(Problems, CatalogListsAllFour) {
  const auto cat = problem_catalog();
  ASSERT_EQ(cat.size(), 4u);
  bool robertson_ok = false, fhn_ok = false;
  for (const auto& info : cat) {
    if (info.name == "robertson") robertson_ok = info.n == 2;
    if (info.name == "fhn") fhn_ok = info.n == 3;
  }
  EXPECT_TRUE(robertson_ok);
  EXPECT_TRUE(fhn_ok);
}

TEST(Problems, MakeProblemByName) {
  const auto p = make_problem("fhn", {{"eps2", 1.25e-3}});
  EXPECT_EQ(p.name, "fhn");
  EXPECT_DOUBLE_EQ(p.eps_vec[1], 1.25e-3);
  const auto q = make_problem("mm-ivp", {{"eps", 1e-2}, {"k", 3.0}});
  EXPECT_DOUBLE_EQ(q.params.at("k"), 3.0);

  EXPECT_THROW(make_problem("unknown", {}), ConfigError);
  EXPECT_THROW(make_problem("mm-ivp", {}), ConfigError);  // missing eps
  EXPECT_THROW(make_problem("fhn", {{"eps2", 1e-3}, {"bogus", 1.0}}), ConfigError);
  EXPECT_THROW(make_problem("robertson", {{"k2", -5.0}}), ConfigError);
}
