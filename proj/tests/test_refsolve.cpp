// Field extraction, RK4 and Radau IIA convergence, stiff completion, dense
// output.

#include <gtest/gtest.h>

#include <cmath>

#include "tsnn/problem.hpp"
#include "tsnn/refsolve.hpp"

using namespace tsnn;

namespace {

OdeField scalar_field(std::function<double(double, double)> f) {
  OdeField field;
  field.n = 1;
  field.f = [f](double t, std::span<const double> u, std::span<double> du) {
    du[0] = f(t, u[0]);
  };
  return field;
}

double endpoint(const GridSolution& g, int c = 0) {
  return g.y[(g.t.size() - 1) * g.n + c];
}

}  // namespace

// ===== field extraction =====

TEST(OdeField, ExtractsExplicitFormFromResidual) {
  const double eps = 1e-2, lambda = 1.0, k = 2.0;
  const auto field = OdeField::from_problem(michaelis_menten(eps, lambda, k));
  ASSERT_EQ(field.n, 2);
  std::vector<double> u = {0.8, 0.3}, du(2);
  field.f(0.4, u, du);
  EXPECT_NEAR(du[0], -u[0] + (u[0] + k - lambda) * u[1], 1e-13);
  EXPECT_NEAR(du[1], (u[0] - (u[0] + k) * u[1]) / eps, 1e-10);
}

TEST(OdeField, RejectsSecondOrderProblems) {
  EXPECT_THROW(OdeField::from_problem(linear_bvp(1e-1)), ConfigError);
}

TEST(OdeField, FiniteDifferenceJacobian) {
  const auto field = OdeField::from_problem(fitzhugh_nagumo(1e-2));
  std::vector<double> u = {1.2, 0.1, 0.3}, jac;
  field.eval_jacobian(0.0, u, jac);
  // eps1 v' = v - v^3/3 - z - w: row 0 of J is (1 - v^2, -1, -1)/eps1.
  EXPECT_NEAR(jac[0], (1.0 - u[0] * u[0]) / 1e-1, 1e-4);
  EXPECT_NEAR(jac[1], -1.0 / 1e-1, 1e-5);
  EXPECT_NEAR(jac[2], -1.0 / 1e-1, 1e-5);
  EXPECT_NEAR(jac[3 + 0], 1.0 / 1e-2, 1e-3);  // z' row: (1, -0.5, 0)/eps2
  EXPECT_NEAR(jac[3 + 1], -0.5 / 1e-2, 1e-4);
}

// ===== RK4 =====

TEST(Rk4, DecayEndpointAccuracy) {
  const auto field = scalar_field([](double, double u) { return -u; });
  const std::vector<double> u0 = {1.0};
  const auto g = rk4_solve(field, u0, 1e-3);
  EXPECT_NEAR(endpoint(g), std::exp(-1.0), 1e-11);
  EXPECT_EQ(g.t.size(), 1001u);
  EXPECT_EQ(g.t.back(), 1.0);
}

TEST(Rk4, FourthOrderConvergence) {
  // u' = u cos t, u(1) = e^{sin 1}; nonlinear enough to exercise all stages.
  const auto field = scalar_field([](double t, double u) { return u * std::cos(t); });
  const std::vector<double> u0 = {1.0};
  const double exact = std::exp(std::sin(1.0));
  double errs[3];
  const double hs[3] = {1e-2, 5e-3, 2.5e-3};
  for (int i = 0; i < 3; ++i)
    errs[i] = std::abs(endpoint(rk4_solve(field, u0, hs[i])) - exact);
  const double p1 = std::log2(errs[0] / errs[1]);
  const double p2 = std::log2(errs[1] / errs[2]);
  EXPECT_NEAR(p1, 4.0, 0.2);
  EXPECT_NEAR(p2, 4.0, 0.2);
  EXPECT_NEAR(errs[0] / errs[1], 16.0, 3.0);
}

TEST(Rk4, ShortFinalStepCoversInterval) {
  const auto field = scalar_field([](double, double u) { return -u; });
  const std::vector<double> u0 = {1.0};
  const auto g = rk4_solve(field, u0, 3e-3);  // 1/h is not an integer
  EXPECT_EQ(g.t.back(), 1.0);
  EXPECT_NEAR(endpoint(g), std::exp(-1.0), 1e-10);
}

TEST(Rk4, BlowupRaisesSolverError) {
  const auto field = scalar_field([](double, double u) { return u * u; });
  const std::vector<double> u0 = {2.0};  // finite-time blowup at t = 0.5
  EXPECT_THROW(rk4_solve(field, u0, 1e-3), SolverError);
}

// ===== Radau IIA =====

TEST(Radau, Gamma0IsEigenvalueOfButcherMatrix) {
  const auto& tab = detail::radau_tableau();
  const double g = tab.gamma0;
  double m[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i * 3 + j] = tab.a[i][j] - (i == j ? g : 0.0);
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) -
                     m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  EXPECT_NEAR(det, 0.0, 1e-12);
  // Row sums of A reproduce the abscissae; stage 3 is the right endpoint.
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(tab.a[i][0] + tab.a[i][1] + tab.a[i][2], tab.c[i], 1e-14);
  EXPECT_EQ(tab.c[2], 1.0);
}

TEST(Radau, MatchesRk4OnNonStiffProblem) {
  const auto field = scalar_field([](double, double u) { return -u; });
  const std::vector<double> u0 = {1.0};
  const auto gr = radau5_solve(field, u0);
  const auto gk = rk4_solve(field, u0, 1e-4);
  EXPECT_NEAR(endpoint(gr), endpoint(gk), 1e-9);
  EXPECT_NEAR(endpoint(gr), std::exp(-1.0), 1e-9);
}

TEST(Radau, FifthOrderConvergence) {
  // Same field as the RK4 order probe; fixed steps expose the method order.
  const auto field = scalar_field([](double t, double u) { return u * std::cos(t); });
  const std::vector<double> u0 = {1.0};
  const double exact = std::exp(std::sin(1.0));
  double errs[3];
  const double hs[3] = {0.2, 0.1, 0.05};
  for (int i = 0; i < 3; ++i)
    errs[i] = std::abs(endpoint(radau5_solve_fixed(field, u0, hs[i])) - exact);
  const double p1 = std::log2(errs[0] / errs[1]);
  const double p2 = std::log2(errs[1] / errs[2]);
  EXPECT_NEAR(p1, 5.0, 0.3);
  EXPECT_NEAR(p2, 5.0, 0.3);
}

TEST(Radau, CompletesStiffChemicalKinetics) {
  const auto field = OdeField::from_problem(robertson_reduced(100.0));
  const std::vector<double> u0 = {0.0, 0.0};
  const auto g = radau5_solve(field, u0);
  EXPECT_EQ(g.t.back(), 1.0);
  const double y = endpoint(g, 0), z = endpoint(g, 1);
  EXPECT_TRUE(std::isfinite(y) && std::isfinite(z));
  EXPECT_GT(y, 0.0);
  EXPECT_GT(z, 0.0);
  EXPECT_LT(y + z, 1.0);  // x + y + z = 1 with x > 0
}

TEST(Radau, CompletesThreeScaleExcitableSystem) {
  const auto field = OdeField::from_problem(fitzhugh_nagumo(2.5e-4));
  const std::vector<double> u0 = {1.5, 0.0, 0.2};
  const auto g = radau5_solve(field, u0);
  EXPECT_EQ(g.t.back(), 1.0);
  for (std::size_t i = 0; i < g.t.size(); ++i)
    ASSERT_LT(std::abs(g.y[i * 3]), 2.5) << "v out of range at t=" << g.t[i];
}

TEST(Radau, AgreesWithRk4OnEnzymeKinetics) {
  const auto field = OdeField::from_problem(michaelis_menten(1e-2));
  const std::vector<double> u0 = {1.0, 0.0};
  const auto gr = radau5_solve(field, u0);
  const auto gk = rk4_solve(field, u0, 1e-5);
  std::vector<double> probe;
  for (int i = 0; i <= 100; ++i) probe.push_back(i / 100.0);
  const auto sr = sample_at(gr, probe);
  const auto sk = sample_at(gk, probe);
  double worst = 0.0;
  for (std::size_t i = 0; i < sr.size(); ++i)
    worst = std::max(worst, std::abs(sr[i] - sk[i]));
  EXPECT_LT(worst, 1e-8);
}

TEST(Radau, StallRaisesSolverErrorWithTime) {
  const auto field = scalar_field([](double, double u) { return u * u; });
  const std::vector<double> u0 = {2.0};  // blowup at t = 0.5
  try {
    radau5_solve(field, u0);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("t = 0.49"), std::string::npos) << msg;
  }
}

// ===== dense output =====

TEST(GridSolution, HermiteIsExactAtNodesAndOnCubics) {
  GridSolution g;
  g.n = 1;
  for (int i = 0; i <= 10; ++i) {
    const double t = i / 10.0;
    g.t.push_back(t);
    g.y.push_back(t * t * t - 0.5 * t);
    g.dy.push_back(3.0 * t * t - 0.5);
  }
  const std::vector<double> at_nodes = {0.3, 0.7};
  const auto sn = sample_at(g, at_nodes);
  EXPECT_EQ(sn[0], g.y[3]);
  EXPECT_EQ(sn[1], g.y[7]);
  const std::vector<double> between = {0.123, 0.456, 0.789};
  const auto sb = sample_at(g, between);
  for (std::size_t i = 0; i < between.size(); ++i) {
    const double t = between[i];
    EXPECT_NEAR(sb[i], t * t * t - 0.5 * t, 1e-14);
  }
}

TEST(GridSolution, SampleOutsideDomainIsRejected) {
  GridSolution g;
  g.n = 1;
  g.t = {0.0, 1.0};
  g.y = {0.0, 1.0};
  g.dy = {1.0, 1.0};
  const std::vector<double> bad = {1.5};
  EXPECT_THROW(sample_at(g, bad), ConfigError);
}

TEST(GridSolution, RadauDenseOutputStaysAccurate) {
  const auto field = scalar_field([](double, double u) { return -u; });
  const std::vector<double> u0 = {1.0};
  const auto g = radau5_solve(field, u0);
  std::vector<double> probe;
  for (int i = 0; i <= 1000; ++i) probe.push_back(i / 1000.0);
  const auto s = sample_at(g, probe);
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i)
    worst = std::max(worst, std::abs(s[i] - std::exp(-probe[i])));
  EXPECT_LT(worst, 1e-9);
}

TEST(ExactBvp, MatchesProblemClosedForm) {
  const double eps = 1e-3;
  std::vector<double> times;
  for (int i = 0; i <= 50; ++i) times.push_back(i / 50.0);
  const auto g = exact_bvp(eps, times);
  const auto p = linear_bvp(eps);
  std::vector<double> out(2);
  for (std::size_t i = 0; i < times.size(); ++i) {
    p.exact(times[i], out);
    EXPECT_EQ(g.y[i * 2], out[0]);
    EXPECT_EQ(g.y[i * 2 + 1], out[1]);
  }
  EXPECT_NEAR(g.y[0], 0.0, 1e-12);
  EXPECT_NEAR(g.y[(times.size() - 1) * 2], 0.0, 1e-12);
}
