#include <catch_amalgamated.hpp>

#include <numbers>

#include "fwbic/bic_search.hpp"
#include "fwbic/errors.hpp"
#include "fwbic/resonance.hpp"
#include "oracles.hpp"

using namespace fwbic;
using Catch::Approx;
using std::numbers::pi;

namespace {

ValidatedSpec rect_vs() { return validate_spec(homogeneous_rect_spec(2 * pi / 9)); }

BicOptions rect_opt(const ValidatedSpec &vs) {
  BicOptions o = bic_options(vs);
  o.scan_points = 21;
  return o;
}

// Uncoupled system: zero overlaps, no tail.
ModalSystem stub(int mc = 8, int J = 5) {
  ModalSystem s;
  s.h = 2 * pi / 9;
  s.lambdas.resize(mc);
  for (int m = 0; m < mc; ++m)
    s.lambdas(m) = 0.3 * m;
  s.overlaps = Eigen::MatrixXd::Zero(J + 1, mc);
  s.psi_at_o = Eigen::VectorXd::Zero(mc);
  return s;
}

} // namespace

TEST_CASE("uncoupled branch is its eigenvalue after one step") {
  ModalSystem s = stub();
  BicOptions opt;
  opt.M = 5;
  BranchSolution b0 = solve_branch(s, 0, {0.7, 1.3}, opt);
  CHECK(b0.mu == s.lambdas(3));
  CHECK(b0.iterations == 1);
  CHECK_FALSE(b0.bisection);
  BranchSolution b1 = solve_branch(s, 1, {0.7, 1.3}, opt);
  CHECK(b1.mu == s.lambdas(4));
}

TEST_CASE("branch fixed points contract and are continuous in delta") {
  ValidatedSpec vs = rect_vs();
  auto prov = make_provider(vs);
  auto band = prepare_band(*prov);
  BicOptions opt = rect_opt(vs);
  std::vector<double> mu0, lam0, lam1;
  for (int k = 0; k <= 10; ++k) {
    double d = -0.02 + 0.004 * k;
    ModalSystem s = prov->at(d);
    for (int which : {0, 1}) {
      BranchSolution b = solve_branch(s, which, band, opt);
      CHECK_FALSE(b.bisection);
      CHECK(b.iterations <= 30);
      CHECK(b.contraction < 1.0);
      double f = which ? b.red.f1 : b.red.f0;
      CHECK(std::abs(s.lambdas(opt.M - 2 + which) - b.mu + f) < 1e-11);
    }
    mu0.push_back(solve_branch(s, 0, band, opt).mu);
    lam0.push_back(s.lambdas(opt.M - 2));
    lam1.push_back(s.lambdas(opt.M - 1));
  }
  // Steps in mu follow the pair levels plus a small coupling drift.
  for (size_t k = 1; k < mu0.size(); ++k) {
    double dl = std::max(std::abs(lam0[k] - lam0[k - 1]), std::abs(lam1[k] - lam1[k - 1]));
    CHECK(std::abs(mu0[k] - mu0[k - 1]) < 2 * dl + 0.01 * 0.004);
  }
}

TEST_CASE("Friedrich-Wintgen BIC in the scaled rectangle") {
  ValidatedSpec vs = rect_vs();
  auto prov = make_provider(vs);
  BicOptions opt = rect_opt(vs);
  BicSolution sol = find_bic(*prov, opt);

  CHECK(sol.delta_star > vs.spec.delta_range[0]);
  CHECK(sol.delta_star < vs.spec.delta_range[1]);
  CHECK(std::abs(sol.residual0) <= opt.root_tol);
  CHECK(std::abs(sol.residual1) <= 1e-8);
  CHECK(sol.d.norm() == Approx(1.0));
  CHECK(sol.d(opt.M - 2) >= 0);
  CHECK(sol.sigma_min_full < 1e-8 * sol.norm_T);
  CHECK(sol.sigma_min_full < 1e-8);
  CHECK(sol.b0_abs < 1e-8);
  CHECK(sol.b0_abs < 1e-6 * sol.b.cwiseAbs().maxCoeff());
  CHECK(sol.certified());

  // The resonance at the BIC is real.
  ModalSystem s = prov->at(sol.delta_star);
  ResonanceOptions ro;
  ResonancePoint rp = find_resonance(s, sol.mu_star, opt.M - 2, ro);
  CHECK(std::abs(rp.mu.imag()) < 1e-8);
  CHECK(rp.mu.real() == Approx(sol.mu_star).margin(1e-8));

  // Evanescent decay into the waveguide.
  double u0 = std::abs(waveguide_field(s, sol.b, sol.mu_star, 0.0, 0.0));
  double u3 = std::abs(waveguide_field(s, sol.b, sol.mu_star, 3 * s.h, 0.0));
  CHECK(u3 < 1e-3 * u0);

  // The cavity trace projects onto the waveguide amplitudes.
  Eigen::VectorXd zb(s.jwg() + 1);
  zb(0) = 0.0;
  for (int j = 1; j <= s.jwg(); ++j)
    zb(j) = s.scaling * i_alpha(j, s.h, sol.mu_star).real() * sol.b(j).real();
  auto [ys, ws] = oracle::graded_rule(-s.h / 2, s.h / 2);
  std::vector<Point> pts;
  for (double y : ys)
    pts.push_back({0.0, y});
  Eigen::VectorXd uc = prov->cavity_field(sol.delta_star, sol.d, zb, sol.mu_star, pts);
  for (int j = 0; j <= 6; ++j) {
    double proj = 0;
    for (size_t k = 0; k < ys.size(); ++k)
      proj += ws[k] * uc(k) * oracle::waveguide_profile(j, s.h, ys[k]);
    CHECK(std::abs(proj - sol.b(j).real()) < 1e-6 * sol.b.norm());
  }

  // Curves are recorded and change sign at the root.
  REQUIRE(sol.curves.size() >= 2);
  auto field = reconstruct_mode(*prov, sol, 11, 21);
  CHECK(field.size() > 11 * 21);
}

TEST_CASE("interval without a crossing") {
  ProblemSpec sp = homogeneous_rect_spec(2 * pi / 9);
  sp.delta_range = {0.005, 0.015};
  ValidatedSpec vs = validate_spec(sp);
  auto prov = make_provider(vs);
  BicOptions opt = rect_opt(vs);
  std::vector<ScanRow> rows;
  try {
    find_bic(*prov, opt, {}, &rows);
    FAIL("expected NoCrossing");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::NoCrossing);
  }
  CHECK_FALSE(rows.empty());
}

TEST_CASE("symmetry-protected BIC") {
  ValidatedSpec vs = rect_vs();
  SECTION("uncoupled stub returns the eigenvalue") {
    RectProvider prov(vs, provider_options(vs));
    prov.coupling_multiplier = 0.0;
    ModalSystem s = prov.at(0.0);
    CHECK(odd_subsystem_a(s, 1, 0.3) == 0.0);
    BicOptions opt = rect_opt(vs);
    opt.coupling_floor = -1.0;
    BicSolution sol = symmetry_bic(prov, 0.0, 1, opt);
    CHECK(sol.mu_star == s.lambdas(1));
  }
  SECTION("coupled odd mode") {
    auto prov = make_provider(vs);
    BicOptions opt = rect_opt(vs);
    BicSolution sol = symmetry_bic(*prov, 0.0, -1, opt);
    CHECK(sol.sigma_min_full < 1e-8);
    CHECK(sol.sigma_min_full < 1e-8 * sol.norm_T);
    CHECK(sol.b0_abs < 1e-12);
    ModalSystem s = prov->at(0.0);
    CHECK(sol.mu_star > s.lambdas(1)); // evanescent coupling raises the level
    ResonanceOptions ro;
    ResonancePoint rp = find_resonance(s, sol.mu_star, 1, ro);
    CHECK(std::abs(rp.mu.imag()) < 1e-10);
  }
  SECTION("asymmetric structure is rejected") {
    ProblemSpec sp = homogeneous_rect_spec(2 * pi / 9);
    sp.cavity_corner_hi.x2 = 2.0;
    ValidatedSpec v2 = validate_spec(sp);
    auto prov = make_provider(v2);
    try {
      symmetry_bic(*prov, 0.0, -1, rect_opt(v2));
      FAIL("expected ParityViolation");
    } catch (const Error &e) {
      CHECK(e.kind() == ErrorKind::ParityViolation);
    }
  }
}
