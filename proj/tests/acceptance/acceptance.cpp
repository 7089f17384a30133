// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "fwbic/bic_search.hpp"
#include "fwbic/cavity_analytic.hpp"
#include "fwbic/cli_io.hpp"
#include "fwbic/errors.hpp"
#include "fwbic/modematch.hpp"
#include "fwbic/resonance.hpp"

using namespace fwbic;
using std::numbers::pi;

namespace {

const std::string kConfigs = std::string(FWBIC_SOURCE_DIR) + "/configs/";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmtd(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Example runs are shared between criteria so cached eigenbases are reused.
struct Example {
  ValidatedSpec vs;
  std::unique_ptr<ModalProvider> prov;
  std::array<double, 2> band{};
  BicOptions opt;
  std::vector<double> grid;
  std::optional<BicSolution> sol;
  std::string error;

  double n_base() const { return *vs.spec.perturbation.n_base; }
};

Example &example(int which) {
  static std::map<int, std::unique_ptr<Example>> cache;
  auto &e = cache[which];
  if (!e) {
    e = std::make_unique<Example>();
    e->vs = resolve_spec(load_spec(kConfigs + (which == 1 ? "example1.json" : "example2.json")));
    e->prov = make_provider(e->vs);
    e->band = prepare_band(*e->prov);
    e->opt = bic_options(e->vs);
    e->grid = delta_grid(e->vs, e->opt.scan_points);
    try {
      e->sol = find_bic(*e->prov, e->opt, e->grid);
    } catch (const Error &err) {
      e->error = err.what();
    }
  }
  return *e;
}

Outcome bic_criterion(int which, double n_want, double n_tol, double mu_want, double mu_tol) {
  Example &e = example(which);
  if (!e.sol)
    return {false, "find_bic failed: " + e.error};
  const BicSolution &s = *e.sol;
  double n = e.n_base() + s.delta_star;
  bool cert_sigma = s.sigma_min_full < 1e-8 * s.norm_T;
  bool cert_b0 = s.b0_abs < 1e-6 * s.b_norm;
  bool ok = std::abs(n - n_want) <= n_tol && std::abs(s.mu_star - mu_want) <= mu_tol && cert_sigma && cert_b0;
  return {ok, "n*=" + fmtd("%.5f", n) + " mu*=" + fmtd("%.5f", s.mu_star) +
                  " sigma_min/||T||=" + fmtd("%.2e", s.sigma_min_full / s.norm_T) +
                  " |b0|/||b||=" + fmtd("%.2e", s.b0_abs / s.b_norm)};
}

Outcome criterion1() {
  ProblemSpec sp = load_spec(kConfigs + "example1.json");
  ValidatedSpec vs = validate_spec(sp);
  auto w = sp.numerics.crossing_window;
  const int r = 16;
  CrossingResult c1 = detect_crossing(vs, w[0], w[1], 13, r);
  CrossingResult c2 = detect_crossing(vs, w[0], w[1], 13, 2 * r);
  // Second-order Richardson extrapolation.
  double n = c2.n_star + (c2.n_star - c1.n_star) / 3;
  double lam = c2.lambda_star + (c2.lambda_star - c1.lambda_star) / 3;
  bool ok = std::abs(n - 1.461) <= 0.010 && std::abs(lam - 1.695) <= 0.020;
  return {ok, "res " + std::to_string(r) + ": n*=" + fmtd("%.5f", c1.n_star) + " lambda=" +
                  fmtd("%.5f", c1.lambda_star) + "; res " + std::to_string(2 * r) + ": n*=" +
                  fmtd("%.5f", c2.n_star) + " lambda=" + fmtd("%.5f", c2.lambda_star) +
                  "; extrapolated n*=" + fmtd("%.5f", n) + " lambda=" + fmtd("%.5f", lam)};
}

Outcome criterion4() {
  Example &e = example(1);
  if (!e.sol)
    return {false, "needs the example 1 BIC: " + e.error};
  const int M = e.opt.M;
  ResonanceOptions ro;
  ro.band = e.band;
  const double threshold = 1e-8;
  auto tracks = scan_resonances(*e.prov, e.grid, {M - 2, M - 1}, ro, threshold);
  double min_im[2];
  for (int t = 0; t < 2; ++t) {
    min_im[t] = 1e300;
    for (const auto &p : tracks[t].points)
      min_im[t] = std::min(min_im[t], std::abs(p.mu.imag()));
  }
  int narrow = min_im[0] <= min_im[1] ? 0 : 1;
  ResonancePoint best = refine_min_imag(*e.prov, tracks[narrow], e.grid, ro);
  double n_res = e.n_base() + best.delta, n_bic = e.n_base() + e.sol->delta_star;
  bool jump = tracks[0].branch_jump || tracks[1].branch_jump;
  bool ok = tracks[narrow].branch == M - 2 && std::abs(n_res - n_bic) <= 0.005 &&
            min_im[1 - narrow] >= 10 * threshold && !jump;
  return {ok, "narrow branch " + std::to_string(tracks[narrow].branch) + " min|Im|=" +
                  fmtd("%.2e", std::abs(best.mu.imag())) + " at n=" + fmtd("%.5f", n_res) + " (BIC n*=" +
                  fmtd("%.5f", n_bic) + "); other branch min|Im|=" + fmtd("%.2e", min_im[1 - narrow])};
}

Outcome criterion5() {
  Example &e = example(1);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  auto r = e.vs.spec.delta_range;
  ReductionOptions ro;
  ro.M = e.opt.M;
  ro.diagnostics = true;
  double worst_sigma = 1e300, worst_coerc = 1e300;
  int vectors = 0;
  for (int k = 0; k < 50; ++k) {
    double d = r[0] + (r[1] - r[0]) * U(rng);
    double mu = e.band[0] + (e.band[1] - e.band[0]) * U(rng);
    Reduction R = reduce(e.prov->at(d), mu, ro);
    const int n = static_cast<int>(R.B.rows());
    Eigen::MatrixXd IB = Eigen::MatrixXd::Identity(n, n) - R.B;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(IB);
    worst_sigma = std::min(worst_sigma, svd.singularValues()(n - 1));
    for (int t = 0; t < 2; ++t, ++vectors) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i)
        x(i) = N(rng);
      x.normalize();
      worst_coerc = std::min(worst_coerc, x.dot(IB * x) - 1.0);
    }
  }
  bool ok = worst_sigma >= 1 - 1e-10 && worst_coerc >= -1e-10 && vectors == 100;
  return {ok, "min sigma_min(I-B)=" + fmtd("%.12f", worst_sigma) + " over 50 points; min x^T(I-B)x - 1=" +
                  fmtd("%.3e", worst_coerc) + " over " + std::to_string(vectors) + " unit vectors"};
}

const std::vector<double> kSweep = {2 * pi / 9, pi / 9, pi / 18, pi / 36};

// Example 1 geometry at opening width h, sharing the crossing index.
struct Narrow {
  ValidatedSpec vs;
  std::unique_ptr<ModalProvider> prov;
  std::array<double, 2> band{};
};

Narrow narrow_case(double h) {
  Example &e = example(1);
  ProblemSpec sp = e.vs.spec;
  sp.waveguide_width = h;
  sp.mu_band = e.band;
  sp.clear_zone.reset();
  Narrow c;
  c.vs = validate_spec(sp);
  c.prov = make_provider(c.vs);
  c.band = prepare_band(*c.prov);
  return c;
}

Outcome criterion6() {
  Example &e = example(1);
  double d = e.sol ? e.sol->delta_star : 0.0;
  double mu = e.sol ? e.sol->mu_star : 0.5 * (e.band[0] + e.band[1]);
  ReductionOptions ro;
  ro.M = e.opt.M;
  std::vector<double> fmax, gap;
  std::string detail;
  for (double h : kSweep) {
    Narrow c = narrow_case(h);
    ModalSystem s = c.prov->at(d);
    Reduction R = reduce(s, mu, ro);
    fmax.push_back(std::max(std::abs(R.f0), std::abs(R.f1)));
    gap.push_back(std::abs(R.a2(0) / std::sqrt(h) - s.psi_at_o(ro.M - 2)));
    detail += "h=" + fmtd("%.4f", h) + " max|f|=" + fmtd("%.3e", fmax.back()) + " gap=" + fmtd("%.3e", gap.back()) +
              "; ";
  }
  bool mono = true;
  for (size_t k = 1; k < fmax.size(); ++k)
    mono = mono && fmax[k] < fmax[k - 1];
  // Least-squares log-log slope.
  double n = static_cast<double>(kSweep.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t k = 0; k < kSweep.size(); ++k) {
    double a = std::log(kSweep[k]), b = std::log(gap[k]);
    sx += a, sy += b, sxx += a * a, sxy += a * b;
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {mono && slope >= 0.4, detail + "slope=" + fmtd("%.3f", slope)};
}

Outcome criterion7() {
  double worst_lip = 0.0;
  int worst_iter = 0;
  bool bisection = false;
  std::string err;
  auto lip_over = [&](ModalProvider &prov, const std::array<double, 2> &band, const BicOptions &opt,
                      const std::vector<double> &ds) {
    for (double d : ds) {
      ModalSystem s = prov.at(d);
      for (int which : {0, 1})
        worst_lip = std::max(worst_lip, lipschitz_estimate(s, which, band, opt));
    }
  };
  for (int which : {1, 2}) {
    Example &e = example(which);
    auto r = e.vs.spec.delta_range;
    lip_over(*e.prov, e.band, e.opt, {r[0], 0.5 * (r[0] + r[1]), r[1]});
    for (double d : e.grid) {
      ModalSystem s = e.prov->at(d);
      for (int b : {0, 1}) {
        try {
          BranchSolution bs = solve_branch(s, b, e.band, e.opt);
          worst_iter = std::max(worst_iter, bs.iterations);
          bisection = bisection || bs.bisection;
        } catch (const Error &x) {
          err = x.what();
        }
      }
    }
  }
  Example &e1 = example(1);
  double d = e1.sol ? e1.sol->delta_star : 0.0;
  for (double h : kSweep) {
    Narrow c = narrow_case(h);
    lip_over(*c.prov, c.band, e1.opt, {d});
  }
  bool ok = worst_lip < 1.0 && worst_iter <= 30 && !bisection && err.empty();
  return {ok, "max Lipschitz=" + fmtd("%.4f", worst_lip) + " max iterations=" + std::to_string(worst_iter) +
                  (bisection ? " (bisection used)" : "") + (err.empty() ? "" : " error: " + err)};
}

Outcome criterion8() {
  ValidatedSpec vs = validate_spec(homogeneous_rect_spec(2 * pi / 9));
  auto prov = make_provider(vs);
  BicOptions opt = bic_options(vs);
  BicSolution sol = symmetry_bic(*prov, 0.0, -1, opt);
  int m = 0;
  for (int k = 0; k < sol.d.size(); ++k)
    if (std::abs(sol.d(k)) > std::abs(sol.d(m)))
      m = k;
  ResonanceOptions ro;
  double worst = 0.0;
  auto grid = delta_grid(vs, opt.scan_points);
  for (double d : grid) {
    ModalSystem s = prov->at(d);
    ResonancePoint p = find_resonance(s, sol.mu_star, m, ro);
    worst = std::max(worst, std::abs(p.mu.imag()));
  }
  bool ok = sol.sigma_min_full < 1e-8 * sol.norm_T && worst < 1e-10;
  return {ok, "odd branch " + std::to_string(m) + " mu=" + fmtd("%.8f", sol.mu_star) +
                  " sigma_min/||T||=" + fmtd("%.2e", sol.sigma_min_full / sol.norm_T) + "; max |Im| over " +
                  std::to_string(grid.size()) + " deltas=" + fmtd("%.2e", worst)};
}

Outcome criterion9() {
  ProblemSpec sp = homogeneous_rect_spec(2 * pi / 9);
  sp.numerics.model = "fem";
  sp.numerics.resolution = load_spec(kConfigs + "example1.json").numerics.resolution;
  ValidatedSpec vs = validate_spec(sp);
  auto prov = make_provider(vs);
  ModalSystem s = prov->at(0.0);
  const int count = 12, J = 10;
  auto ref = rect_eigenpairs(pi, 2 * pi, count + 4);
  double lam_err = 0.0;
  for (int k = 1; k < count; ++k)
    lam_err = std::max(lam_err, std::abs(s.lambdas(k) - ref[k].lambda) / ref[k].lambda);
  // Overlaps per degenerate cluster through the basis-independent O O^T.
  double ov_err = 0.0;
  for (int a = 0, b = 0; a < count; a = b) {
    b = a + 1;
    while (std::abs(ref[b].lambda - ref[a].lambda) < 1e-9)
      ++b;
    if (b > count)
      break;
    Eigen::MatrixXd Of = s.overlaps.block(0, a, J + 1, b - a);
    Eigen::MatrixXd Oa(J + 1, b - a);
    for (int m = a; m < b; ++m)
      for (int j = 0; j <= J; ++j)
        Oa(j, m - a) = overlap_rect(ref[m], j, vs.h());
    Eigen::MatrixXd Ga = Oa * Oa.transpose(), Gf = Of * Of.transpose();
    // Scaled by the squared trace norm of the cluster over the opening.
    double scale = 0.0;
    for (int m = a; m < b; ++m)
      scale = std::max(scale, std::pow(ref[m].norm_const, 2) * vs.h());
    ov_err = std::max(ov_err, (Gf - Ga).norm() / scale);
  }
  bool ok = lam_err <= 1e-3 && ov_err <= 1e-3;
  return {ok, "resolution " + std::to_string(sp.numerics.resolution) + ": max relative eigenvalue error (k<" +
                  std::to_string(count) + ")=" + fmtd("%.2e", lam_err) + "; max overlap Gram error (j<=" +
                  std::to_string(J) + ")=" + fmtd("%.2e", ov_err)};
}

} // namespace

// Optional arguments select criteria by number.
int main(int argc, char **argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i)
    only.push_back(std::atoi(argv[i]));
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion1},
      {2, [] { return bic_criterion(1, 1.442, 0.015, 1.718, 0.020); }},
      {3, [] { return bic_criterion(2, 1.385, 0.020, 1.771, 0.020); }},
      {4, criterion4},
      {5, criterion5},
      {6, criterion6},
      {7, criterion7},
      {8, criterion8},
      {9, criterion9},
  };
  int failed = 0;
  for (const auto &[k, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), k) == only.end())
      continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s  %s  [%.1f s]\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
