#include "fwbic/bic_search.hpp"

#include <algorithm>
#include <cmath>

#include "fwbic/errors.hpp"

namespace fwbic {

BicOptions bic_options(const ValidatedSpec &vs) {
  const auto &s = vs.spec;
  BicOptions o;
  o.M = s.truncation.M;
  o.scan_points = s.numerics.scan_points;
  o.refine = s.numerics.refine;
  o.fixed_point_tol = s.tolerances.fixed_point_tol;
  o.root_tol = s.tolerances.root_tol;
  o.coupling_floor = vs.coupling_floor();
  return o;
}

std::array<double, 2> prepare_band(ModalProvider &prov) {
  const auto &vs = prov.spec();
  std::array<double, 2> band;
  if (vs.spec.mu_band) {
    band = *vs.spec.mu_band;
  } else {
    // Intersection of the default bands at both ends of the sweep; the
    // crossing itself (delta near 0) is avoided as the first tracked point.
    const int M = prov.options().M;
    auto r = vs.spec.delta_range;
    auto b0 = default_mu_band(prov.at(r[0]).lambdas, M);
    auto b1 = default_mu_band(prov.at(r[1]).lambdas, M);
    band = {std::max(b0[0], b1[0]), std::min(b0[1], b1[1])};
    if (!(band[0] < band[1]))
      throw Error(ErrorKind::BandViolation, "bic_search", "empty mu band over the sweep");
  }
  if (prov.options().tail) {
    double w = band[1] - band[0];
    auto cur = prov.options().tail_window;
    if (!cur || (*cur)[0] > band[0] || (*cur)[1] < band[1])
      prov.set_tail_window(band[0] - 0.5 * w, band[1] + 0.5 * w);
  }
  return band;
}

namespace {

ReductionOptions red_options(const BicOptions &opt) {
  ReductionOptions r;
  r.M = opt.M;
  r.coupling_floor = opt.coupling_floor;
  return r;
}

double branch_f(const Reduction &r, int which) { return which == 0 ? r.f0 : r.f1; }

} // namespace

BranchSolution solve_branch(const ModalSystem &s, int which, const std::array<double, 2> &band,
                            const BicOptions &opt) {
  const ReductionOptions ro = red_options(opt);
  const double lam = s.lambdas(opt.M - 2 + which);
  BranchSolution out;
  double mu = std::clamp(lam, band[0], band[1]);
  double prev_gap = -1.0;
  bool escaped = false;
  for (int k = 1; k <= opt.max_iter; ++k) {
    Reduction r = reduce(s, mu, ro);
    double next = lam + branch_f(r, which);
    double gap = std::abs(next - mu);
    out.iterations = k;
    if (prev_gap > 1e3 * opt.fixed_point_tol)
      out.contraction = std::max(out.contraction, gap / prev_gap);
    prev_gap = gap;
    if (!std::isfinite(next) || next < band[0] || next > band[1]) {
      escaped = true;
      break;
    }
    mu = next;
    if (gap < opt.fixed_point_tol) {
      out.mu = mu;
      out.red = reduce(s, mu, ro);
      return out;
    }
  }
  (void)escaped;
  // Bisection on g(mu) = lambda - mu + f(mu).
  auto g = [&](double m) { return lam - m + branch_f(reduce(s, m, ro), which); };
  double a = band[0], b = band[1], ga = g(a), gb = g(b);
  if (!(ga * gb <= 0))
    throw Error(ErrorKind::NoRootInBand, "bic_search", "no sign change of the branch equation in the band",
                {{"branch", std::to_string(which)}, {"delta", std::to_string(s.delta)},
                 {"g_left", std::to_string(ga)}, {"g_right", std::to_string(gb)}});
  out.bisection = true;
  for (int k = 0; k < 200 && b - a > opt.fixed_point_tol; ++k) {
    double c = 0.5 * (a + b), gc = g(c);
    ++out.iterations;
    if (gc == 0.0) {
      a = b = c;
      break;
    }
    if (gc * ga < 0) {
      b = c;
      gb = gc;
    } else {
      a = c;
      ga = gc;
    }
  }
  out.mu = 0.5 * (a + b);
  out.red = reduce(s, out.mu, ro);
  return out;
}

double lipschitz_estimate(const ModalSystem &s, int which, const std::array<double, 2> &band,
                          const BicOptions &opt, int points) {
  const ReductionOptions ro = red_options(opt);
  const double w = band[1] - band[0], step = 1e-5 * w;
  double L = 0.0;
  for (int i = 0; i < points; ++i) {
    double mu = band[0] + (w - step) * i / std::max(1, points - 1);
    double f1 = branch_f(reduce(s, mu, ro), which);
    double f2 = branch_f(reduce(s, mu + step, ro), which);
    L = std::max(L, std::abs(f2 - f1) / step);
  }
  return L;
}

namespace {

ScanRow evaluate_row(ModalProvider &prov, double delta, const std::array<double, 2> &band,
                     const BicOptions &opt) {
  ScanRow row;
  row.delta = delta;
  ModalSystem s = prov.at(delta);
  row.lambda0 = s.lambdas(opt.M - 2);
  row.lambda1 = s.lambdas(opt.M - 1);
  try {
    row.mu0 = solve_branch(s, 0, band, opt).mu;
    row.mu1 = solve_branch(s, 1, band, opt).mu;
  } catch (const Error &e) {
    row.error = to_string(e.kind());
  }
  return row;
}

bool usable(const ScanRow &r) { return std::isfinite(r.mu0) && std::isfinite(r.mu1) && r.error.empty(); }
double gap(const ScanRow &r) { return r.mu0 - r.mu1; }

} // namespace

BicSolution find_bic(ModalProvider &prov, const BicOptions &opt, std::vector<double> deltas,
                     std::vector<ScanRow> *curves_out) {
  const auto &vs = prov.spec();
  if (deltas.empty()) {
    auto r = vs.spec.delta_range;
    const int n = std::max(2, opt.scan_points);
    for (int i = 0; i < n; ++i)
      deltas.push_back(r[0] + (r[1] - r[0]) * i / (n - 1));
  }
  if (auto *fem = dynamic_cast<FemProvider *>(&prov))
    fem->prefetch(deltas, opt.threads);
  const auto band = prepare_band(prov);

  BicSolution sol;
  std::vector<ScanRow> rows;
  for (double d : deltas)
    rows.push_back(evaluate_row(prov, d, band, opt));
  auto publish = [&] {
    sol.curves = rows;
    std::sort(sol.curves.begin(), sol.curves.end(), [](auto &a, auto &b) { return a.delta < b.delta; });
    if (curves_out)
      *curves_out = sol.curves;
  };
  publish();

  // Crossing of the tracked pair over the interval.
  const auto &f = rows.front(), &l = rows.back();
  if ((f.lambda0 - f.lambda1) * (l.lambda0 - l.lambda1) > 0)
    throw Error(ErrorKind::NoCrossing, "bic_search", "tracked pair does not cross on the interval",
                {{"gap_first", std::to_string(f.lambda0 - f.lambda1)},
                 {"gap_last", std::to_string(l.lambda0 - l.lambda1)}});
  // Both pair modes must reach the opening.
  {
    ModalSystem s = prov.at(deltas.front());
    double p0 = std::abs(s.psi_at_o(opt.M - 2)), p1 = std::abs(s.psi_at_o(opt.M - 1));
    if (std::min(p0, p1) < opt.coupling_floor)
      throw Error(ErrorKind::NearZeroCoupling, "bic_search", "a pair mode vanishes at the opening center",
                  {{"psi0", std::to_string(p0)}, {"psi1", std::to_string(p1)}});
  }

  int k = -1;
  for (size_t i = 0; i + 1 < rows.size(); ++i)
    if (usable(rows[i]) && usable(rows[i + 1]) && gap(rows[i]) * gap(rows[i + 1]) <= 0) {
      k = static_cast<int>(i);
      break;
    }
  if (k < 0)
    throw Error(ErrorKind::NoSignChange, "bic_search", "branch curves do not intersect on the interval");

  ScanRow lo = rows[k], hi = rows[k + 1];
  if (opt.refine > 1) {
    ScanRow prev = lo;
    for (int i = 1; i <= opt.refine; ++i) {
      ScanRow cur = i == opt.refine ? hi
                                    : evaluate_row(prov, lo.delta + (hi.delta - lo.delta) * i / opt.refine,
                                                   band, opt);
      if (i < opt.refine)
        rows.push_back(cur);
      if (usable(cur) && gap(prev) * gap(cur) <= 0) {
        lo = prev;
        hi = cur;
        break;
      }
      prev = cur;
    }
    publish();
  }

  // Bracketing root solve on mu0 - mu1 (false position with the Illinois step).
  double a = lo.delta, b = hi.delta, ga = gap(lo), gb = gap(hi);
  double c = ga == 0.0 ? a : b;
  int side = 0;
  for (int it = 0; it < 100 && std::abs(b - a) > opt.root_tol && ga != 0.0 && gb != 0.0; ++it) {
    c = (ga * b - gb * a) / (ga - gb);
    if (!(c > std::min(a, b) && c < std::max(a, b)))
      c = 0.5 * (a + b);
    ScanRow r = evaluate_row(prov, c, band, opt);
    ++sol.root_steps;
    if (!usable(r))
      throw Error(ErrorKind::NoRootInBand, "bic_search", "branch solve failed inside the bracket",
                  {{"delta", std::to_string(c)}, {"error", r.error}});
    double gc = gap(r);
    if (gc == 0.0) {
      a = b = c;
      break;
    }
    if (gc * gb < 0) {
      a = b;
      ga = gb;
      side = 0;
    } else {
      if (side == 1)
        ga *= 0.5;
      side = 1;
    }
    b = c;
    gb = gc;
    if (std::abs(gc) < 1e-14)
      break;
  }
  sol.delta_star = c;
  complete_solution(prov, sol, opt);
  return sol;
}

void complete_solution(ModalProvider &prov, BicSolution &sol, const BicOptions &opt) {
  const auto band = prepare_band(prov);
  ModalSystem s = prov.at(sol.delta_star);
  BranchSolution s0 = solve_branch(s, 0, band, opt), s1 = solve_branch(s, 1, band, opt);
  sol.mu_star = s0.mu;
  sol.iterations0 = s0.iterations;
  sol.iterations1 = s1.iterations;
  const Reduction &r = s0.red;
  sol.f0 = r.f0;
  sol.f1 = r.f1;
  sol.a20 = r.a2(0);
  sol.a21 = r.a2(1);
  const Eigen::Vector2d lp(s.lambdas(opt.M - 2), s.lambdas(opt.M - 1));
  sol.residual0 = lp(0) - sol.mu_star + r.f0;
  sol.residual1 = lp(1) - sol.mu_star + r.f1;

  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(r.pair_system(lp), Eigen::ComputeFullV);
  Eigen::Vector2d dp = svd.matrixV().col(1);
  Eigen::VectorXd d = r.expand(dp);
  d.normalize();
  double lead = std::abs(d(opt.M - 2)) > 1e-14 ? d(opt.M - 2) : d(opt.M - 1);
  if (lead < 0)
    d = -d;
  sol.d = d;
  sol.b = waveguide_coeffs(s, sol.mu_star, d.cast<cplx>());
  Eigen::MatrixXcd T = full_matrix(s, sol.mu_star);
  Eigen::JacobiSVD<Eigen::MatrixXcd> tsvd(T);
  sol.norm_T = tsvd.singularValues()(0);
  sol.sigma_min_full = tsvd.singularValues()(tsvd.singularValues().size() - 1);
  sol.b0_abs = std::abs(sol.b(0));
  sol.b_norm = sol.b.norm();
}

cplx waveguide_field(const ModalSystem &s, const Eigen::VectorXcd &b, double mu, double x1, double x2) {
  cplx u = 0.0;
  for (int j = 0; j < b.size(); ++j)
    u += b(j) * std::exp(i_alpha(j, s.h, mu) * x1) * phi(j, s.h, x2);
  return u;
}

std::vector<FieldSample> reconstruct_mode(ModalProvider &prov, const BicSolution &sol, int nx, int ny,
                                          double waveguide_length) {
  const auto &vs = prov.spec();
  ModalSystem s = prov.at(sol.delta_star);
  const double h = s.h;
  const double L = scaled_length(vs, sol.delta_star);
  std::vector<Point> pts;
  for (int i = 0; i < nx; ++i)
    for (int k = 0; k < ny; ++k)
      pts.push_back({-L + L * i / (nx - 1), vs.x2_lo + (vs.x2_hi - vs.x2_lo) * k / (ny - 1)});
  Eigen::VectorXd zb(s.jwg() + 1);
  zb(0) = 0.0;
  for (int j = 1; j <= s.jwg(); ++j)
    zb(j) = s.scaling * i_alpha(j, h, sol.mu_star).real() * sol.b(j).real();
  Eigen::VectorXd u = prov.cavity_field(sol.delta_star, sol.d, zb, sol.mu_star, pts);
  std::vector<FieldSample> out;
  for (size_t i = 0; i < pts.size(); ++i)
    out.push_back({pts[i].x1, pts[i].x2, u(i)});
  if (waveguide_length <= 0)
    waveguide_length = 3 * h;
  const int nw = std::max(2, static_cast<int>(std::ceil(nx * waveguide_length / L)));
  const int nh = std::max(2, static_cast<int>(std::ceil(ny * h / (vs.x2_hi - vs.x2_lo))) + 1);
  for (int i = 1; i < nw; ++i)
    for (int k = 0; k < nh; ++k) {
      double x1 = waveguide_length * i / (nw - 1), x2 = -h / 2 + h * k / (nh - 1);
      out.push_back({x1, x2, waveguide_field(s, sol.b, sol.mu_star, x1, x2).real()});
    }
  return out;
}

namespace {

struct OddSystem {
  std::vector<int> modes, js;
  Eigen::MatrixXd T; // diag(lambda - mu) - P^T E P on the odd subspace
};

OddSystem odd_system(const ModalSystem &s, double mu) {
  OddSystem o;
  for (int m = 0; m < s.mcav(); ++m)
    if (s.parity[m] == -1)
      o.modes.push_back(m);
  for (int j = 1; j <= s.jwg(); j += 2)
    o.js.push_back(j);
  const int nm = static_cast<int>(o.modes.size()), nj = static_cast<int>(o.js.size());
  Eigen::MatrixXd P(nj, nm);
  for (int a = 0; a < nj; ++a)
    for (int k = 0; k < nm; ++k)
      P(a, k) = s.overlaps(o.js[a], o.modes[k]);
  Eigen::VectorXd z(nj);
  for (int a = 0; a < nj; ++a)
    z(a) = s.scaling * i_alpha(o.js[a], s.h, mu).real();
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(nj, nj);
  if (s.tail) {
    Eigen::MatrixXd Q = s.tail->eval_real(mu), Qo(nj, nj);
    for (int a = 0; a < nj; ++a)
      for (int c = 0; c < nj; ++c)
        Qo(a, c) = Q(o.js[a], o.js[c]);
    R = (Eigen::MatrixXd::Identity(nj, nj) - Qo * z.asDiagonal()).partialPivLu().inverse();
  }
  Eigen::MatrixXd E = z.asDiagonal() * R;
  E = 0.5 * (E + E.transpose()).eval();
  o.T = -P.transpose() * E * P;
  for (int k = 0; k < nm; ++k)
    o.T(k, k) += s.lambdas(o.modes[k]) - mu;
  return o;
}

// Schur complement of the odd system onto branch position k, and the
// eliminated amplitudes for d_m = 1.
double odd_schur(const OddSystem &o, int k, Eigen::VectorXd *d_other) {
  const int n = static_cast<int>(o.T.rows());
  std::vector<int> rest;
  for (int i = 0; i < n; ++i)
    if (i != k)
      rest.push_back(i);
  const int nr = n - 1;
  Eigen::MatrixXd Too(nr, nr);
  Eigen::VectorXd Tom(nr);
  for (int i = 0; i < nr; ++i) {
    Tom(i) = o.T(rest[i], k);
    for (int c = 0; c < nr; ++c)
      Too(i, c) = o.T(rest[i], rest[c]);
  }
  Eigen::VectorXd y = nr ? Eigen::VectorXd(Too.partialPivLu().solve(Tom)) : Eigen::VectorXd();
  if (d_other)
    *d_other = -y;
  return o.T(k, k) - (nr ? Tom.dot(y) : 0.0);
}

int odd_position(const OddSystem &o, int m) {
  auto it = std::find(o.modes.begin(), o.modes.end(), m);
  return static_cast<int>(it - o.modes.begin());
}

} // namespace

double odd_subsystem_a(const ModalSystem &s, int m, double mu) {
  OddSystem o = odd_system(s, mu);
  return odd_schur(o, odd_position(o, m), nullptr) - (s.lambdas(m) - mu);
}

BicSolution symmetry_bic(ModalProvider &prov, double delta, int m, const BicOptions &opt) {
  ModalSystem s = prov.at(delta);
  if (s.parity.empty())
    throw Error(ErrorKind::ParityViolation, "bic_search", "structure is not mirror symmetric about the axis");
  if (m < 0) {
    for (int k = 0; k < s.mcav() && m < 0; ++k) {
      if (s.parity[k] != -1)
        continue;
      double c = 0.0;
      for (int j = 1; j <= s.jwg(); j += 2)
        c = std::max(c, std::abs(s.overlaps(j, k)));
      if (c > opt.coupling_floor)
        m = k;
    }
    if (m < 0)
      throw Error(ErrorKind::ParityViolation, "bic_search", "no coupled odd mode in the head");
  }
  if (m >= s.mcav() || s.parity[m] != -1)
    throw Error(ErrorKind::ParityViolation, "bic_search", "selected mode is not odd",
                {{"mode", std::to_string(m)}});
  const double lam = s.lambdas(m);
  if (prov.options().tail) {
    double w = std::max(0.5, 0.1 * lam);
    auto cur = prov.options().tail_window;
    if (!cur || (*cur)[0] > lam - 0.5 * w || (*cur)[1] < lam + 0.5 * w) {
      prov.set_tail_window(lam - w, lam + w);
      s = prov.at(delta);
    }
  }

  BicSolution sol;
  sol.delta_star = delta;
  double mu = lam, prev_gap = -1;
  bool done = false;
  for (int k = 1; k <= opt.max_iter; ++k) {
    double next = lam + odd_subsystem_a(s, m, mu);
    double g = std::abs(next - mu);
    sol.iterations0 = k;
    mu = next;
    if (g < opt.fixed_point_tol) {
      done = true;
      break;
    }
    if (!std::isfinite(next) || (prev_gap > 0 && g > prev_gap))
      break;
    prev_gap = g;
  }
  if (!done) {
    auto g = [&](double x) { return lam - x + odd_subsystem_a(s, m, x); };
    // Evanescent coupling raises the level: search above lambda.
    double lo = lam, glo = g(lo), step = 1e-3 * std::max(1.0, lam), hi = lo + step, ghi = g(hi);
    for (int k = 0; k < 40 && glo * ghi > 0; ++k) {
      step *= 2;
      hi = lam + step;
      ghi = g(hi);
    }
    if (glo * ghi > 0)
      throw Error(ErrorKind::NoRootInBand, "bic_search", "odd subsystem equation has no bracket");
    for (int k = 0; k < 200 && hi - lo > opt.fixed_point_tol; ++k) {
      double c = 0.5 * (lo + hi), gc = g(c);
      ++sol.iterations0;
      if (gc * glo <= 0) {
        hi = c;
      } else {
        lo = c;
        glo = gc;
      }
    }
    mu = 0.5 * (lo + hi);
  }
  sol.mu_star = mu;
  OddSystem o = odd_system(s, mu);
  const int k = odd_position(o, m);
  Eigen::VectorXd y;
  odd_schur(o, k, &y);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(s.mcav());
  d(m) = 1.0;
  for (int i = 0, r = 0; i < static_cast<int>(o.modes.size()); ++i)
    if (i != k)
      d(o.modes[i]) = y(r++);
  d.normalize();
  sol.d = d;
  sol.f0 = odd_subsystem_a(s, m, mu);
  sol.residual0 = lam - mu + sol.f0;
  sol.b = waveguide_coeffs(s, mu, d.cast<cplx>());
  Eigen::JacobiSVD<Eigen::MatrixXcd> tsvd(full_matrix(s, mu));
  sol.norm_T = tsvd.singularValues()(0);
  sol.sigma_min_full = tsvd.singularValues()(tsvd.singularValues().size() - 1);
  sol.b0_abs = std::abs(sol.b(0));
  sol.b_norm = sol.b.norm();
  return sol;
}

} // namespace fwbic
