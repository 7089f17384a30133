#include "fwbic/modal.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "fwbic/errors.hpp"

namespace fwbic {

ProviderOptions provider_options(const ValidatedSpec &vs) {
  const auto &s = vs.spec;
  ProviderOptions o;
  o.M_cav = s.truncation.M_cav;
  o.J_wg = s.truncation.J_wg;
  o.M = s.truncation.M;
  o.tail = s.numerics.tail == "exact";
  o.cheb_nodes = s.numerics.cheb_nodes;
  o.eig.dense_max = s.numerics.dense_max;
  o.eig.tol = s.tolerances.eig_tol;
  o.eig.seed = s.numerics.seed;
  return o;
}

void ModalProvider::set_tail_window(double a, double b) {
  opt_.tail_window = std::array<double, 2>{a, b};
  clear_cache();
}

namespace {

// Zeroes the entries of a tail kernel that couple profiles of opposite parity.
class ParityMaskedTail : public TailKernel {
public:
  explicit ParityMaskedTail(std::shared_ptr<const TailKernel> inner) : inner_(std::move(inner)) {}
  Eigen::MatrixXcd eval(cplx mu) const override { return mask(inner_->eval(mu)); }
  Eigen::MatrixXd eval_real(double mu) const override { return mask(inner_->eval_real(mu)); }

private:
  template <class Mat> static Mat mask(Mat Q) {
    for (int i = 0; i < Q.rows(); ++i)
      for (int j = 0; j < Q.cols(); ++j)
        if ((i + j) % 2)
          Q(i, j) = 0.0;
    return Q;
  }
  std::shared_ptr<const TailKernel> inner_;
};

} // namespace

void apply_parity_mask(ModalSystem &s) {
  if (s.parity.empty())
    return;
  for (int m = 0; m < s.mcav(); ++m) {
    if (s.parity[m] == 0)
      continue;
    for (int j = 0; j <= s.jwg(); ++j)
      if (s.parity[m] != (j % 2 ? -1 : 1))
        s.overlaps(j, m) = 0.0;
    if (s.parity[m] == -1)
      s.psi_at_o(m) = 0.0;
  }
  if (s.tail && !std::dynamic_pointer_cast<const ParityMaskedTail>(s.tail))
    s.tail = std::make_shared<ParityMaskedTail>(s.tail);
}

// ---------------------------------------------------------------- analytic

RectProvider::RectProvider(ValidatedSpec vs, ProviderOptions opt) : vs_(std::move(vs)) {
  opt_ = opt;
  if (!vs_.spec.inclusions.empty())
    throw Error(ErrorKind::ConfigError, "cavity_analytic", "analytic model needs a homogeneous cavity");
  for (const auto &m : rect_eigenpairs(vs_.L, vs_.W, opt_.M_cav, -vs_.x2_lo))
    labels_.emplace_back(m.p, m.q);
}

std::vector<RectMode> RectProvider::modes_at(double delta) const {
  const double L = scaled_length(vs_, delta), W = vs_.W, y0 = -vs_.x2_lo;
  std::vector<RectMode> modes;
  for (auto [p, q] : labels_) {
    RectMode m{p, q, L, W, y0, 0.0, 0.0};
    m.lambda = std::pow(p * M_PI / L, 2) + std::pow(q * M_PI / W, 2);
    m.norm_const = std::sqrt((p == 0 ? 1.0 : 2.0) * (q == 0 ? 1.0 : 2.0) / (L * W));
    modes.push_back(m);
  }
  return modes;
}

ModalSystem RectProvider::at(double delta) {
  auto it = cache_.find(delta);
  if (it != cache_.end())
    return it->second;
  auto modes = modes_at(delta);
  const double h = vs_.h();
  ModalSystem s;
  s.delta = delta;
  s.h = h;
  s.scaling = coupling_scale(vs_.spec, delta);
  s.provenance = "analytic";
  const int mc = static_cast<int>(modes.size());
  s.lambdas.resize(mc);
  s.psi_at_o.resize(mc);
  for (int m = 0; m < mc; ++m) {
    s.lambdas(m) = modes[m].lambda;
    s.psi_at_o(m) = modes[m].value(0.0, 0.0);
  }
  s.overlaps = coupling_multiplier * rect_overlap_table(modes, opt_.J_wg, h);
  if (symmetric_about_axis(vs_)) {
    for (const auto &m : modes)
      s.parity.push_back(m.q % 2 ? -1 : 1);
  }
  if (opt_.tail && opt_.tail_window) {
    const double L = modes[0].L, W = vs_.W, y0 = -vs_.x2_lo;
    const int J = opt_.J_wg;
    const double c2 = coupling_multiplier * coupling_multiplier;
    auto w = *opt_.tail_window;
    if (!kernel_)
      kernel_ = std::make_shared<RectKernelData>(rect_kernel_data(W, y0, h, J));
    auto kd = kernel_;
    const int nq = static_cast<int>(kd->C.cols());
    if (!far_) {
      // The high-q part does not depend on L; interpolate it once per window.
      far_q0_ = kd->far_start(w[1] + (w[1] - w[0]), 0.5 * vs_.L);
      const int q0 = far_q0_;
      far_ = std::make_shared<ChebyshevTail>(
          w[0], w[1], opt_.cheb_nodes, [kd, q0, nq](double mu) { return kd->partial_real(q0, nq, -1.0, mu); },
          [kd, q0, nq](cplx mu) { return kd->partial(q0, nq, -1.0, mu); });
    }
    auto far = far_;
    const int q0 = far_q0_;
    Eigen::MatrixXd P = s.overlaps;
    Eigen::VectorXd lam = s.lambdas;
    auto real_fn = [=](double mu) -> Eigen::MatrixXd {
      Eigen::MatrixXd Q = c2 * (kd->partial_real(0, q0, L, mu) + far->eval_real(mu));
      for (int m = 0; m < lam.size(); ++m)
        Q -= P.col(m) * P.col(m).transpose() / (lam(m) - mu);
      return Q;
    };
    auto cplx_fn = [=](cplx mu) -> Eigen::MatrixXcd {
      Eigen::MatrixXcd Q = c2 * (kd->partial(0, q0, L, mu) + far->eval(mu));
      for (int m = 0; m < lam.size(); ++m)
        Q -= (P.col(m) * P.col(m).transpose()).cast<cplx>() / (lam(m) - mu);
      return Q;
    };
    s.tail = std::make_shared<ChebyshevTail>(w[0], w[1], opt_.cheb_nodes, real_fn, cplx_fn);
  }
  apply_parity_mask(s);
  cache_[delta] = s;
  return s;
}

Eigen::VectorXd RectProvider::cavity_field(double delta, const Eigen::VectorXd &d, const Eigen::VectorXd &zb,
                                           double mu, const std::vector<Point> &pts) {
  auto head = modes_at(delta);
  const double L = head[0].L, W = vs_.W, y0 = -vs_.x2_lo, h = vs_.h();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(pts.size());
  for (size_t i = 0; i < pts.size(); ++i)
    for (int m = 0; m < static_cast<int>(head.size()); ++m)
      u(i) += d(m) * head[m].value(pts[i].x1, pts[i].x2);
  if (!opt_.tail)
    return u;
  // Eliminated modes: the p-sum of the full resolvent in closed form per q,
  // minus the head modes.
  if (!kernel_)
    kernel_ = std::make_shared<RectKernelData>(rect_kernel_data(W, y0, h, opt_.J_wg));
  const Eigen::MatrixXd &C = kernel_->C;
  const int J = std::min(static_cast<int>(zb.size()), static_cast<int>(C.rows())) - 1;
  Eigen::VectorXd load = coupling_multiplier * (C.topRows(J + 1).transpose() * zb.head(J + 1));
  for (size_t i = 0; i < pts.size(); ++i) {
    const double s = pts[i].x1 + L, x2 = pts[i].x2;
    double acc = 0.0;
    for (int q = 0; q < load.size(); ++q) {
      const double k2 = mu - std::pow(q * M_PI / W, 2);
      double w;
      if (k2 > 0) {
        const double k = std::sqrt(k2);
        w = -std::cos(k * s) / (k * std::sin(k * L));
      } else {
        const double K = std::sqrt(-k2);
        if (K * (L - s) > 40)
          break;
        // cosh(K s) / (K sinh(K L)) without overflow
        w = std::exp(K * (s - L)) * (1 + std::exp(-2 * K * s)) / (K * (1 - std::exp(-2 * K * L)));
      }
      acc += load(q) * w * (q == 0 ? 1.0 : 2.0) / W * std::cos(q * M_PI * (x2 + y0) / W);
    }
    u(i) += acc;
  }
  for (const auto &m : head) {
    double lm = 0.0;
    for (int j = 0; j <= J; ++j)
      lm += coupling_multiplier * overlap_rect(m, j, h) * zb(j);
    const double c = lm / (m.lambda - mu);
    for (size_t i = 0; i < pts.size(); ++i)
      u(i) -= c * m.value(pts[i].x1, pts[i].x2);
  }
  return u;
}

// ---------------------------------------------------------------- FEM

FemProvider::FemProvider(ValidatedSpec vs, ProviderOptions opt, int resolution)
    : FemProvider(vs, opt, build_mesh(vs, resolution, vs.spec.numerics.material_rule)) {}

FemProvider::FemProvider(ValidatedSpec vs, ProviderOptions opt, Mesh mesh)
    : vs_(std::move(vs)), mesh_(std::move(mesh)) {
  opt_ = opt;
  G_ = gamma_loads(mesh_, opt_.J_wg);
  if (symmetric_about_axis(vs_))
    mirror_ = mirror_map(mesh_);
}

std::map<int, double> FemProvider::indices(double delta) const {
  std::map<int, double> n;
  n[0] = vs_.spec.numerics.background_index;
  for (int r : mesh_.material)
    if (!n.count(r))
      n[r] = region_index(vs_.spec, r, delta);
  for (const auto &inc : vs_.spec.inclusions)
    n[inc.region_id] = region_index(vs_.spec, inc.region_id, delta);
  return n;
}

Mesh FemProvider::mesh_at(double delta) const {
  if (vs_.spec.perturbation.type != PerturbationType::BoundaryScaling)
    return mesh_;
  Mesh m = mesh_;
  double f = 1.0 + delta * vs_.spec.perturbation.C_R;
  for (auto &p : m.nodes)
    p.x1 *= f;
  return m;
}

FemMatrices FemProvider::matrices(double delta) const { return assemble(mesh_at(delta), indices(delta)); }

EigenBasis FemProvider::solve_raw(double delta) const {
  FemMatrices fm = matrices(delta);
  EigenBasis b = solve_eigen(fm.K, fm.M, modes_computed(), opt_.eig);
  b.delta = delta;
  boundary_trace(b, mesh_);
  return b;
}

FemProvider::Entry &FemProvider::adopt(EigenBasis raw) {
  const double delta = raw.delta;
  if (!cache_.empty()) {
    auto best = cache_.begin();
    for (auto it = cache_.begin(); it != cache_.end(); ++it)
      if (std::abs(it->first - delta) < std::abs(best->first - delta))
        best = it;
    FemMatrices fm = matrices(delta);
    int checked = opt_.checked >= 0 ? opt_.checked : std::min(opt_.M_cav, opt_.M + 10);
    track_pair(best->second.basis, raw, fm.M, 0.1, checked);
  }
  auto &e = cache_[delta];
  e.basis = std::move(raw);
  e.sys.reset();
  return e;
}

void FemProvider::prefetch(const std::vector<double> &deltas, int threads) {
  std::vector<double> todo;
  for (double d : deltas)
    if (!cache_.count(d))
      todo.push_back(d);
  std::vector<EigenBasis> out(todo.size());
  threads = std::max(1, threads);
  if (threads == 1 || todo.size() < 2) {
    for (size_t i = 0; i < todo.size(); ++i)
      adopt(solve_raw(todo[i]));
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (size_t i = t; i < todo.size(); i += threads)
          out[i] = solve_raw(todo[i]);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  for (auto &th : pool)
    th.join();
  for (auto &e : errs)
    if (e)
      std::rethrow_exception(e);
  for (auto &b : out)
    adopt(std::move(b));
}

const EigenBasis &FemProvider::basis(double delta) {
  auto it = cache_.find(delta);
  if (it != cache_.end())
    return it->second.basis;
  return adopt(solve_raw(delta)).basis;
}

ModalSystem FemProvider::make_system(const Entry &e, double delta) const {
  const int mc = opt_.M_cav;
  ModalSystem s;
  s.delta = delta;
  s.h = vs_.h();
  s.scaling = coupling_scale(vs_.spec, delta);
  s.provenance = "fem";
  s.lambdas = e.basis.lambdas.head(mc);
  Eigen::MatrixXd X = e.basis.vectors.leftCols(mc);
  s.overlaps = G_.transpose() * X;
  s.psi_at_o = e.basis.origin_values.head(mc);
  if (!mirror_.empty()) {
    FemMatrices fm = matrices(delta);
    EigenBasis head = e.basis;
    head.vectors = X;
    s.parity = mode_parity(head, mirror_, fm.M);
  }
  if (opt_.tail && opt_.tail_window) {
    FemMatrices fm = matrices(delta);
    auto K = std::make_shared<SpMat>(fm.K);
    auto M = std::make_shared<SpMat>(fm.M);
    auto Gt = std::make_shared<Eigen::MatrixXd>(G_ - (*M) * X * s.overlaps.transpose());
    auto real_fn = [K, M, Gt](double mu) -> Eigen::MatrixXd {
      SpMat A = *K - mu * (*M);
      Eigen::SimplicialLDLT<SpMat> f(A);
      Eigen::MatrixXd Y;
      bool ok = f.info() == Eigen::Success;
      if (ok) {
        Y = f.solve(*Gt);
        ok = (A * Y - *Gt).norm() <= 1e-9 * Gt->norm();
      }
      if (!ok) {
        Eigen::SparseLU<SpMat> lu(A);
        if (lu.info() != Eigen::Success)
          throw Error(ErrorKind::NoConvergence, "modematch", "tail factorization failed");
        Y = lu.solve(*Gt);
      }
      Eigen::MatrixXd Q = Gt->transpose() * Y;
      return 0.5 * (Q + Q.transpose());
    };
    auto cplx_fn = [K, M, Gt](cplx mu) -> Eigen::MatrixXcd {
      Eigen::SparseMatrix<cplx> A = K->cast<cplx>() - mu * M->cast<cplx>();
      Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu(A);
      if (lu.info() != Eigen::Success)
        throw Error(ErrorKind::NoConvergence, "modematch", "complex tail factorization failed");
      Eigen::MatrixXcd G = Gt->cast<cplx>();
      Eigen::MatrixXcd Y = lu.solve(G);
      Eigen::MatrixXcd Q = G.transpose() * Y;
      return 0.5 * (Q + Q.transpose());
    };
    auto w = *opt_.tail_window;
    s.tail = std::make_shared<ChebyshevTail>(w[0], w[1], opt_.cheb_nodes, real_fn, cplx_fn);
  }
  apply_parity_mask(s);
  return s;
}

ModalSystem FemProvider::at(double delta) {
  auto it = cache_.find(delta);
  Entry *e = it != cache_.end() ? &it->second : &adopt(solve_raw(delta));
  if (!e->sys)
    e->sys = make_system(*e, delta);
  return *e->sys;
}

Eigen::VectorXd FemProvider::cavity_field(double delta, const Eigen::VectorXd &d, const Eigen::VectorXd &zb,
                                          double mu, const std::vector<Point> &pts) {
  const EigenBasis &b = basis(delta);
  const int mc = opt_.M_cav;
  Eigen::MatrixXd X = b.vectors.leftCols(mc);
  Eigen::VectorXd u = X * d;
  if (opt_.tail) {
    FemMatrices fm = matrices(delta);
    Eigen::MatrixXd O = G_.transpose() * X;
    Eigen::VectorXd rhs = (G_ - fm.M * X * O.transpose()) * zb;
    SpMat A = fm.K - mu * fm.M;
    Eigen::SparseLU<SpMat> lu(A);
    if (lu.info() != Eigen::Success)
      throw Error(ErrorKind::NoConvergence, "bic_search", "field reconstruction solve failed");
    Eigen::VectorXd y = lu.solve(rhs);
    y -= X * (X.transpose() * (fm.M * y));
    u += y;
  }
  Mesh m = mesh_at(delta);
  MeshLocator loc(m);
  Eigen::VectorXd out(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    std::array<double, 3> w;
    int t = loc.locate(pts[i], w);
    if (t < 0) {
      out(i) = std::nan("");
      continue;
    }
    const auto &tr = m.triangles[t];
    out(i) = w[0] * u(tr[0]) + w[1] * u(tr[1]) + w[2] * u(tr[2]);
  }
  return out;
}

std::unique_ptr<ModalProvider> make_provider(const ValidatedSpec &vs) {
  ProviderOptions opt = provider_options(vs);
  const auto &n = vs.spec.numerics;
  if (n.model == "analytic")
    return std::make_unique<RectProvider>(vs, opt);
  if (!n.mesh_node_file.empty() || !n.mesh_ele_file.empty())
    return std::make_unique<FemProvider>(vs, opt, import_triangle(vs, n.mesh_node_file, n.mesh_ele_file));
  return std::make_unique<FemProvider>(vs, opt, n.resolution);
}

CrossingResult detect_crossing(const ValidatedSpec &vs0, double n_lo, double n_hi, int points, int resolution,
                               int threads) {
  ProblemSpec s = vs0.spec;
  s.perturbation.n_base = 0.0;
  s.delta_range = {n_lo, n_hi};
  s.mu_band.reset();
  ValidatedSpec vs = validate_spec(s);
  ProviderOptions opt = provider_options(vs);
  const int M = opt.M;
  opt.M_cav = M + 4;
  opt.guard = 2;
  opt.tail = false;
  FemProvider prov(vs, opt, resolution);
  CrossingResult r;
  for (int i = 0; i < points; ++i)
    r.grid.push_back(n_lo + (n_hi - n_lo) * i / (points - 1));
  prov.prefetch(r.grid, threads);
  auto diff = [&](double n) {
    auto sys = prov.at(n);
    return sys.lambdas(M - 2) - sys.lambdas(M - 1);
  };
  int k = -1;
  for (int i = 0; i < points; ++i) {
    auto sys = prov.at(r.grid[i]);
    r.lam_a.push_back(sys.lambdas(M - 2));
    r.lam_b.push_back(sys.lambdas(M - 1));
    if (i > 0 && k < 0 && (r.lam_a[i] - r.lam_b[i]) * (r.lam_a[i - 1] - r.lam_b[i - 1]) <= 0)
      k = i - 1;
  }
  if (k < 0)
    throw Error(ErrorKind::NoCrossing, "cavity_fem", "tracked branches do not cross in the window");
  // Illinois false position on the tracked difference.
  double a = r.grid[k], b = r.grid[k + 1];
  double fa = r.lam_a[k] - r.lam_b[k], fb = r.lam_a[k + 1] - r.lam_b[k + 1];
  int side = 0;
  double c = a;
  // Stops short of the exact crossing, where branch labels are ill-defined.
  for (int it = 0; it < 60 && std::abs(b - a) > 1e-9; ++it) {
    c = (fa * b - fb * a) / (fa - fb);
    double fc = diff(c);
    if (fc == 0.0) {
      a = b = c;
      break;
    }
    if (fc * fb < 0) {
      a = b;
      fa = fb;
      side = 0;
    } else if (side == 1) {
      fa *= 0.5;
    }
    if (fc * fb >= 0)
      side = 1;
    b = c;
    fb = fc;
    if (std::abs(fc) < 1e-7)
      break;
  }
  r.n_star = c;
  auto sys = prov.at(c);
  r.lambda_star = 0.5 * (sys.lambdas(M - 2) + sys.lambdas(M - 1));
  return r;
}

} // namespace fwbic
