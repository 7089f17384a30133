#include "fwbic/cavity_fem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "fwbic/errors.hpp"

namespace fwbic {

using std::numbers::pi;

FemMatrices assemble(const Mesh &mesh, const std::map<int, double> &n_of_region) {
  auto n_of = [&](int r) {
    auto it = n_of_region.find(r);
    if (it == n_of_region.end())
      throw Error(ErrorKind::ConfigError, "cavity_fem", "no refractive index for region",
                  {{"region_id", std::to_string(r)}});
    if (!(it->second > 0))
      throw Error(ErrorKind::BadIndexBounds, "cavity_fem", "refractive index must be positive");
    return it->second;
  };
  const bool frac = !mesh.fractions.empty();
  const double n_bg = n_of(0);
  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(9 * mesh.triangles.size());
  mt.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto &tr = mesh.triangles[t];
    double area = mesh.triangle_area(t);
    double w;
    if (frac) {
      double rest = 1.0;
      w = 0.0;
      for (const auto &[r, f] : mesh.fractions[t]) {
        double n = n_of(r);
        w += f / (n * n);
        rest -= f;
      }
      w += std::max(rest, 0.0) / (n_bg * n_bg);
    } else {
      double n = n_of(mesh.material[t]);
      w = 1.0 / (n * n);
    }
    double gx[3], gy[3];
    for (int k = 0; k < 3; ++k) {
      const Point &a = mesh.nodes[tr[(k + 1) % 3]], &b = mesh.nodes[tr[(k + 2) % 3]];
      gx[k] = (a.x2 - b.x2) / (2 * area);
      gy[k] = (b.x1 - a.x1) / (2 * area);
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        kt.emplace_back(tr[a], tr[b], w * area * (gx[a] * gx[b] + gy[a] * gy[b]));
        mt.emplace_back(tr[a], tr[b], area / 12.0 * (a == b ? 2.0 : 1.0));
      }
  }
  FemMatrices fm;
  int n = mesh.num_nodes();
  fm.K.resize(n, n);
  fm.M.resize(n, n);
  fm.K.setFromTriplets(kt.begin(), kt.end());
  fm.M.setFromTriplets(mt.begin(), mt.end());
  return fm;
}

EigenBasis solve_eigen(const SpMat &K, const SpMat &M, int count, const EigenOptions &opt) {
  EigenResult r = solve_generalized(K, M, count, opt);
  EigenBasis b;
  b.lambdas = r.values;
  b.vectors = std::move(r.vectors);
  b.residuals = r.residuals;
  b.branch_to_sorted.resize(count);
  for (int i = 0; i < count; ++i)
    b.branch_to_sorted[i] = i;
  return b;
}

void track_pair(const EigenBasis &prev, EigenBasis &next, const SpMat &M, double margin, int checked) {
  const int c = static_cast<int>(prev.lambdas.size());
  if (next.lambdas.size() != c)
    throw Error(ErrorKind::ConfigError, "cavity_fem", "tracked bases differ in size");
  if (checked < 0)
    checked = c;
  Eigen::MatrixXd O = prev.vectors.transpose() * (M * next.vectors);
  Eigen::MatrixXd A = O.cwiseAbs();
  std::vector<std::tuple<double, int, int>> entries;
  entries.reserve(static_cast<size_t>(c) * c);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j)
      entries.emplace_back(A(i, j), i, j);
  std::sort(entries.begin(), entries.end(), [](auto &a, auto &b) { return std::get<0>(a) > std::get<0>(b); });
  std::vector<int> col(c, -1), row_of(c, -1);
  for (auto &[v, i, j] : entries) {
    if (col[i] >= 0 || row_of[j] >= 0)
      continue;
    col[i] = j;
    row_of[j] = i;
  }
  double min_margin = 1.0;
  for (int i = 0; i < c; ++i) {
    double second = 0.0;
    for (int j = 0; j < c; ++j)
      if (j != col[i])
        second = std::max(second, A(i, j));
    double m = A(i, col[i]) - second;
    if (i < checked) {
      min_margin = std::min(min_margin, m);
      if (m < margin)
        throw Error(ErrorKind::AmbiguousAssignment, "cavity_fem", "branch assignment is ambiguous",
                    {{"branch", std::to_string(i)},
                     {"margin", std::to_string(m)},
                     {"delta", std::to_string(next.delta)}});
    }
  }
  EigenBasis out = next;
  for (int i = 0; i < c; ++i) {
    int j = col[i];
    double s = O(i, j) < 0 ? -1.0 : 1.0;
    out.lambdas(i) = next.lambdas(j);
    out.vectors.col(i) = s * next.vectors.col(j);
    if (next.residuals.size())
      out.residuals(i) = next.residuals(j);
    if (next.gamma_traces.size())
      out.gamma_traces.col(i) = s * next.gamma_traces.col(j);
    if (next.origin_values.size())
      out.origin_values(i) = s * next.origin_values(j);
    out.branch_to_sorted[i] = next.branch_to_sorted[j];
  }
  out.min_margin = min_margin;
  next = std::move(out);
}

void track_branches(std::vector<EigenBasis> &bases, const SpMat &M, double margin, int checked) {
  for (size_t k = 1; k < bases.size(); ++k)
    track_pair(bases[k - 1], bases[k], M, margin, checked);
}

void boundary_trace(EigenBasis &basis, const Mesh &mesh) {
  const int ng = static_cast<int>(mesh.gamma_nodes.size());
  const int c = static_cast<int>(basis.vectors.cols());
  basis.gamma_traces.resize(ng, c);
  for (int k = 0; k < ng; ++k)
    basis.gamma_traces.row(k) = basis.vectors.row(mesh.gamma_nodes[k]);
  basis.origin_values.resize(c);
  for (int k = 0; k + 1 < ng; ++k) {
    double ya = mesh.nodes[mesh.gamma_nodes[k]].x2, yb = mesh.nodes[mesh.gamma_nodes[k + 1]].x2;
    if (ya <= 0.0 && 0.0 <= yb) {
      double t = (0.0 - ya) / (yb - ya);
      basis.origin_values = (1 - t) * basis.gamma_traces.row(k).transpose() +
                            t * basis.gamma_traces.row(k + 1).transpose();
      return;
    }
  }
  throw Error(ErrorKind::SnapFailure, "cavity_fem", "origin is not on the opening");
}

namespace {

// (sin x - x cos x) / x^2
double g_odd(double x) {
  if (std::abs(x) < 1e-3)
    return x / 3.0 - x * x * x / 30.0;
  return (std::sin(x) - x * std::cos(x)) / (x * x);
}

double sinc(double x) {
  if (std::abs(x) < 1e-4)
    return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

} // namespace

Eigen::MatrixXd gamma_loads(const Mesh &mesh, int J) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(mesh.num_nodes(), J + 1);
  const double h = mesh.h;
  for (size_t e = 0; e + 1 < mesh.gamma_nodes.size(); ++e) {
    int na = mesh.gamma_nodes[e], nb = mesh.gamma_nodes[e + 1];
    double ya = mesh.nodes[na].x2, yb = mesh.nodes[nb].x2;
    double d = yb - ya, a = d / 2, m = (ya + yb) / 2;
    for (int j = 0; j <= J; ++j) {
      double c = j == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
      double k = j * pi / h;
      double th = k * (m + h / 2);
      double even = a * std::cos(th) * sinc(k * a);
      double odd = (2.0 / d) * std::sin(th) * a * a * g_odd(k * a);
      G(na, j) += c * (even + odd);
      G(nb, j) += c * (even - odd);
    }
  }
  return G;
}

std::vector<int> mirror_map(const Mesh &mesh, double tol) {
  std::map<std::pair<long long, long long>, int> key;
  auto k = [tol](double v) { return static_cast<long long>(std::llround(v / tol)); };
  for (int i = 0; i < mesh.num_nodes(); ++i)
    key[{k(mesh.nodes[i].x1), k(mesh.nodes[i].x2)}] = i;
  std::vector<int> map(mesh.num_nodes(), -1);
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    long long a = k(mesh.nodes[i].x1), b = k(-mesh.nodes[i].x2);
    for (long long da = -1; da <= 1 && map[i] < 0; ++da)
      for (long long db = -1; db <= 1 && map[i] < 0; ++db) {
        auto it = key.find({a + da, b + db});
        if (it != key.end())
          map[i] = it->second;
      }
    if (map[i] < 0)
      return {};
  }
  return map;
}

std::vector<int> mode_parity(const EigenBasis &basis, const std::vector<int> &mirror, const SpMat &M,
                             double tol) {
  const int c = static_cast<int>(basis.vectors.cols());
  std::vector<int> par(c, 0);
  if (mirror.empty())
    return par;
  for (int m = 0; m < c; ++m) {
    Eigen::VectorXd x = basis.vectors.col(m), xm(x.size());
    for (int i = 0; i < x.size(); ++i)
      xm(i) = x(mirror[i]);
    Eigen::VectorXd s = x + xm, d = x - xm;
    double ns = std::sqrt(std::max(0.0, s.dot(M * s))), nd = std::sqrt(std::max(0.0, d.dot(M * d)));
    if (ns < tol)
      par[m] = -1;
    else if (nd < tol)
      par[m] = 1;
  }
  return par;
}

MeshLocator::MeshLocator(const Mesh &mesh, int buckets) : mesh_(mesh), nb_(buckets) {
  double xa = 1e300, xb = -1e300, ya = 1e300, yb = -1e300;
  for (const auto &p : mesh.nodes) {
    xa = std::min(xa, p.x1);
    xb = std::max(xb, p.x1);
    ya = std::min(ya, p.x2);
    yb = std::max(yb, p.x2);
  }
  x0_ = xa;
  y0_ = ya;
  dx_ = (xb - xa) / nb_ * (1 + 1e-12);
  dy_ = (yb - ya) / nb_ * (1 + 1e-12);
  cells_.resize(static_cast<size_t>(nb_) * nb_);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double ax = 1e300, bx = -1e300, ay = 1e300, by = -1e300;
    for (int v : mesh.triangles[t]) {
      ax = std::min(ax, mesh.nodes[v].x1);
      bx = std::max(bx, mesh.nodes[v].x1);
      ay = std::min(ay, mesh.nodes[v].x2);
      by = std::max(by, mesh.nodes[v].x2);
    }
    int i0 = std::clamp(static_cast<int>((ax - x0_) / dx_), 0, nb_ - 1);
    int i1 = std::clamp(static_cast<int>((bx - x0_) / dx_), 0, nb_ - 1);
    int j0 = std::clamp(static_cast<int>((ay - y0_) / dy_), 0, nb_ - 1);
    int j1 = std::clamp(static_cast<int>((by - y0_) / dy_), 0, nb_ - 1);
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j)
        cells_[static_cast<size_t>(i) * nb_ + j].push_back(t);
  }
}

int MeshLocator::locate(Point p, std::array<double, 3> &bary) const {
  int i = static_cast<int>((p.x1 - x0_) / dx_), j = static_cast<int>((p.x2 - y0_) / dy_);
  if (i < 0 || j < 0 || i >= nb_ || j >= nb_)
    return -1;
  for (int t : cells_[static_cast<size_t>(i) * nb_ + j]) {
    const auto &tr = mesh_.triangles[t];
    const Point &a = mesh_.nodes[tr[0]], &b = mesh_.nodes[tr[1]], &c = mesh_.nodes[tr[2]];
    double det = (b.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (b.x2 - a.x2);
    double l1 = ((p.x1 - a.x1) * (c.x2 - a.x2) - (c.x1 - a.x1) * (p.x2 - a.x2)) / det;
    double l2 = ((b.x1 - a.x1) * (p.x2 - a.x2) - (p.x1 - a.x1) * (b.x2 - a.x2)) / det;
    double l0 = 1 - l1 - l2;
    const double eps = -1e-12;
    if (l0 >= eps && l1 >= eps && l2 >= eps) {
      bary = {l0, l1, l2};
      return t;
    }
  }
  return -1;
}

} // namespace fwbic
