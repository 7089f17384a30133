#include "fwbic/cavity_analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fwbic {

using std::numbers::pi;
using cplx = std::complex<double>;

namespace {

double sinc(double x) {
  if (std::abs(x) < 1e-4)
    return 1.0 - x * x / 6.0 + x * x * x * x / 120.0;
  return std::sin(x) / x;
}

// int_{-h/2}^{h/2} cos(k x + c) dx
double cos_integral(double k, double c, double h) { return h * std::cos(c) * sinc(k * h / 2); }

double phi_const(int j, double h) { return j == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h); }

// int cos(a (x2 + y0)) phi_j(x2) over the opening.
double cq_overlap(double a, double y0, int j, double h) {
  double b = j * pi / h;
  double c1 = a * y0 - b * h / 2, c2 = a * y0 + b * h / 2;
  return 0.5 * phi_const(j, h) * (cos_integral(a - b, c1, h) + cos_integral(a + b, c2, h));
}

int default_qmax(double W, double h, int J) {
  return std::max(4000, static_cast<int>(40.0 * (J + 1) * W / h));
}

} // namespace

double phi(int j, double h, double x2) {
  return phi_const(j, h) * std::cos(j * pi * (x2 + h / 2) / h);
}

double RectMode::value(double x1, double x2) const {
  return norm_const * std::cos(p * pi * (x1 + L) / L) * std::cos(q * pi * (x2 + y0) / W);
}

std::vector<RectMode> rect_eigenpairs(double L, double W, int count, double y0) {
  std::vector<RectMode> modes;
  double bound = std::max(1.0, 4 * pi * count / (L * W)) * 2.0;
  while (true) {
    modes.clear();
    int pmax = static_cast<int>(std::sqrt(bound) * L / pi) + 1;
    int qmax = static_cast<int>(std::sqrt(bound) * W / pi) + 1;
    for (int p = 0; p <= pmax; ++p)
      for (int q = 0; q <= qmax; ++q) {
        double lam = std::pow(p * pi / L, 2) + std::pow(q * pi / W, 2);
        if (lam > bound)
          continue;
        double c = std::sqrt((p == 0 ? 1.0 : 2.0) * (q == 0 ? 1.0 : 2.0) / (L * W));
        modes.push_back({p, q, L, W, y0, lam, c});
      }
    if (static_cast<int>(modes.size()) >= count)
      break;
    bound *= 2;
  }
  std::sort(modes.begin(), modes.end(), [](const RectMode &a, const RectMode &b) {
    double tol = 1e-12 * std::max(1.0, std::abs(a.lambda));
    if (std::abs(a.lambda - b.lambda) > tol)
      return a.lambda < b.lambda;
    return a.p != b.p ? a.p < b.p : a.q < b.q;
  });
  modes.resize(count);
  return modes;
}

double overlap_rect(const RectMode &m, int j, double h) {
  double sign = (m.p % 2 == 0) ? 1.0 : -1.0;
  return m.norm_const * sign * cq_overlap(m.q * pi / m.W, m.y0, j, h);
}

Eigen::MatrixXd rect_overlap_table(const std::vector<RectMode> &modes, int J, double h) {
  Eigen::MatrixXd O(J + 1, modes.size());
  for (int m = 0; m < static_cast<int>(modes.size()); ++m)
    for (int j = 0; j <= J; ++j)
      O(j, m) = overlap_rect(modes[m], j, h);
  return O;
}

RectKernelData rect_kernel_data(double W, double y0, double h, int J, int qmax) {
  if (qmax <= 0)
    qmax = default_qmax(W, h, J);
  RectKernelData d;
  d.W = W;
  d.C.resize(J + 1, qmax + 1);
  for (int q = 0; q <= qmax; ++q)
    for (int j = 0; j <= J; ++j)
      d.C(j, q) = cq_overlap(q * pi / W, y0, j, h);
  return d;
}

namespace {

// (2 - delta_q0)/W * sum_p (2 - delta_p0)/L / ((p pi/L)^2 - kappa^2) = -cot(kappa L)/kappa
cplx q_weight(double W, int q, double L, cplx mu) {
  const cplx I(0.0, 1.0);
  double a = q * pi / W;
  cplx k2 = mu - a * a;
  cplx kappa = std::sqrt(k2);
  if (kappa.imag() < 0)
    kappa = -kappa;
  cplx v;
  if (std::abs(kappa * L) < 1e-6) {
    v = -1.0 / (k2 * L) + L / 3.0;
  } else if (L <= 0) {
    v = I / kappa; // L -> infinity with Im kappa > 0
  } else {
    cplx E = std::exp(2.0 * I * kappa * L);
    cplx cot = I * (E + 1.0) / (E - 1.0);
    v = -cot / kappa;
  }
  return v * ((q == 0 ? 1.0 : 2.0) / W);
}

double q_weight_real(double W, int q, double L, double mu) {
  double a = q * pi / W;
  double k2 = mu - a * a, v;
  if (L <= 0) {
    v = 1.0 / std::sqrt(-k2);
  } else if (std::abs(k2) * L * L < 1e-12) {
    v = -1.0 / (k2 * L) + L / 3.0;
  } else if (k2 > 0) {
    double k = std::sqrt(k2);
    v = -1.0 / (k * std::tan(k * L));
  } else {
    double k = std::sqrt(-k2);
    v = 1.0 / (k * std::tanh(k * L));
  }
  return v * ((q == 0 ? 1.0 : 2.0) / W);
}

} // namespace

int RectKernelData::far_start(double mu_max, double L_min) const {
  // Beyond this q, kappa L > 20 and coth(kappa L) = 1 to double precision.
  double a = std::sqrt(std::max(mu_max, 0.0) + std::pow(20.0 / L_min, 2));
  return std::min(static_cast<int>(C.cols()), static_cast<int>(std::ceil(a * W / pi)) + 1);
}

Eigen::MatrixXcd RectKernelData::partial(int q_lo, int q_hi, double L, cplx mu) const {
  const int n = q_hi - q_lo;
  Eigen::VectorXcd S(n);
  for (int q = q_lo; q < q_hi; ++q)
    S(q - q_lo) = q_weight(W, q, L, mu);
  Eigen::MatrixXcd Cc = C.middleCols(q_lo, n).cast<cplx>();
  return Cc * S.asDiagonal() * Cc.transpose();
}

Eigen::MatrixXd RectKernelData::partial_real(int q_lo, int q_hi, double L, double mu) const {
  const int n = q_hi - q_lo;
  Eigen::VectorXd S(n);
  for (int q = q_lo; q < q_hi; ++q)
    S(q - q_lo) = q_weight_real(W, q, L, mu);
  const auto Cs = C.middleCols(q_lo, n);
  return Cs * S.asDiagonal() * Cs.transpose();
}

Eigen::MatrixXcd rect_full_kernel(const RectKernelData &d, double L, cplx mu) {
  return d.partial(0, static_cast<int>(d.C.cols()), L, mu);
}

Eigen::MatrixXd rect_full_kernel_real(const RectKernelData &d, double L, double mu) {
  return d.partial_real(0, static_cast<int>(d.C.cols()), L, mu);
}

Eigen::MatrixXcd rect_full_kernel(double L, double W, double y0, double h, int J, cplx mu, int qmax) {
  return rect_full_kernel(rect_kernel_data(W, y0, h, J, qmax), L, mu);
}

Eigen::MatrixXd rect_full_kernel_real(double L, double W, double y0, double h, int J, double mu,
                                      int qmax) {
  return rect_full_kernel_real(rect_kernel_data(W, y0, h, J, qmax), L, mu);
}

} // namespace fwbic
