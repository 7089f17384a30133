#include "fwbic/tail.hpp"

#include <cmath>
#include <numbers>

namespace fwbic {

ChebyshevTail::ChebyshevTail(double a, double b, int nodes, RealFn exact_real, ComplexFn exact_complex)
    : a_(a), b_(b), exact_real_(std::move(exact_real)), exact_complex_(std::move(exact_complex)) {
  using std::numbers::pi;
  const int N = nodes;
  std::vector<Eigen::MatrixXd> f(N);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int k = 0; k < N; ++k)
    f[k] = exact_real_(mid + half * std::cos(pi * (k + 0.5) / N));
  coef_.assign(N, Eigen::MatrixXd::Zero(f[0].rows(), f[0].cols()));
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < N; ++k)
      coef_[n] += f[k] * std::cos(pi * n * (k + 0.5) / N);
    coef_[n] *= (n == 0 ? 1.0 : 2.0) / N;
  }
  // Probe between two nodes near the window center.
  double t = std::cos(pi * (N / 2 + 0.0) / N);
  double mu = mid + half * t;
  Eigen::MatrixXd ex = exact_real_(mu);
  probe_error_ = (eval_real(mu) - ex).norm() / std::max(ex.norm(), 1e-300);
}

bool ChebyshevTail::inside(cplx mu) const {
  double half = 0.5 * (b_ - a_);
  return mu.real() >= a_ && mu.real() <= b_ && std::abs(mu.imag()) <= 0.5 * half;
}

Eigen::MatrixXcd ChebyshevTail::eval(cplx mu) const {
  if (!inside(mu))
    return exact_complex_(mu);
  const double mid = 0.5 * (a_ + b_), half = 0.5 * (b_ - a_);
  cplx t = (mu - mid) / half;
  const int N = static_cast<int>(coef_.size());
  Eigen::MatrixXcd b1 = Eigen::MatrixXcd::Zero(coef_[0].rows(), coef_[0].cols()), b2 = b1;
  for (int n = N - 1; n >= 1; --n) {
    Eigen::MatrixXcd bn = 2.0 * t * b1 - b2 + coef_[n].cast<cplx>();
    b2 = std::move(b1);
    b1 = std::move(bn);
  }
  return t * b1 - b2 + coef_[0].cast<cplx>();
}

Eigen::MatrixXd ChebyshevTail::eval_real(double mu) const {
  if (mu < a_ || mu > b_)
    return exact_real_(mu);
  const double mid = 0.5 * (a_ + b_), half = 0.5 * (b_ - a_);
  double t = (mu - mid) / half;
  const int N = static_cast<int>(coef_.size());
  Eigen::MatrixXd b1 = Eigen::MatrixXd::Zero(coef_[0].rows(), coef_[0].cols()), b2 = b1;
  for (int n = N - 1; n >= 1; --n) {
    Eigen::MatrixXd bn = 2.0 * t * b1 - b2 + coef_[n];
    b2 = std::move(b1);
    b1 = std::move(bn);
  }
  return t * b1 - b2 + coef_[0];
}

} // namespace fwbic
