#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace fwbic {

using cplx = std::complex<double>;

// Contribution of the cavity modes beyond the truncated head to the junction
// resolvent: Q_t(mu) = sum_{m >= M_cav} v_m v_m^T / (lambda_m - mu), (J+1)x(J+1).
class TailKernel {
public:
  virtual ~TailKernel() = default;
  virtual Eigen::MatrixXcd eval(cplx mu) const = 0;
  virtual Eigen::MatrixXd eval_real(double mu) const = 0;
};

// Chebyshev interpolant on [a, b] of an analytic kernel; falls back to the
// exact evaluator away from the interpolation window.
class ChebyshevTail : public TailKernel {
public:
  using RealFn = std::function<Eigen::MatrixXd(double)>;
  using ComplexFn = std::function<Eigen::MatrixXcd(cplx)>;

  ChebyshevTail(double a, double b, int nodes, RealFn exact_real, ComplexFn exact_complex);

  Eigen::MatrixXcd eval(cplx mu) const override;
  Eigen::MatrixXd eval_real(double mu) const override;
  double interpolation_error() const { return probe_error_; }
  double lo() const { return a_; }
  double hi() const { return b_; }

private:
  bool inside(cplx mu) const;
  double a_, b_;
  std::vector<Eigen::MatrixXd> coef_;
  RealFn exact_real_;
  ComplexFn exact_complex_;
  double probe_error_ = 0.0;
};

} // namespace fwbic
