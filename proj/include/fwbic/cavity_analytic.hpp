#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace fwbic {

// Neumann mode cos(p pi (x1+L)/L) cos(q pi (x2+y0)/W) of the rectangle
// (-L,0) x (-y0, W-y0); the opening is centered at x2 = 0.
struct RectMode {
  int p = 0;
  int q = 0;
  double L = 0.0;
  double W = 0.0;
  double y0 = 0.0;
  double lambda = 0.0;
  double norm_const = 0.0;

  double value(double x1, double x2) const;
};

std::vector<RectMode> rect_eigenpairs(double L, double W, int count, double y0);
inline std::vector<RectMode> rect_eigenpairs(double L, double W, int count) {
  return rect_eigenpairs(L, W, count, W / 2);
}

// Exact (phi_j, psi)_{Gamma_h} from closed-form antiderivatives.
double overlap_rect(const RectMode &mode, int j, double h);

// (J+1) x modes.size() table of overlap_rect.
Eigen::MatrixXd rect_overlap_table(const std::vector<RectMode> &modes, int J, double h);

// Full resolvent kernel sum over all modes of v v^T / (lambda - mu), summed in
// closed form over p and up to qmax over q (qmax <= 0 picks a default).
Eigen::MatrixXcd rect_full_kernel(double L, double W, double y0, double h, int J,
                                  std::complex<double> mu, int qmax = 0);
Eigen::MatrixXd rect_full_kernel_real(double L, double W, double y0, double h, int J, double mu,
                                      int qmax = 0);

// Mode-independent part of the kernel: C(j, q) = int cos(q pi (x2+y0)/W) phi_j.
struct RectKernelData {
  double W = 0.0;
  Eigen::MatrixXd C; // (J+1) x (qmax+1)

  // Sum over q in [q_lo, q_hi) of the closed-form p-sums; L <= 0 means the
  // L -> infinity limit (coth = 1), exact to rounding for q >= far_start.
  Eigen::MatrixXcd partial(int q_lo, int q_hi, double L, std::complex<double> mu) const;
  Eigen::MatrixXd partial_real(int q_lo, int q_hi, double L, double mu) const;
  int far_start(double mu_max, double L_min) const;
};
RectKernelData rect_kernel_data(double W, double y0, double h, int J, int qmax = 0);
Eigen::MatrixXcd rect_full_kernel(const RectKernelData &d, double L, std::complex<double> mu);
Eigen::MatrixXd rect_full_kernel_real(const RectKernelData &d, double L, double mu);

// Waveguide transverse profile phi_j on (-h/2, h/2).
double phi(int j, double h, double x2);

} // namespace fwbic
