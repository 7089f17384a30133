#pragma once

#include <complex>

#include <Eigen/Dense>

#include "fwbic/modal.hpp"

namespace fwbic {

// i*alpha_j(mu), alpha_j = sqrt(mu - (j pi/h)^2). The cut sits on the negative
// imaginary axis of mu - (j pi/h)^2, so real mu below cutoff gives -|.| and
// Im mu < 0 continues the outgoing branch.
cplx i_alpha(int j, double h, cplx mu);
Eigen::VectorXcd i_alpha_vec(int J, double h, cplx mu);

// Effective junction matrix T(mu) = diag(lambda - mu) - P^T Z (I - Q_t Z)^-1 P,
// Z = s diag(i alpha), complex symmetric, M_cav x M_cav.
Eigen::MatrixXcd full_matrix(const ModalSystem &s, cplx mu);

// Waveguide coefficients b = (I - Q_t Z)^-1 P d.
Eigen::VectorXcd waveguide_coeffs(const ModalSystem &s, cplx mu, const Eigen::VectorXcd &d);

double sigma_min(const Eigen::MatrixXcd &T);
double sigma_max(const Eigen::MatrixXcd &T);

struct ReductionOptions {
  int M = 7;
  double cond_max = 1e12;
  double coupling_floor = 0.0; // |a20|, |a21| below this raise NearZeroCoupling (0: off)
  bool diagnostics = false;    // fill cond_I_minus_B (one SVD per call)
};

// Real-mu elimination of the modes outside the crossing pair, in the
// evanescent-only coupling (j >= 1); the j = 0 row supplies a20, a21.
struct Reduction {
  double mu = 0.0;
  Eigen::MatrixXd E;   // s diag(i alpha, j>=1) (I - Q_t Z1)^-1, (J+1)^2, real
  Eigen::RowVectorXd w; // e0^T (I - Q_t Z1)^-1 P
  Eigen::MatrixXd A, B, V, X, C, Y;
  Eigen::VectorXd Dhi;  // 1/sqrt(lambda_hi - mu)
  Eigen::Matrix2d a;    // a_kl, k,l in {0,1}
  Eigen::Vector2d a2;   // (a20, a21)
  double f0 = 0.0, f1 = 0.0;
  double cond_I_minus_B = 0.0; // 0 when not computed
  double cond_lo = 1.0;
  bool near_zero_coupling = false;

  // 3x2 pair system whose null vector is the BIC pair amplitude.
  Eigen::Matrix<double, 3, 2> pair_system(const Eigen::Vector2d &lambda_pair) const;
  // Full amplitude vector d from the pair amplitudes.
  Eigen::VectorXd expand(const Eigen::Vector2d &d_pair) const;
};

Reduction reduce(const ModalSystem &s, double mu, const ReductionOptions &opt);

// Schur complement of the pair block of diag(lambda - mu) - P^T E P computed
// directly (reference path for checks): returns the 2x2 a-block and (a20, a21).
std::pair<Eigen::Matrix2d, Eigen::Vector2d> pair_schur_reference(const ModalSystem &s, double mu, int M);

} // namespace fwbic
