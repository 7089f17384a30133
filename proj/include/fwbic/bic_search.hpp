#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fwbic/modal.hpp"
#include "fwbic/modematch.hpp"

namespace fwbic {

struct BicOptions {
  int M = 7;
  int scan_points = 41;
  int refine = 4;
  int max_iter = 30;
  double fixed_point_tol = 1e-12;
  double root_tol = 1e-10;
  double coupling_floor = 0.0;
  int threads = 1;
};

BicOptions bic_options(const ValidatedSpec &vs);

// mu band of the config, or the default band from the delta = 0 eigenvalues.
// Also installs the tail interpolation window around it.
std::array<double, 2> prepare_band(ModalProvider &prov);

struct BranchSolution {
  double mu = 0.0;
  int iterations = 0;
  bool bisection = false;
  double contraction = 0.0; // largest ratio of consecutive iterate gaps
  Reduction red;
};

// mu = lambda_{M-2+which} + f_which(mu) in the band: fixed point iteration
// from mu = lambda, bisection on g = lambda - mu + f if it stalls or escapes.
BranchSolution solve_branch(const ModalSystem &s, int which, const std::array<double, 2> &band,
                            const BicOptions &opt);

// Largest |f(mu + step) - f(mu)| / step over `points` uniform band points.
double lipschitz_estimate(const ModalSystem &s, int which, const std::array<double, 2> &band,
                          const BicOptions &opt, int points = 21);

struct ScanRow {
  double delta = 0.0;
  double mu0 = std::nan("");
  double mu1 = std::nan("");
  double lambda0 = 0.0, lambda1 = 0.0;
  std::string error;
};

struct BicSolution {
  double delta_star = 0.0;
  double mu_star = 0.0;
  Eigen::VectorXd d;
  Eigen::VectorXcd b;
  double f0 = 0.0, f1 = 0.0, a20 = 0.0, a21 = 0.0;
  double residual0 = 0.0, residual1 = 0.0; // lambda - mu + f per branch
  double sigma_min_full = 0.0;
  double norm_T = 0.0;
  double b0_abs = 0.0;
  double b_norm = 0.0;
  int iterations0 = 0, iterations1 = 0;
  int root_steps = 0;
  std::vector<ScanRow> curves;
  bool certified() const { return sigma_min_full < 1e-8 * norm_T && b0_abs < 1e-6 * b_norm; }
};

// Scans mu0(delta) - mu1(delta) over `deltas` (default: the configured range with
// scan_points), refines the bracketing interval and solves for the BIC. The
// sampled curves are appended to `curves_out` before any error is raised.
BicSolution find_bic(ModalProvider &prov, const BicOptions &opt, std::vector<double> deltas = {},
                     std::vector<ScanRow> *curves_out = nullptr);

// Amplitudes, waveguide coefficients and certificates at a given (delta, mu, d_pair).
void complete_solution(ModalProvider &prov, BicSolution &sol, const BicOptions &opt);

struct FieldSample {
  double x1, x2, re_u;
};

// Cavity field on an nx x ny grid over the cavity, waveguide field on a grid
// over (0, waveguide_length) x (-h/2, h/2).
std::vector<FieldSample> reconstruct_mode(ModalProvider &prov, const BicSolution &sol, int nx, int ny,
                                          double waveguide_length = 0.0);
// Waveguide field sum_j b_j exp(i alpha_j x1) phi_j(x2).
cplx waveguide_field(const ModalSystem &s, const Eigen::VectorXcd &b, double mu, double x1, double x2);

// Odd-subsystem BIC of a mirror-symmetric structure: mu = lambda_m + a(mu) for
// odd branch m (m < 0 picks the lowest odd mode with nonzero coupling).
BicSolution symmetry_bic(ModalProvider &prov, double delta, int m, const BicOptions &opt);
// The scalar a(mu) of the odd subsystem for branch m.
double odd_subsystem_a(const ModalSystem &s, int m, double mu);

} // namespace fwbic
