#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace fwbic {

using SpMat = Eigen::SparseMatrix<double>;

struct EigenOptions {
  int dense_max = 3000;  // dense generalized solve at or below this size
  double shift = -1.0;   // shift-invert pole for the iterative path
  double tol = 1e-9;     // ||Kx - lambda Mx|| <= tol ||Mx||
  int block = 4;         // block size (resolves multiplicities up to this)
  int max_dim = 0;       // Krylov dimension cap (0: automatic)
  unsigned seed = 12345;
};

struct EigenResult {
  Eigen::VectorXd values;  // ascending
  Eigen::MatrixXd vectors; // M-orthonormal columns
  Eigen::VectorXd residuals;
  int krylov_dim = 0;
  bool dense = false;
};

// Lowest `count` eigenpairs of K x = lambda M x (K symmetric PSD, M SPD).
EigenResult solve_generalized(const SpMat &K, const SpMat &M, int count, const EigenOptions &opt = {});

} // namespace fwbic
