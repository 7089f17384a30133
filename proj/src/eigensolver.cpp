#include "fwbic/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>

#include "fwbic/errors.hpp"

namespace fwbic {

namespace {

EigenResult finish(const SpMat &K, const SpMat &M, Eigen::VectorXd vals, Eigen::MatrixXd vecs) {
  EigenResult r;
  r.values = std::move(vals);
  r.vectors = std::move(vecs);
  r.residuals.resize(r.values.size());
  for (int i = 0; i < r.values.size(); ++i) {
    Eigen::VectorXd Mx = M * r.vectors.col(i);
    Eigen::VectorXd res = K * r.vectors.col(i) - r.values(i) * Mx;
    r.residuals(i) = res.norm() / Mx.norm();
  }
  return r;
}

EigenResult solve_dense(const SpMat &K, const SpMat &M, int count) {
  Eigen::MatrixXd Kd(K), Md(M);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kd, Md);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::NoConvergence, "cavity_fem", "dense generalized eigensolve failed");
  auto r = finish(K, M, es.eigenvalues().head(count), es.eigenvectors().leftCols(count));
  r.dense = true;
  return r;
}

} // namespace

EigenResult solve_generalized(const SpMat &K, const SpMat &M, int count, const EigenOptions &opt) {
  const int n = static_cast<int>(K.rows());
  if (count < 1 || count > n)
    throw Error(ErrorKind::ConfigError, "cavity_fem", "eigenpair count out of range");
  if (n <= opt.dense_max)
    return solve_dense(K, M, count);

  // Block Lanczos on op = (K - sigma M)^-1 M, self-adjoint in the M inner product.
  SpMat A = K - opt.shift * M;
  Eigen::SimplicialLLT<SpMat> llt;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool use_llt = opt.shift < 0;
  if (use_llt) {
    llt.compute(A);
    if (llt.info() != Eigen::Success)
      use_llt = false;
  }
  if (!use_llt) {
    ldlt.compute(A);
    if (ldlt.info() != Eigen::Success)
      throw Error(ErrorKind::NoConvergence, "cavity_fem", "shifted factorization failed");
  }
  auto op = [&](const Eigen::MatrixXd &X) -> Eigen::MatrixXd {
    Eigen::MatrixXd MX = M * X;
    return use_llt ? Eigen::MatrixXd(llt.solve(MX)) : Eigen::MatrixXd(ldlt.solve(MX));
  };

  const int b = std::max(1, opt.block);
  int max_dim = opt.max_dim > 0 ? opt.max_dim : std::max(6 * count + 60, 240);
  max_dim = std::min(max_dim, n);
  Eigen::MatrixXd Q(n, max_dim), MQ(n, max_dim), H = Eigen::MatrixXd::Zero(max_dim, max_dim);
  std::mt19937 rng(opt.seed);
  std::normal_distribution<double> nd;
  auto random_block = [&](int cols) {
    Eigen::MatrixXd X(n, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < n; ++i)
        X(i, j) = nd(rng);
    return X;
  };

  int k = 0; // basis size
  // Orthonormalizes the columns of W against Q[:, :k] and each other, appending them.
  // Returns the coefficient block expressing W in the new columns.
  auto append = [&](Eigen::MatrixXd W) -> Eigen::MatrixXd {
    int cols = static_cast<int>(W.cols());
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(cols, cols);
    for (int c = 0; c < cols && k < max_dim; ++c) {
      Eigen::VectorXd w = W.col(c);
      Eigen::VectorXd Mw = M * w;
      double n0 = std::sqrt(std::max(w.dot(Mw), 0.0));
      for (int pass = 0; pass < 2; ++pass) {
        if (k > 0) {
          Eigen::VectorXd coef = MQ.leftCols(k).transpose() * w;
          w -= Q.leftCols(k) * coef;
          if (pass == 0 && c < cols) {
            // coefficients against the freshly appended columns of this block
            for (int cc = 0; cc < c; ++cc)
              R(cc, c) += coef(k - c + cc);
          }
        }
      }
      Mw = M * w;
      double nrm = std::sqrt(std::max(w.dot(Mw), 0.0));
      if (nrm <= 1e-10 * std::max(n0, 1e-300)) {
        // Invariant subspace found: continue with a fresh random direction.
        w = random_block(1).col(0);
        for (int pass = 0; pass < 2; ++pass)
          if (k > 0)
            w -= Q.leftCols(k) * (MQ.leftCols(k).transpose() * w);
        Mw = M * w;
        nrm = std::sqrt(w.dot(Mw));
        R(c, c) = 0.0;
      } else {
        R(c, c) = nrm;
      }
      Q.col(k) = w / nrm;
      MQ.col(k) = Mw / nrm;
      ++k;
    }
    return R;
  };

  append(random_block(b));
  int blocks_done = 0;
  Eigen::MatrixXd Rlast;
  Eigen::VectorXd theta;
  Eigen::MatrixXd S;
  double tighten = 1.0;
  while (true) {
    int start = blocks_done * b;
    int end = std::min(start + b, k);
    if (start >= end)
      break;
    Eigen::MatrixXd W = op(Q.middleCols(start, end - start));
    Eigen::MatrixXd C = MQ.leftCols(k).transpose() * W;
    H.block(0, start, k, end - start) = C;
    ++blocks_done;
    bool full = k >= max_dim;
    if (!full) {
      W -= Q.leftCols(k) * C;
      Rlast = append(W);
    } else {
      Rlast = Eigen::MatrixXd::Zero(end - start, end - start);
    }
    int kk = blocks_done * b;
    if (kk > k)
      kk = k;
    bool check = kk >= count + b && (blocks_done % 2 == 0 || full);
    if (!check && !full)
      continue;
    // Column blocks hold all rows up to their own block: mirror the upper part.
    Eigen::MatrixXd Hs = H.topLeftCorner(kk, kk).selfadjointView<Eigen::Upper>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs);
    theta = es.eigenvalues();
    S = es.eigenvectors();
    // Largest theta <-> smallest lambda.
    bool converged = true;
    int last = kk - (end - start);
    for (int i = 0; i < count; ++i) {
      int idx = kk - 1 - i;
      Eigen::VectorXd sl = S.block(last, idx, end - start, 1);
      double est = (Rlast * sl).norm();
      if (est > 1e-3 * tighten * opt.tol * std::abs(theta(idx)))
        converged = false;
    }
    if (converged || full) {
      Eigen::VectorXd vals(count);
      Eigen::MatrixXd vecs(n, count);
      for (int i = 0; i < count; ++i) {
        int idx = kk - 1 - i;
        vals(i) = opt.shift + 1.0 / theta(idx);
        vecs.col(i) = Q.leftCols(kk) * S.col(idx);
      }
      auto r = finish(K, M, vals, vecs);
      r.krylov_dim = kk;
      if (r.residuals.maxCoeff() <= opt.tol)
        return r;
      if (full)
        throw Error(ErrorKind::NoConvergence, "cavity_fem", "Lanczos basis exhausted",
                    {{"krylov_dim", std::to_string(kk)},
                     {"max_residual", std::to_string(r.residuals.maxCoeff())}});
      tighten *= 0.01;
    }
  }
  throw Error(ErrorKind::NoConvergence, "cavity_fem", "Lanczos iteration stalled");
}

} // namespace fwbic
