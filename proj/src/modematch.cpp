#include "fwbic/modematch.hpp"

#include <cmath>
#include <numbers>

#include "fwbic/errors.hpp"

namespace fwbic {

using std::numbers::pi;

cplx i_alpha(int j, double h, cplx mu) {
  const double k = j * pi / h;
  cplx z = mu - k * k;
  cplx r = std::sqrt(z);
  if (std::arg(z) < -pi / 2)
    r = -r;
  return cplx(0.0, 1.0) * r;
}

Eigen::VectorXcd i_alpha_vec(int J, double h, cplx mu) {
  Eigen::VectorXcd v(J + 1);
  for (int j = 0; j <= J; ++j)
    v(j) = i_alpha(j, h, mu);
  return v;
}

namespace {

// (I - Q_t Z)^-1 for the given diagonal Z.
Eigen::MatrixXcd resolvent_factor(const ModalSystem &s, cplx mu, const Eigen::VectorXcd &z) {
  const int n = static_cast<int>(z.size());
  if (!s.tail)
    return Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd Q = s.tail->eval(mu);
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(n, n) - Q * z.asDiagonal();
  return A.partialPivLu().inverse();
}

} // namespace

Eigen::MatrixXcd full_matrix(const ModalSystem &s, cplx mu) {
  const int J = s.jwg();
  Eigen::VectorXcd z = s.scaling * i_alpha_vec(J, s.h, mu);
  Eigen::MatrixXcd R = resolvent_factor(s, mu, z);
  Eigen::MatrixXcd Zeff = z.asDiagonal() * R;
  Zeff = 0.5 * (Zeff + Zeff.transpose()).eval();
  Eigen::MatrixXcd P = s.overlaps.cast<cplx>();
  Eigen::MatrixXcd T = -P.transpose() * Zeff * P;
  for (int m = 0; m < s.mcav(); ++m)
    T(m, m) += s.lambdas(m) - mu;
  return T;
}

Eigen::VectorXcd waveguide_coeffs(const ModalSystem &s, cplx mu, const Eigen::VectorXcd &d) {
  Eigen::VectorXcd z = s.scaling * i_alpha_vec(s.jwg(), s.h, mu);
  return resolvent_factor(s, mu, z) * (s.overlaps.cast<cplx>() * d);
}

double sigma_min(const Eigen::MatrixXcd &T) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(T);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

double sigma_max(const Eigen::MatrixXcd &T) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(T);
  return svd.singularValues()(0);
}

namespace {

double cond(const Eigen::MatrixXd &A) {
  if (A.size() == 0)
    return 1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  auto sv = svd.singularValues();
  return sv(0) / sv(sv.size() - 1);
}

// Evanescent-only factors at real mu: E = Z1 R and w = e0^T R P.
void evanescent_factors(const ModalSystem &s, double mu, Eigen::MatrixXd &E, Eigen::RowVectorXd &w) {
  const int J = s.jwg();
  if (J >= 1 && mu >= std::pow(pi / s.h, 2))
    throw Error(ErrorKind::MultiModeBand, "modematch", "mu above the second waveguide cutoff");
  Eigen::VectorXd z(J + 1);
  z(0) = 0.0;
  for (int j = 1; j <= J; ++j)
    z(j) = s.scaling * i_alpha(j, s.h, mu).real();
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(J + 1, J + 1);
  if (s.tail) {
    Eigen::MatrixXd Q = s.tail->eval_real(mu);
    R = (Eigen::MatrixXd::Identity(J + 1, J + 1) - Q * z.asDiagonal()).partialPivLu().inverse();
  }
  E = z.asDiagonal() * R;
  E = 0.5 * (E + E.transpose()).eval();
  w = R.row(0) * s.overlaps;
}

} // namespace

Reduction reduce(const ModalSystem &s, double mu, const ReductionOptions &opt) {
  const int M = opt.M, mc = s.mcav();
  if (M < 3 || M > mc)
    throw Error(ErrorKind::ConfigError, "modematch", "crossing index M out of range");
  const int nlp = M, nhi = mc - M;
  for (int m = M; m < mc; ++m)
    if (s.lambdas(m) <= mu)
      throw Error(ErrorKind::BandViolation, "modematch", "upper cavity mode below mu",
                  {{"mode", std::to_string(m)}, {"lambda", std::to_string(s.lambdas(m))},
                   {"mu", std::to_string(mu)}});
  Reduction r;
  r.mu = mu;
  evanescent_factors(s, mu, r.E, r.w);

  const Eigen::MatrixXd P_lp = s.overlaps.leftCols(nlp);
  const Eigen::MatrixXd P_hi = s.overlaps.rightCols(nhi);
  Eigen::VectorXd D(nhi);
  for (int k = 0; k < nhi; ++k)
    D(k) = 1.0 / std::sqrt(s.lambdas(M + k) - mu);
  r.Dhi = D;

  r.A = P_lp.transpose() * r.E * P_lp;
  Eigen::MatrixXd EP = r.E * P_hi;
  r.B = D.asDiagonal() * (P_hi.transpose() * EP) * D.asDiagonal();
  r.B = 0.5 * (r.B + r.B.transpose()).eval();
  r.V = D.asDiagonal() * (EP.transpose() * P_lp);

  Eigen::MatrixXd IB = Eigen::MatrixXd::Identity(nhi, nhi) - r.B;
  if (opt.diagnostics) {
    r.cond_I_minus_B = cond(IB);
    if (r.cond_I_minus_B > opt.cond_max)
      throw Error(ErrorKind::IllConditioned, "modematch", "I - B is ill conditioned");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(IB);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::IllConditioned, "modematch", "I - B is not positive definite");
  r.X = llt.solve(r.V);
  r.C = r.A + r.V.transpose() * r.X;

  const int nlo = M - 2;
  Eigen::MatrixXd L00 = Eigen::MatrixXd::Zero(nlo, nlo);
  for (int m = 0; m < nlo; ++m)
    L00(m, m) = s.lambdas(m) - mu;
  Eigen::MatrixXd T00 = L00 - r.C.topLeftCorner(nlo, nlo);
  r.cond_lo = cond(T00);
  if (r.cond_lo > opt.cond_max)
    throw Error(ErrorKind::IllConditioned, "modematch", "lower block is ill conditioned");
  r.Y = T00.partialPivLu().solve(r.C.topRightCorner(nlo, 2));
  r.a = -r.C.bottomRightCorner(2, 2) - r.C.bottomLeftCorner(2, nlo) * r.Y;

  Eigen::RowVectorXd rr = r.w.head(nlp) + (r.w.tail(nhi).cwiseProduct(D.transpose())) * r.X;
  Eigen::RowVector2d a2 = rr.tail(2) + rr.head(nlo) * r.Y;
  r.a2 = a2.transpose();

  const double a20 = r.a2(0), a21 = r.a2(1);
  r.near_zero_coupling = opt.coupling_floor > 0 &&
                         (std::abs(a20) < opt.coupling_floor || std::abs(a21) < opt.coupling_floor);
  r.f0 = r.a(0, 0) - (r.a(0, 1) == 0.0 ? 0.0 : r.a(0, 1) * a20 / a21);
  r.f1 = r.a(1, 1) - (r.a(1, 0) == 0.0 ? 0.0 : r.a(1, 0) * a21 / a20);
  return r;
}

Eigen::Matrix<double, 3, 2> Reduction::pair_system(const Eigen::Vector2d &lp) const {
  Eigen::Matrix<double, 3, 2> S;
  S.topRows<2>() = a;
  S(0, 0) += lp(0) - mu;
  S(1, 1) += lp(1) - mu;
  S.row(2) = a2.transpose();
  return S;
}

Eigen::VectorXd Reduction::expand(const Eigen::Vector2d &d_pair) const {
  const int nlo = static_cast<int>(Y.rows());
  const int nlp = nlo + 2, nhi = static_cast<int>(B.rows());
  Eigen::VectorXd d(nlp + nhi);
  d.head(nlo) = Y * d_pair;
  d.segment(nlo, 2) = d_pair;
  Eigen::VectorXd e = X * d.head(nlp);
  d.tail(nhi) = e.cwiseProduct(Dhi);
  return d;
}

std::pair<Eigen::Matrix2d, Eigen::Vector2d> pair_schur_reference(const ModalSystem &s, double mu, int M) {
  Eigen::MatrixXd E;
  Eigen::RowVectorXd w;
  evanescent_factors(s, mu, E, w);
  const int mc = s.mcav();
  Eigen::MatrixXd T = -s.overlaps.transpose() * E * s.overlaps;
  for (int m = 0; m < mc; ++m)
    T(m, m) += s.lambdas(m) - mu;
  std::vector<int> other;
  for (int m = 0; m < mc; ++m)
    if (m != M - 2 && m != M - 1)
      other.push_back(m);
  const int no = static_cast<int>(other.size());
  Eigen::MatrixXd Too(no, no), Top(no, 2);
  Eigen::Matrix2d Tpp;
  Eigen::RowVectorXd wo(no);
  for (int i = 0; i < no; ++i) {
    wo(i) = w(other[i]);
    for (int k = 0; k < no; ++k)
      Too(i, k) = T(other[i], other[k]);
    for (int k = 0; k < 2; ++k)
      Top(i, k) = T(other[i], M - 2 + k);
  }
  Tpp = T.block(M - 2, M - 2, 2, 2);
  Eigen::MatrixXd S = Too.partialPivLu().solve(Top);
  Eigen::Matrix2d a = Tpp - Top.transpose() * S;
  a(0, 0) -= s.lambdas(M - 2) - mu;
  a(1, 1) -= s.lambdas(M - 1) - mu;
  Eigen::RowVector2d a2 = w.segment(M - 2, 2) - wo * S;
  return {a, a2.transpose()};
}

} // namespace fwbic
