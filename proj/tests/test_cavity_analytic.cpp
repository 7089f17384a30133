#include <catch_amalgamated.hpp>

#include <numbers>

#include "fwbic/cavity_analytic.hpp"
#include "oracles.hpp"

using namespace fwbic;
using Catch::Approx;
using std::numbers::pi;

TEST_CASE("rectangle spectrum") {
  auto m = rect_eigenpairs(pi, 2 * pi, 7);
  std::vector<double> want = {0, 0.25, 1, 1, 1.25, 2, 2.25};
  for (int k = 0; k < 7; ++k)
    CHECK(m[k].lambda == Approx(want[k]).margin(1e-14));

  auto sq = rect_eigenpairs(pi, pi, 3);
  CHECK(sq[0].lambda == Approx(0).margin(1e-14));
  CHECK(sq[1].lambda == Approx(1));
  CHECK(sq[2].lambda == Approx(1));
  // Lexicographic tie-break.
  CHECK(sq[1].p == 0);
  CHECK(sq[1].q == 1);
  CHECK(sq[2].p == 1);

  // Against brute-force enumeration on an irregular rectangle.
  auto ref = oracle::rect_spectrum(2.3, 5.1, 40);
  auto got = rect_eigenpairs(2.3, 5.1, 40);
  for (int k = 0; k < 40; ++k) {
    CHECK(got[k].lambda == Approx(std::get<0>(ref[k])).epsilon(1e-13));
    CHECK(got[k].p == std::get<1>(ref[k]));
    CHECK(got[k].q == std::get<2>(ref[k]));
  }
}

TEST_CASE("mode normalization") {
  auto m = rect_eigenpairs(pi, 2 * pi, 12);
  CHECK(m[0].value(-1.3, 0.4) == Approx(1 / std::sqrt(2 * pi * pi)));
  // Gram matrix under tensor Gauss-Kronrod quadrature.
  for (int a = 0; a < 12; ++a)
    for (int b = a; b < 12; ++b) {
      double gx = oracle::integrate(
          [&](double x) {
            return std::cos(m[a].p * pi * (x + pi) / pi) * std::cos(m[b].p * pi * (x + pi) / pi);
          },
          -pi, 0);
      double gy = oracle::integrate(
          [&](double y) {
            return std::cos(m[a].q * pi * (y + pi) / (2 * pi)) * std::cos(m[b].q * pi * (y + pi) / (2 * pi));
          },
          -pi, pi);
      double g = m[a].norm_const * m[b].norm_const * gx * gy;
      CHECK(g == Approx(a == b ? 1.0 : 0.0).margin(1e-12));
    }
}

TEST_CASE("waveguide profiles are orthonormal") {
  const double h = 2 * pi / 9;
  for (int i = 0; i < 8; ++i)
    for (int j = i; j < 8; ++j) {
      double g = oracle::integrate([&](double x) { return phi(i, h, x) * phi(j, h, x); }, -h / 2, h / 2);
      CHECK(g == Approx(i == j ? 1.0 : 0.0).margin(1e-13));
      CHECK(phi(i, h, 0.01 * j) == Approx(oracle::waveguide_profile(i, h, 0.01 * j)).margin(1e-14));
    }
}

TEST_CASE("closed-form overlaps") {
  const double h = 2 * pi / 9;
  auto m = rect_eigenpairs(pi, 2 * pi, 30);
  CHECK(overlap_rect(m[0], 0, h) == Approx(std::sqrt(h) / std::sqrt(2 * pi * pi)).epsilon(1e-14));
  for (const auto &mode : m)
    if (mode.q == 0)
      CHECK(std::abs(overlap_rect(mode, 1, h)) < 1e-14);

  // Mode (0, 2) against adaptive quadrature.
  RectMode m02;
  for (const auto &mode : m)
    if (mode.p == 0 && mode.q == 2)
      m02 = mode;
  double q = oracle::integrate([&](double y) { return m02.value(0.0, y) * phi(0, h, y); }, -h / 2, h / 2);
  CHECK(overlap_rect(m02, 0, h) == Approx(q).margin(1e-12));

  // Every mode and profile against quadrature, off-center opening included.
  for (double y0 : {pi, 2.1}) {
    auto modes = rect_eigenpairs(pi, 2 * pi, 25, y0);
    for (const auto &mode : modes)
      for (int j = 0; j <= 6; ++j) {
        double r = oracle::integrate(
            [&](double y) {
              return oracle::rect_mode(mode.p, mode.q, pi, 2 * pi, y0, 0.0, y) * oracle::waveguide_profile(j, h, y);
            },
            -h / 2, h / 2);
        CHECK(overlap_rect(mode, j, h) == Approx(r).margin(1e-12));
      }
  }
}

TEST_CASE("centered opening decouples by parity") {
  const double h = 0.5;
  auto m = rect_eigenpairs(pi, 2 * pi, 40);
  for (const auto &mode : m)
    for (int j = 0; j <= 12; ++j)
      if ((mode.q + j) % 2 == 1)
        CHECK(std::abs(overlap_rect(mode, j, h)) < 1e-14);
}

TEST_CASE("Bessel bound on overlap columns") {
  const double h = 2 * pi / 9;
  auto m = rect_eigenpairs(pi, 2 * pi, 30);
  auto O = rect_overlap_table(m, 30, h);
  for (int k = 0; k < 30; ++k) {
    double trace2 = oracle::integrate([&](double y) { return std::pow(m[k].value(0, y), 2); }, -h / 2, h / 2);
    CHECK(O.col(k).squaredNorm() <= trace2 + 1e-12);
  }
}

TEST_CASE("length scaling law") {
  auto a = rect_eigenpairs(pi, 2 * pi, 20);
  const double s = 1.03;
  auto b = rect_eigenpairs(pi * s, 2 * pi, 60);
  for (const auto &ma : a) {
    if (ma.q != 0)
      continue;
    bool found = false;
    for (const auto &mb : b)
      if (mb.p == ma.p && mb.q == 0) {
        CHECK(mb.lambda == Approx(ma.lambda / (s * s)).epsilon(1e-14));
        found = true;
      }
    CHECK(found);
  }
}

TEST_CASE("resolvent kernel matches a brute-force mode sum") {
  const double L = pi, W = 2 * pi, y0 = pi, h = 2 * pi / 9;
  const int J = 2, Q = 200;
  const std::complex<double> mu(1.3, -0.05);
  const int P = 200000;
  Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(J + 1, J + 1);
  for (int q = 0; q <= Q; ++q) {
    RectMode base{0, q, L, W, y0, 0.0, 0.0};
    base.norm_const = 1.0;
    Eigen::VectorXd c(J + 1);
    for (int j = 0; j <= J; ++j)
      c(j) = overlap_rect(base, j, h); // p-independent up to sign and normalization
    Eigen::MatrixXd cc = c * c.transpose();
    std::complex<double> s = 0.0;
    for (int p = 0; p <= P; ++p) {
      double n2 = (p ? 2.0 : 1.0) * (q ? 2.0 : 1.0) / (L * W);
      double lam = std::pow(p * pi / L, 2) + std::pow(q * pi / W, 2);
      s += n2 / (lam - mu);
    }
    // Midpoint-rule tail of sum_{p > P} 2/(L W) (L / (p pi))^2.
    s += (q ? 4.0 : 2.0) / (L * W) * L * L / (pi * pi * (P + 0.5));
    ref += s * cc.cast<std::complex<double>>();
  }
  Eigen::MatrixXcd got = rect_full_kernel(L, W, y0, h, J, mu, Q);
  CHECK((got - ref).norm() < 1e-5 * ref.norm());

  // Real evaluation agrees with the complex one on the axis.
  Eigen::MatrixXd gr = rect_full_kernel_real(L, W, y0, h, J, 1.3, Q);
  Eigen::MatrixXcd gc = rect_full_kernel(L, W, y0, h, J, {1.3, 0.0}, Q);
  CHECK((gr - gc.real()).norm() < 1e-12 * gr.norm());
  CHECK(gc.imag().norm() < 1e-12 * gr.norm());

  // Cached kernel data gives the same kernel.
  auto d = rect_kernel_data(W, y0, h, J, Q);
  CHECK((rect_full_kernel(d, L, mu) - got).norm() < 1e-12 * got.norm());
}

TEST_CASE("far kernel is the infinite-length limit") {
  const double W = 2 * pi, y0 = pi, h = 2 * pi / 9;
  auto d = rect_kernel_data(W, y0, h, 3, 3000);
  int q0 = d.far_start(2.0, 0.9 * pi);
  REQUIRE(q0 < 3000);
  auto exact = d.partial_real(q0, 3000, pi, 1.7);
  auto limit = d.partial_real(q0, 3000, 0.0, 1.7);
  CHECK((exact - limit).norm() <= 1e-13 * std::max(1.0, exact.norm()));
}
