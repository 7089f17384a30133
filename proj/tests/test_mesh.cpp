#include <catch_amalgamated.hpp>

#include <filesystem>
#include <map>
#include <numbers>
#include <random>

#include "fwbic/errors.hpp"
#include "fwbic/mesh.hpp"

using namespace fwbic;
using Catch::Approx;
using std::numbers::pi;

namespace {

ValidatedSpec example1() {
  ProblemSpec s = example_spec(2 * pi / 9);
  s.perturbation.n_base = 1.461;
  return validate_spec(s);
}

void check_conforming(const Mesh &m) {
  std::map<std::pair<int, int>, int> count;
  for (int t = 0; t < m.num_triangles(); ++t) {
    CHECK(m.triangle_area(t) > 0);
    const auto &tr = m.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int a = tr[k], b = tr[(k + 1) % 3];
      count[{std::min(a, b), std::max(a, b)}]++;
    }
  }
  int boundary = 0;
  for (const auto &[e, c] : count) {
    CHECK(c <= 2);
    boundary += c == 1;
  }
  CHECK(boundary == static_cast<int>(m.boundary_edges.size()));
}

} // namespace

TEST_CASE("structured grid counts") {
  Mesh m = build_rect_grid(0, 1, 0, 1, 2, 2);
  CHECK(m.num_nodes() == 9);
  CHECK(m.num_triangles() == 8);
  double area = 0;
  for (int t = 0; t < m.num_triangles(); ++t)
    area += m.triangle_area(t);
  CHECK(area == Approx(1.0));
}

TEST_CASE("cavity mesh is conforming and snaps the opening") {
  for (double h : {2 * pi / 9, 4 * pi / 9, 0.123}) {
    ProblemSpec s = homogeneous_rect_spec(h);
    ValidatedSpec vs = validate_spec(s);
    for (int res : {3, 7}) {
      Mesh m = build_mesh(vs, res);
      check_conforming(m);
      double area = 0;
      for (int t = 0; t < m.num_triangles(); ++t)
        area += m.triangle_area(t);
      CHECK(area == Approx(vs.L * vs.W));
      // Opening nodes tile [-h/2, h/2] on the wall.
      REQUIRE(m.gamma_nodes.size() >= 2);
      CHECK(m.nodes[m.gamma_nodes.front()].x2 == -h / 2);
      CHECK(m.nodes[m.gamma_nodes.back()].x2 == h / 2);
      for (size_t k = 0; k < m.gamma_nodes.size(); ++k) {
        CHECK(m.nodes[m.gamma_nodes[k]].x1 == 0.0);
        if (k)
          CHECK(m.nodes[m.gamma_nodes[k]].x2 > m.nodes[m.gamma_nodes[k - 1]].x2);
      }
    }
  }
}

TEST_CASE("inclusion area fraction converges to the disk area ratio") {
  ValidatedSpec vs = example1();
  const double target = 6 * pi * 0.48 * 0.48 / (pi * 2 * pi);
  CHECK(target == Approx(0.2199).epsilon(1e-3));

  std::vector<double> err;
  for (int res : {8, 16, 32}) {
    Mesh m = build_mesh(vs, res, "centroid");
    double in = 0, total = 0;
    for (int t = 0; t < m.num_triangles(); ++t) {
      total += m.triangle_area(t);
      if (m.material[t] != 0)
        in += m.triangle_area(t);
    }
    err.push_back(std::abs(in / total - target));
  }
  CHECK(err.back() < 2e-3);
  CHECK(err.back() < err.front());

  // Area-fraction weights reproduce the disk area almost exactly.
  Mesh m = build_mesh(vs, 8, "area_fraction");
  double in = 0;
  for (int t = 0; t < m.num_triangles(); ++t)
    for (auto [id, f] : m.fractions[t])
      in += f * m.triangle_area(t);
  CHECK(in == Approx(6 * pi * 0.48 * 0.48).epsilon(1e-10));
}

TEST_CASE("triangle-disk intersection area") {
  std::array<Point, 3> big{Point{-10, -10}, Point{10, -10}, Point{0, 10}};
  CHECK(triangle_disk_area(big, {0, 0}, 1.0) == Approx(pi));
  std::array<Point, 3> small{Point{0, 0}, Point{0.1, 0}, Point{0, 0.1}};
  CHECK(triangle_disk_area(small, {0, 0}, 1.0) == Approx(0.005));
  CHECK(triangle_disk_area(small, {5, 5}, 1.0) == Approx(0.0).margin(1e-15));
  // Quarter disk cut by a right triangle with legs along the axes.
  std::array<Point, 3> corner{Point{0, 0}, Point{3, 0}, Point{0, 3}};
  CHECK(triangle_disk_area(corner, {0, 0}, 1.0) == Approx(pi / 4));

  // Monte Carlo oracle on random partial overlaps.
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::array<Point, 3> t{Point{u(rng), u(rng)}, Point{u(rng), u(rng)}, Point{u(rng), u(rng)}};
    Point c{0.3 * u(rng), 0.3 * u(rng)};
    double r = 0.6;
    auto inside_tri = [&](double x, double y) {
      auto s = [](Point a, Point b, double x, double y) {
        return (b.x1 - a.x1) * (y - a.x2) - (b.x2 - a.x2) * (x - a.x1);
      };
      double d1 = s(t[0], t[1], x, y), d2 = s(t[1], t[2], x, y), d3 = s(t[2], t[0], x, y);
      return (d1 >= 0 && d2 >= 0 && d3 >= 0) || (d1 <= 0 && d2 <= 0 && d3 <= 0);
    };
    const int n = 400;
    double hits = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double x = -1 + 2 * (i + 0.5) / n, y = -1 + 2 * (j + 0.5) / n;
        if (inside_tri(x, y) && std::hypot(x - c.x1, y - c.x2) < r)
          hits += 4.0 / (n * n);
      }
    CHECK(triangle_disk_area(t, c, r) == Approx(hits).margin(2e-3));
  }
}

TEST_CASE("Triangle format round trip") {
  ValidatedSpec vs = example1();
  Mesh m = build_mesh(vs, 5, "centroid");
  auto dir = std::filesystem::temp_directory_path();
  auto node = (dir / "fwbic_rt.node").string(), ele = (dir / "fwbic_rt.ele").string();
  export_triangle(m, node, ele);
  Mesh r = import_triangle(vs, node, ele);
  CHECK(r.num_nodes() == m.num_nodes());
  CHECK(r.num_triangles() == m.num_triangles());
  CHECK(r.material == m.material);
  CHECK(r.gamma_nodes.size() == m.gamma_nodes.size());
  for (int i = 0; i < m.num_nodes(); ++i) {
    CHECK(r.nodes[i].x1 == Approx(m.nodes[i].x1).margin(1e-14));
    CHECK(r.nodes[i].x2 == Approx(m.nodes[i].x2).margin(1e-14));
  }
  CHECK_THROWS_AS(import_triangle(vs, "/nonexistent.node", ele), Error);
}
