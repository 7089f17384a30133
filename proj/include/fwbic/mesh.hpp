#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "fwbic/problem.hpp"

namespace fwbic {

enum WallTag { WallRight = 0, WallLeft = 1, WallBottom = 2, WallTop = 3 };

struct Mesh {
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> material; // region id per triangle (0 = background)
  // Optional per-triangle area fractions (region id, fraction); empty when
  // the material column alone describes the medium.
  std::vector<std::vector<std::pair<int, double>>> fractions;
  std::vector<std::array<int, 2>> boundary_edges;
  std::vector<int> boundary_tag;
  std::vector<int> gamma_nodes; // nodes on the opening, ascending in x2
  double h = 0.0;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  double triangle_area(int t) const;
};

// Structured union-jack triangulation of the cavity with about `resolution`
// cells per unit length; opening endpoints (and their mirror images about the
// cavity mid-height) are mesh lines. `material_rule` is area_fraction or centroid.
Mesh build_mesh(const ValidatedSpec &vs, int resolution,
                const std::string &material_rule = "area_fraction");

// Plain rectangle grid without an opening (used for simple counting checks).
Mesh build_rect_grid(double x_lo, double x_hi, double y_lo, double y_hi, int nx, int ny);

// Triangle-format import; the first .ele attribute column is the region id.
Mesh import_triangle(const ValidatedSpec &vs, const std::string &node_path,
                     const std::string &ele_path);
void export_triangle(const Mesh &mesh, const std::string &node_path, const std::string &ele_path);

// Area of the intersection of a triangle with a disk.
double triangle_disk_area(const std::array<Point, 3> &tri, Point center, double radius);

// Recomputes boundary edges/tags and the ordered opening nodes.
void finalize_boundary(Mesh &mesh, const ValidatedSpec &vs);

} // namespace fwbic
