#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace fwbic {

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
  bool operator==(const Point &) const = default;
};

struct Rect {
  Point lo;
  Point hi;
  bool operator==(const Rect &) const = default;
};

struct Inclusion {
  Point center;
  double radius = 0.0;
  int region_id = 1;
  // Fixed index for regions outside the sweep; swept regions ignore it.
  std::optional<double> index;
  bool operator==(const Inclusion &) const = default;
};

enum class PerturbationType { IndexSweep, BoundaryScaling };

struct Perturbation {
  PerturbationType type = PerturbationType::IndexSweep;
  std::vector<int> region_ids;
  std::optional<double> n_base; // IndexSweep: n = n_base + delta
  double C_R = 0.0;             // BoundaryScaling: L -> (1 + delta*C_R) L
  bool operator==(const Perturbation &) const = default;
};

struct Truncation {
  int M_cav = 60;
  int J_wg = 40;
  int M = 7;
  bool operator==(const Truncation &) const = default;
};

struct Tolerances {
  double fixed_point_tol = 1e-12;
  double root_tol = 1e-10;
  double eig_tol = 1e-9;
  bool operator==(const Tolerances &) const = default;
};

// Solver settings that are not part of the physical description.
struct Numerics {
  std::string model = "fem";            // fem | analytic
  int resolution = 24;                  // cells per unit length
  std::string material_rule = "area_fraction"; // area_fraction | centroid
  std::string tail = "exact";           // exact | none
  std::string mesh_node_file;           // optional Triangle import
  std::string mesh_ele_file;
  int cheb_nodes = 16;
  int dense_max = 3000;
  int scan_points = 41;
  int refine = 4;
  std::optional<double> coupling_floor; // default 1e-6 * sqrt(h)
  double background_index = 1.0;
  unsigned seed = 12345;
  // strict: clear-zone violations are errors; warn: they are recorded in
  // ValidatedSpec::warnings and the zone falls back to R_h.
  std::string clear_zone_check = "strict";
  // Window in n scanned for the crossing when an IndexSweep omits n_base.
  std::array<double, 2> crossing_window{1.40, 1.52};
  bool operator==(const Numerics &) const = default;
};

struct ProblemSpec {
  Point cavity_corner_lo;
  Point cavity_corner_hi;
  std::vector<Inclusion> inclusions;
  double waveguide_width = 0.0;
  std::optional<Rect> clear_zone;
  Perturbation perturbation;
  std::array<double, 2> delta_range{0.0, 0.0};
  std::optional<std::array<double, 2>> mu_band;
  Truncation truncation;
  Tolerances tolerances;
  Numerics numerics;
  bool operator==(const ProblemSpec &) const = default;
};

struct ValidatedSpec {
  ProblemSpec spec; // derived fields (clear_zone, mu_band when derivable) filled
  double L = 0.0;   // cavity extent in x1
  double W = 0.0;   // cavity extent in x2
  double x1_lo = 0.0;
  double x2_lo = 0.0;
  double x2_hi = 0.0;
  std::vector<std::string> warnings;
  double h() const { return spec.waveguide_width; }
  double coupling_floor() const;
  bool operator==(const ValidatedSpec &) const = default;
};

// Checks geometry/index/band invariants and fills derived quantities.
// `reference_lambdas` (eigenvalues at delta = 0) lets the default mu band be
// derived; without them an absent band is left unset.
ValidatedSpec validate_spec(const ProblemSpec &spec,
                            const Eigen::VectorXd *reference_lambdas = nullptr);

std::array<double, 2> default_mu_band(const Eigen::VectorXd &lambdas, int M);

// Index of a region at parameter delta (1 for the background).
double region_index(const ProblemSpec &spec, int region_id, double delta);

// Cavity extent in x1 at parameter delta (BoundaryScaling stretches it).
double scaled_length(const ValidatedSpec &vs, double delta);
// Prefactor of the coupling sum: 1/(1 + delta C_R) for BoundaryScaling.
double coupling_scale(const ProblemSpec &spec, double delta);

// Whether the structure (cavity, inclusions, opening) is mirror symmetric about x2 = 0.
bool symmetric_about_axis(const ValidatedSpec &vs, double tol = 1e-12);

nlohmann::json to_json(const ProblemSpec &spec);
ProblemSpec spec_from_json(const nlohmann::json &j);
ProblemSpec load_spec(const std::string &path);

// The two worked examples: six disks of radius 0.48 in a pi x 2pi cavity.
ProblemSpec example_spec(double h);
// Homogeneous pi x 2pi rectangle with the opening at mid-height.
ProblemSpec homogeneous_rect_spec(double h);

} // namespace fwbic
