#include "fwbic/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "fwbic/errors.hpp"

namespace fwbic {

using nlohmann::json;
using std::numbers::pi;

namespace {

double disk_rect_distance(const Inclusion &inc, const Rect &r) {
  double dx = std::max({r.lo.x1 - inc.center.x1, 0.0, inc.center.x1 - r.hi.x1});
  double dy = std::max({r.lo.x2 - inc.center.x2, 0.0, inc.center.x2 - r.hi.x2});
  return std::hypot(dx, dy);
}

bool rect_contains(const Rect &outer, const Rect &inner, double tol = 1e-12) {
  return inner.lo.x1 >= outer.lo.x1 - tol && inner.lo.x2 >= outer.lo.x2 - tol &&
         inner.hi.x1 <= outer.hi.x1 + tol && inner.hi.x2 <= outer.hi.x2 + tol;
}

[[noreturn]] void fail(ErrorKind k, const std::string &msg,
                       std::map<std::string, std::string> details = {}) {
  throw Error(k, "problem", msg, std::move(details));
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

} // namespace

double ValidatedSpec::coupling_floor() const {
  if (spec.numerics.coupling_floor)
    return *spec.numerics.coupling_floor;
  return 1e-6 * std::sqrt(spec.waveguide_width);
}

std::array<double, 2> default_mu_band(const Eigen::VectorXd &lambdas, int M) {
  if (M < 3 || M >= lambdas.size())
    fail(ErrorKind::ConfigError, "crossing index M out of range for band construction");
  double lo_gap = lambdas(M - 2) - lambdas(M - 3);
  double hi_gap = lambdas(M) - lambdas(M - 1);
  double eps = 0.2 * std::min(lo_gap, hi_gap);
  if (!(eps > 0))
    fail(ErrorKind::DegenerateGeometry, "no spectral gap around the crossing pair");
  return {lambdas(M - 3) + 2 * eps, lambdas(M) - 2 * eps};
}

double region_index(const ProblemSpec &spec, int region_id, double delta) {
  if (region_id == 0)
    return spec.numerics.background_index;
  const auto &p = spec.perturbation;
  if (p.type == PerturbationType::IndexSweep &&
      std::find(p.region_ids.begin(), p.region_ids.end(), region_id) != p.region_ids.end()) {
    if (!p.n_base)
      fail(ErrorKind::ConfigError, "IndexSweep requires n_base before indices are evaluated");
    return *p.n_base + delta;
  }
  for (const auto &inc : spec.inclusions)
    if (inc.region_id == region_id && inc.index)
      return *inc.index;
  return spec.numerics.background_index;
}

double scaled_length(const ValidatedSpec &vs, double delta) {
  const auto &p = vs.spec.perturbation;
  if (p.type == PerturbationType::BoundaryScaling)
    return vs.L * (1.0 + delta * p.C_R);
  return vs.L;
}

double coupling_scale(const ProblemSpec &spec, double delta) {
  const auto &p = spec.perturbation;
  if (p.type == PerturbationType::BoundaryScaling)
    return 1.0 / (1.0 + delta * p.C_R);
  return 1.0;
}

bool symmetric_about_axis(const ValidatedSpec &vs, double tol) {
  if (std::abs(vs.x2_lo + vs.x2_hi) > tol)
    return false;
  const auto &incs = vs.spec.inclusions;
  for (const auto &a : incs) {
    bool found = false;
    for (const auto &b : incs) {
      if (std::abs(a.center.x1 - b.center.x1) < tol && std::abs(a.center.x2 + b.center.x2) < tol &&
          std::abs(a.radius - b.radius) < tol &&
          region_index(vs.spec, a.region_id, 0.0) == region_index(vs.spec, b.region_id, 0.0)) {
        found = true;
        break;
      }
    }
    if (!found)
      return false;
  }
  return true;
}

ValidatedSpec validate_spec(const ProblemSpec &spec, const Eigen::VectorXd *reference_lambdas) {
  ValidatedSpec vs;
  vs.spec = spec;
  const double h = spec.waveguide_width;
  const auto &tr = spec.truncation;
  if (tr.M_cav < 4 || tr.J_wg < 1 || tr.M < 3 || tr.M >= tr.M_cav)
    fail(ErrorKind::ConfigError, "truncation sizes must satisfy 3 <= M < M_cav and J_wg >= 1");
  if (spec.delta_range[0] > spec.delta_range[1])
    fail(ErrorKind::ConfigError, "delta_range must be ordered");

  double xa = std::min(spec.cavity_corner_lo.x1, spec.cavity_corner_hi.x1);
  double xb = std::max(spec.cavity_corner_lo.x1, spec.cavity_corner_hi.x1);
  double ya = std::min(spec.cavity_corner_lo.x2, spec.cavity_corner_hi.x2);
  double yb = std::max(spec.cavity_corner_lo.x2, spec.cavity_corner_hi.x2);
  vs.x1_lo = xa;
  vs.x2_lo = ya;
  vs.x2_hi = yb;
  vs.L = xb - xa;
  vs.W = yb - ya;
  if (!(vs.L > 0) || !(vs.W > 0))
    fail(ErrorKind::DegenerateGeometry, "cavity rectangle has zero extent");
  if (std::abs(xb) > 1e-12)
    fail(ErrorKind::DegenerateGeometry, "the waveguide wall must be x1 = 0 with the cavity in x1 < 0",
         {{"x1_max", num(xb)}});
  if (!(h > 0) || h >= vs.W)
    fail(ErrorKind::DegenerateGeometry, "waveguide width must be positive and below the wall length",
         {{"h", num(h)}, {"wall", num(vs.W)}});
  if (!(-h / 2 > ya) || !(h / 2 < yb))
    fail(ErrorKind::DegenerateGeometry, "waveguide opening must lie strictly inside the wall");

  Rect cavity{{xa, ya}, {xb, yb}};
  std::set<int> ids;
  for (const auto &inc : spec.inclusions) {
    if (!(inc.radius > 0))
      fail(ErrorKind::DegenerateGeometry, "inclusion radius must be positive");
    if (inc.region_id <= 0)
      fail(ErrorKind::ConfigError, "inclusion region_id must be positive (0 is the background)");
    Rect box{{inc.center.x1 - inc.radius, inc.center.x2 - inc.radius},
             {inc.center.x1 + inc.radius, inc.center.x2 + inc.radius}};
    if (!rect_contains(cavity, box))
      fail(ErrorKind::DegenerateGeometry, "inclusion leaves the cavity");
    ids.insert(inc.region_id);
  }

  // Index bounds: n is affine in delta, so the endpoints decide.
  const auto &pert = spec.perturbation;
  if (pert.type == PerturbationType::IndexSweep) {
    if (pert.region_ids.empty())
      fail(ErrorKind::ConfigError, "IndexSweep needs at least one region id");
    for (int r : pert.region_ids)
      if (!ids.count(r))
        fail(ErrorKind::ConfigError, "IndexSweep references an unknown region id");
  } else if (!(std::abs(pert.C_R) >= 0)) {
    fail(ErrorKind::ConfigError, "BoundaryScaling needs a finite C_R");
  }
  if (spec.numerics.background_index <= 0)
    fail(ErrorKind::BadIndexBounds, "background index must be positive");
  for (double d : spec.delta_range) {
    for (const auto &inc : spec.inclusions) {
      if (pert.type == PerturbationType::IndexSweep && !pert.n_base &&
          std::find(pert.region_ids.begin(), pert.region_ids.end(), inc.region_id) !=
              pert.region_ids.end())
        continue;
      double n = region_index(spec, inc.region_id, d);
      if (!(n > 0))
        fail(ErrorKind::BadIndexBounds, "refractive index is not positive in delta_range",
             {{"region_id", std::to_string(inc.region_id)}, {"delta", num(d)}, {"n", num(n)}});
    }
    if (pert.type == PerturbationType::BoundaryScaling && !(1.0 + d * pert.C_R > 0))
      fail(ErrorKind::DegenerateGeometry, "boundary scaling collapses the cavity");
  }

  // Band: given explicitly or derived from reference eigenvalues.
  const double cutoff = pi * pi / (h * h);
  if (!spec.mu_band && reference_lambdas)
    vs.spec.mu_band = default_mu_band(*reference_lambdas, tr.M);
  if (vs.spec.mu_band) {
    auto b = *vs.spec.mu_band;
    if (!(b[0] < b[1]))
      fail(ErrorKind::ConfigError, "mu_band must be ordered");
    if (b[1] >= cutoff)
      fail(ErrorKind::MultiModeBand, "mu_band reaches the second waveguide cutoff",
           {{"mu_r", num(b[1])}, {"cutoff", num(cutoff)}});
  }

  // Clear zone: default is the widest rectangle with margin h/4 avoiding inclusions.
  const bool strict = spec.numerics.clear_zone_check == "strict";
  auto violation = [&](const std::string &msg, std::map<std::string, std::string> details = {}) {
    if (strict)
      fail(ErrorKind::ClearZoneViolation, msg, std::move(details));
    std::string w = msg;
    for (const auto &[k, v] : details)
      w += "; " + k + "=" + v;
    vs.warnings.push_back(w);
  };
  const Rect Rh{{-h / pi, -h / 2}, {0.0, h / 2}};
  if (!vs.spec.clear_zone) {
    double m = h / 4;
    double lo = std::max(ya, -h / 2 - m), hi = std::min(yb, h / 2 + m);
    double w = vs.L;
    for (const auto &inc : spec.inclusions) {
      double dy = std::max({lo - inc.center.x2, 0.0, inc.center.x2 - hi});
      if (dy >= inc.radius)
        continue;
      w = std::min(w, -inc.center.x1 - std::sqrt(inc.radius * inc.radius - dy * dy));
    }
    if (!(w > 0) || w < h / pi) {
      // In warn mode the offending disks are reported by the checks below.
      if (strict)
        violation("an inclusion intersects the clear zone next to the opening",
                  {{"clear_width", num(w)}, {"required", num(h / pi)}});
      vs.spec.clear_zone = Rh;
    } else {
      vs.spec.clear_zone = Rect{{-w, lo}, {0.0, hi}};
    }
  }
  const Rect &cz = *vs.spec.clear_zone;
  if (!rect_contains(cavity, cz))
    fail(ErrorKind::ClearZoneViolation, "clear zone leaves the cavity");
  if (std::abs(cz.hi.x1) > 1e-12 || cz.lo.x2 > -h / 2 + 1e-12 || cz.hi.x2 < h / 2 - 1e-12)
    fail(ErrorKind::ClearZoneViolation, "opening is not part of the clear-zone boundary");
  if (!rect_contains(cz, Rh))
    violation("R_h is not contained in the clear zone");
  for (const auto &inc : spec.inclusions) {
    double dist = disk_rect_distance(inc, cz);
    if (dist < inc.radius - 1e-12)
      violation("inclusion intersects the clear zone",
                {{"region_id", std::to_string(inc.region_id)}, {"depth", num(inc.radius - dist)}});
  }
  return vs;
}

namespace {

json point_json(const Point &p) { return json::array({p.x1, p.x2}); }

Point point_from(const json &j, const char *what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(ErrorKind::ConfigError, std::string("expected [x1, x2] for ") + what);
  return {j[0].get<double>(), j[1].get<double>()};
}

void check_keys(const json &j, std::initializer_list<const char *> allowed, const char *where) {
  if (!j.is_object())
    fail(ErrorKind::ConfigError, std::string(where) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char *a : allowed)
      ok = ok || it.key() == a;
    if (!ok)
      fail(ErrorKind::ConfigError, "unknown key '" + it.key() + "' in " + where);
  }
}

template <class T> T get_or(const json &j, const char *key, T def) {
  if (!j.contains(key) || j[key].is_null())
    return def;
  try {
    return j[key].get<T>();
  } catch (const json::exception &e) {
    fail(ErrorKind::ConfigError, std::string("bad value for '") + key + "': " + e.what());
  }
}

} // namespace

json to_json(const ProblemSpec &s) {
  json j;
  j["cavity_corner_lo"] = point_json(s.cavity_corner_lo);
  j["cavity_corner_hi"] = point_json(s.cavity_corner_hi);
  j["inclusions"] = json::array();
  for (const auto &inc : s.inclusions) {
    json ji{{"center", point_json(inc.center)}, {"radius", inc.radius}, {"region_id", inc.region_id}};
    if (inc.index)
      ji["index"] = *inc.index;
    j["inclusions"].push_back(ji);
  }
  j["waveguide_width"] = s.waveguide_width;
  j["clear_zone"] = s.clear_zone ? json{{"lo", point_json(s.clear_zone->lo)},
                                         {"hi", point_json(s.clear_zone->hi)}}
                                 : json(nullptr);
  json p;
  if (s.perturbation.type == PerturbationType::IndexSweep) {
    p["IndexSweep"] = {{"region_ids", s.perturbation.region_ids},
                       {"n_base", s.perturbation.n_base ? json(*s.perturbation.n_base) : json(nullptr)}};
  } else {
    p["BoundaryScaling"] = {{"C_R", s.perturbation.C_R}};
  }
  j["perturbation"] = p;
  j["delta_range"] = s.delta_range;
  j["mu_band"] = s.mu_band ? json(*s.mu_band) : json(nullptr);
  j["truncation"] = {{"M_cav", s.truncation.M_cav}, {"J_wg", s.truncation.J_wg}, {"M", s.truncation.M}};
  j["tolerances"] = {{"fixed_point_tol", s.tolerances.fixed_point_tol},
                     {"root_tol", s.tolerances.root_tol},
                     {"eig_tol", s.tolerances.eig_tol}};
  const auto &n = s.numerics;
  j["numerics"] = {{"model", n.model},
                   {"resolution", n.resolution},
                   {"material_rule", n.material_rule},
                   {"tail", n.tail},
                   {"mesh_node_file", n.mesh_node_file},
                   {"mesh_ele_file", n.mesh_ele_file},
                   {"cheb_nodes", n.cheb_nodes},
                   {"dense_max", n.dense_max},
                   {"scan_points", n.scan_points},
                   {"refine", n.refine},
                   {"coupling_floor", n.coupling_floor ? json(*n.coupling_floor) : json(nullptr)},
                   {"background_index", n.background_index},
                   {"seed", n.seed},
                   {"clear_zone_check", n.clear_zone_check},
                   {"crossing_window", n.crossing_window}};
  return j;
}

ProblemSpec spec_from_json(const json &j) {
  check_keys(j,
             {"cavity_corner_lo", "cavity_corner_hi", "inclusions", "waveguide_width", "clear_zone",
              "perturbation", "delta_range", "mu_band", "truncation", "tolerances", "numerics"},
             "config");
  ProblemSpec s;
  for (const char *k : {"cavity_corner_lo", "cavity_corner_hi", "waveguide_width", "perturbation"})
    if (!j.contains(k))
      fail(ErrorKind::ConfigError, std::string("missing required key '") + k + "'");
  s.cavity_corner_lo = point_from(j["cavity_corner_lo"], "cavity_corner_lo");
  s.cavity_corner_hi = point_from(j["cavity_corner_hi"], "cavity_corner_hi");
  s.waveguide_width = get_or<double>(j, "waveguide_width", 0.0);
  if (j.contains("inclusions")) {
    if (!j["inclusions"].is_array())
      fail(ErrorKind::ConfigError, "inclusions must be a list");
    for (const auto &ji : j["inclusions"]) {
      check_keys(ji, {"center", "radius", "region_id", "index"}, "inclusion");
      Inclusion inc;
      if (!ji.contains("center") || !ji.contains("radius"))
        fail(ErrorKind::ConfigError, "inclusion needs center and radius");
      inc.center = point_from(ji["center"], "inclusion center");
      inc.radius = get_or<double>(ji, "radius", 0.0);
      inc.region_id = get_or<int>(ji, "region_id", 1);
      if (ji.contains("index") && !ji["index"].is_null())
        inc.index = get_or<double>(ji, "index", 1.0);
      s.inclusions.push_back(inc);
    }
  }
  if (j.contains("clear_zone") && !j["clear_zone"].is_null()) {
    check_keys(j["clear_zone"], {"lo", "hi"}, "clear_zone");
    s.clear_zone = Rect{point_from(j["clear_zone"].value("lo", json()), "clear_zone.lo"),
                        point_from(j["clear_zone"].value("hi", json()), "clear_zone.hi")};
  }
  const json &p = j["perturbation"];
  check_keys(p, {"IndexSweep", "BoundaryScaling"}, "perturbation");
  if (p.size() != 1)
    fail(ErrorKind::ConfigError, "perturbation must hold exactly one of IndexSweep, BoundaryScaling");
  if (p.contains("IndexSweep")) {
    const json &q = p["IndexSweep"];
    check_keys(q, {"region_ids", "n_base"}, "IndexSweep");
    s.perturbation.type = PerturbationType::IndexSweep;
    s.perturbation.region_ids = get_or<std::vector<int>>(q, "region_ids", {});
    if (q.contains("n_base") && !q["n_base"].is_null())
      s.perturbation.n_base = get_or<double>(q, "n_base", 1.0);
  } else {
    const json &q = p["BoundaryScaling"];
    check_keys(q, {"C_R"}, "BoundaryScaling");
    s.perturbation.type = PerturbationType::BoundaryScaling;
    s.perturbation.C_R = get_or<double>(q, "C_R", 0.0);
  }
  s.delta_range = get_or<std::array<double, 2>>(j, "delta_range", {0.0, 0.0});
  if (j.contains("mu_band") && !j["mu_band"].is_null())
    s.mu_band = get_or<std::array<double, 2>>(j, "mu_band", {0.0, 0.0});
  if (j.contains("truncation")) {
    const json &t = j["truncation"];
    check_keys(t, {"M_cav", "J_wg", "M"}, "truncation");
    s.truncation.M_cav = get_or<int>(t, "M_cav", 60);
    s.truncation.J_wg = get_or<int>(t, "J_wg", 40);
    s.truncation.M = get_or<int>(t, "M", 7);
  }
  if (j.contains("tolerances")) {
    const json &t = j["tolerances"];
    check_keys(t, {"fixed_point_tol", "root_tol", "eig_tol"}, "tolerances");
    s.tolerances.fixed_point_tol = get_or<double>(t, "fixed_point_tol", 1e-12);
    s.tolerances.root_tol = get_or<double>(t, "root_tol", 1e-10);
    s.tolerances.eig_tol = get_or<double>(t, "eig_tol", 1e-9);
  }
  if (j.contains("numerics")) {
    const json &t = j["numerics"];
    check_keys(t,
               {"model", "resolution", "material_rule", "tail", "mesh_node_file", "mesh_ele_file",
                "cheb_nodes", "dense_max", "scan_points", "refine", "coupling_floor",
                "background_index", "seed", "clear_zone_check", "crossing_window"},
               "numerics");
    auto &n = s.numerics;
    n.model = get_or<std::string>(t, "model", "fem");
    n.resolution = get_or<int>(t, "resolution", 24);
    n.material_rule = get_or<std::string>(t, "material_rule", "area_fraction");
    n.tail = get_or<std::string>(t, "tail", "exact");
    n.mesh_node_file = get_or<std::string>(t, "mesh_node_file", "");
    n.mesh_ele_file = get_or<std::string>(t, "mesh_ele_file", "");
    n.cheb_nodes = get_or<int>(t, "cheb_nodes", 16);
    n.dense_max = get_or<int>(t, "dense_max", 3000);
    n.scan_points = get_or<int>(t, "scan_points", 41);
    n.refine = get_or<int>(t, "refine", 4);
    if (t.contains("coupling_floor") && !t["coupling_floor"].is_null())
      n.coupling_floor = get_or<double>(t, "coupling_floor", 0.0);
    n.background_index = get_or<double>(t, "background_index", 1.0);
    n.seed = get_or<unsigned>(t, "seed", 12345u);
    n.clear_zone_check = get_or<std::string>(t, "clear_zone_check", "strict");
    n.crossing_window = get_or<std::array<double, 2>>(t, "crossing_window", {1.40, 1.52});
    if (n.clear_zone_check != "strict" && n.clear_zone_check != "warn")
      fail(ErrorKind::ConfigError, "numerics.clear_zone_check must be strict or warn");
    if (!(n.crossing_window[0] < n.crossing_window[1]))
      fail(ErrorKind::ConfigError, "numerics.crossing_window must be ordered");
    if (n.model != "fem" && n.model != "analytic")
      fail(ErrorKind::ConfigError, "numerics.model must be fem or analytic");
    if (n.material_rule != "area_fraction" && n.material_rule != "centroid")
      fail(ErrorKind::ConfigError, "numerics.material_rule must be area_fraction or centroid");
    if (n.tail != "exact" && n.tail != "none")
      fail(ErrorKind::ConfigError, "numerics.tail must be exact or none");
    if (n.resolution < 2 || n.cheb_nodes < 4 || n.scan_points < 3 || n.refine < 1)
      fail(ErrorKind::ConfigError, "numerics values out of range");
  }
  return s;
}

ProblemSpec load_spec(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::ConfigError, "cannot open config file", {{"path", path}});
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    fail(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what(), {{"path", path}});
  }
  return spec_from_json(j);
}

ProblemSpec example_spec(double h) {
  ProblemSpec s;
  s.cavity_corner_lo = {0.0, -4 * pi / 3};
  s.cavity_corner_hi = {-pi, 2 * pi / 3};
  for (double cy : {pi / 3, -pi / 3, -pi})
    for (double sgn : {1.0, -1.0})
      s.inclusions.push_back({{-pi / 2 + sgn * 0.8, cy}, 0.48, 1, std::nullopt});
  s.waveguide_width = h;
  s.perturbation.type = PerturbationType::IndexSweep;
  s.perturbation.region_ids = {1};
  s.delta_range = {-0.07, 0.05};
  return s;
}

ProblemSpec homogeneous_rect_spec(double h) {
  ProblemSpec s;
  s.cavity_corner_lo = {-pi, -pi};
  s.cavity_corner_hi = {0.0, pi};
  s.waveguide_width = h;
  s.perturbation.type = PerturbationType::BoundaryScaling;
  s.perturbation.C_R = 1.0;
  s.delta_range = {-0.02, 0.02};
  s.truncation.M = 4;
  s.numerics.model = "analytic";
  return s;
}

} // namespace fwbic
