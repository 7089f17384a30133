#include "fwbic/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fwbic/errors.hpp"

namespace fwbic {

namespace {

double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Signed area of disk(origin, r) intersected with triangle (origin, a, b).
double edge_disk_area(double ax, double ay, double bx, double by, double r) {
  auto tri = [](double px, double py, double qx, double qy) { return 0.5 * cross(px, py, qx, qy); };
  auto sector = [r](double px, double py, double qx, double qy) {
    return 0.5 * r * r * std::atan2(cross(px, py, qx, qy), px * qx + py * qy);
  };
  double dx = bx - ax, dy = by - ay;
  double a = dx * dx + dy * dy;
  if (a == 0)
    return 0.0;
  double b = 2 * (ax * dx + ay * dy);
  double c = ax * ax + ay * ay - r * r;
  bool ina = c <= 0, inb = bx * bx + by * by <= r * r;
  double disc = b * b - 4 * a * c;
  if (ina && inb)
    return tri(ax, ay, bx, by);
  if (disc <= 0)
    return sector(ax, ay, bx, by);
  double s = std::sqrt(disc);
  double t1 = (-b - s) / (2 * a), t2 = (-b + s) / (2 * a);
  if (t2 <= 0 || t1 >= 1)
    return sector(ax, ay, bx, by);
  double u1 = std::max(t1, 0.0), u2 = std::min(t2, 1.0);
  double p1x = ax + u1 * dx, p1y = ay + u1 * dy, p2x = ax + u2 * dx, p2y = ay + u2 * dy;
  double res = ina ? tri(ax, ay, p1x, p1y) : sector(ax, ay, p1x, p1y);
  res += tri(p1x, p1y, p2x, p2y);
  res += inb ? tri(p2x, p2y, bx, by) : sector(p2x, p2y, bx, by);
  return res;
}

std::vector<double> segment_breaks(const ValidatedSpec &vs) {
  const double h = vs.h(), lo = vs.x2_lo, hi = vs.x2_hi;
  const double tol = 1e-9 * vs.W;
  std::vector<double> pts{lo, hi};
  for (double y : {-h / 2, h / 2}) {
    for (double z : {y, lo + hi - y})
      if (z > lo + tol && z < hi - tol)
        pts.push_back(z);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double p : pts)
    if (out.empty() || p - out.back() > tol)
      out.push_back(p);
  return out;
}

} // namespace

double Mesh::triangle_area(int t) const {
  const auto &tr = triangles[t];
  const Point &a = nodes[tr[0]], &b = nodes[tr[1]], &c = nodes[tr[2]];
  return 0.5 * cross(b.x1 - a.x1, b.x2 - a.x2, c.x1 - a.x1, c.x2 - a.x2);
}

double triangle_disk_area(const std::array<Point, 3> &tri, Point center, double r) {
  double s = 0;
  for (int k = 0; k < 3; ++k) {
    const Point &a = tri[k], &b = tri[(k + 1) % 3];
    s += edge_disk_area(a.x1 - center.x1, a.x2 - center.x2, b.x1 - center.x1, b.x2 - center.x2, r);
  }
  return std::abs(s);
}

Mesh build_rect_grid(double x_lo, double x_hi, double y_lo, double y_hi, int nx, int ny) {
  Mesh m;
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j)
      m.nodes.push_back({x_lo + (x_hi - x_lo) * i / nx, y_lo + (y_hi - y_lo) * j / ny});
  auto id = [ny](int i, int j) { return i * (ny + 1) + j; };
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2) {
        m.triangles.push_back({a, b, d});
        m.triangles.push_back({b, c, d});
      } else {
        m.triangles.push_back({a, b, c});
        m.triangles.push_back({a, c, d});
      }
    }
  m.material.assign(m.triangles.size(), 0);
  return m;
}

void finalize_boundary(Mesh &m, const ValidatedSpec &vs) {
  std::map<std::pair<int, int>, int> count;
  for (const auto &t : m.triangles)
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      count[{std::min(a, b), std::max(a, b)}]++;
    }
  m.boundary_edges.clear();
  m.boundary_tag.clear();
  double xlo = m.nodes[0].x1, xhi = m.nodes[0].x1;
  for (const auto &p : m.nodes) {
    xlo = std::min(xlo, p.x1);
    xhi = std::max(xhi, p.x1);
  }
  const double tol = 1e-9 * std::max(vs.L, vs.W);
  for (const auto &[e, c] : count) {
    if (c != 1)
      continue;
    const Point &a = m.nodes[e.first], &b = m.nodes[e.second];
    int tag = -1;
    if (std::abs(a.x1 - xhi) < tol && std::abs(b.x1 - xhi) < tol)
      tag = WallRight;
    else if (std::abs(a.x1 - xlo) < tol && std::abs(b.x1 - xlo) < tol)
      tag = WallLeft;
    else if (std::abs(a.x2 - vs.x2_lo) < tol && std::abs(b.x2 - vs.x2_lo) < tol)
      tag = WallBottom;
    else if (std::abs(a.x2 - vs.x2_hi) < tol && std::abs(b.x2 - vs.x2_hi) < tol)
      tag = WallTop;
    if (tag < 0)
      throw Error(ErrorKind::DegenerateGeometry, "cavity_fem", "mesh boundary is not the cavity rectangle");
    m.boundary_edges.push_back({e.first, e.second});
    m.boundary_tag.push_back(tag);
  }
  const double h = vs.h();
  m.h = h;
  m.gamma_nodes.clear();
  for (int i = 0; i < m.num_nodes(); ++i) {
    const Point &p = m.nodes[i];
    if (std::abs(p.x1 - xhi) < tol && p.x2 >= -h / 2 - tol && p.x2 <= h / 2 + tol)
      m.gamma_nodes.push_back(i);
  }
  std::sort(m.gamma_nodes.begin(), m.gamma_nodes.end(),
            [&](int a, int b) { return m.nodes[a].x2 < m.nodes[b].x2; });
  if (m.gamma_nodes.size() < 2 || std::abs(m.nodes[m.gamma_nodes.front()].x2 + h / 2) > tol ||
      std::abs(m.nodes[m.gamma_nodes.back()].x2 - h / 2) > tol)
    throw Error(ErrorKind::SnapFailure, "cavity_fem", "opening endpoints are not mesh nodes",
                {{"gamma_nodes", std::to_string(m.gamma_nodes.size())}});
  for (size_t k = 0; k + 1 < m.gamma_nodes.size(); ++k) {
    int a = m.gamma_nodes[k], b = m.gamma_nodes[k + 1];
    if (!count.count({std::min(a, b), std::max(a, b)}))
      throw Error(ErrorKind::SnapFailure, "cavity_fem", "opening nodes are not joined by edges");
  }
  // Snap exactly so closed-form trace integrals see the true endpoints.
  m.nodes[m.gamma_nodes.front()].x2 = -h / 2;
  m.nodes[m.gamma_nodes.back()].x2 = h / 2;
}

Mesh build_mesh(const ValidatedSpec &vs, int resolution, const std::string &material_rule) {
  if (resolution < 2)
    throw Error(ErrorKind::ConfigError, "cavity_fem", "resolution must be at least 2");
  std::vector<double> br = segment_breaks(vs);
  std::vector<int> cnt;
  for (size_t s = 0; s + 1 < br.size(); ++s) {
    double len = br[s + 1] - br[s];
    if (len <= 0)
      throw Error(ErrorKind::SnapFailure, "cavity_fem", "cannot insert opening endpoints");
    cnt.push_back(std::max(1, static_cast<int>(std::lround(len * resolution))));
  }
  // Mirror-symmetric counts, total even so the diagonal pattern mirrors too.
  int ns = static_cast<int>(cnt.size());
  for (int s = 0; s < ns / 2; ++s)
    cnt[ns - 1 - s] = cnt[s] = std::max(cnt[s], cnt[ns - 1 - s]);
  int ny = 0;
  for (int c : cnt)
    ny += c;
  if (ny % 2)
    cnt[ns / 2] += 1;
  std::vector<double> ys;
  for (int s = 0; s < ns; ++s)
    for (int k = 0; k < cnt[s]; ++k)
      ys.push_back(br[s] + (br[s + 1] - br[s]) * k / cnt[s]);
  ys.push_back(br.back());
  // Mirror the lower half onto the upper half exactly.
  const int nyv = static_cast<int>(ys.size()) - 1;
  for (int j = 0; j <= nyv / 2; ++j)
    ys[nyv - j] = vs.x2_lo + vs.x2_hi - ys[j];
  if (nyv % 2 == 0)
    ys[nyv / 2] = 0.5 * (vs.x2_lo + vs.x2_hi);

  int nx = std::max(2, static_cast<int>(std::lround(vs.L * resolution)));
  if (nx % 2)
    ++nx;
  Mesh m;
  for (int i = 0; i <= nx; ++i) {
    double x = (i == nx) ? 0.0 : vs.x1_lo + vs.L * i / nx;
    if (2 * i == nx)
      x = vs.x1_lo + vs.L / 2;
    for (int j = 0; j <= nyv; ++j)
      m.nodes.push_back({x, ys[j]});
  }
  auto id = [nyv](int i, int j) { return i * (nyv + 1) + j; };
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nyv; ++j) {
      int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2) {
        m.triangles.push_back({a, b, d});
        m.triangles.push_back({b, c, d});
      } else {
        m.triangles.push_back({a, b, c});
        m.triangles.push_back({a, c, d});
      }
    }
  const auto &incs = vs.spec.inclusions;
  m.material.assign(m.triangles.size(), 0);
  if (material_rule == "area_fraction")
    m.fractions.assign(m.triangles.size(), {});
  for (int t = 0; t < m.num_triangles(); ++t) {
    std::array<Point, 3> P{m.nodes[m.triangles[t][0]], m.nodes[m.triangles[t][1]],
                           m.nodes[m.triangles[t][2]]};
    Point cen{(P[0].x1 + P[1].x1 + P[2].x1) / 3, (P[0].x2 + P[1].x2 + P[2].x2) / 3};
    double area = m.triangle_area(t);
    double diam = 0;
    for (int k = 0; k < 3; ++k)
      diam = std::max(diam, std::hypot(P[k].x1 - cen.x1, P[k].x2 - cen.x2));
    for (const auto &inc : incs) {
      double d = std::hypot(cen.x1 - inc.center.x1, cen.x2 - inc.center.x2);
      if (d < inc.radius && m.material[t] == 0)
        m.material[t] = inc.region_id;
      if (material_rule != "area_fraction" || d > inc.radius + diam)
        continue;
      double f = (d < inc.radius - diam) ? 1.0 : triangle_disk_area(P, inc.center, inc.radius) / area;
      if (f > 0)
        m.fractions[t].push_back({inc.region_id, std::min(f, 1.0)});
    }
  }
  finalize_boundary(m, vs);
  return m;
}

Mesh import_triangle(const ValidatedSpec &vs, const std::string &node_path, const std::string &ele_path) {
  auto fail = [](const std::string &msg, const std::string &path) {
    throw Error(ErrorKind::ConfigError, "cavity_fem", msg, {{"path", path}});
  };
  // Triangle files allow '#' comments anywhere.
  auto read_lines = [&](const std::string &path) {
    std::ifstream in(path);
    if (!in)
      fail("cannot open mesh file", path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
      auto pos = line.find('#');
      if (pos != std::string::npos)
        line.resize(pos);
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        lines.push_back(line);
    }
    return lines;
  };
  auto nl = read_lines(node_path);
  if (nl.empty())
    fail("empty .node file", node_path);
  int nn = 0, dim = 0, nattr = 0, nbm = 0;
  {
    std::istringstream hs(nl[0]);
    hs >> nn >> dim >> nattr >> nbm;
    if (!hs || dim != 2 || static_cast<int>(nl.size()) < nn + 1)
      fail("bad .node header", node_path);
  }
  Mesh m;
  std::map<long, int> idmap;
  for (int i = 0; i < nn; ++i) {
    std::istringstream ls(nl[i + 1]);
    long id;
    double x, y;
    ls >> id >> x >> y;
    if (!ls)
      fail("bad .node line", node_path);
    idmap[id] = i;
    m.nodes.push_back({x, y});
  }
  auto el = read_lines(ele_path);
  if (el.empty())
    fail("empty .ele file", ele_path);
  int nt = 0, npt = 0, eattr = 0;
  {
    std::istringstream hs(el[0]);
    hs >> nt >> npt >> eattr;
    if (!hs || npt != 3 || static_cast<int>(el.size()) < nt + 1)
      fail("bad .ele header (only 3-node triangles are supported)", ele_path);
  }
  for (int t = 0; t < nt; ++t) {
    std::istringstream ls(el[t + 1]);
    long id, a, b, c;
    ls >> id >> a >> b >> c;
    double attr = 0;
    if (eattr > 0)
      ls >> attr;
    if (!ls || !idmap.count(a) || !idmap.count(b) || !idmap.count(c))
      fail("bad .ele line", ele_path);
    std::array<int, 3> tri{idmap[a], idmap[b], idmap[c]};
    m.triangles.push_back(tri);
    if (m.triangle_area(t) < 0)
      std::swap(m.triangles[t][1], m.triangles[t][2]);
    m.material.push_back(static_cast<int>(std::lround(attr)));
  }
  finalize_boundary(m, vs);
  return m;
}

void export_triangle(const Mesh &m, const std::string &node_path, const std::string &ele_path) {
  std::ofstream nf(node_path), ef(ele_path);
  if (!nf || !ef)
    throw Error(ErrorKind::ConfigError, "cavity_fem", "cannot write mesh files");
  nf.precision(17);
  nf << m.num_nodes() << " 2 0 0\n";
  for (int i = 0; i < m.num_nodes(); ++i)
    nf << i + 1 << " " << m.nodes[i].x1 << " " << m.nodes[i].x2 << "\n";
  ef << m.num_triangles() << " 3 1\n";
  for (int t = 0; t < m.num_triangles(); ++t)
    ef << t + 1 << " " << m.triangles[t][0] + 1 << " " << m.triangles[t][1] + 1 << " "
       << m.triangles[t][2] + 1 << " " << m.material[t] << "\n";
}

} // namespace fwbic
