#include "fwbic/cli_io.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "fwbic/errors.hpp"

namespace fwbic {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr const char *kVersion = "0.1.0";
}

ProblemSpec apply_overrides(ProblemSpec spec, const Overrides &o) {
  if (o.delta_from)
    spec.delta_range[0] = *o.delta_from;
  if (o.delta_to)
    spec.delta_range[1] = *o.delta_to;
  if (o.delta_steps)
    spec.numerics.scan_points = *o.delta_steps;
  if (o.resolution)
    spec.numerics.resolution = *o.resolution;
  if (o.mcav)
    spec.truncation.M_cav = *o.mcav;
  if (o.jwg)
    spec.truncation.J_wg = *o.jwg;
  return spec;
}

ValidatedSpec resolve_spec(const ProblemSpec &spec, int threads, CrossingResult *crossing) {
  ValidatedSpec vs = validate_spec(spec);
  const auto &p = spec.perturbation;
  if (p.type == PerturbationType::IndexSweep && !p.n_base) {
    if (spec.numerics.model != "fem")
      throw Error(ErrorKind::ConfigError, "problem", "n_base is required unless the FEM model detects it");
    auto w = spec.numerics.crossing_window;
    CrossingResult cr = detect_crossing(vs, w[0], w[1], 13, spec.numerics.resolution, threads);
    ProblemSpec s = spec;
    s.perturbation.n_base = cr.n_star;
    vs = validate_spec(s);
    if (crossing)
      *crossing = cr;
  }
  return vs;
}

std::vector<double> delta_grid(const ValidatedSpec &vs, int points) {
  points = std::max(2, points);
  auto r = vs.spec.delta_range;
  std::vector<double> g;
  for (int i = 0; i < points; ++i)
    g.push_back(r[0] + (r[1] - r[0]) * i / (points - 1));
  g.back() = r[1];
  return g;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw Error(ErrorKind::ConfigError, "cli_io", "cannot write " + path);
  return f;
}

} // namespace

void write_curves_csv(const std::string &path, const std::vector<ScanRow> &rows) {
  auto f = open_out(path);
  f << "delta, mu0, mu1\n";
  for (const auto &r : rows)
    f << fmt(r.delta) << ", " << fmt(r.mu0) << ", " << fmt(r.mu1) << "\n";
}

void write_field_csv(const std::string &path, const std::vector<FieldSample> &field) {
  auto f = open_out(path);
  f << "x1, x2, re_u\n";
  for (const auto &s : field)
    f << fmt(s.x1) << ", " << fmt(s.x2) << ", " << fmt(s.re_u) << "\n";
}

void write_resonance_csv(const std::string &path, const std::vector<ResonanceTrack> &tracks) {
  auto f = open_out(path);
  f << "delta, branch, re_mu, im_mu, sigma_min\n";
  for (const auto &t : tracks)
    for (const auto &p : t.points)
      f << fmt(p.delta) << ", " << t.branch << ", " << fmt(p.mu.real()) << ", " << fmt(p.mu.imag()) << ", "
        << fmt(p.sigma_min) << "\n";
}

json solution_json(const BicSolution &sol) {
  json b = json::array();
  for (int j = 0; j < sol.b.size(); ++j)
    b.push_back({sol.b(j).real(), sol.b(j).imag()});
  return {{"delta_star", sol.delta_star},
          {"mu_star", sol.mu_star},
          {"f0", sol.f0},
          {"f1", sol.f1},
          {"a20", sol.a20},
          {"a21", sol.a21},
          {"residual0", sol.residual0},
          {"residual1", sol.residual1},
          {"sigma_min_full", sol.sigma_min_full},
          {"norm_T", sol.norm_T},
          {"b0_abs", sol.b0_abs},
          {"b_norm", sol.b_norm},
          {"certified", sol.certified()},
          {"fixed_point_iterations", {sol.iterations0, sol.iterations1}},
          {"root_steps", sol.root_steps},
          {"d", std::vector<double>(sol.d.data(), sol.d.data() + sol.d.size())},
          {"b", b}};
}

namespace {

struct Context {
  ValidatedSpec vs;
  Overrides ov;
  fs::path out;
  std::vector<std::string> outputs;
  json summary = json::object();
  std::optional<CrossingResult> crossing;

  std::string path(const std::string &name) {
    outputs.push_back(name);
    return (out / name).string();
  }
  int steps() const { return ov.delta_steps ? *ov.delta_steps : vs.spec.numerics.scan_points; }
  bool index_sweep() const { return vs.spec.perturbation.type == PerturbationType::IndexSweep; }
  double n_base() const { return vs.spec.perturbation.n_base.value_or(0.0); }
  void write_summary(const std::string &name) {
    auto f = open_out(path(name));
    f << summary.dump(2) << "\n";
  }
};

void prefetch(ModalProvider &prov, const std::vector<double> &grid, int threads) {
  if (auto *fem = dynamic_cast<FemProvider *>(&prov))
    fem->prefetch(grid, threads);
}

void cmd_eigen_scan(Context &c) {
  auto prov = make_provider(c.vs);
  prov->options().tail = false;
  auto grid = delta_grid(c.vs, c.steps());
  prefetch(*prov, grid, c.ov.threads);
  const int M = c.vs.spec.truncation.M;
  const int nb = std::min(prov->options().M_cav, M + 3);
  auto f = open_out(c.path("eigen_scan.csv"));
  f << "delta, branch, lambda, psi_at_o\n";
  std::vector<double> gap;
  for (double d : grid) {
    ModalSystem s = prov->at(d);
    for (int b = 0; b < nb; ++b)
      f << fmt(d) << ", " << b << ", " << fmt(s.lambdas(b)) << ", " << fmt(s.psi_at_o(b)) << "\n";
    gap.push_back(s.lambdas(M - 2) - s.lambdas(M - 1));
  }
  json crossings = json::array();
  for (size_t i = 0; i + 1 < grid.size(); ++i)
    if (gap[i] * gap[i + 1] < 0) {
      double t = gap[i] / (gap[i] - gap[i + 1]);
      double d = grid[i] + t * (grid[i + 1] - grid[i]);
      crossings.push_back({{"delta", d}, {"n", c.n_base() + d}});
    }
  c.summary["pair"] = {M - 2, M - 1};
  c.summary["grid_crossings"] = crossings;
  c.write_summary("eigen_scan_summary.json");
}

void write_diagnostics(Context &c, ModalProvider &prov, const std::vector<ScanRow> &rows, const BicOptions &opt) {
  auto f = open_out(c.path("bic_diagnostics.csv"));
  f << "delta, mu, f0, f1, a20, a21, sigma_min_full\n";
  ReductionOptions ro;
  ro.M = opt.M;
  for (const auto &r : rows) {
    if (!std::isfinite(r.mu0))
      continue;
    ModalSystem s = prov.at(r.delta);
    Reduction red = reduce(s, r.mu0, ro);
    f << fmt(r.delta) << ", " << fmt(r.mu0) << ", " << fmt(red.f0) << ", " << fmt(red.f1) << ", "
      << fmt(red.a2(0)) << ", " << fmt(red.a2(1)) << ", " << fmt(sigma_min(full_matrix(s, r.mu0))) << "\n";
  }
}

void cmd_bic_find(Context &c) {
  auto prov = make_provider(c.vs);
  BicOptions opt = bic_options(c.vs);
  opt.scan_points = c.steps();
  opt.threads = c.ov.threads;
  std::vector<ScanRow> rows;
  BicSolution sol;
  try {
    sol = find_bic(*prov, opt, {}, &rows);
  } catch (const Error &) {
    write_curves_csv(c.path("bic_curves.csv"), rows);
    json gapc = json::array();
    for (const auto &r : rows)
      gapc.push_back({{"delta", r.delta}, {"lambda_gap", r.lambda0 - r.lambda1}, {"mu_gap", r.mu0 - r.mu1}});
    c.summary["gap_curve"] = gapc;
    c.write_summary("bic_summary.json");
    throw;
  }
  write_curves_csv(c.path("bic_curves.csv"), sol.curves);
  write_diagnostics(c, *prov, sol.curves, opt);
  write_field_csv(c.path("bic_field.csv"), reconstruct_mode(*prov, sol, 41, 81));
  c.summary = solution_json(sol);
  if (c.index_sweep()) {
    c.summary["n_base"] = c.n_base();
    c.summary["n_star"] = c.n_base() + sol.delta_star;
  }
  c.write_summary("bic_summary.json");
}

void cmd_resonance_scan(Context &c) {
  auto prov = make_provider(c.vs);
  auto band = prepare_band(*prov);
  auto grid = delta_grid(c.vs, c.steps());
  const int M = c.vs.spec.truncation.M;
  ResonanceOptions ro;
  ro.threads = c.ov.threads;
  auto tracks = scan_resonances(*prov, grid, {M - 2, M - 1}, ro);
  write_resonance_csv(c.path("resonances.csv"), tracks);
  json br = json::array();
  bool jump = false;
  for (const auto &t : tracks) {
    const auto &p = t.points[t.min_index];
    br.push_back({{"branch", t.branch},
                  {"min_abs_im_delta", p.delta},
                  {"min_abs_im", std::abs(p.mu.imag())},
                  {"re_mu_at_min", p.mu.real()},
                  {"below_bic_threshold", t.below_threshold},
                  {"branch_jump", t.branch_jump}});
    jump = jump || t.branch_jump;
  }
  c.summary["band"] = band;
  c.summary["branches"] = br;
  if (c.index_sweep())
    c.summary["n_base"] = c.n_base();
  c.write_summary("resonance_summary.json");
  if (jump)
    throw Error(ErrorKind::BranchJump, "resonance", "a tracked resonance jumped between consecutive deltas");
}

void cmd_sym_bic(Context &c) {
  auto prov = make_provider(c.vs);
  BicOptions opt = bic_options(c.vs);
  auto r = c.vs.spec.delta_range;
  double delta = (r[0] <= 0 && r[1] >= 0) ? 0.0 : r[0];
  BicSolution sol = symmetry_bic(*prov, delta, -1, opt);
  ResonanceOptions ro;
  int m = 0;
  for (int k = 0; k < sol.d.size(); ++k)
    if (std::abs(sol.d(k)) > std::abs(sol.d(m)))
      m = k;
  ResonancePoint p = find_resonance(prov->at(delta), sol.mu_star, m, ro);
  c.summary = solution_json(sol);
  c.summary["branch"] = m;
  c.summary["resonance"] = {{"re_mu", p.mu.real()}, {"im_mu", p.mu.imag()}, {"sigma_min", p.sigma_min}};
  write_field_csv(c.path("sym_bic_field.csv"), reconstruct_mode(*prov, sol, 41, 81));
  c.write_summary("sym_bic_summary.json");
}

struct Check {
  std::string name;
  bool pass;
  double value;
};

void cmd_validate(Context &c) {
  std::vector<Check> checks;
  const auto &vs = c.vs;
  // Spec round trip and idempotence.
  checks.push_back({"spec_roundtrip", spec_from_json(to_json(vs.spec)) == vs.spec, 0.0});
  checks.push_back({"validate_idempotent", validate_spec(vs.spec) == vs, 0.0});

  auto prov = make_provider(vs);
  auto band = prepare_band(*prov);
  auto grid = delta_grid(vs, 5);
  prefetch(*prov, grid, c.ov.threads);
  BicOptions opt = bic_options(vs);
  ReductionOptions ro;
  ro.M = opt.M;
  ro.diagnostics = true;
  std::mt19937 rng(vs.spec.numerics.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);

  double worst_sigma = INFINITY, worst_coerc = INFINITY, worst_im_rank = 0.0, worst_re_sign = 0.0;
  double worst_schur = 0.0, worst_lip = 0.0;
  for (int k = 0; k < 10; ++k) {
    double d = grid[k % grid.size()];
    double mu = band[0] + (band[1] - band[0]) * U(rng);
    ModalSystem s = prov->at(d);
    Reduction r = reduce(s, mu, ro);
    Eigen::MatrixXd IB = Eigen::MatrixXd::Identity(r.B.rows(), r.B.cols()) - r.B;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(IB);
    worst_sigma = std::min(worst_sigma, svd.singularValues().minCoeff());
    for (int t = 0; t < 10; ++t) {
      Eigen::VectorXd x(IB.rows());
      for (int i = 0; i < x.size(); ++i)
        x(i) = N(rng);
      x.normalize();
      worst_coerc = std::min(worst_coerc, x.dot(IB * x) - 1.0);
    }
    // Imaginary part of T comes from the propagating channel only.
    Eigen::MatrixXcd T = full_matrix(s, mu);
    Eigen::JacobiSVD<Eigen::MatrixXd> isvd(T.imag());
    auto isv = isvd.singularValues();
    if (isv.size() > 1)
      worst_im_rank = std::max(worst_im_rank, isv(1) / std::max(isv(0), 1e-300));
    Eigen::MatrixXd Re = T.real();
    for (int m = 0; m < s.mcav(); ++m)
      Re(m, m) -= s.lambdas(m) - mu;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Re);
    worst_re_sign = std::max(worst_re_sign, -es.eigenvalues().minCoeff() / std::max(1.0, Re.norm()));
    auto [a_ref, a2_ref] = pair_schur_reference(s, mu, opt.M);
    double scale = std::max(1.0, r.a.norm());
    worst_schur = std::max({worst_schur, (a_ref - r.a).norm() / scale, (a2_ref - r.a2).norm() / scale});
  }
  for (double d : {grid.front(), grid.back()}) {
    ModalSystem s = prov->at(d);
    worst_lip = std::max({worst_lip, lipschitz_estimate(s, 0, band, opt), lipschitz_estimate(s, 1, band, opt)});
  }
  checks.push_back({"sigma_min_I_minus_B_ge_1", worst_sigma >= 1 - 1e-10, worst_sigma});
  checks.push_back({"coercivity", worst_coerc >= -1e-10, worst_coerc});
  checks.push_back({"imag_T_rank_one", worst_im_rank < 1e-8, worst_im_rank});
  checks.push_back({"real_coupling_psd", worst_re_sign < 1e-10, worst_re_sign});
  checks.push_back({"schur_consistency", worst_schur < 1e-8, worst_schur});
  checks.push_back({"lipschitz_below_one", worst_lip < 1.0, worst_lip});

  json arr = json::array();
  bool ok = true;
  for (const auto &k : checks) {
    arr.push_back({{"check", k.name}, {"pass", k.pass}, {"value", k.value}});
    ok = ok && k.pass;
  }
  c.summary["checks"] = arr;
  c.summary["all_pass"] = ok;
  c.write_summary("validate.json");
  if (!ok)
    throw Error(ErrorKind::ValidationFailure, "cli_io", "invariant checks failed");
}

void cmd_converge(Context &c) {
  const auto &vs = c.vs;
  const double d0 = vs.spec.delta_range[0];
  auto f = open_out(c.path("convergence.csv"));
  f << "study, level, f0, f1, a20, a21, psi_at_o\n";
  json rows = json::array();
  auto eval = [&](const std::string &study, double level, const ProblemSpec &spec, std::optional<double> mu_fixed) {
    ValidatedSpec v = validate_spec(spec);
    auto prov = make_provider(v);
    auto band = prepare_band(*prov);
    double mu = mu_fixed.value_or(0.5 * (band[0] + band[1]));
    ModalSystem s = prov->at(d0);
    ReductionOptions ro;
    ro.M = v.spec.truncation.M;
    Reduction r = reduce(s, mu, ro);
    double psi = s.psi_at_o(ro.M - 2);
    f << study << ", " << fmt(level) << ", " << fmt(r.f0) << ", " << fmt(r.f1) << ", " << fmt(r.a2(0)) << ", "
      << fmt(r.a2(1)) << ", " << fmt(psi) << "\n";
    rows.push_back({{"study", study}, {"level", level}, {"f0", r.f0}, {"f1", r.f1}, {"mu", mu}});
    return mu;
  };
  const ProblemSpec base = vs.spec;
  double mu = eval("base", 0, base, std::nullopt);
  for (int k : {2}) {
    ProblemSpec s = base;
    s.truncation.J_wg *= k;
    eval("J_wg", s.truncation.J_wg, s, mu);
    s = base;
    s.truncation.M_cav *= k;
    eval("M_cav", s.truncation.M_cav, s, mu);
    if (s.numerics.model == "fem") {
      s = base;
      s.numerics.resolution *= k;
      eval("mesh", s.numerics.resolution, s, mu);
    }
  }
  for (int k : {2, 4, 8}) {
    ProblemSpec s = base;
    s.waveguide_width /= k;
    s.clear_zone.reset();
    s.mu_band = base.mu_band;
    eval("h", s.waveguide_width, s, mu);
  }
  c.summary["rows"] = rows;
  c.write_summary("convergence_summary.json");
}

json error_json(const Error &e) {
  json d = json::object();
  for (const auto &[k, v] : e.details())
    d[k] = v;
  return {{"kind", to_string(e.kind())}, {"module", e.module()}, {"message", e.what()}, {"details", d}};
}

} // namespace

int run_cli(int argc, char **argv) {
  CLI::App app{"Friedrich-Wintgen BIC construction in cavity-waveguide structures"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config, out_dir = ".";
  Overrides ov;
  double dfrom = 0, dto = 0;
  int dsteps = 0, res = 0, mcav = 0, jwg = 0;
  app.add_option("--config", config, "JSON problem specification")->required();
  app.add_option("--out-dir", out_dir, "directory for CSV/JSON outputs");
  auto *o_from = app.add_option("--delta-from", dfrom);
  auto *o_to = app.add_option("--delta-to", dto);
  auto *o_steps = app.add_option("--delta-steps", dsteps)->check(CLI::Range(2, 100000));
  auto *o_res = app.add_option("--resolution", res)->check(CLI::Range(2, 10000));
  auto *o_mcav = app.add_option("--mcav", mcav)->check(CLI::Range(3, 100000));
  auto *o_jwg = app.add_option("--jwg", jwg)->check(CLI::Range(1, 100000));
  app.add_option("--threads", ov.threads)->check(CLI::Range(1, 256));
  const std::vector<std::pair<std::string, void (*)(Context &)>> cmds = {
      {"eigen-scan", cmd_eigen_scan}, {"bic-find", cmd_bic_find}, {"resonance-scan", cmd_resonance_scan},
      {"sym-bic", cmd_sym_bic},       {"validate", cmd_validate}, {"converge", cmd_converge}};
  for (const auto &[name, fn] : cmds)
    app.add_subcommand(name);
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 4;
  }
  if (*o_from)
    ov.delta_from = dfrom;
  if (*o_to)
    ov.delta_to = dto;
  if (*o_steps)
    ov.delta_steps = dsteps;
  if (*o_res)
    ov.resolution = res;
  if (*o_mcav)
    ov.mcav = mcav;
  if (*o_jwg)
    ov.jwg = jwg;
  std::string command = app.get_subcommands().front()->get_name();

  const auto t0 = std::chrono::steady_clock::now();
  Context c;
  c.ov = ov;
  c.out = out_dir;
  json manifest = {{"command", command}, {"config_path", config}, {"version", kVersion}};
  int code = 0;
  try {
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec)
      throw Error(ErrorKind::ConfigError, "cli_io", "cannot create output directory " + out_dir);
    ProblemSpec spec = apply_overrides(load_spec(config), ov);
    manifest["config"] = to_json(spec);
    CrossingResult cr;
    c.vs = resolve_spec(spec, ov.threads, &cr);
    if (!cr.grid.empty()) {
      c.crossing = cr;
      manifest["crossing"] = {{"n_star", cr.n_star}, {"lambda_star", cr.lambda_star}};
    }
    manifest["config"] = to_json(c.vs.spec);
    manifest["warnings"] = c.vs.warnings;
    for (const auto &[name, fn] : cmds)
      if (name == command)
        fn(c);
    manifest["status"] = "ok";
  } catch (const Error &e) {
    code = exit_code_for(e.kind());
    manifest["status"] = "error";
    manifest["error"] = error_json(e);
    std::cerr << manifest["error"].dump() << "\n";
  } catch (const std::exception &e) {
    code = 3;
    manifest["status"] = "error";
    manifest["error"] = {{"kind", "Internal"}, {"module", "cli_io"}, {"message", e.what()}};
    std::cerr << manifest["error"].dump() << "\n";
  }
  const auto &s = c.vs.spec;
  manifest["truncation"] = {{"M_cav", s.truncation.M_cav}, {"J_wg", s.truncation.J_wg}, {"M", s.truncation.M}};
  manifest["tolerances"] = {{"fixed_point_tol", s.tolerances.fixed_point_tol},
                            {"root_tol", s.tolerances.root_tol},
                            {"eig_tol", s.tolerances.eig_tol}};
  manifest["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["outputs"] = c.outputs;
  manifest["exit_code"] = code;
  try {
    std::ofstream mf((c.out / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
  } catch (...) {
  }
  return code;
}

} // namespace fwbic
