#include "fwbic/resonance.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "fwbic/errors.hpp"

namespace fwbic {

namespace {

int best_match(const Eigen::MatrixXcd &V, const Eigen::VectorXcd &ref) {
  int k = 0;
  double best = -1.0;
  for (int i = 0; i < V.cols(); ++i) {
    double o = std::abs(V.col(i).dot(ref)) / V.col(i).norm();
    if (o > best) {
      best = o;
      k = i;
    }
  }
  return k;
}

} // namespace

ResonancePoint find_resonance(const ModalSystem &s, cplx guess, int branch, const ResonanceOptions &opt,
                              const Eigen::VectorXcd *seed) {
  const int n = s.mcav();
  Eigen::VectorXcd ref = seed ? *seed : Eigen::VectorXcd(Eigen::VectorXcd::Unit(n, branch));
  ResonancePoint p;
  p.delta = s.delta;
  p.branch = branch;
  cplx mu = guess;
  for (int it = 0; it <= opt.max_iter; ++it) {
    if (opt.band[1] > opt.band[0] && (mu.real() < opt.band[0] || mu.real() > opt.band[1]))
      throw Error(ErrorKind::EscapedBand, "resonance", "resonance left the band",
                  {{"re_mu", std::to_string(mu.real())}, {"im_mu", std::to_string(mu.imag())},
                   {"delta", std::to_string(s.delta)}});
    Eigen::MatrixXcd T = full_matrix(s, mu);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(T);
    int k = best_match(es.eigenvectors(), ref);
    Eigen::VectorXcd x = es.eigenvectors().col(k);
    cplx xtx = x.transpose() * x;
    x /= std::sqrt(xtx);
    ref = x;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(T);
    const auto &sv = svd.singularValues();
    p.mu = mu;
    p.iterations = it;
    p.norm_T = sv(0);
    p.sigma_min = sv(sv.size() - 1);
    p.vector = x;
    if (p.sigma_min < opt.tol * p.norm_T)
      return p;
    const double eps = opt.fd_step * std::max(1.0, std::abs(mu));
    Eigen::MatrixXcd dT = (full_matrix(s, mu + eps) - full_matrix(s, mu - eps)) / (2.0 * eps);
    cplx theta = es.eigenvalues()(k);
    cplx dtheta = x.transpose() * dT * x;
    if (dtheta == 0.0)
      break;
    mu -= theta / dtheta;
  }
  throw Error(ErrorKind::NoConvergence, "resonance", "Newton iteration did not converge",
              {{"delta", std::to_string(s.delta)}, {"branch", std::to_string(branch)},
               {"sigma_rel", std::to_string(p.sigma_min / p.norm_T)}});
}

std::vector<ResonanceTrack> scan_resonances(ModalProvider &prov, const std::vector<double> &deltas,
                                            const std::vector<int> &branches, const ResonanceOptions &opt,
                                            double bic_threshold) {
  if (auto *fem = dynamic_cast<FemProvider *>(&prov))
    fem->prefetch(deltas, opt.threads);
  std::vector<ResonanceTrack> tracks;
  for (int b : branches) {
    ResonanceTrack tr;
    tr.branch = b;
    for (size_t i = 0; i < deltas.size(); ++i) {
      ModalSystem s = prov.at(deltas[i]);
      if (tr.points.empty()) {
        tr.points.push_back(find_resonance(s, s.lambdas(b), b, opt));
        continue;
      }
      const ResonancePoint &prev = tr.points.back();
      cplx guess = prev.mu;
      if (tr.points.size() >= 2) {
        const ResonancePoint &pp = tr.points[tr.points.size() - 2];
        guess += (prev.mu - pp.mu) * (deltas[i] - prev.delta) / (prev.delta - pp.delta);
      }
      tr.points.push_back(find_resonance(s, guess, b, opt, &prev.vector));
    }
    std::vector<double> steps;
    for (size_t i = 1; i < tr.points.size(); ++i)
      steps.push_back(std::abs(tr.points[i].mu - tr.points[i - 1].mu));
    if (steps.size() >= 3) {
      std::vector<double> sorted = steps;
      std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
      double med = sorted[sorted.size() / 2];
      for (double st : steps)
        if (st > 10 * med && st > 1e-12)
          tr.branch_jump = true;
    }
    double best = INFINITY;
    for (size_t i = 0; i < tr.points.size(); ++i) {
      double im = std::abs(tr.points[i].mu.imag());
      if (im < best) {
        best = im;
        tr.min_index = static_cast<int>(i);
      }
    }
    tr.below_threshold = best < bic_threshold;
    tracks.push_back(std::move(tr));
  }
  return tracks;
}

ResonancePoint refine_min_imag(ModalProvider &prov, const ResonanceTrack &track,
                               const std::vector<double> &deltas, const ResonanceOptions &opt,
                               double delta_tol) {
  const int i = track.min_index, n = static_cast<int>(track.points.size());
  double a = track.points[std::max(0, i - 1)].delta, b = track.points[std::min(n - 1, i + 1)].delta;
  (void)deltas;
  auto solve_at = [&](double d) {
    const ResonancePoint *near = &track.points[0];
    for (const auto &p : track.points)
      if (std::abs(p.delta - d) < std::abs(near->delta - d))
        near = &p;
    return find_resonance(prov.at(d), near->mu, track.branch, opt, &near->vector);
  };
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  ResonancePoint pc = solve_at(c), pd = solve_at(d);
  while (b - a > delta_tol) {
    if (std::abs(pc.mu.imag()) < std::abs(pd.mu.imag())) {
      b = d;
      d = c;
      pd = pc;
      c = b - gr * (b - a);
      pc = solve_at(c);
    } else {
      a = c;
      c = d;
      pc = pd;
      d = a + gr * (b - a);
      pd = solve_at(d);
    }
  }
  return std::abs(pc.mu.imag()) < std::abs(pd.mu.imag()) ? pc : pd;
}

} // namespace fwbic
