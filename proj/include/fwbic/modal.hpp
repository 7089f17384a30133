#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fwbic/cavity_analytic.hpp"
#include "fwbic/cavity_fem.hpp"
#include "fwbic/problem.hpp"
#include "fwbic/tail.hpp"

namespace fwbic {

// Everything the junction equations need at one parameter value.
struct ModalSystem {
  double delta = 0.0;
  double h = 0.0;
  double scaling = 1.0;       // prefactor of the coupling sum
  Eigen::VectorXd lambdas;    // head eigenvalues, branch order
  Eigen::MatrixXd overlaps;   // (J+1) x M_cav, entries (phi_j, psi_m)
  Eigen::VectorXd psi_at_o;
  std::vector<int> parity;    // +1 even / -1 odd / 0 unknown, per mode (may be empty)
  std::shared_ptr<const TailKernel> tail; // null: plain truncation
  std::string provenance = "analytic";

  int mcav() const { return static_cast<int>(lambdas.size()); }
  int jwg() const { return static_cast<int>(overlaps.rows()) - 1; }
};

// For a mirror-symmetric system (parity known), sets overlaps and tail
// entries that the symmetry forbids to exact zeros.
void apply_parity_mask(ModalSystem &s);

struct ProviderOptions {
  int M_cav = 60;
  int J_wg = 40;
  int guard = 4;        // extra computed modes beyond the head (FEM)
  int checked = -1;     // branches whose tracking margin is enforced (-1: M + 10)
  int M = 7;
  bool tail = true;
  int cheb_nodes = 16;
  std::optional<std::array<double, 2>> tail_window;
  EigenOptions eig;
};

ProviderOptions provider_options(const ValidatedSpec &vs);

class ModalProvider {
public:
  virtual ~ModalProvider() = default;
  // Tracked modal data at delta (relative to previously computed deltas).
  virtual ModalSystem at(double delta) = 0;
  virtual double h() const = 0;
  virtual const ValidatedSpec &spec() const = 0;
  // Cavity field sum_m d_m psi_m plus the eliminated tail driven by the
  // junction load zb = Z b (real mu only).
  virtual Eigen::VectorXd cavity_field(double delta, const Eigen::VectorXd &d, const Eigen::VectorXd &zb,
                                       double mu, const std::vector<Point> &pts) = 0;
  void set_tail_window(double a, double b);
  ProviderOptions &options() { return opt_; }
  const ProviderOptions &options() const { return opt_; }
  virtual void clear_cache() = 0;

protected:
  ProviderOptions opt_;
};

class RectProvider : public ModalProvider {
public:
  RectProvider(ValidatedSpec vs, ProviderOptions opt);
  ModalSystem at(double delta) override;
  double h() const override { return vs_.h(); }
  const ValidatedSpec &spec() const override { return vs_; }
  Eigen::VectorXd cavity_field(double delta, const Eigen::VectorXd &d, const Eigen::VectorXd &zb, double mu,
                               const std::vector<Point> &pts) override;
  void clear_cache() override {
    cache_.clear();
    kernel_.reset();
    far_.reset();
  }
  // Zero all couplings (closed-cavity limit checks).
  double coupling_multiplier = 1.0;

private:
  std::vector<RectMode> modes_at(double delta) const;
  ValidatedSpec vs_;
  std::vector<std::pair<int, int>> labels_; // (p, q) per branch
  std::map<double, ModalSystem> cache_;
  std::shared_ptr<RectKernelData> kernel_;
  std::shared_ptr<ChebyshevTail> far_;
  int far_q0_ = 0;
};

class FemProvider : public ModalProvider {
public:
  FemProvider(ValidatedSpec vs, ProviderOptions opt, int resolution);
  FemProvider(ValidatedSpec vs, ProviderOptions opt, Mesh mesh);
  ModalSystem at(double delta) override;
  double h() const override { return vs_.h(); }
  const ValidatedSpec &spec() const override { return vs_; }
  Eigen::VectorXd cavity_field(double delta, const Eigen::VectorXd &d, const Eigen::VectorXd &zb, double mu,
                               const std::vector<Point> &pts) override;
  // Drops derived systems; eigenbases are kept.
  void clear_cache() override {
    for (auto &[d, e] : cache_)
      e.sys.reset();
  }
  void drop_bases() { cache_.clear(); }

  const Mesh &mesh() const { return mesh_; }
  FemMatrices matrices(double delta) const;
  // Untracked solve (thread safe).
  EigenBasis solve_raw(double delta) const;
  // Solves many deltas with up to `threads` workers, then tracks them in order.
  void prefetch(const std::vector<double> &deltas, int threads);
  const EigenBasis &basis(double delta);
  int modes_computed() const { return opt_.M_cav + opt_.guard; }

private:
  struct Entry {
    EigenBasis basis;
    std::optional<ModalSystem> sys;
  };
  Entry &adopt(EigenBasis raw);
  ModalSystem make_system(const Entry &e, double delta) const;
  Mesh mesh_at(double delta) const;
  std::map<int, double> indices(double delta) const;

  ValidatedSpec vs_;
  Mesh mesh_;
  Eigen::MatrixXd G_;
  std::vector<int> mirror_;
  std::map<double, Entry> cache_;
};

std::unique_ptr<ModalProvider> make_provider(const ValidatedSpec &vs);

// Tracked eigen-crossing of branches M-2, M-1 over the window (IndexSweep with
// n_base treated as 0, i.e. delta = n). Returns (n*, lambda*).
struct CrossingResult {
  double n_star = 0.0;
  double lambda_star = 0.0;
  std::vector<double> grid;
  std::vector<double> lam_a, lam_b;
};
CrossingResult detect_crossing(const ValidatedSpec &vs, double n_lo, double n_hi, int points, int resolution,
                               int threads = 1);

} // namespace fwbic
