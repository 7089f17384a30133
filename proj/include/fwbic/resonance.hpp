#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fwbic/modal.hpp"
#include "fwbic/modematch.hpp"

namespace fwbic {

struct ResonancePoint {
  double delta = 0.0;
  cplx mu;
  int branch = 0;
  double sigma_min = 0.0;
  double norm_T = 0.0;
  int iterations = 0;
  Eigen::VectorXcd vector; // null vector of T (complex symmetric normalization x^T x = 1)
};

struct ResonanceOptions {
  double tol = 1e-10;      // sigma_min(T) < tol * ||T||
  int max_iter = 40;
  double fd_step = 1e-6;   // relative step for dT/dmu
  std::array<double, 2> band{0.0, 0.0}; // Re mu must stay inside (0, 0: unchecked)
  int threads = 1;         // eigen-solve workers for FEM prefetch
};

// Root of det T(mu) near `guess` by Newton on the eigenvalue of T(mu) whose
// eigenvector continues `seed` (or, without a seed, has the largest weight on
// cavity mode `branch`).
ResonancePoint find_resonance(const ModalSystem &s, cplx guess, int branch, const ResonanceOptions &opt,
                              const Eigen::VectorXcd *seed = nullptr);

struct ResonanceTrack {
  int branch = 0;
  std::vector<ResonancePoint> points;
  int min_index = -1;          // position of min |Im mu|
  bool below_threshold = false; // min |Im mu| under the BIC threshold
  bool branch_jump = false;
};

// Continuation in delta for each branch label: the tracked eigenvalue seeds
// the first point, the previous root each later one.
std::vector<ResonanceTrack> scan_resonances(ModalProvider &prov, const std::vector<double> &deltas,
                                            const std::vector<int> &branches, const ResonanceOptions &opt,
                                            double bic_threshold = 1e-8);

// Golden-section refinement of the delta where |Im mu| of a track is smallest,
// within the neighbours of the grid minimum.
ResonancePoint refine_min_imag(ModalProvider &prov, const ResonanceTrack &track,
                               const std::vector<double> &deltas, const ResonanceOptions &opt,
                               double delta_tol = 1e-5);

} // namespace fwbic
