#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fwbic/eigensolver.hpp"
#include "fwbic/mesh.hpp"

namespace fwbic {

struct FemMatrices {
  SpMat K; // sum over triangles of (1/n^2) grad.grad
  SpMat M; // consistent P1 mass
};

// `n_of_region` must hold every region id present in the mesh (0 = background).
FemMatrices assemble(const Mesh &mesh, const std::map<int, double> &n_of_region);

struct EigenBasis {
  double delta = 0.0;
  Eigen::VectorXd lambdas;       // branch order
  Eigen::MatrixXd vectors;       // nodal values, M-orthonormal columns
  Eigen::MatrixXd gamma_traces;  // nodal values on the opening nodes, per mode
  Eigen::VectorXd origin_values; // psi_m(o)
  Eigen::VectorXd residuals;
  std::vector<int> branch_to_sorted; // branch label -> ascending position
  double min_margin = 1.0;           // smallest assignment margin of the last relabeling
};

EigenBasis solve_eigen(const SpMat &K, const SpMat &M, int count, const EigenOptions &opt = {});

// Relabels `next` to continue the branches of `prev` (overlaps under M) and
// flips signs so consecutive overlaps are positive. Rows below `checked`
// must clear the assignment margin.
void track_pair(const EigenBasis &prev, EigenBasis &next, const SpMat &M, double margin = 0.1,
                int checked = -1);
void track_branches(std::vector<EigenBasis> &bases, const SpMat &M, double margin = 0.1,
                    int checked = -1);

// Fills gamma_traces and origin_values from nodal vectors.
void boundary_trace(EigenBasis &basis, const Mesh &mesh);

// Nodal loads g_j(i) = int_{Gamma_h} N_i phi_j, exact per edge; N x (J+1).
Eigen::MatrixXd gamma_loads(const Mesh &mesh, int J);

// Mirror map about x2 = 0 (node -> image node), empty if the mesh is not symmetric.
std::vector<int> mirror_map(const Mesh &mesh, double tol = 1e-9);

// Mode parity under the mirror: +1 even, -1 odd, 0 neither (to `tol`).
std::vector<int> mode_parity(const EigenBasis &basis, const std::vector<int> &mirror, const SpMat &M,
                             double tol = 1e-6);

// Point location for field sampling (P1 interpolation).
class MeshLocator {
public:
  explicit MeshLocator(const Mesh &mesh, int buckets = 64);
  // Triangle index and barycentric weights, or -1 when outside.
  int locate(Point p, std::array<double, 3> &bary) const;

private:
  const Mesh &mesh_;
  double x0_, y0_, dx_, dy_;
  int nb_;
  std::vector<std::vector<int>> cells_;
};

} // namespace fwbic
