// Copyright 2026 The dissipmem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DISSIPMEM_ORACLE_HPP
#define DISSIPMEM_ORACLE_HPP

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dissipmem/lattice.hpp"
#include "dissipmem/rates.hpp"

namespace dissipmem {

using Cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

/// A dissipator term rate * (L rho L^dag - {L^dag L, rho}/2).
struct Jump {
  Mat op;
  double rate = 1.0;
  std::string label;
};

/// Dense superoperator of a small system in the column-stacking
/// convention, vec(A rho B) = (B^T kron A) vec(rho). The Hamiltonian slot
/// is zero for every model studied here.
struct Liouvillian {
  int dim = 0;  // Hilbert dimension d; the matrix is d^2 x d^2
  Mat matrix;
  std::vector<Jump> jumps;
  double trace_residual = 0.0;  // | vec(I)^T L |_inf, checked at build
};

/// Assembles the vectorized superoperator for dim <= 64 and verifies trace
/// preservation. Rejects non-square or mismatched jump operators.
Liouvillian build_liouvillian(int dim, std::vector<Jump> jumps);

// Pauli helpers on n qubits (dense; n <= 6).
Mat pauli_x(int n_qubits, int target);
Mat pauli_z(int n_qubits, int target);

/// Quantum jump set of a 1D Ising ring driven by the z=2 rate table:
/// per-site correction flips gated on the two adjacent bond stabilizers,
/// uniform bit-flip noise at rate noise_x and dephasing at rate noise_z.
/// With padded=true the do-nothing projector jumps are included so the
/// per-site correction rate is uniformly kappa (required by the channel
/// construction).
std::vector<Jump> ring_jump_set(int n_spins, const RateTable& table, double noise_x,
                                double noise_z, bool padded);

struct ZeroModes {
  int count = 0;
  std::vector<Mat> basis;     // right zero-eigenvector matrices
  double max_residual = 0.0;  // worst |L v - lambda v| over the zero modes
  bool ill_conditioned = false;
};

/// Eigen-decomposition zero-mode count and basis, |lambda| < tol.
ZeroModes zero_modes(const Liouvillian& liouvillian, double tol = 1e-9);

/// Largest eigenvalue real part (should be <= ~1e-10 for a Lindbladian).
double max_real_eigenvalue(const Liouvillian& liouvillian);

/// Classical master-equation generator on the stabilizer configuration
/// space. Columns are departure states; columns sum to zero.
struct ClassicalGenerator {
  int64_t dim = 0;
  Eigen::SparseMatrix<double> rate_matrix;
  std::vector<double> energy;  // per state, stabilizer units
};

/// Ising2D: all 2^n_sites spin configurations. Toric2D: pairs of
/// (even-parity star syndrome, winding sector), which label the gauge
/// sector eigenstates one-to-one. Requires n_sites <= 20.
ClassicalGenerator build_classical_generator(const LatticeGeometry& geo, const RateTable& rates);

/// Stationary distribution by direct null-space solve (one rate-matrix row
/// replaced by the normalization condition).
Eigen::VectorXd stationary_distribution(const ClassicalGenerator& generator);

/// Total-variation distance between the generator's stationary
/// distribution and the Gibbs distribution at the rate table's beta.
/// Rejects noise = 0 (reducible generator).
double gibbs_check(const LatticeGeometry& geo, const RateTable& rates);

struct SymmetryBlocks {
  double left_residual = 0.0;   // |[L, P_left]|_inf
  double right_residual = 0.0;  // |[L, P_right]|_inf
  double weak_residual = 0.0;   // |[L, P_left P_right]|_inf
  bool strong = false;
  bool weak = false;
  std::vector<int> block_dims;             // (+,+), (-,-), (+,-), (-,+) for strong
  std::vector<int> zero_modes_per_block;   // same order
};

/// Verifies strong/weak symmetry commutators for an involutory parity
/// operator and returns the sector dimensions and per-sector zero-mode
/// counts (strong: four sectors by left/right parity; weak only: two
/// sectors by combined parity).
SymmetryBlocks symmetry_blocks(const Liouvillian& liouvillian, const Mat& parity,
                               double tol = 1e-12);

struct SpectrumCheck {
  double max_mismatch = 0.0;
  double total_rate = 0.0;  // the uniform constant c with sum_j rate_j L_j^dag L_j = c I
};

/// Builds both the Liouvillian and the single-jump channel from a padded
/// jump set and matches their spectra under Spec(L) = c (Spec(Lambda)-1),
/// pairing eigenvalues by minimum-weight bipartite assignment. Rejects
/// jump sets whose rates do not sum to a uniform constant times identity.
SpectrumCheck channel_spectrum_check(int dim, const std::vector<Jump>& padded_jumps);

/// Recovered 2x2 logical matrix after evolving a code-space input for time
/// t and applying the global-majority decode channel of the n-spin ring.
/// Input is given by logical matrix units; returns max deviation over the
/// four units (0 for an identity channel).
double ns_structure_distance(const Liouvillian& liouvillian, int n_spins, double t);

/// |recovered logical coherence| at the requested times for the logical
/// |+> input on the n-spin ring (ferromagnetic code states).
std::vector<double> ns_coherence_series(const Liouvillian& liouvillian, int n_spins,
                                        std::span<const double> times);

}  // namespace dissipmem

#endif  // DISSIPMEM_ORACLE_HPP
