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

#include "dissipmem/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>

namespace dissipmem {

namespace {

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Minimum-total-cost assignment (Hungarian with potentials); returns the
// column matched to each row.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) match[p[j] - 1] = j - 1;
  return match;
}

int64_t popcount64(uint64_t x) { return static_cast<int64_t>(__builtin_popcountll(x)); }

}  // namespace

Liouvillian build_liouvillian(int dim, std::vector<Jump> jumps) {
  if (dim < 1 || dim > 64)
    throw std::invalid_argument("build_liouvillian: Hilbert dimension must be in [1, 64]");
  const Mat eye = Mat::Identity(dim, dim);
  Liouvillian liouvillian;
  liouvillian.dim = dim;
  liouvillian.matrix = Mat::Zero(dim * dim, dim * dim);
  for (const Jump& jump : jumps) {
    if (jump.op.rows() != dim || jump.op.cols() != dim)
      throw std::invalid_argument("build_liouvillian: jump operator dimension mismatch");
    if (jump.rate < 0.0) throw std::invalid_argument("build_liouvillian: negative jump rate");
    if (jump.rate == 0.0) continue;
    const Mat ldl = jump.op.adjoint() * jump.op;
    liouvillian.matrix += jump.rate * (kron(jump.op.conjugate(), jump.op) -
                                       0.5 * kron(eye, ldl) - 0.5 * kron(ldl.transpose(), eye));
  }
  liouvillian.jumps = std::move(jumps);
  // vec(I) must be a left null vector (trace preservation).
  Vec trace_vec = Vec::Zero(dim * dim);
  for (int i = 0; i < dim; ++i) trace_vec[i * dim + i] = 1.0;
  liouvillian.trace_residual =
      (trace_vec.adjoint() * liouvillian.matrix).cwiseAbs().maxCoeff();
  if (liouvillian.trace_residual > 1e-10)
    throw std::logic_error("build_liouvillian: trace preservation violated");
  return liouvillian;
}

Mat pauli_x(int n_qubits, int target) {
  Mat x(2, 2);
  x << 0, 1, 1, 0;
  Mat out = Mat::Identity(1, 1);
  for (int q = 0; q < n_qubits; ++q)
    out = kron(out, q == target ? x : Mat::Identity(2, 2)).eval();
  return out;
}

Mat pauli_z(int n_qubits, int target) {
  Mat z(2, 2);
  z << 1, 0, 0, -1;
  Mat out = Mat::Identity(1, 1);
  for (int q = 0; q < n_qubits; ++q)
    out = kron(out, q == target ? z : Mat::Identity(2, 2)).eval();
  return out;
}

std::vector<Jump> ring_jump_set(int n_spins, const RateTable& table, double noise_x,
                                double noise_z, bool padded) {
  if (n_spins < 2 || n_spins > 6)
    throw std::invalid_argument("ring_jump_set: 2 to 6 spins supported");
  if (table.z() != 2) throw std::invalid_argument("ring_jump_set: needs the z=2 ring rate table");
  const int dim = 1 << n_spins;
  const Mat eye = Mat::Identity(dim, dim);
  std::vector<Jump> jumps;
  auto bond = [&](int i) -> Mat {
    return pauli_z(n_spins, i) * pauli_z(n_spins, (i + 1) % n_spins);
  };
  for (int site = 0; site < n_spins; ++site) {
    const Mat left = bond((site + n_spins - 1) % n_spins);
    const Mat right = bond(site);
    const Mat x = pauli_x(n_spins, site);
    for (int pattern = 0; pattern < 4; ++pattern) {
      const double s_left = (pattern & 1) ? -1.0 : 1.0;
      const double s_right = (pattern & 2) ? -1.0 : 1.0;
      const int violated = (pattern & 1) + ((pattern >> 1) & 1);
      const Mat projector = 0.25 * (eye + s_left * left) * (eye + s_right * right);
      if (projector.norm() < 1e-12) continue;  // inconsistent pattern (n=2 doubled bond)
      const double rate = table.rate(violated);
      if (rate > 0.0)
        jumps.push_back({x * projector, rate, "correct_s" + std::to_string(site) + "_k" +
                                                  std::to_string(violated)});
      if (padded && table.kappa() - rate > 0.0)
        jumps.push_back({projector, table.kappa() - rate,
                         "noop_s" + std::to_string(site) + "_k" + std::to_string(violated)});
    }
    if (noise_x > 0.0) jumps.push_back({x, noise_x, "flip_s" + std::to_string(site)});
    if (noise_z > 0.0)
      jumps.push_back({pauli_z(n_spins, site), noise_z, "dephase_s" + std::to_string(site)});
  }
  return jumps;
}

ZeroModes zero_modes(const Liouvillian& liouvillian, double tol) {
  Eigen::ComplexEigenSolver<Mat> solver(liouvillian.matrix, true);
  ZeroModes modes;
  for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
    if (std::abs(solver.eigenvalues()[k]) >= tol) continue;
    ++modes.count;
    const Vec vector = solver.eigenvectors().col(k);
    const double residual =
        (liouvillian.matrix * vector - solver.eigenvalues()[k] * vector).cwiseAbs().maxCoeff();
    modes.max_residual = std::max(modes.max_residual, residual);
    Mat reshaped(liouvillian.dim, liouvillian.dim);
    for (int j = 0; j < liouvillian.dim; ++j)
      reshaped.col(j) = vector.segment(static_cast<Eigen::Index>(j) * liouvillian.dim,
                                       liouvillian.dim);
    modes.basis.push_back(std::move(reshaped));
  }
  modes.ill_conditioned = modes.max_residual > tol;
  return modes;
}

double max_real_eigenvalue(const Liouvillian& liouvillian) {
  Eigen::ComplexEigenSolver<Mat> solver(liouvillian.matrix, false);
  return solver.eigenvalues().real().maxCoeff();
}

ClassicalGenerator build_classical_generator(const LatticeGeometry& geo, const RateTable& rates) {
  ClassicalGenerator generator;
  std::vector<Eigen::Triplet<double>> triplets;

  if (geo.model == Model::Ising2D) {
    if (geo.n_sites > 20)
      throw std::invalid_argument("classical generator: n_sites <= 20 required");
    const int64_t dim = int64_t{1} << geo.n_sites;
    generator.dim = dim;
    generator.energy.resize(dim);
    for (int64_t c = 0; c < dim; ++c) {
      int64_t violated_total = 0;
      for (int t = 0; t < geo.n_stabilizers; ++t) {
        const auto sites = geo.sites_of_stab(t);
        violated_total += ((c >> sites[0]) ^ (c >> sites[1])) & 1;
      }
      generator.energy[c] = 2.0 * static_cast<double>(violated_total);
      double out_rate = 0.0;
      for (int s = 0; s < geo.n_sites; ++s) {
        int violated = 0;
        for (int32_t t : geo.stabs_of_site(s)) {
          const auto sites = geo.sites_of_stab(t);
          violated += static_cast<int>(((c >> sites[0]) ^ (c >> sites[1])) & 1);
        }
        double rate = rates.rate(violated) + rates.noise();
        if (rates.field_rate() > 0.0 && ((c >> s) & 1)) rate += rates.field_rate();
        if (rate <= 0.0) continue;
        triplets.emplace_back(static_cast<int>(c ^ (int64_t{1} << s)), static_cast<int>(c), rate);
        out_rate += rate;
      }
      triplets.emplace_back(static_cast<int>(c), static_cast<int>(c), -out_rate);
    }
  } else if (geo.model == Model::Toric2D) {
    if (geo.n_stabilizers > 20)
      throw std::invalid_argument("classical generator: star count <= 20 required");
    // States are (even-parity star syndrome, winding sector); they label
    // the gauge-sector eigenstates one-to-one.
    const int n_stars = geo.n_stabilizers;
    std::vector<int32_t> syndrome_rank(int64_t{1} << n_stars, -1);
    std::vector<uint32_t> syndromes;
    for (uint32_t k = 0; k < (uint32_t{1} << n_stars); ++k)
      if (popcount64(k) % 2 == 0) {
        syndrome_rank[k] = static_cast<int32_t>(syndromes.size());
        syndromes.push_back(k);
      }
    const int64_t dim = static_cast<int64_t>(syndromes.size()) * 4;
    generator.dim = dim;
    generator.energy.resize(dim);
    for (size_t rank = 0; rank < syndromes.size(); ++rank) {
      const uint32_t k = syndromes[rank];
      for (int w = 0; w < 4; ++w) {
        const int64_t from = static_cast<int64_t>(rank) * 4 + w;
        generator.energy[from] = 2.0 * static_cast<double>(popcount64(k));
        double out_rate = 0.0;
        for (int e = 0; e < geo.n_sites; ++e) {
          const auto stars = geo.stabs_of_site(e);
          const int excited =
              static_cast<int>((k >> stars[0]) & 1) + static_cast<int>((k >> stars[1]) & 1);
          const double rate = rates.kappa() * excited + rates.noise();
          if (rate <= 0.0) continue;
          const uint32_t k2 = k ^ (1u << stars[0]) ^ (1u << stars[1]);
          const int w2 = w ^ (geo.cut_x[e] | (geo.cut_y[e] << 1));
          const int64_t to = static_cast<int64_t>(syndrome_rank[k2]) * 4 + w2;
          triplets.emplace_back(static_cast<int>(to), static_cast<int>(from), rate);
          out_rate += rate;
        }
        triplets.emplace_back(static_cast<int>(from), static_cast<int>(from), -out_rate);
      }
    }
  } else {
    throw std::invalid_argument(
        "classical generator: Toric4D exceeds the exact-solve scope (use the sampling engine)");
  }

  generator.rate_matrix.resize(generator.dim, generator.dim);
  generator.rate_matrix.setFromTriplets(triplets.begin(), triplets.end());
  return generator;
}

Eigen::VectorXd stationary_distribution(const ClassicalGenerator& generator) {
  const int64_t dim = generator.dim;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  rhs[0] = 1.0;
  Eigen::VectorXd pi;
  if (dim <= 4096) {
    Eigen::MatrixXd dense = Eigen::MatrixXd(generator.rate_matrix);
    dense.row(0).setOnes();  // replace one balance equation by normalization
    pi = dense.partialPivLu().solve(rhs);
  } else {
    Eigen::SparseMatrix<double> modified = generator.rate_matrix;
    for (int64_t j = 0; j < dim; ++j) modified.coeffRef(0, j) = 1.0;
    modified.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(modified);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("stationary_distribution: sparse factorization failed");
    pi = solver.solve(rhs);
  }
  const double sum = pi.sum();
  if (!(std::abs(sum) > 0.0))
    throw std::runtime_error("stationary_distribution: degenerate null space");
  return pi / sum;
}

double gibbs_check(const LatticeGeometry& geo, const RateTable& rates) {
  if (rates.noise() <= 0.0)
    throw std::invalid_argument("gibbs_check: noise = 0 gives a reducible generator");
  const ClassicalGenerator generator = build_classical_generator(geo, rates);
  const Eigen::VectorXd pi = stationary_distribution(generator);
  const double beta = rates.beta();
  Eigen::VectorXd gibbs(generator.dim);
  const double e_min = *std::min_element(generator.energy.begin(), generator.energy.end());
  for (int64_t c = 0; c < generator.dim; ++c)
    gibbs[c] = std::exp(-beta * (generator.energy[c] - e_min));
  gibbs /= gibbs.sum();
  return 0.5 * (pi - gibbs).cwiseAbs().sum();
}

SymmetryBlocks symmetry_blocks(const Liouvillian& liouvillian, const Mat& parity, double tol) {
  const int dim = liouvillian.dim;
  if (parity.rows() != dim || parity.cols() != dim)
    throw std::invalid_argument("symmetry_blocks: parity dimension mismatch");
  if ((parity * parity - Mat::Identity(dim, dim)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("symmetry_blocks: parity operator is not an involution");

  const Mat eye = Mat::Identity(dim, dim);
  const Mat p_left = kron(eye, parity);
  const Mat p_right = kron(parity.transpose(), eye);
  const Mat& l = liouvillian.matrix;
  SymmetryBlocks blocks;
  blocks.left_residual = (l * p_left - p_left * l).cwiseAbs().maxCoeff();
  blocks.right_residual = (l * p_right - p_right * l).cwiseAbs().maxCoeff();
  const Mat p_both = p_left * p_right;
  blocks.weak_residual = (l * p_both - p_both * l).cwiseAbs().maxCoeff();
  blocks.strong = blocks.left_residual < tol && blocks.right_residual < tol;
  blocks.weak = blocks.weak_residual < tol;
  if (!blocks.weak) return blocks;

  // Joint eigenbasis of the left/right parity superoperators: columns
  // vec(v_a v_b^dag) with P v_a = s_a v_a.
  Eigen::SelfAdjointEigenSolver<Mat> eigensolver(parity);
  std::vector<int> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return eigensolver.eigenvalues()[a] > eigensolver.eigenvalues()[b];
  });
  Mat v(dim, dim);
  std::vector<int> sign(dim);
  for (int k = 0; k < dim; ++k) {
    v.col(k) = eigensolver.eigenvectors().col(order[k]);
    sign[k] = eigensolver.eigenvalues()[order[k]] > 0 ? +1 : -1;
  }

  // Sector of the superoperator basis element (a, b): strong symmetry
  // splits by (s_a, s_b) as (++, --, +-, -+); weak-only by the product.
  const int n_sectors = blocks.strong ? 4 : 2;
  auto sector_of = [&](int a, int b) {
    if (blocks.strong) {
      if (sign[a] > 0 && sign[b] > 0) return 0;
      if (sign[a] < 0 && sign[b] < 0) return 1;
      if (sign[a] > 0 && sign[b] < 0) return 2;
      return 3;
    }
    return sign[a] * sign[b] > 0 ? 0 : 1;
  };
  std::vector<std::vector<int>> members(n_sectors);
  for (int b = 0; b < dim; ++b)
    for (int a = 0; a < dim; ++a) members[sector_of(a, b)].push_back(b * dim + a);

  const Mat u = kron(v.conjugate(), v);
  const Mat transformed = u.adjoint() * l * u;
  for (int sector = 0; sector < n_sectors; ++sector) {
    const auto& indices = members[sector];
    Mat block(indices.size(), indices.size());
    for (size_t i = 0; i < indices.size(); ++i)
      for (size_t j = 0; j < indices.size(); ++j) block(i, j) = transformed(indices[i], indices[j]);
    blocks.block_dims.push_back(static_cast<int>(indices.size()));
    Eigen::ComplexEigenSolver<Mat> block_solver(block, false);
    int zeros = 0;
    for (Eigen::Index k = 0; k < block_solver.eigenvalues().size(); ++k)
      if (std::abs(block_solver.eigenvalues()[k]) < 1e-9) ++zeros;
    blocks.zero_modes_per_block.push_back(zeros);
  }
  return blocks;
}

SpectrumCheck channel_spectrum_check(int dim, const std::vector<Jump>& padded_jumps) {
  Mat normalization = Mat::Zero(dim, dim);
  for (const Jump& jump : padded_jumps)
    normalization += jump.rate * (jump.op.adjoint() * jump.op);
  const double c = normalization(0, 0).real();
  if ((normalization - c * Mat::Identity(dim, dim)).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, c))
    throw std::invalid_argument(
        "channel_spectrum_check: jump set is not padded (sum rate L^dag L must be proportional "
        "to the identity)");

  const Liouvillian liouvillian = build_liouvillian(dim, padded_jumps);
  Mat channel = Mat::Zero(dim * dim, dim * dim);
  for (const Jump& jump : padded_jumps)
    channel += (jump.rate / c) * kron(jump.op.conjugate(), jump.op);

  Eigen::ComplexEigenSolver<Mat> l_solver(liouvillian.matrix, false);
  Eigen::ComplexEigenSolver<Mat> c_solver(channel, false);
  const int n = dim * dim;
  if (n > 256)
    throw std::invalid_argument("channel_spectrum_check: capped at Hilbert dimension 16");
  Eigen::MatrixXd distance(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      distance(i, j) =
          std::abs(l_solver.eigenvalues()[i] - c * (c_solver.eigenvalues()[j] - 1.0));
  const std::vector<int> match = min_cost_assignment(distance);
  SpectrumCheck check;
  check.total_rate = c;
  for (int i = 0; i < n; ++i) check.max_mismatch = std::max(check.max_mismatch, distance(i, match[i]));
  return check;
}

namespace {

// Global-majority decode channel of the n-spin ring: each syndrome sector
// {c, ~c} maps coherently onto the ferromagnetic pair, majority side first
// (ties decode toward all-up).
std::vector<Mat> ring_decode_kraus(int n_spins) {
  const int dim = 1 << n_spins;
  std::vector<Mat> kraus;
  for (int c = 0; c < dim; ++c) {
    const int partner = ~c & (dim - 1);
    if (partner < c) continue;  // one representative per sector
    const int ups = n_spins - static_cast<int>(popcount64(static_cast<uint64_t>(c)));
    const int majority = 2 * ups >= n_spins ? 0 : dim - 1;  // all-up or all-down
    Mat f = Mat::Zero(dim, dim);
    f(majority, c) = 1.0;
    f((~majority) & (dim - 1), partner) = 1.0;
    kraus.push_back(std::move(f));
  }
  return kraus;
}

// Propagation by scaling-and-squaring matrix exponential; generic
// Liouvillians need not be diagonalizable, so eigendecomposition is not
// safe here. Step propagators are cached by time span.
struct Propagator {
  const Mat& generator;
  mutable double cached_span = -1.0;
  mutable Mat cached_exp;

  explicit Propagator(const Mat& matrix) : generator(matrix) {}

  Vec evolve(const Vec& state, double span) const {
    if (span == 0.0) return state;
    if (span != cached_span) {
      cached_exp = (generator * span).exp();
      cached_span = span;
    }
    return cached_exp * state;
  }
};

Eigen::Matrix2cd recover_logical(const Mat& rho, const std::vector<Mat>& kraus, int dim) {
  Mat decoded = Mat::Zero(dim, dim);
  for (const Mat& f : kraus) decoded += f * rho * f.adjoint();
  Eigen::Matrix2cd logical;
  logical(0, 0) = decoded(0, 0);
  logical(0, 1) = decoded(0, dim - 1);
  logical(1, 0) = decoded(dim - 1, 0);
  logical(1, 1) = decoded(dim - 1, dim - 1);
  return logical;
}

Mat unvec(const Vec& vector, int dim) {
  Mat out(dim, dim);
  for (int j = 0; j < dim; ++j)
    out.col(j) = vector.segment(static_cast<Eigen::Index>(j) * dim, dim);
  return out;
}

}  // namespace

double ns_structure_distance(const Liouvillian& liouvillian, int n_spins, double t) {
  const int dim = 1 << n_spins;
  if (dim != liouvillian.dim)
    throw std::invalid_argument("ns_structure_distance: spin count mismatch");
  const Propagator propagator(liouvillian.matrix);
  const auto kraus = ring_decode_kraus(n_spins);
  double worst = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Vec initial = Vec::Zero(dim * dim);
      const int row = a == 0 ? 0 : dim - 1;
      const int col = b == 0 ? 0 : dim - 1;
      initial[static_cast<Eigen::Index>(col) * dim + row] = 1.0;
      const Mat evolved = unvec(propagator.evolve(initial, t), dim);
      Eigen::Matrix2cd logical = recover_logical(evolved, kraus, dim);
      logical(a, b) -= 1.0;
      worst = std::max(worst, logical.cwiseAbs().maxCoeff());
    }
  return worst;
}

std::vector<double> ns_coherence_series(const Liouvillian& liouvillian, int n_spins,
                                        std::span<const double> times) {
  const int dim = 1 << n_spins;
  if (dim != liouvillian.dim)
    throw std::invalid_argument("ns_coherence_series: spin count mismatch");
  for (size_t k = 1; k < times.size(); ++k)
    if (times[k] < times[k - 1])
      throw std::invalid_argument("ns_coherence_series: times must be ascending");
  const Propagator propagator(liouvillian.matrix);
  const auto kraus = ring_decode_kraus(n_spins);
  Vec state = Vec::Zero(dim * dim);
  // |+><+| on the ferromagnetic code pair.
  const int top = dim - 1;
  state[0] = 0.5;                                             // |0><0|
  state[static_cast<Eigen::Index>(top) * dim + 0] = 0.5;      // |0><1|
  state[top] = 0.5;                                           // |1><0|
  state[static_cast<Eigen::Index>(top) * dim + top] = 0.5;    // |1><1|
  std::vector<double> coherence;
  coherence.reserve(times.size());
  double now = 0.0;
  for (double t : times) {
    state = propagator.evolve(state, t - now);
    now = t;
    coherence.push_back(std::abs(recover_logical(unvec(state, dim), kraus, dim)(0, 1)));
  }
  return coherence;
}

}  // namespace dissipmem
