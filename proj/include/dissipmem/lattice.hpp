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

#ifndef DISSIPMEM_LATTICE_HPP
#define DISSIPMEM_LATTICE_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dissipmem {

enum class Model { Ising2D, Toric2D, Toric4D };

std::string model_name(Model model);

/// Incidence structure between flippable binary sites and the parity
/// stabilizers they touch. Immutable after construction, safe to share
/// across threads.
///
/// Site and stabilizer indexing (periodic in every direction):
///  - Ising2D: spins on vertices of an N x N torus, vertex (x,y) -> y*N+x.
///    Bonds (stabilizers) 2*v+0 pairing (x,y)-(x+1,y) and 2*v+1 pairing
///    (x,y)-(x,y+1). Each spin touches 4 bonds, each bond 2 spins.
///  - Toric2D: qubits on edges, edge 2*v+d with d=0 along +x and d=1 along
///    +y from vertex v. Star stabilizer = vertex index; each edge touches
///    its 2 endpoint stars, each star its 4 incident edges.
///  - Toric4D: qubits on faces of an N^4 torus. Vertex (v0,v1,v2,v3) ->
///    ((v0*N+v1)*N+v2)*N+v3. Face orientations are the 6 coordinate pairs
///    ordered (0,1),(0,2),(0,3),(1,2),(1,3),(2,3); site = 6*vertex+orient.
///    Edge stabilizers along direction d: 4*vertex+d. A face (v,{i,j})
///    touches edges (v,i),(v,j),(v+ej,i),(v+ei,j) - the boundary of the
///    square - so violated edges always form closed loops.
struct LatticeGeometry {
  Model model;
  int linear_size = 0;
  int n_sites = 0;
  int n_stabilizers = 0;
  int stabs_per_site = 0;  // coordination z
  int sites_per_stab = 0;  // stabilizer degree
  std::vector<int32_t> site_stabs;  // n_sites x stabs_per_site
  std::vector<int32_t> stab_sites;  // n_stabilizers x sites_per_stab

  // Toric2D only: fundamental-cocycle membership per edge, used for
  // homology (winding parity) bookkeeping. cut_x marks horizontal edges in
  // column x=0, cut_y marks vertical edges in row y=0.
  std::vector<uint8_t> cut_x;
  std::vector<uint8_t> cut_y;

  std::span<const int32_t> stabs_of_site(int s) const {
    return {site_stabs.data() + static_cast<size_t>(s) * stabs_per_site,
            static_cast<size_t>(stabs_per_site)};
  }
  std::span<const int32_t> sites_of_stab(int t) const {
    return {stab_sites.data() + static_cast<size_t>(t) * sites_per_stab,
            static_cast<size_t>(sites_per_stab)};
  }

  // Toric2D helpers: star index <-> torus coordinates, edge lookup.
  int star_index(int x, int y) const;
  std::pair<int, int> star_coords(int star) const;
  int edge_index(int x, int y, int dir) const;
};

/// Builds the incidence tables for one of the three models.
/// Ising2D requires N >= 3 (an N=2 torus doubles every bond), the toric
/// models require N >= 2.
LatticeGeometry build_geometry(Model model, int linear_size);

/// Closure constraint on an explicit syndrome: even number of violated
/// stars (Toric2D) or closed loops of violated edge stabilizers, i.e. even
/// incidence at every vertex (Toric4D). Rejects Ising2D.
bool syndrome_closure_ok(const LatticeGeometry& geo, std::span<const uint8_t> syndrome);

struct Observables {
  double magnetization = 0.0;   // relative to the all-satisfied reference
  double mean_stabilizer = 0.0;
  int probe_spin = 1;           // +/-1 value of the designated probe site (site 0)
};

/// Winding parities of the accumulated flip chain across the two fixed
/// torus cuts (Toric2D). Parities change only when a flip lands on a cut
/// edge; once the syndrome is empty they equal the homology class of the
/// chain.
struct HomologyTracker {
  uint8_t winding_x = 0;
  uint8_t winding_y = 0;

  void on_flip(const LatticeGeometry& geo, int site) {
    winding_x ^= geo.cut_x[site];
    winding_y ^= geo.cut_y[site];
  }
};

/// Site bits plus incrementally maintained syndrome. site_bits[s] = 1 means
/// flipped relative to the all-satisfied reference. One config per
/// trajectory; never shared mutably.
class StabilizerConfig {
 public:
  explicit StabilizerConfig(const LatticeGeometry& geo);

  const LatticeGeometry& geometry() const { return *geo_; }

  /// Toggles a site and updates the adjacent syndrome bits and the
  /// per-site violated counts. O(z * stabilizer degree), independent of N.
  void flip_site(int s);

  /// Number of violated stabilizers adjacent to s, in [0, z]. O(1).
  int violated_count(int s) const { return violated_count_[s]; }

  bool site_bit(int s) const { return site_bits_[s] != 0; }
  bool syndrome_bit(int t) const { return syndrome_[t] != 0; }
  int64_t sum_syndrome() const { return sum_syndrome_; }
  int64_t flipped_sites() const { return flipped_sites_; }

  Observables observables() const;

  /// Toric models: true iff the syndrome satisfies the closure constraint
  /// (even number of violated stars / closed loops of violated edges).
  /// Rejects Ising2D.
  bool cycle_check() const;

  std::span<const uint8_t> site_bits() const { return site_bits_; }
  std::span<const uint8_t> syndrome() const { return syndrome_; }

  /// Raw dump: 16-byte header (model tag, N, endianness marker) followed
  /// by the packed site bit-array. Syndrome is rebuilt on load.
  void write(std::ostream& out) const;
  static StabilizerConfig read(std::istream& in, const LatticeGeometry& geo);

  bool operator==(const StabilizerConfig& other) const {
    return site_bits_ == other.site_bits_;
  }

 private:
  const LatticeGeometry* geo_;
  std::vector<uint8_t> site_bits_;
  std::vector<uint8_t> syndrome_;
  std::vector<uint8_t> violated_count_;
  int64_t sum_syndrome_ = 0;
  int64_t flipped_sites_ = 0;
};

}  // namespace dissipmem

#endif  // DISSIPMEM_LATTICE_HPP
