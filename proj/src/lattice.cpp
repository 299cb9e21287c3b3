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

#include "dissipmem/lattice.hpp"

#include <array>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dissipmem {

namespace {

constexpr uint32_t kEndianMarker = 0x01020304u;

int wrap(int v, int n) { return ((v % n) + n) % n; }

LatticeGeometry build_ising(int n_lin) {
  LatticeGeometry geo;
  geo.model = Model::Ising2D;
  geo.linear_size = n_lin;
  geo.n_sites = n_lin * n_lin;
  geo.n_stabilizers = 2 * n_lin * n_lin;
  geo.stabs_per_site = 4;
  geo.sites_per_stab = 2;
  geo.site_stabs.assign(static_cast<size_t>(geo.n_sites) * 4, -1);
  geo.stab_sites.assign(static_cast<size_t>(geo.n_stabilizers) * 2, -1);

  auto vid = [n_lin](int x, int y) { return wrap(y, n_lin) * n_lin + wrap(x, n_lin); };
  for (int y = 0; y < n_lin; ++y) {
    for (int x = 0; x < n_lin; ++x) {
      const int v = vid(x, y);
      const int right = 2 * v + 0;
      const int top = 2 * v + 1;
      geo.stab_sites[2 * right + 0] = v;
      geo.stab_sites[2 * right + 1] = vid(x + 1, y);
      geo.stab_sites[2 * top + 0] = v;
      geo.stab_sites[2 * top + 1] = vid(x, y + 1);
      // right, top, left, bottom bonds of the spin at (x,y)
      geo.site_stabs[4 * v + 0] = right;
      geo.site_stabs[4 * v + 1] = top;
      geo.site_stabs[4 * v + 2] = 2 * vid(x - 1, y) + 0;
      geo.site_stabs[4 * v + 3] = 2 * vid(x, y - 1) + 1;
    }
  }
  return geo;
}

LatticeGeometry build_toric2d(int n_lin) {
  LatticeGeometry geo;
  geo.model = Model::Toric2D;
  geo.linear_size = n_lin;
  geo.n_sites = 2 * n_lin * n_lin;
  geo.n_stabilizers = n_lin * n_lin;
  geo.stabs_per_site = 2;
  geo.sites_per_stab = 4;
  geo.site_stabs.assign(static_cast<size_t>(geo.n_sites) * 2, -1);
  geo.stab_sites.assign(static_cast<size_t>(geo.n_stabilizers) * 4, -1);
  geo.cut_x.assign(geo.n_sites, 0);
  geo.cut_y.assign(geo.n_sites, 0);

  auto vid = [n_lin](int x, int y) { return wrap(y, n_lin) * n_lin + wrap(x, n_lin); };
  for (int y = 0; y < n_lin; ++y) {
    for (int x = 0; x < n_lin; ++x) {
      const int v = vid(x, y);
      const int eh = 2 * v + 0;  // edge toward +x
      const int ev = 2 * v + 1;  // edge toward +y
      geo.site_stabs[2 * eh + 0] = v;
      geo.site_stabs[2 * eh + 1] = vid(x + 1, y);
      geo.site_stabs[2 * ev + 0] = v;
      geo.site_stabs[2 * ev + 1] = vid(x, y + 1);
      // star at v: +x, +y, -x, -y edges
      geo.stab_sites[4 * v + 0] = eh;
      geo.stab_sites[4 * v + 1] = ev;
      geo.stab_sites[4 * v + 2] = 2 * vid(x - 1, y) + 0;
      geo.stab_sites[4 * v + 3] = 2 * vid(x, y - 1) + 1;
      if (x == 0) geo.cut_x[eh] = 1;
      if (y == 0) geo.cut_y[ev] = 1;
    }
  }
  return geo;
}

LatticeGeometry build_toric4d(int n_lin) {
  LatticeGeometry geo;
  geo.model = Model::Toric4D;
  geo.linear_size = n_lin;
  const int64_t n4 = static_cast<int64_t>(n_lin) * n_lin * n_lin * n_lin;
  geo.n_sites = static_cast<int>(6 * n4);
  geo.n_stabilizers = static_cast<int>(4 * n4);
  geo.stabs_per_site = 4;
  geo.sites_per_stab = 6;
  geo.site_stabs.assign(static_cast<size_t>(geo.n_sites) * 4, -1);
  geo.stab_sites.assign(static_cast<size_t>(geo.n_stabilizers) * 6, -1);

  // Face orientations: coordinate pairs in fixed lexicographic order.
  constexpr std::array<std::array<int, 2>, 6> kFaceDirs = {
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

  auto vid = [n_lin](const std::array<int, 4>& v) {
    int id = 0;
    for (int c = 0; c < 4; ++c) id = id * n_lin + wrap(v[c], n_lin);
    return id;
  };

  std::array<int, 4> v{};
  for (v[0] = 0; v[0] < n_lin; ++v[0])
    for (v[1] = 0; v[1] < n_lin; ++v[1])
      for (v[2] = 0; v[2] < n_lin; ++v[2])
        for (v[3] = 0; v[3] < n_lin; ++v[3]) {
          const int base = vid(v);
          for (int o = 0; o < 6; ++o) {
            const int i = kFaceDirs[o][0];
            const int j = kFaceDirs[o][1];
            const int site = 6 * base + o;
            std::array<int, 4> vi = v, vj = v;
            vi[i] += 1;  // v + e_i
            vj[j] += 1;  // v + e_j
            // The 4 edges bounding the square face spanned by (e_i, e_j) at v.
            geo.site_stabs[4 * site + 0] = 4 * base + i;
            geo.site_stabs[4 * site + 1] = 4 * base + j;
            geo.site_stabs[4 * site + 2] = 4 * vid(vj) + i;
            geo.site_stabs[4 * site + 3] = 4 * vid(vi) + j;
          }
        }

  // Invert: each edge (v,d) borders faces (v,{d,d'}) and (v-e_d',{d,d'}).
  std::vector<int> fill(geo.n_stabilizers, 0);
  for (int s = 0; s < geo.n_sites; ++s)
    for (int32_t t : geo.stabs_of_site(s)) geo.stab_sites[6 * t + fill[t]++] = s;
  for (int t = 0; t < geo.n_stabilizers; ++t)
    if (fill[t] != 6) throw std::logic_error("toric4d incidence inversion failed");
  return geo;
}

}  // namespace

std::string model_name(Model model) {
  switch (model) {
    case Model::Ising2D: return "ising2d";
    case Model::Toric2D: return "toric2d";
    case Model::Toric4D: return "toric4d";
  }
  throw std::invalid_argument("unknown model tag");
}

int LatticeGeometry::star_index(int x, int y) const {
  return wrap(y, linear_size) * linear_size + wrap(x, linear_size);
}

std::pair<int, int> LatticeGeometry::star_coords(int star) const {
  return {star % linear_size, star / linear_size};
}

int LatticeGeometry::edge_index(int x, int y, int dir) const {
  return 2 * star_index(x, y) + dir;
}

LatticeGeometry build_geometry(Model model, int linear_size) {
  switch (model) {
    case Model::Ising2D:
      if (linear_size < 3)
        throw std::invalid_argument(
            "ising2d requires N >= 3: an N=2 torus couples each spin pair by duplicate bonds");
      return build_ising(linear_size);
    case Model::Toric2D:
      if (linear_size < 2) throw std::invalid_argument("toric2d requires N >= 2");
      return build_toric2d(linear_size);
    case Model::Toric4D:
      if (linear_size < 2) throw std::invalid_argument("toric4d requires N >= 2");
      return build_toric4d(linear_size);
  }
  throw std::invalid_argument("unknown model tag");
}

StabilizerConfig::StabilizerConfig(const LatticeGeometry& geo)
    : geo_(&geo),
      site_bits_(geo.n_sites, 0),
      syndrome_(geo.n_stabilizers, 0),
      violated_count_(geo.n_sites, 0) {}

void StabilizerConfig::flip_site(int s) {
  if (s < 0 || s >= geo_->n_sites) throw std::out_of_range("flip_site: site index out of range");
  site_bits_[s] ^= 1;
  flipped_sites_ += site_bits_[s] ? 1 : -1;
  for (int32_t t : geo_->stabs_of_site(s)) {
    syndrome_[t] ^= 1;
    const int delta = syndrome_[t] ? 1 : -1;
    sum_syndrome_ += delta;
    for (int32_t other : geo_->sites_of_stab(t)) violated_count_[other] += delta;
  }
}

Observables StabilizerConfig::observables() const {
  Observables obs;
  obs.magnetization =
      static_cast<double>(geo_->n_sites - 2 * flipped_sites_) / geo_->n_sites;
  obs.mean_stabilizer =
      static_cast<double>(geo_->n_stabilizers - 2 * sum_syndrome_) / geo_->n_stabilizers;
  obs.probe_spin = site_bits_[0] ? -1 : 1;
  return obs;
}

bool syndrome_closure_ok(const LatticeGeometry& geo, std::span<const uint8_t> syndrome) {
  if (syndrome.size() != static_cast<size_t>(geo.n_stabilizers))
    throw std::invalid_argument("syndrome_closure_ok: syndrome length mismatch");
  switch (geo.model) {
    case Model::Toric2D: {
      int64_t violated = 0;
      for (uint8_t bit : syndrome) violated += bit;
      return violated % 2 == 0;
    }
    case Model::Toric4D: {
      // Violated edges must form 1-cycles: even violated-edge count at
      // every vertex. Edge stabilizer 4*v+d joins vertices v and v+e_d.
      const int n_lin = geo.linear_size;
      const int n_vertices = geo.n_stabilizers / 4;
      std::vector<uint8_t> parity(n_vertices, 0);
      std::array<int64_t, 4> stride{};
      stride[3] = 1;
      stride[2] = n_lin;
      stride[1] = static_cast<int64_t>(n_lin) * n_lin;
      stride[0] = stride[1] * n_lin;
      for (int t = 0; t < geo.n_stabilizers; ++t) {
        if (!syndrome[t]) continue;
        const int v = t / 4;
        const int d = t % 4;
        const auto div = stride[d];
        const int coord = static_cast<int>((v / div) % n_lin);
        const int neighbor =
            coord + 1 < n_lin ? v + static_cast<int>(div)
                              : v - static_cast<int>(div * (n_lin - 1));
        parity[v] ^= 1;
        parity[neighbor] ^= 1;
      }
      for (uint8_t p : parity)
        if (p) return false;
      return true;
    }
    case Model::Ising2D:
      throw std::invalid_argument("cycle_check is unsupported for ising2d");
  }
  throw std::invalid_argument("unknown model tag");
}

bool StabilizerConfig::cycle_check() const { return syndrome_closure_ok(*geo_, syndrome_); }

void StabilizerConfig::write(std::ostream& out) const {
  uint32_t header[4] = {static_cast<uint32_t>(geo_->model),
                        static_cast<uint32_t>(geo_->linear_size), kEndianMarker, 0};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<uint8_t> packed((geo_->n_sites + 7) / 8, 0);
  for (int s = 0; s < geo_->n_sites; ++s)
    if (site_bits_[s]) packed[s >> 3] |= static_cast<uint8_t>(1u << (s & 7));
  out.write(reinterpret_cast<const char*>(packed.data()),
            static_cast<std::streamsize>(packed.size()));
}

StabilizerConfig StabilizerConfig::read(std::istream& in, const LatticeGeometry& geo) {
  uint32_t header[4] = {0, 0, 0, 0};
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw std::runtime_error("config dump: truncated header");
  if (header[2] != kEndianMarker)
    throw std::runtime_error("config dump: endianness marker mismatch");
  if (header[0] != static_cast<uint32_t>(geo.model) ||
      header[1] != static_cast<uint32_t>(geo.linear_size))
    throw std::runtime_error("config dump: model/size mismatch with geometry");
  std::vector<uint8_t> packed((geo.n_sites + 7) / 8, 0);
  in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!in) throw std::runtime_error("config dump: truncated bit array");
  StabilizerConfig config(geo);
  for (int s = 0; s < geo.n_sites; ++s)
    if (packed[s >> 3] & (1u << (s & 7))) config.flip_site(s);
  return config;
}

}  // namespace dissipmem
