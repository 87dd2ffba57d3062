// Copyright 2026 The nqsvqe Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cmath>
#include <random>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nqsvqe/common.hpp"
#include "nqsvqe/integrals.hpp"
#include "nqsvqe/pauli.hpp"
#include "nqsvqe/statevector.hpp"
#include "nqsvqe/wavefunction.hpp"

namespace nqsvqe {

struct ExtractOptions {
  double cutoff = 1e-8;
  std::uint64_t enumeration_limit = 1'000'000;
};

namespace detail {

inline void check_state_sector(const Statevector &state, Sector sector) {
  if (state.n_qubits() % 2)
    throw DomainError("extract: odd qubit count");
  const int n_orb = state.n_qubits() / 2;
  if (sector.n_alpha < 0 || sector.n_beta < 0 || sector.n_alpha > n_orb || sector.n_beta > n_orb)
    throw DomainError("extract: sector exceeds orbital count");
}

inline void finish(WavefunctionTable &t) {
  t.sort_by_magnitude();
  t.fix_gauge();
}

} // namespace detail

/// Reads every sector amplitude; keeps |c| >= cutoff.
inline WavefunctionTable extract_full(const Statevector &state, Sector sector, const ExtractOptions &opt = {}) {
  detail::check_state_sector(state, sector);
  const int n_orb = state.n_qubits() / 2;
  if (sector_dimension(n_orb, sector) > opt.enumeration_limit)
    throw CapacityError("extract_full: sector dimension " + std::to_string(sector_dimension(n_orb, sector)) +
                        " exceeds the enumeration limit; use extract_mc");
  WavefunctionTable t;
  t.source = "vqe-extract-full";
  t.n_qubits = state.n_qubits();
  t.sector = sector;
  for (const auto &c : enumerate_sector(n_orb, sector)) {
    const cplx a = amplitude(state, c);
    if (std::abs(a) >= opt.cutoff)
      t.entries.push_back({c, a});
  }
  detail::finish(t);
  return t;
}

struct McOptions {
  int steps = 5000;
  double temperature = 0.01;  // hartree
  std::uint64_t seed = 1;
  int converge_window = 50;   // consecutive accepted additions
  double converge_tol = 1e-6; // hartree
  double cutoff = 1e-8;       // amplitudes below this are never added
};

struct McExtraction {
  WavefunctionTable table;
  double energy = 0.0;          // Rayleigh quotient of the final table
  std::vector<double> energies; // after each accepted addition
  std::vector<bool> downhill;   // whether that addition lowered the energy
  int steps_taken = 0;
  bool converged = false;
};

class CannotSeedError : public DomainError {
public:
  using DomainError::DomainError;
};

/// Accept/reject walk over sector configurations. The table energy is the
/// Rayleigh quotient of the accumulated (unnormalized) amplitudes.
inline McExtraction extract_mc(const Statevector &state, Sector sector, const QubitHamiltonian &H, double e_hf,
                               const McOptions &opt) {
  detail::check_state_sector(state, sector);
  if (opt.steps < 1)
    throw DomainError("extract_mc: steps must be >= 1");
  if (!(opt.temperature > 0.0))
    throw DomainError("extract_mc: temperature must be positive");
  if (H.n_qubits() != state.n_qubits())
    throw DomainError("extract_mc: Hamiltonian and state qubit counts differ");
  const int n_orb = state.n_qubits() / 2;
  const auto groups = group_by_flip(H);
  const auto hf = hartree_fock_configuration(n_orb, sector);
  const cplx a_hf = amplitude(state, hf);
  if (std::abs(a_hf) < opt.cutoff)
    throw CannotSeedError("extract_mc: zero amplitude on the HF configuration " + hf.str());

  std::unordered_map<std::uint64_t, cplx> table{{hf.bits(), a_hf}};
  std::vector<std::uint64_t> order{hf.bits()};
  // Rayleigh quotient numerator and norm of the accumulated table
  double num = e_hf * std::norm(a_hf), den = std::norm(a_hf);
  double e_cur = e_hf;

  auto row_against_table = [&](std::uint64_t y, cplx cy, double &diag) {
    cplx off = 0.0;
    diag = 0.0;
    for (const auto &g : groups) {
      const std::uint64_t x = y ^ g.flip;
      if (g.flip == 0) {
        diag = g.phase_sum(y).real();
        continue;
      }
      const auto it = table.find(x);
      if (it != table.end())
        off += g.phase_sum(x) * it->second; // <y|H|x> c_x
    }
    return 2.0 * (std::conj(cy) * off).real();
  };

  std::mt19937_64 rng(mix_seed(opt.seed, 0x4d43ull));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto move_one = [&](std::uint64_t bits, int sigma) {
    std::vector<int> occ, emp;
    for (int p = 0; p < n_orb; ++p)
      ((bits >> (2 * p + sigma)) & 1u ? occ : emp).push_back(2 * p + sigma);
    if (occ.empty() || emp.empty())
      return bits;
    const int from = occ[std::uniform_int_distribution<std::size_t>(0, occ.size() - 1)(rng)];
    const int to = emp[std::uniform_int_distribution<std::size_t>(0, emp.size() - 1)(rng)];
    return bits ^ (std::uint64_t{1} << from) ^ (std::uint64_t{1} << to);
  };

  McExtraction res;
  std::uint64_t walker = hf.bits();
  int calm = 0;
  for (int step = 0; step < opt.steps; ++step) {
    res.steps_taken = step + 1;
    const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
    std::uint64_t y = walker;
    if (kind != 1)
      y = move_one(y, 0);
    if (kind != 0)
      y = move_one(y, 1);
    if (y == walker)
      continue;
    if (table.count(y)) { // already accumulated: the walker just moves
      walker = y;
      continue;
    }
    const cplx cy = amplitude(state, Configuration(y, state.n_qubits()));
    if (std::abs(cy) < opt.cutoff)
      continue;
    double diag = 0.0;
    const double cross = row_against_table(y, cy, diag);
    const double num_c = num + cross + diag * std::norm(cy);
    const double den_c = den + std::norm(cy);
    const double e_cand = num_c / den_c;
    const double de = e_cand - e_cur;
    const double u = uni(rng);
    if (!(de < 0.0 || u < std::exp(-de / opt.temperature)))
      continue;
    table.emplace(y, cy);
    order.push_back(y);
    num = num_c;
    den = den_c;
    e_cur = e_cand;
    walker = y;
    res.energies.push_back(e_cur);
    res.downhill.push_back(de < 0.0);
    calm = std::abs(de) < opt.converge_tol ? calm + 1 : 0;
    if (calm >= opt.converge_window) {
      res.converged = true;
      break;
    }
  }
  res.energy = e_cur;
  res.table.source = "vqe-extract-mc";
  res.table.n_qubits = state.n_qubits();
  res.table.sector = sector;
  for (auto b : order)
    res.table.entries.push_back({Configuration(b, state.n_qubits()), table.at(b)});
  detail::finish(res.table);
  return res;
}

/// Union of chain tables; the first table holding a configuration wins.
inline WavefunctionTable merge_tables(const std::vector<WavefunctionTable> &tables) {
  if (tables.empty())
    throw DomainError("merge_tables: nothing to merge");
  WavefunctionTable out;
  out.source = tables.front().source;
  out.n_qubits = tables.front().n_qubits;
  out.sector = tables.front().sector;
  std::unordered_set<Configuration> seen;
  for (const auto &t : tables) {
    if (t.n_qubits != out.n_qubits || !(t.sector == out.sector))
      throw DomainError("merge_tables: tables disagree on qubits or sector");
    for (const auto &e : t.entries)
      if (seen.insert(e.config).second)
        out.entries.push_back(e);
  }
  detail::finish(out);
  return out;
}

/// Dense statevector holding the table's amplitudes.
inline Statevector to_statevector(const WavefunctionTable &t) {
  Statevector s(t.n_qubits);
  for (const auto &e : t.entries)
    s[e.config.bits()] = e.coeff;
  return s;
}

/// Lifts an active-space table into the full orbital space: frozen orbitals
/// doubly occupied, removed orbitals empty. The sign accounts for the
/// reordering of active creation operators into ascending qubit order.
inline WavefunctionTable embed_table(const WavefunctionTable &t, const ActiveSpace &space, int n_orb_full) {
  if (t.n_qubits != 2 * static_cast<int>(space.active.size()))
    throw DomainError("embed_table: table does not match the active space");
  std::uint64_t core = 0;
  for (int p : space.frozen)
    core |= std::uint64_t{3} << (2 * p);
  WavefunctionTable out;
  out.source = t.source;
  out.n_qubits = 2 * n_orb_full;
  out.sector = {t.sector.n_alpha + static_cast<int>(space.frozen.size()),
                t.sector.n_beta + static_cast<int>(space.frozen.size())};
  for (const auto &e : t.entries) {
    std::vector<int> mapped;
    for (int q = 0; q < t.n_qubits; ++q)
      if (e.config.occupied(q))
        mapped.push_back(2 * space.active[static_cast<std::size_t>(q / 2)] + (q & 1));
    int inversions = 0;
    std::uint64_t bits = core;
    for (std::size_t i = 0; i < mapped.size(); ++i) {
      bits |= std::uint64_t{1} << mapped[i];
      for (std::size_t j = i + 1; j < mapped.size(); ++j)
        inversions += mapped[i] > mapped[j];
    }
    out.entries.push_back({Configuration(bits, out.n_qubits), (inversions & 1) ? -e.coeff : e.coeff});
  }
  return out;
}

/// <psi|H|psi> / <psi|psi> of a sparse table, by Pauli application.
inline double table_energy(const WavefunctionTable &t, const QubitHamiltonian &H) {
  if (t.n_qubits != H.n_qubits())
    throw DomainError("table_energy: qubit counts differ");
  const auto groups = group_by_flip(H);
  std::unordered_map<std::uint64_t, cplx> m;
  for (const auto &e : t.entries)
    m.emplace(e.config.bits(), e.coeff);
  cplx num = 0.0;
  for (const auto &[b, c] : m)
    for (const auto &g : groups) {
      const auto it = m.find(b ^ g.flip);
      if (it != m.end())
        num += std::conj(it->second) * g.phase_sum(b) * c;
    }
  const double den = t.norm_squared();
  if (den == 0.0)
    throw DomainError("table_energy: empty table");
  return num.real() / den;
}

} // namespace nqsvqe
