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

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nqsvqe/common.hpp"
#include "nqsvqe/pauli.hpp"

namespace nqsvqe {

/// Dense amplitudes; basis index bit k is the occupation of qubit k.
class Statevector {
public:
  static constexpr int kMaxQubits = 24;

  Statevector() = default;
  explicit Statevector(int n_qubits) : n_(n_qubits) {
    if (n_qubits < 0 || n_qubits > kMaxQubits)
      throw CapacityError("Statevector: qubit count " + std::to_string(n_qubits) + " exceeds dense limit");
    amps_.assign(std::size_t{1} << n_qubits, cplx{});
  }
  Statevector(int n_qubits, std::vector<cplx> amps) : n_(n_qubits), amps_(std::move(amps)) {
    if (n_qubits < 0 || n_qubits > kMaxQubits || amps_.size() != (std::size_t{1} << n_qubits))
      throw DomainError("Statevector: amplitude count must equal 2^n_qubits");
  }

  int n_qubits() const { return n_; }
  std::size_t dim() const { return amps_.size(); }
  std::span<const cplx> amps() const { return amps_; }
  std::span<cplx> amps() { return amps_; }
  cplx operator[](std::size_t i) const { return amps_[i]; }
  cplx &operator[](std::size_t i) { return amps_[i]; }

  double norm() const {
    double s = 0.0;
    for (const auto &a : amps_)
      s += std::norm(a);
    return std::sqrt(s);
  }

private:
  int n_ = 0;
  std::vector<cplx> amps_;
};

inline Statevector basis_state(int n_qubits, const Configuration &config) {
  if (config.size() != n_qubits)
    throw DomainError("basis_state: configuration length " + std::to_string(config.size()) +
                      " differs from qubit count " + std::to_string(n_qubits));
  Statevector s(n_qubits);
  s[config.bits()] = 1.0;
  return s;
}

inline cplx amplitude(const Statevector &state, const Configuration &config) {
  if (config.size() != state.n_qubits())
    throw DomainError("amplitude: configuration length differs from qubit count");
  return state[config.bits()];
}

enum class GateKind { X, H, RX, RY, RZ, CNOT, CZ, PauliRotation };

inline bool is_rotation(GateKind k) {
  return k == GateKind::RX || k == GateKind::RY || k == GateKind::RZ || k == GateKind::PauliRotation;
}

/// A gate. Rotation angle = angle + multiplier * params[param_index] when a
/// parameter is bound; rotations implement exp(-i * angle / 2 * P).
struct Gate {
  GateKind kind = GateKind::X;
  std::vector<int> targets;
  double angle = 0.0;
  std::optional<int> param_index;
  double multiplier = 1.0;
  PauliWord axis; // PauliRotation only

  static Gate make(GateKind kind, std::vector<int> targets, double angle = 0.0, std::optional<int> param = {},
                   double mult = 1.0, PauliWord axis = {}) {
    Gate g;
    g.kind = kind;
    g.targets = std::move(targets);
    g.angle = angle;
    g.param_index = param;
    g.multiplier = mult;
    g.axis = axis;
    return g;
  }

  double bound_angle(std::span<const double> params) const {
    return param_index ? angle + multiplier * params[static_cast<std::size_t>(*param_index)] : angle;
  }
};

class Circuit {
public:
  Circuit() = default;
  Circuit(int n_qubits, int n_params) : n_qubits_(n_qubits), n_params_(n_params) {
    if (n_qubits < 0 || n_qubits > Configuration::kMaxQubits || n_params < 0)
      throw DomainError("Circuit: invalid dimensions");
  }

  int n_qubits() const { return n_qubits_; }
  int n_params() const { return n_params_; }
  const std::vector<Gate> &gates() const { return gates_; }
  std::vector<Gate> &gates() { return gates_; }

  /// Appends after validating qubit indices and parameter binding.
  Circuit &add(Gate g) {
    if (g.kind == GateKind::PauliRotation) {
      g.targets.clear();
      for (int k = 0; k < n_qubits_; ++k)
        if (((g.axis.x | g.axis.z) >> k) & 1u)
          g.targets.push_back(k);
      if (n_qubits_ < 64 && ((g.axis.x | g.axis.z) >> n_qubits_) != 0)
        throw DomainError("Circuit: Pauli axis acts beyond qubit count");
    }
    const std::size_t arity = (g.kind == GateKind::CNOT || g.kind == GateKind::CZ) ? 2u
                              : g.kind == GateKind::PauliRotation             ? g.targets.size()
                                                                              : 1u;
    if (g.targets.size() != arity)
      throw DomainError("Circuit: wrong number of targets for gate");
    for (std::size_t i = 0; i < g.targets.size(); ++i) {
      if (g.targets[i] < 0 || g.targets[i] >= n_qubits_)
        throw DomainError("Circuit: qubit index " + std::to_string(g.targets[i]) + " out of range");
      for (std::size_t j = 0; j < i; ++j)
        if (g.targets[i] == g.targets[j])
          throw DomainError("Circuit: repeated target qubit");
    }
    if (g.param_index && (*g.param_index < 0 || *g.param_index >= n_params_))
      throw DomainError("Circuit: parameter index out of range");
    gates_.push_back(std::move(g));
    return *this;
  }

  Circuit &x(int q) { return add(Gate::make(GateKind::X, {q})); }
  Circuit &h(int q) { return add(Gate::make(GateKind::H, {q})); }
  Circuit &cnot(int c, int t) { return add(Gate::make(GateKind::CNOT, {c, t})); }
  Circuit &cz(int a, int b) { return add(Gate::make(GateKind::CZ, {a, b})); }
  Circuit &rotation(GateKind k, int q, double angle, std::optional<int> param = {}, double mult = 1.0) {
    return add(Gate::make(k, {q}, angle, param, mult));
  }
  Circuit &pauli_rotation(PauliWord axis, double angle, std::optional<int> param = {}, double mult = 1.0) {
    return add(Gate::make(GateKind::PauliRotation, {}, angle, param, mult, axis));
  }

private:
  int n_qubits_ = 0;
  int n_params_ = 0;
  std::vector<Gate> gates_;
};

namespace detail {

inline void apply_single(Statevector &s, int q, const cplx m[2][2]) {
  const std::size_t bit = std::size_t{1} << q;
  auto a = s.amps();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i & bit)
      continue;
    const cplx a0 = a[i], a1 = a[i | bit];
    a[i] = m[0][0] * a0 + m[0][1] * a1;
    a[i | bit] = m[1][0] * a0 + m[1][1] * a1;
  }
}

/// exp(-i theta/2 P) = cos(theta/2) - i sin(theta/2) P, applied pairwise.
inline void apply_pauli_rotation(Statevector &s, const PauliWord &p, double theta) {
  const double c = std::cos(theta / 2), sn = std::sin(theta / 2);
  const cplx mis(0.0, -sn);
  auto a = s.amps();
  if (p.x == 0) {
    for (std::size_t i = 0; i < a.size(); ++i)
      a[i] *= cplx(c, 0.0) + mis * p.apply_phase(i);
    return;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t j = i ^ p.x;
    if (j < i)
      continue;
    // <i|P|j> = phase(P, j), <j|P|i> = phase(P, i)
    const cplx ai = a[i], aj = a[j];
    a[i] = c * ai + mis * p.apply_phase(j) * aj;
    a[j] = c * aj + mis * p.apply_phase(i) * ai;
  }
}

} // namespace detail

inline void apply_gate(Statevector &s, const Gate &g, std::span<const double> params) {
  static const double r2 = 1.0 / std::numbers::sqrt2;
  switch (g.kind) {
  case GateKind::X: {
    const cplx m[2][2] = {{0, 1}, {1, 0}};
    detail::apply_single(s, g.targets[0], m);
    break;
  }
  case GateKind::H: {
    const cplx m[2][2] = {{r2, r2}, {r2, -r2}};
    detail::apply_single(s, g.targets[0], m);
    break;
  }
  case GateKind::RX:
  case GateKind::RY:
  case GateKind::RZ: {
    const auto bit = std::uint64_t{1} << g.targets[0];
    const PauliWord w = g.kind == GateKind::RX ? PauliWord{bit, 0}
                        : g.kind == GateKind::RY ? PauliWord{bit, bit}
                                                 : PauliWord{0, bit};
    detail::apply_pauli_rotation(s, w, g.bound_angle(params));
    break;
  }
  case GateKind::PauliRotation:
    detail::apply_pauli_rotation(s, g.axis, g.bound_angle(params));
    break;
  case GateKind::CNOT: {
    const std::size_t c = std::size_t{1} << g.targets[0], t = std::size_t{1} << g.targets[1];
    auto a = s.amps();
    for (std::size_t i = 0; i < a.size(); ++i)
      if ((i & c) && !(i & t))
        std::swap(a[i], a[i | t]);
    break;
  }
  case GateKind::CZ: {
    const std::size_t m = (std::size_t{1} << g.targets[0]) | (std::size_t{1} << g.targets[1]);
    auto a = s.amps();
    for (std::size_t i = 0; i < a.size(); ++i)
      if ((i & m) == m)
        a[i] = -a[i];
    break;
  }
  }
}

/// Evolves `state` gate by gate.
inline Statevector apply(Statevector state, const Circuit &circuit, std::span<const double> params) {
  if (state.n_qubits() != circuit.n_qubits())
    throw DomainError("apply: circuit and state qubit counts differ");
  if (static_cast<int>(params.size()) != circuit.n_params())
    throw DomainError("apply: expected " + std::to_string(circuit.n_params()) + " parameters, got " +
                      std::to_string(params.size()));
  for (const auto &g : circuit.gates())
    apply_gate(state, g, params);
  return state;
}

/// Precomputed Hamiltonian layout for repeated expectations.
class CompiledHamiltonian {
public:
  explicit CompiledHamiltonian(const QubitHamiltonian &h) : n_(h.n_qubits()), groups_(group_by_flip(h)) {}
  int n_qubits() const { return n_; }
  const std::vector<FlipGroup> &groups() const { return groups_; }

  /// H|psi> as a dense vector.
  std::vector<cplx> apply(std::span<const cplx> psi) const {
    std::vector<cplx> out(psi.size());
    for (const auto &g : groups_)
      for (std::size_t b = 0; b < psi.size(); ++b)
        if (psi[b] != 0.0)
          out[b ^ g.flip] += g.phase_sum(b) * psi[b];
    return out;
  }

  cplx expectation_complex(std::span<const cplx> psi) const {
    cplx total = 0.0;
    for (const auto &g : groups_) {
      cplx acc = 0.0;
      for (std::size_t b = 0; b < psi.size(); ++b)
        if (psi[b] != 0.0)
          acc += std::conj(psi[b ^ g.flip]) * g.phase_sum(b) * psi[b];
      total += acc;
    }
    return total;
  }

private:
  int n_;
  std::vector<FlipGroup> groups_;
};

/// <psi|H|psi>; the imaginary residue must vanish.
inline double expectation(const Statevector &state, const CompiledHamiltonian &h) {
  if (state.n_qubits() != h.n_qubits())
    throw DomainError("expectation: Hamiltonian acts on " + std::to_string(h.n_qubits()) + " qubits, state has " +
                      std::to_string(state.n_qubits()));
  const cplx e = h.expectation_complex(state.amps());
  if (std::abs(e.imag()) > 1e-10)
    throw NumericalError("expectation: imaginary residue " + std::to_string(e.imag()));
  return e.real();
}

inline double expectation(const Statevector &state, const QubitHamiltonian &h) {
  return expectation(state, CompiledHamiltonian(h));
}

/// Rewrites Pauli rotations as basis changes, a CNOT parity ladder and one
/// RZ; the state produced is identical.
inline Circuit decompose(const Circuit &c) {
  Circuit out(c.n_qubits(), c.n_params());
  for (const auto &g : c.gates()) {
    if (g.kind != GateKind::PauliRotation) {
      out.add(g);
      continue;
    }
    const auto &t = g.targets;
    if (t.empty()) // global phase only
      continue;
    auto change = [&](bool inverse) {
      for (int q : t) {
        const bool xb = (g.axis.x >> q) & 1u, zb = (g.axis.z >> q) & 1u;
        if (xb && !zb)
          out.h(q);
        else if (xb && zb)
          out.rotation(GateKind::RX, q, inverse ? -std::numbers::pi / 2 : std::numbers::pi / 2);
      }
    };
    change(false);
    for (std::size_t i = 0; i + 1 < t.size(); ++i)
      out.cnot(t[i], t[i + 1]);
    out.add(Gate::make(GateKind::RZ, {t.back()}, g.angle, g.param_index, g.multiplier));
    for (std::size_t i = t.size() - 1; i > 0; --i)
      out.cnot(t[i - 1], t[i]);
    change(true);
  }
  return out;
}

/// Circuit depth by greedy layer assignment over qubit timelines.
inline int depth(const Circuit &c) {
  std::vector<int> level(static_cast<std::size_t>(c.n_qubits()), 0);
  int d = 0;
  for (const auto &g : c.gates()) {
    int l = 0;
    for (int q : g.targets)
      l = std::max(l, level[static_cast<std::size_t>(q)]);
    for (int q : g.targets)
      level[static_cast<std::size_t>(q)] = l + 1;
    d = std::max(d, l + 1);
  }
  return d;
}

static_assert(std::endian::native == std::endian::little, "binary dumps assume a little-endian host");

/// Binary dump: uint64 qubit count, then 2^n (re, im) doubles.
inline void save_statevector(const Statevector &s, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot write statevector: " + path);
  const std::uint64_t n = static_cast<std::uint64_t>(s.n_qubits());
  out.write(reinterpret_cast<const char *>(&n), sizeof n);
  out.write(reinterpret_cast<const char *>(s.amps().data()), static_cast<std::streamsize>(s.dim() * sizeof(cplx)));
}

inline Statevector load_statevector(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError("cannot open statevector: " + path);
  std::uint64_t n = 0;
  if (!in.read(reinterpret_cast<char *>(&n), sizeof n) || n > static_cast<std::uint64_t>(Statevector::kMaxQubits))
    throw ParseError("statevector dump: bad header in " + path);
  std::vector<cplx> amps(std::size_t{1} << n);
  if (!in.read(reinterpret_cast<char *>(amps.data()), static_cast<std::streamsize>(amps.size() * sizeof(cplx))))
    throw ParseError("statevector dump: truncated amplitudes in " + path);
  return Statevector(static_cast<int>(n), std::move(amps));
}

} // namespace nqsvqe
