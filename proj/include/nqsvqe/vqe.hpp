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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nqsvqe/common.hpp"
#include "nqsvqe/pauli.hpp"
#include "nqsvqe/statevector.hpp"

namespace nqsvqe {

enum class AnsatzKind { UCCSD, HEA };

inline std::string to_string(AnsatzKind k) { return k == AnsatzKind::UCCSD ? "uccsd" : "hea"; }

inline AnsatzKind parse_ansatz_kind(const std::string &s) {
  if (s == "uccsd")
    return AnsatzKind::UCCSD;
  if (s == "hea")
    return AnsatzKind::HEA;
  throw DomainError("unknown ansatz '" + s + "' (expected uccsd or hea)");
}

struct AnsatzSpec {
  AnsatzKind kind = AnsatzKind::UCCSD;
  int layers = 1;        // HEA
  Configuration reference;
  int trotter_steps = 1; // UCCSD

  int n_qubits() const { return reference.size(); }

  void validate() const {
    if (reference.size() == 0 || reference.size() % 2)
      throw DomainError("AnsatzSpec: reference must cover an even number of qubits");
    if (!(reference == hartree_fock_configuration(reference.size() / 2, reference.sector())))
      throw DomainError("AnsatzSpec: reference " + reference.str() + " is not a lowest-orbital occupation");
    if (kind == AnsatzKind::HEA && layers < 1)
      throw DomainError("AnsatzSpec: HEA needs at least one layer");
    if (kind == AnsatzKind::UCCSD && trotter_steps < 1)
      throw DomainError("AnsatzSpec: trotter_steps must be >= 1");
  }
};

/// One fermionic excitation, spin-orbital (qubit) indices.
struct Excitation {
  std::vector<int> occ;  // annihilated, ascending
  std::vector<int> virt; // created, ascending
};

/// Spin-conserving singles then doubles, in parameter order.
inline std::vector<Excitation> uccsd_excitations(const Configuration &ref) {
  std::vector<int> occ, virt;
  for (int q = 0; q < ref.size(); ++q)
    (ref.occupied(q) ? occ : virt).push_back(q);
  std::vector<Excitation> out;
  for (int i : occ)
    for (int a : virt)
      if ((i & 1) == (a & 1))
        out.push_back({{i}, {a}});
  for (std::size_t i = 0; i < occ.size(); ++i)
    for (std::size_t j = i + 1; j < occ.size(); ++j)
      for (std::size_t a = 0; a < virt.size(); ++a)
        for (std::size_t b = a + 1; b < virt.size(); ++b) {
          const int so = (occ[i] & 1) + (occ[j] & 1), sv = (virt[a] & 1) + (virt[b] & 1);
          if (so == sv)
            out.push_back({{occ[i], occ[j]}, {virt[a], virt[b]}});
        }
  return out;
}

/// T - T^dagger of one excitation as i * sum_k c_k P_k (c_k real), sorted by word.
inline std::vector<std::pair<PauliWord, double>> excitation_generator(const Excitation &e) {
  std::vector<std::pair<int, bool>> up, down;
  // T = a+_a (a+_b) a_j a_i ; T^dagger = a+_i a+_j a_b a_a
  for (auto it = e.virt.rbegin(); it != e.virt.rend(); ++it)
    up.emplace_back(*it, true);
  for (int i : e.occ)
    up.emplace_back(i, false);
  for (auto it = e.occ.rbegin(); it != e.occ.rend(); ++it)
    down.emplace_back(*it, true);
  for (int a : e.virt)
    down.emplace_back(a, false);
  PauliSum g = jw_product(up);
  g.add(jw_product(down), -1.0);
  std::vector<std::pair<PauliWord, double>> out;
  for (const auto &[w, c] : g.terms()) {
    if (std::abs(c) < 1e-14)
      continue;
    if (std::abs(c.real()) > 1e-12)
      throw NumericalError("excitation_generator: generator is not anti-Hermitian");
    out.emplace_back(w, c.imag());
  }
  std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    return a.first.x != b.first.x ? a.first.x < b.first.x : a.first.z < b.first.z;
  });
  return out;
}

inline void prepare_reference(Circuit &c, const Configuration &ref) {
  for (int q = 0; q < ref.size(); ++q)
    if (ref.occupied(q))
      c.x(q);
}

/// Reference preparation followed by Trotterized exp(T - T^dagger). Each
/// Pauli term i c P of a generator becomes exp(-i (-2 c theta) / 2 P).
inline Circuit build_uccsd(int n_orb, Sector sector, const AnsatzSpec &spec) {
  if (spec.kind != AnsatzKind::UCCSD)
    throw DomainError("build_uccsd: spec is not UCCSD");
  spec.validate();
  if (spec.reference.size() != 2 * n_orb || !(spec.reference.sector() == sector))
    throw DomainError("build_uccsd: reference " + spec.reference.str() + " inconsistent with the active space");
  const auto ex = uccsd_excitations(spec.reference);
  Circuit c(2 * n_orb, static_cast<int>(ex.size()));
  prepare_reference(c, spec.reference);
  std::vector<std::vector<std::pair<PauliWord, double>>> gens;
  gens.reserve(ex.size());
  for (const auto &e : ex)
    gens.push_back(excitation_generator(e));
  const double inv = 1.0 / spec.trotter_steps;
  for (int step = 0; step < spec.trotter_steps; ++step)
    for (std::size_t k = 0; k < ex.size(); ++k)
      for (const auto &[w, coef] : gens[k])
        c.pauli_rotation(w, 0.0, static_cast<int>(k), -2.0 * coef * inv);
  return c;
}

inline Circuit build_uccsd(const AnsatzSpec &spec) {
  return build_uccsd(spec.reference.size() / 2, spec.reference.sector(), spec);
}

/// Reference, then `layers` x [RY on all qubits; CZ chain], then a final RY layer.
inline Circuit build_hea(int n_qubits, const AnsatzSpec &spec) {
  if (spec.kind != AnsatzKind::HEA)
    throw DomainError("build_hea: spec is not HEA");
  spec.validate();
  if (spec.reference.size() != n_qubits)
    throw DomainError("build_hea: reference length differs from qubit count");
  Circuit c(n_qubits, n_qubits * (spec.layers + 1));
  prepare_reference(c, spec.reference);
  int p = 0;
  for (int l = 0; l <= spec.layers; ++l) {
    for (int q = 0; q < n_qubits; ++q)
      c.rotation(GateKind::RY, q, 0.0, p++);
    if (l < spec.layers)
      for (int q = 0; q + 1 < n_qubits; ++q)
        c.cz(q, q + 1);
  }
  return c;
}

inline Circuit build_ansatz(const AnsatzSpec &spec) {
  return spec.kind == AnsatzKind::UCCSD ? build_uccsd(spec) : build_hea(spec.n_qubits(), spec);
}

/// The circuits here carry their own reference preparation, so every run
/// starts from the vacuum.
inline Statevector prepare_state(const Circuit &c, std::span<const double> params) {
  Statevector s(c.n_qubits());
  s[0] = 1.0;
  return apply(std::move(s), c, params);
}

inline double circuit_energy(const Circuit &c, const CompiledHamiltonian &h, std::span<const double> params) {
  return expectation(prepare_state(c, params), h);
}

namespace detail {

inline void require_rotations(const Circuit &c) {
  for (const auto &g : c.gates())
    if (g.param_index && !is_rotation(g.kind))
      throw DomainError("unsupported gate: parameter bound to a non-rotation gate");
}

} // namespace detail

/// Exact gradient by shifting each parameterized occurrence by +-pi/2.
inline std::vector<double> parameter_shift_gradient(const Circuit &circuit, const CompiledHamiltonian &h,
                                                    std::span<const double> params) {
  detail::require_rotations(circuit);
  if (static_cast<int>(params.size()) != circuit.n_params())
    throw DomainError("parameter_shift_gradient: parameter count mismatch");
  std::vector<std::size_t> occ;
  for (std::size_t i = 0; i < circuit.gates().size(); ++i)
    if (circuit.gates()[i].param_index)
      occ.push_back(i);
  std::vector<double> contrib(occ.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(occ.size()); ++k) {
    Circuit shifted = circuit;
    auto &g = shifted.gates()[occ[static_cast<std::size_t>(k)]];
    const double base = g.angle;
    g.angle = base + std::numbers::pi / 2;
    const double ep = circuit_energy(shifted, h, params);
    g.angle = base - std::numbers::pi / 2;
    const double em = circuit_energy(shifted, h, params);
    contrib[static_cast<std::size_t>(k)] = g.multiplier * 0.5 * (ep - em);
  }
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t k = 0; k < occ.size(); ++k)
    grad[static_cast<std::size_t>(*circuit.gates()[occ[k]].param_index)] += contrib[k];
  return grad;
}

inline std::vector<double> parameter_shift_gradient(const Circuit &circuit, const QubitHamiltonian &h,
                                                    std::span<const double> params) {
  return parameter_shift_gradient(circuit, CompiledHamiltonian(h), params);
}

/// Same gradient by one reverse sweep (adjoint method); O(gates) state passes.
inline std::vector<double> adjoint_gradient(const Circuit &circuit, const CompiledHamiltonian &h,
                                            std::span<const double> params) {
  detail::require_rotations(circuit);
  auto psi = prepare_state(circuit, params);
  Statevector lam(psi.n_qubits(), h.apply(psi.amps()));
  std::vector<double> grad(params.size(), 0.0);
  const auto &gates = circuit.gates();
  for (std::size_t k = gates.size(); k-- > 0;) {
    const auto &g = gates[k];
    if (g.param_index) {
      // dE/dphi = Im <lam| P |psi_k>
      PauliWord w = g.axis;
      if (g.kind != GateKind::PauliRotation) {
        const auto bit = std::uint64_t{1} << g.targets[0];
        w = g.kind == GateKind::RX ? PauliWord{bit, 0} : g.kind == GateKind::RY ? PauliWord{bit, bit} : PauliWord{0, bit};
      }
      cplx acc = 0.0;
      const auto a = psi.amps();
      const auto l = lam.amps();
      for (std::size_t b = 0; b < a.size(); ++b)
        acc += std::conj(l[b ^ w.x]) * w.apply_phase(b) * a[b];
      grad[static_cast<std::size_t>(*g.param_index)] += g.multiplier * acc.imag();
    }
    const Gate inv = is_rotation(g.kind) ? Gate::make(g.kind, g.targets, -g.bound_angle(params), {}, 1.0, g.axis) : g;
    apply_gate(psi, inv, params);
    apply_gate(lam, inv, params);
  }
  return grad;
}

enum class GradientMethod { ParameterShift, Adjoint };

struct VqeOptions {
  int max_iters = 2000;
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double tol = 1e-8;
  int patience = 10;  // consecutive small changes before stopping
  int group_size = 0; // 0: all parameters in one group
  GradientMethod gradient = GradientMethod::ParameterShift;
};

struct VqeTracePoint {
  int iteration = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
};

struct VqeResult {
  AnsatzSpec spec;
  std::uint64_t seed = 0;
  std::vector<double> params;
  double energy = 0.0;
  std::vector<VqeTracePoint> trace;
  Circuit circuit;
};

class OptimizerDiverged : public NumericalError {
public:
  OptimizerDiverged(const std::string &what, std::vector<VqeTracePoint> trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const std::vector<VqeTracePoint> &trace() const { return trace_; }

private:
  std::vector<VqeTracePoint> trace_;
};

inline std::vector<double> initial_parameters(const AnsatzSpec &spec, int n_params, std::uint64_t seed) {
  std::vector<double> p(static_cast<std::size_t>(n_params), 0.0);
  if (spec.kind == AnsatzKind::HEA) {
    std::mt19937_64 rng(mix_seed(seed, 0x484541ull));
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (auto &x : p)
      x = u(rng);
  }
  return p;
}

/// Grouped Adam. Each outer iteration records the energy and gradient norm
/// at its starting point; the best energy seen is returned.
inline VqeResult run_vqe(const QubitHamiltonian &H, const AnsatzSpec &spec, const VqeOptions &opt, std::uint64_t seed) {
  spec.validate();
  if (H.n_qubits() != spec.n_qubits())
    throw DomainError("run_vqe: Hamiltonian has " + std::to_string(H.n_qubits()) + " qubits, ansatz " +
                      std::to_string(spec.n_qubits()));
  if (opt.max_iters < 0 || opt.group_size < 0 || opt.lr <= 0.0)
    throw DomainError("run_vqe: invalid optimizer settings");
  VqeResult res;
  res.spec = spec;
  res.seed = seed;
  res.circuit = build_ansatz(spec);
  const CompiledHamiltonian h(H);
  const auto &circ = res.circuit;
  const auto n = static_cast<std::size_t>(circ.n_params());
  std::vector<double> theta = initial_parameters(spec, circ.n_params(), seed);
  std::vector<double> m(n, 0.0), v(n, 0.0);
  std::vector<int> t(n, 0);
  std::vector<std::size_t> order(n);
  std::mt19937_64 rng(mix_seed(seed, 0x475250ull));

  auto gradient_at = [&](const std::vector<double> &x) {
    return opt.gradient == GradientMethod::Adjoint ? adjoint_gradient(circ, h, x) : parameter_shift_gradient(circ, h, x);
  };
  auto check = [&](double e) {
    if (!std::isfinite(e))
      throw OptimizerDiverged("run_vqe: non-finite energy", res.trace);
  };

  double e = circuit_energy(circ, h, theta);
  check(e);
  res.energy = e;
  res.params = theta;
  int calm = 0;
  for (int it = 0; it < opt.max_iters; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t gs = opt.group_size == 0 ? std::max<std::size_t>(n, 1) : static_cast<std::size_t>(opt.group_size);
    double gn2 = 0.0;
    for (std::size_t start = 0; start < n; start += gs) {
      const auto grad = gradient_at(theta);
      for (std::size_t k = start; k < std::min(n, start + gs); ++k) {
        const std::size_t j = order[k];
        const double g = grad[j];
        gn2 += g * g;
        ++t[j];
        m[j] = opt.beta1 * m[j] + (1 - opt.beta1) * g;
        v[j] = opt.beta2 * v[j] + (1 - opt.beta2) * g * g;
        const double mh = m[j] / (1 - std::pow(opt.beta1, t[j]));
        const double vh = v[j] / (1 - std::pow(opt.beta2, t[j]));
        theta[j] -= opt.lr * mh / (std::sqrt(vh) + opt.eps);
      }
    }
    res.trace.push_back({it, e, std::sqrt(gn2)});
    const double e_new = circuit_energy(circ, h, theta);
    check(e_new);
    if (e_new < res.energy) {
      res.energy = e_new;
      res.params = theta;
    }
    calm = std::abs(e_new - e) < opt.tol ? calm + 1 : 0;
    e = e_new;
    if (calm >= opt.patience)
      break;
  }
  return res;
}

inline nlohmann::json to_json(const AnsatzSpec &s) {
  return {{"kind", to_string(s.kind)}, {"layers", s.layers}, {"reference", s.reference.str()},
          {"trotter_steps", s.trotter_steps}};
}

inline AnsatzSpec ansatz_spec_from_json(const nlohmann::json &j) {
  AnsatzSpec s;
  s.kind = parse_ansatz_kind(j.at("kind").get<std::string>());
  s.layers = j.value("layers", 1);
  s.reference = Configuration::parse(j.at("reference").get<std::string>());
  s.trotter_steps = j.value("trotter_steps", 1);
  s.validate();
  return s;
}

inline nlohmann::json to_json(const VqeResult &r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto &p : r.trace)
    trace.push_back({{"iteration", p.iteration}, {"energy", p.energy}, {"grad_norm", p.grad_norm}});
  return {{"spec", to_json(r.spec)}, {"seed", r.seed}, {"params", r.params}, {"energy", r.energy}, {"trace", trace}};
}

/// Rebuilds the circuit from the stored spec.
inline VqeResult vqe_result_from_json(const nlohmann::json &j) {
  try {
    VqeResult r;
    r.spec = ansatz_spec_from_json(j.at("spec"));
    r.seed = j.at("seed").get<std::uint64_t>();
    r.params = j.at("params").get<std::vector<double>>();
    r.energy = j.at("energy").get<double>();
    for (const auto &p : j.at("trace"))
      r.trace.push_back({p.at("iteration").get<int>(), p.at("energy").get<double>(), p.at("grad_norm").get<double>()});
    r.circuit = build_ansatz(r.spec);
    if (static_cast<int>(r.params.size()) != r.circuit.n_params())
      throw ParseError("VqeResult: parameter count does not match the ansatz");
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("VqeResult JSON: ") + e.what());
  }
}

} // namespace nqsvqe
