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
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nqsvqe/common.hpp"
#include "nqsvqe/integrals.hpp"

namespace nqsvqe {

/// Pauli word in symplectic form: qubit k carries X if only x bit k is set,
/// Z if only z bit k, Y if both. The operator equals i^{|x&z|} X^x Z^z.
struct PauliWord {
  std::uint64_t x = 0;
  std::uint64_t z = 0;

  bool is_identity() const { return x == 0 && z == 0; }
  int y_count() const { return std::popcount(x & z); }

  static PauliWord parse(const std::string &letters) {
    PauliWord w;
    for (std::size_t k = 0; k < letters.size(); ++k) {
      const auto bit = std::uint64_t{1} << k;
      switch (letters[k]) {
      case 'I': break;
      case 'X': w.x |= bit; break;
      case 'Y': w.x |= bit; w.z |= bit; break;
      case 'Z': w.z |= bit; break;
      default: throw ParseError("PauliWord: invalid letter '" + std::string(1, letters[k]) + "'");
      }
    }
    return w;
  }

  std::string str(int n_qubits) const {
    std::string s(static_cast<std::size_t>(n_qubits), 'I');
    for (int k = 0; k < n_qubits; ++k) {
      const bool xb = (x >> k) & 1u, zb = (z >> k) & 1u;
      s[static_cast<std::size_t>(k)] = xb ? (zb ? 'Y' : 'X') : (zb ? 'Z' : 'I');
    }
    return s;
  }

  /// Action on a basis state: P|b> = phase * |b ^ x>.
  cplx apply_phase(std::uint64_t basis) const {
    int e = y_count() + 2 * (std::popcount(z & basis) & 1);
    return i_pow(e);
  }

  static cplx i_pow(int e) {
    switch (((e % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
    }
  }

  friend bool operator==(const PauliWord &, const PauliWord &) = default;
  friend auto operator<=>(const PauliWord &, const PauliWord &) = default;
};

/// Operator product a*b = phase * c.
inline std::pair<cplx, PauliWord> multiply(const PauliWord &a, const PauliWord &b) {
  PauliWord c{a.x ^ b.x, a.z ^ b.z};
  const int e = a.y_count() + b.y_count() + 2 * std::popcount(a.z & b.x) - c.y_count();
  return {PauliWord::i_pow(e), c};
}

struct PauliWordHash {
  std::size_t operator()(const PauliWord &w) const noexcept {
    return static_cast<std::size_t>(mix_seed(w.x, w.z));
  }
};

/// Weighted Pauli string.
struct PauliString {
  PauliWord word;
  double coeff = 0.0;
};

/// Sum of real-weighted Pauli strings with distinct words; the identity term
/// (if any) is stored first.
class QubitHamiltonian {
public:
  QubitHamiltonian() = default;
  explicit QubitHamiltonian(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 0 || n_qubits > Configuration::kMaxQubits)
      throw DomainError("QubitHamiltonian: qubit count out of range");
  }

  /// Merges like terms and drops |c| < drop_tol.
  static QubitHamiltonian from_terms(int n_qubits, const std::vector<PauliString> &terms, double drop_tol = 1e-12) {
    std::map<PauliWord, double> merged;
    for (const auto &t : terms)
      merged[t.word] += t.coeff;
    QubitHamiltonian h(n_qubits);
    for (const auto &[w, c] : merged) {
      if (std::abs(c) < drop_tol)
        continue;
      if (n_qubits < 64 && ((w.x | w.z) >> n_qubits) != 0)
        throw DomainError("QubitHamiltonian: term acts beyond qubit count");
      h.terms_.push_back({w, c});
    }
    return h;
  }

  int n_qubits() const { return n_qubits_; }
  const std::vector<PauliString> &terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  double identity_coeff() const {
    return (!terms_.empty() && terms_.front().word.is_identity()) ? terms_.front().coeff : 0.0;
  }

  double coeff(const PauliWord &w) const {
    for (const auto &t : terms_)
      if (t.word == w)
        return t.coeff;
    return 0.0;
  }

  /// <a|H|b> for basis states a, b.
  cplx matrix_element(std::uint64_t a, std::uint64_t b) const {
    cplx v = 0.0;
    const auto f = a ^ b;
    for (const auto &t : terms_)
      if (t.word.x == f)
        v += t.coeff * t.word.apply_phase(b);
    return v;
  }

private:
  int n_qubits_ = 0;
  std::vector<PauliString> terms_;
};

/// Terms sharing one flip pattern, with the i^{|x&z|} factor folded into the
/// weight: H = sum_g sum_{(z,w) in g} w * X^{flip} Z^{z}.
struct FlipGroup {
  std::uint64_t flip = 0;
  std::vector<std::pair<std::uint64_t, cplx>> diag;

  /// <b ^ flip| (group) |b>.
  cplx phase_sum(std::uint64_t b) const {
    cplx v = 0.0;
    for (const auto &[z, w] : diag)
      v += (std::popcount(z & b) & 1) ? -w : w;
    return v;
  }
};

inline std::vector<FlipGroup> group_by_flip(const QubitHamiltonian &h) {
  std::map<std::uint64_t, FlipGroup> groups;
  for (const auto &t : h.terms()) {
    auto &g = groups[t.word.x];
    g.flip = t.word.x;
    g.diag.emplace_back(t.word.z, t.coeff * PauliWord::i_pow(t.word.y_count()));
  }
  std::vector<FlipGroup> out;
  out.reserve(groups.size());
  for (auto &[f, g] : groups)
    out.push_back(std::move(g));
  return out;
}

/// Pauli-sum with complex weights, used while assembling operators.
class PauliSum {
public:
  PauliSum() = default;
  PauliSum(PauliWord w, cplx c) { terms_[w] = c; }

  void add(const PauliWord &w, cplx c) { terms_[w] += c; }
  void add(const PauliSum &o, cplx scale = 1.0) {
    for (const auto &[w, c] : o.terms_)
      terms_[w] += scale * c;
  }
  const auto &terms() const { return terms_; }

  friend PauliSum operator*(const PauliSum &a, const PauliSum &b) {
    PauliSum r;
    for (const auto &[wa, ca] : a.terms_)
      for (const auto &[wb, cb] : b.terms_) {
        auto [ph, w] = multiply(wa, wb);
        r.terms_[w] += ph * ca * cb;
      }
    return r;
  }

private:
  std::unordered_map<PauliWord, cplx, PauliWordHash> terms_;
};

/// Jordan-Wigner image of a single ladder operator on spin-orbital qubit q.
inline PauliSum jw_ladder(int qubit, bool creation) {
  const std::uint64_t chain = (std::uint64_t{1} << qubit) - 1;
  const std::uint64_t bit = std::uint64_t{1} << qubit;
  PauliSum s;
  s.add(PauliWord{bit, chain}, 0.5);
  s.add(PauliWord{bit, chain | bit}, creation ? cplx(0.0, -0.5) : cplx(0.0, 0.5));
  return s;
}

/// Product of ladder operators, leftmost first: (qubit, is_creation).
inline PauliSum jw_product(const std::vector<std::pair<int, bool>> &ops) {
  PauliSum acc(PauliWord{}, 1.0);
  for (const auto &[q, dag] : ops)
    acc = acc * jw_ladder(q, dag);
  return acc;
}

/// Converts a complex Pauli sum that should be Hermitian into a Hamiltonian.
inline QubitHamiltonian to_hamiltonian(int n_qubits, const PauliSum &sum, double drop_tol = 1e-12) {
  std::vector<PauliString> terms;
  terms.reserve(sum.terms().size());
  for (const auto &[w, c] : sum.terms()) {
    if (std::abs(c.imag()) > 1e-10)
      throw NumericalError("to_hamiltonian: non-Hermitian term " + w.str(n_qubits));
    terms.push_back({w, c.real()});
  }
  return QubitHamiltonian::from_terms(n_qubits, terms, drop_tol);
}

/// Jordan-Wigner qubit Hamiltonian with interleaved spin orbitals
/// (qubit 2p + sigma).
inline QubitHamiltonian jordan_wigner(const IntegralSet &ints) {
  const int n = ints.n_orb();
  const int nq = 2 * n;
  PauliSum total(PauliWord{}, ints.e_core());
  auto qubit = [](int p, int s) { return 2 * p + s; };

  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      const double h = ints.h1(p, q);
      if (h == 0.0)
        continue;
      for (int s = 0; s < 2; ++s)
        total.add(jw_product({{qubit(p, s), true}, {qubit(q, s), false}}), h);
    }

  // 1/2 sum (pq|rs) a+_{p s} a+_{r t} a_{s' t} a_{q s}
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
          const double v = ints.h2(p, q, r, s);
          if (v == 0.0)
            continue;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
              const int P = qubit(p, a), Q = qubit(q, a), R = qubit(r, b), S = qubit(s, b);
              if (P == R || Q == S)
                continue;
              total.add(jw_product({{P, true}, {R, true}, {S, false}, {Q, false}}), 0.5 * v);
            }
        }
  return to_hamiltonian(nq, total);
}

struct TailorResult {
  QubitHamiltonian hamiltonian;
  double dropped_weight = 0.0;
  std::size_t dropped_terms = 0;
};

/// Removes non-identity terms with |c| < threshold.
inline TailorResult tailor(const QubitHamiltonian &h, double threshold) {
  if (!(threshold >= 0.0))
    throw DomainError("tailor: threshold must be non-negative");
  std::vector<PauliString> kept;
  TailorResult r;
  for (const auto &t : h.terms()) {
    if (!t.word.is_identity() && std::abs(t.coeff) < threshold) {
      r.dropped_weight += std::abs(t.coeff);
      ++r.dropped_terms;
    } else {
      kept.push_back(t);
    }
  }
  r.hamiltonian = QubitHamiltonian::from_terms(h.n_qubits(), kept, 0.0);
  return r;
}

inline nlohmann::json to_json(const QubitHamiltonian &h) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto &t : h.terms())
    terms.push_back({{"paulis", t.word.str(h.n_qubits())}, {"coeff", t.coeff}});
  return {{"n_qubits", h.n_qubits()}, {"terms", terms}};
}

inline QubitHamiltonian hamiltonian_from_json(const nlohmann::json &j) {
  try {
    const int n = j.at("n_qubits").get<int>();
    std::vector<PauliString> terms;
    for (const auto &t : j.at("terms")) {
      const auto letters = t.at("paulis").get<std::string>();
      if (static_cast<int>(letters.size()) != n)
        throw ParseError("hamiltonian JSON: Pauli word length differs from n_qubits");
      terms.push_back({PauliWord::parse(letters), t.at("coeff").get<double>()});
    }
    return QubitHamiltonian::from_terms(n, terms, 0.0);
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("hamiltonian JSON: ") + e.what());
  }
}

} // namespace nqsvqe
