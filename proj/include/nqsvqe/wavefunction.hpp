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
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "nqsvqe/common.hpp"

namespace nqsvqe {

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n)
    return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i)
    r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

inline std::uint64_t sector_dimension(int n_orb, Sector s) {
  return binomial(n_orb, s.n_alpha) * binomial(n_orb, s.n_beta);
}

/// All k-subsets of n bits as masks, ascending.
inline std::vector<std::uint64_t> combinations(int n, int k) {
  std::vector<std::uint64_t> out;
  if (k < 0 || k > n)
    return out;
  if (k == 0)
    return {0};
  std::uint64_t v = (std::uint64_t{1} << k) - 1;
  const std::uint64_t limit = std::uint64_t{1} << n;
  while (v < limit) {
    out.push_back(v);
    const std::uint64_t t = v | (v - 1);
    v = (t + 1) | (((~t & -~t) - 1) >> (std::countr_zero(v) + 1));
  }
  return out;
}

/// Interleaves per-spin orbital masks into a qubit bitstring.
inline std::uint64_t interleave(std::uint64_t alpha, std::uint64_t beta, int n_orb) {
  std::uint64_t bits = 0;
  for (int p = 0; p < n_orb; ++p) {
    if ((alpha >> p) & 1u)
      bits |= std::uint64_t{1} << (2 * p);
    if ((beta >> p) & 1u)
      bits |= std::uint64_t{1} << (2 * p + 1);
  }
  return bits;
}

inline std::uint64_t spin_part(std::uint64_t bits, int n_orb, int sigma) {
  std::uint64_t m = 0;
  for (int p = 0; p < n_orb; ++p)
    if ((bits >> (2 * p + sigma)) & 1u)
      m |= std::uint64_t{1} << p;
  return m;
}

/// Key whose integer order equals the lexicographic order of str().
inline std::uint64_t lex_key(const Configuration &c) {
  std::uint64_t r = 0;
  for (int k = 0; k < c.size(); ++k)
    r = (r << 1) | (c.occupied(k) ? 1u : 0u);
  return r;
}

/// Every configuration with the given electron counts, ordered
/// lexicographically by bitstring.
inline std::vector<Configuration> enumerate_sector(int n_orb, int n_alpha, int n_beta) {
  if (n_orb < 0 || 2 * n_orb > Configuration::kMaxQubits)
    throw DomainError("enumerate_sector: orbital count out of range");
  if (n_alpha < 0 || n_beta < 0 || n_alpha > n_orb || n_beta > n_orb)
    throw DomainError("enumerate_sector: electron counts exceed orbital count");
  const auto as = combinations(n_orb, n_alpha);
  const auto bs = combinations(n_orb, n_beta);
  std::vector<Configuration> out;
  out.reserve(as.size() * bs.size());
  for (auto a : as)
    for (auto b : bs)
      out.emplace_back(interleave(a, b, n_orb), 2 * n_orb);
  std::sort(out.begin(), out.end(), [](const auto &x, const auto &y) { return lex_key(x) < lex_key(y); });
  return out;
}

inline std::vector<Configuration> enumerate_sector(int n_orb, Sector s) {
  return enumerate_sector(n_orb, s.n_alpha, s.n_beta);
}

/// Sparse wavefunction over configurations; the interchange format between
/// extraction, the CI solvers and pretraining.
struct WavefunctionTable {
  struct Entry {
    Configuration config;
    cplx coeff;
  };

  std::vector<Entry> entries;
  std::string source; // vqe-extract-full, vqe-extract-mc, fci, cisd, model-dump
  int n_qubits = 0;
  Sector sector;

  double norm_squared() const {
    double s = 0.0;
    for (const auto &e : entries)
      s += std::norm(e.coeff);
    return s;
  }

  /// Rotates the global phase so the largest-magnitude entry is real positive.
  void fix_gauge() {
    if (entries.empty())
      return;
    auto it = std::max_element(entries.begin(), entries.end(),
                               [](const Entry &a, const Entry &b) { return std::abs(a.coeff) < std::abs(b.coeff); });
    const double m = std::abs(it->coeff);
    if (m == 0.0)
      return;
    const cplx rot = std::conj(it->coeff) / m;
    for (auto &e : entries)
      e.coeff *= rot;
  }

  void sort_by_magnitude() {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry &a, const Entry &b) { return std::abs(a.coeff) > std::abs(b.coeff); });
  }

  void normalize() {
    const double n = std::sqrt(norm_squared());
    if (n == 0.0)
      throw DomainError("WavefunctionTable: cannot normalize a zero table");
    for (auto &e : entries)
      e.coeff /= n;
  }

  void validate() const {
    std::unordered_set<Configuration> seen;
    for (const auto &e : entries) {
      if (e.config.size() != n_qubits)
        throw DomainError("WavefunctionTable: configuration length differs from n_qubits");
      if (!(e.config.sector() == sector))
        throw DomainError("WavefunctionTable: configuration " + e.config.str() + " outside declared sector");
      if (!seen.insert(e.config).second)
        throw DomainError("WavefunctionTable: duplicate configuration " + e.config.str());
    }
    if (norm_squared() > 1.0 + 1e-10)
      throw DomainError("WavefunctionTable: squared norm exceeds 1");
  }

  std::unordered_map<Configuration, cplx> as_map() const {
    std::unordered_map<Configuration, cplx> m;
    m.reserve(entries.size());
    for (const auto &e : entries)
      m.emplace(e.config, e.coeff);
    return m;
  }
};

inline void write_table_jsonl(const WavefunctionTable &t, std::ostream &out) {
  nlohmann::json meta = {{"meta",
                          {{"source", t.source},
                           {"n_qubits", t.n_qubits},
                           {"n_alpha", t.sector.n_alpha},
                           {"n_beta", t.sector.n_beta},
                           {"count", t.entries.size()}}}};
  out << meta.dump() << '\n';
  for (const auto &e : t.entries) {
    nlohmann::json j = {{"config", e.config.str()}, {"re", e.coeff.real()}, {"im", e.coeff.imag()}};
    out << j.dump() << '\n';
  }
}

inline WavefunctionTable read_table_jsonl(std::istream &in) {
  WavefunctionTable t;
  std::string line;
  bool have_meta = false;
  int line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos)
        continue;
      const auto j = nlohmann::json::parse(line);
      if (!have_meta) {
        const auto &m = j.at("meta");
        t.source = m.at("source").get<std::string>();
        t.n_qubits = m.at("n_qubits").get<int>();
        t.sector = {m.at("n_alpha").get<int>(), m.at("n_beta").get<int>()};
        have_meta = true;
        continue;
      }
      t.entries.push_back({Configuration::parse(j.at("config").get<std::string>()),
                           cplx(j.at("re").get<double>(), j.at("im").get<double>())});
    }
  } catch (const nlohmann::json::exception &e) {
    throw ParseError("wavefunction table line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_meta)
    throw ParseError("wavefunction table: missing meta header");
  t.validate();
  return t;
}

inline void save_table(const WavefunctionTable &t, const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw Error("cannot write table: " + path);
  out.precision(17);
  write_table_jsonl(t, out);
}

inline WavefunctionTable load_table(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open table: " + path);
  return read_table_jsonl(in);
}

} // namespace nqsvqe
