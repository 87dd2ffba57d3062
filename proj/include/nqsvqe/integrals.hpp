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
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nqsvqe/common.hpp"

namespace nqsvqe {

/// Spatial-orbital integrals of a molecular Hamiltonian plus the scalar core
/// energy. h2 is stored densely in chemists' notation (pq|rs).
class IntegralSet {
public:
  IntegralSet() = default;
  IntegralSet(int n_orb, int n_elec, int ms2, double e_core = 0.0)
      : n_orb_(n_orb), n_elec_(n_elec), ms2_(ms2), e_core_(e_core) {
    if (n_orb < 0 || n_orb > 32)
      throw DomainError("IntegralSet: orbital count out of range");
    if (n_elec < 0 || n_elec > 2 * n_orb)
      throw DomainError("IntegralSet: electron count must lie in [0, 2*n_orb]");
    if ((n_elec - ms2) % 2 != 0 || std::abs(ms2) > n_elec)
      throw DomainError("IntegralSet: MS2 inconsistent with electron count");
    const auto n = static_cast<std::size_t>(n_orb);
    h1_.assign(n * n, 0.0);
    h2_.assign(n * n * n * n, 0.0);
  }

  int n_orb() const { return n_orb_; }
  int n_elec() const { return n_elec_; }
  int ms2() const { return ms2_; }
  double e_core() const { return e_core_; }
  void set_e_core(double e) { e_core_ = e; }

  Sector sector() const { return {(n_elec_ + ms2_) / 2, (n_elec_ - ms2_) / 2}; }

  double h1(int p, int q) const { return h1_[idx2(p, q)]; }
  double h2(int p, int q, int r, int s) const { return h2_[idx4(p, q, r, s)]; }

  /// Sets h1[p][q] and its transpose.
  void set_h1(int p, int q, double v) {
    h1_[idx2(p, q)] = v;
    h1_[idx2(q, p)] = v;
  }

  /// Sets (pq|rs) and all eight permutation images.
  void set_h2(int p, int q, int r, int s, double v) {
    for (const auto &[a, b, c, d] : images(p, q, r, s))
      h2_[idx4(a, b, c, d)] = v;
  }

  static std::array<std::array<int, 4>, 8> images(int p, int q, int r, int s) {
    return {{{p, q, r, s}, {q, p, r, s}, {p, q, s, r}, {q, p, s, r},
             {r, s, p, q}, {s, r, p, q}, {r, s, q, p}, {s, r, q, p}}};
  }

  friend bool operator==(const IntegralSet &, const IntegralSet &) = default;

private:
  std::size_t idx2(int p, int q) const {
    return static_cast<std::size_t>(p) * static_cast<std::size_t>(n_orb_) + static_cast<std::size_t>(q);
  }
  std::size_t idx4(int p, int q, int r, int s) const {
    const auto n = static_cast<std::size_t>(n_orb_);
    return ((static_cast<std::size_t>(p) * n + static_cast<std::size_t>(q)) * n + static_cast<std::size_t>(r)) * n +
           static_cast<std::size_t>(s);
  }

  int n_orb_ = 0;
  int n_elec_ = 0;
  int ms2_ = 0;
  double e_core_ = 0.0;
  std::vector<double> h1_;
  std::vector<double> h2_;
};

namespace detail {

inline std::string upper(std::string s) {
  for (auto &c : s)
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

} // namespace detail

/// Parses Molpro-style FCIDUMP text. Indices are 1-based; (0 0 0 0) is the
/// core energy and (i j 0 0) a one-electron integral.
inline IntegralSet parse_fcidump(std::istream &in) {
  std::string line;
  std::string header;
  int line_no = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    header += line;
    header += ' ';
    const auto u = detail::upper(line);
    if (u.find("&END") != std::string::npos || u.find('/') != std::string::npos) {
      header_done = true;
      break;
    }
  }
  if (!header_done)
    throw ParseError("FCIDUMP line " + std::to_string(line_no) + ": namelist header not terminated by &END");

  // Pull KEY=value pairs out of the namelist; only the integer keys matter.
  auto read_key = [&](const std::string &key) -> int {
    const auto u = detail::upper(header);
    std::size_t pos = 0;
    while ((pos = u.find(key, pos)) != std::string::npos) {
      const bool boundary = pos == 0 || !std::isalnum(static_cast<unsigned char>(u[pos - 1]));
      std::size_t eq = pos + key.size();
      while (eq < u.size() && u[eq] == ' ')
        ++eq;
      if (boundary && eq < u.size() && u[eq] == '=') {
        std::size_t v = eq + 1;
        while (v < u.size() && u[v] == ' ')
          ++v;
        int value = 0;
        const auto *first = u.data() + v;
        const auto [ptr, ec] = std::from_chars(first, u.data() + u.size(), value);
        if (ec != std::errc{} || ptr == first)
          throw ParseError("FCIDUMP header: malformed value for " + key);
        return value;
      }
      pos += key.size();
    }
    throw ParseError("FCIDUMP header (lines 1-" + std::to_string(line_no) + "): missing " + key);
  };
  const int norb = read_key("NORB");
  const int nelec = read_key("NELEC");
  int ms2 = 0;
  try {
    ms2 = read_key("MS2");
  } catch (const ParseError &) {
    ms2 = nelec % 2;
  }

  IntegralSet ints(norb, nelec, ms2);
  std::map<std::array<int, 4>, double> seen;
  bool core_seen = false;

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    double value = 0.0;
    std::array<int, 4> ix{};
    if (!(ls >> value)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos)
        continue;
      throw ParseError("FCIDUMP line " + std::to_string(line_no) + ": expected a numeric value");
    }
    for (auto &v : ix)
      if (!(ls >> v))
        throw ParseError("FCIDUMP line " + std::to_string(line_no) + ": expected four indices");
    for (int v : ix)
      if (v < 0 || v > norb)
        throw ParseError("FCIDUMP line " + std::to_string(line_no) + ": index " + std::to_string(v) +
                         " outside [0, " + std::to_string(norb) + "]");
    const auto [i, j, k, l] = ix;
    auto check_dup = [&](std::array<int, 4> key) {
      auto [it, inserted] = seen.emplace(key, value);
      if (!inserted && std::abs(it->second - value) > 1e-12)
        throw ParseError("FCIDUMP line " + std::to_string(line_no) + ": inconsistent duplicate entry");
    };
    if (i == 0 && j == 0 && k == 0 && l == 0) {
      if (core_seen && std::abs(ints.e_core() - value) > 1e-12)
        throw ParseError("FCIDUMP line " + std::to_string(line_no) + ": inconsistent duplicate core energy");
      core_seen = true;
      ints.set_e_core(value);
    } else if (k == 0 && l == 0) {
      if (i == 0 || j == 0)
        throw ParseError("FCIDUMP line " + std::to_string(line_no) + ": malformed one-electron indices");
      check_dup({std::min(i, j), std::max(i, j), 0, 0});
      ints.set_h1(i - 1, j - 1, value);
    } else {
      if (i == 0 || j == 0 || k == 0 || l == 0)
        throw ParseError("FCIDUMP line " + std::to_string(line_no) + ": malformed two-electron indices");
      auto imgs = IntegralSet::images(i, j, k, l);
      check_dup(*std::min_element(imgs.begin(), imgs.end()));
      ints.set_h2(i - 1, j - 1, k - 1, l - 1, value);
    }
  }
  return ints;
}

inline IntegralSet parse_fcidump(const std::string &text) {
  std::istringstream in(text);
  return parse_fcidump(in);
}

inline IntegralSet load_fcidump(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open FCIDUMP file: " + path);
  return parse_fcidump(in);
}

/// Serializes with 17 significant digits, one entry per symmetry class.
inline std::string write_fcidump(const IntegralSet &ints) {
  std::ostringstream out;
  const int n = ints.n_orb();
  out << " &FCI NORB=" << n << ",NELEC=" << ints.n_elec() << ",MS2=" << ints.ms2() << ",\n  ORBSYM=";
  for (int p = 0; p < n; ++p)
    out << "1,";
  out << "\n  ISYM=1,\n &END\n";
  char buf[64];
  auto emit = [&](double v, int i, int j, int k, int l) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ' ' << buf << ' ' << i << ' ' << j << ' ' << k << ' ' << l << '\n';
  };
  for (int p = 0; p < n; ++p)
    for (int q = 0; q <= p; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s <= r; ++s) {
          if (p * (p + 1) / 2 + q < r * (r + 1) / 2 + s)
            continue;
          const double v = ints.h2(p, q, r, s);
          if (v != 0.0)
            emit(v, p + 1, q + 1, r + 1, s + 1);
        }
  for (int p = 0; p < n; ++p)
    for (int q = 0; q <= p; ++q)
      if (ints.h1(p, q) != 0.0)
        emit(ints.h1(p, q), p + 1, q + 1, 0, 0);
  emit(ints.e_core(), 0, 0, 0, 0);
  return out.str();
}

/// Orbital partition: frozen orbitals stay doubly occupied, active ones are
/// correlated, and `removed` virtuals are dropped (always empty).
struct ActiveSpace {
  std::vector<int> frozen;
  std::vector<int> active;
  std::vector<int> removed;
  int n_active_elec = 0;

  /// Freeze the k lowest orbitals; keep `n_active` after them (all if < 0).
  static ActiveSpace freeze_lowest(const IntegralSet &ints, int k, int n_active = -1) {
    if (k < 0 || k > ints.n_orb())
      throw DomainError("freeze_lowest: frozen count out of range");
    const int rest = ints.n_orb() - k;
    if (n_active < 0)
      n_active = rest;
    if (n_active > rest)
      throw DomainError("freeze_lowest: active count exceeds remaining orbitals");
    ActiveSpace s;
    for (int p = 0; p < ints.n_orb(); ++p) {
      if (p < k)
        s.frozen.push_back(p);
      else if (p < k + n_active)
        s.active.push_back(p);
      else
        s.removed.push_back(p);
    }
    s.n_active_elec = ints.n_elec() - 2 * k;
    s.validate(ints);
    return s;
  }

  /// Freeze the orbitals below the first listed active orbital, drop the
  /// unlisted rest.
  static ActiveSpace from_active(const IntegralSet &ints, std::vector<int> active) {
    if (active.empty())
      throw DomainError("from_active: empty active list");
    ActiveSpace s;
    s.active = active;
    const int lowest = *std::min_element(active.begin(), active.end());
    for (int p = 0; p < ints.n_orb(); ++p) {
      if (std::find(active.begin(), active.end(), p) != active.end())
        continue;
      (p < lowest ? s.frozen : s.removed).push_back(p);
    }
    s.n_active_elec = ints.n_elec() - 2 * static_cast<int>(s.frozen.size());
    s.validate(ints);
    return s;
  }

  void validate(const IntegralSet &ints) const {
    std::vector<int> seen(static_cast<std::size_t>(ints.n_orb()), 0);
    for (const auto *list : {&frozen, &active, &removed})
      for (int p : *list) {
        if (p < 0 || p >= ints.n_orb())
          throw DomainError("ActiveSpace: orbital index " + std::to_string(p) + " out of range");
        if (seen[static_cast<std::size_t>(p)]++)
          throw DomainError("ActiveSpace: orbital " + std::to_string(p) + " listed twice");
      }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
      throw DomainError("ActiveSpace: partition does not cover every orbital");
    if (n_active_elec != ints.n_elec() - 2 * static_cast<int>(frozen.size()) || n_active_elec < 0)
      throw DomainError("ActiveSpace: active electron count inconsistent with frozen orbitals");
    if (n_active_elec > 2 * static_cast<int>(active.size()))
      throw DomainError("ActiveSpace: too many electrons for active orbitals");
  }
};

/// Folds frozen orbitals into the core energy and one-electron integrals and
/// restricts everything to the active orbitals (relabeled 0..|active|-1).
inline IntegralSet apply_active_space(const IntegralSet &ints, const ActiveSpace &space) {
  space.validate(ints);
  const auto &F = space.frozen;
  const auto &A = space.active;
  const int na = static_cast<int>(A.size());

  double e_frozen = 0.0;
  for (int i : F) {
    e_frozen += 2.0 * ints.h1(i, i);
    for (int j : F)
      e_frozen += 2.0 * ints.h2(i, i, j, j) - ints.h2(i, j, j, i);
  }

  IntegralSet out(na, space.n_active_elec, ints.ms2(), ints.e_core() + e_frozen);
  for (int p = 0; p < na; ++p)
    for (int q = 0; q <= p; ++q) {
      const int P = A[static_cast<std::size_t>(p)];
      const int Q = A[static_cast<std::size_t>(q)];
      double v = ints.h1(P, Q);
      for (int i : F)
        v += 2.0 * ints.h2(P, Q, i, i) - ints.h2(P, i, i, Q);
      out.set_h1(p, q, v);
    }
  for (int p = 0; p < na; ++p)
    for (int q = 0; q < na; ++q)
      for (int r = 0; r < na; ++r)
        for (int s = 0; s < na; ++s)
          out.set_h2(p, q, r, s,
                     ints.h2(A[static_cast<std::size_t>(p)], A[static_cast<std::size_t>(q)],
                             A[static_cast<std::size_t>(r)], A[static_cast<std::size_t>(s)]));
  return out;
}

} // namespace nqsvqe
