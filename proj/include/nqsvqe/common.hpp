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
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace nqsvqe {

using cplx = std::complex<double>;

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Precondition or argument-range violation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Malformed input text (FCIDUMP, JSON, binary dumps).
class ParseError : public Error {
public:
  using Error::Error;
};

/// Problem exceeds a configured size limit.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Iterative method diverged or failed to converge.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Electron counts per spin channel.
struct Sector {
  int n_alpha = 0;
  int n_beta = 0;
  friend bool operator==(const Sector &, const Sector &) = default;
};

/// Occupation bitstring over spin orbitals. Bit k is the occupancy of
/// qubit k; spin orbital (p, sigma) sits on qubit 2p + sigma.
class Configuration {
public:
  static constexpr int kMaxQubits = 64;

  Configuration() = default;
  Configuration(std::uint64_t bits, int n_qubits) : bits_(bits), n_(n_qubits) {
    if (n_qubits < 0 || n_qubits > kMaxQubits)
      throw DomainError("Configuration: qubit count out of range");
    if (n_qubits < 64 && (bits >> n_qubits) != 0)
      throw DomainError("Configuration: bits set beyond qubit count");
  }

  /// Parses "1100..." (character k = qubit k). Spaces are ignored so the
  /// tabulated "1 1 0 0" form is accepted too.
  static Configuration parse(std::string_view text) {
    std::uint64_t bits = 0;
    int n = 0;
    for (char c : text) {
      if (c == ' ' || c == '\t')
        continue;
      if (c != '0' && c != '1')
        throw ParseError("Configuration: invalid character '" + std::string(1, c) + "'");
      if (n >= kMaxQubits)
        throw ParseError("Configuration: too many qubits");
      if (c == '1')
        bits |= std::uint64_t{1} << n;
      ++n;
    }
    return Configuration(bits, n);
  }

  std::uint64_t bits() const { return bits_; }
  int size() const { return n_; }
  bool occupied(int qubit) const { return (bits_ >> qubit) & 1u; }
  int count() const { return std::popcount(bits_); }

  /// Electrons on even (alpha) and odd (beta) qubits.
  Sector sector() const {
    return {std::popcount(bits_ & kEvenMask), std::popcount(bits_ & kOddMask)};
  }

  std::string str() const {
    std::string s(static_cast<std::size_t>(n_), '0');
    for (int k = 0; k < n_; ++k)
      if (occupied(k))
        s[static_cast<std::size_t>(k)] = '1';
    return s;
  }

  friend bool operator==(const Configuration &, const Configuration &) = default;
  friend auto operator<=>(const Configuration &a, const Configuration &b) {
    return a.str() <=> b.str();
  }

  static constexpr std::uint64_t kEvenMask = 0x5555555555555555ull;
  static constexpr std::uint64_t kOddMask = 0xAAAAAAAAAAAAAAAAull;

private:
  std::uint64_t bits_ = 0;
  int n_ = 0;
};

/// Hartree-Fock occupation: the lowest n_alpha / n_beta spatial orbitals.
inline Configuration hartree_fock_configuration(int n_orb, Sector s) {
  if (s.n_alpha < 0 || s.n_beta < 0 || s.n_alpha > n_orb || s.n_beta > n_orb)
    throw DomainError("hartree_fock_configuration: electron count exceeds orbitals");
  std::uint64_t bits = 0;
  for (int p = 0; p < s.n_alpha; ++p)
    bits |= std::uint64_t{1} << (2 * p);
  for (int p = 0; p < s.n_beta; ++p)
    bits |= std::uint64_t{1} << (2 * p + 1);
  return Configuration(bits, 2 * n_orb);
}

/// splitmix64 finalizer; used to derive independent seeds from counters.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(a) ^ (b + 0x632BE59BD9B4E019ull));
}

} // namespace nqsvqe

template <> struct std::hash<nqsvqe::Configuration> {
  std::size_t operator()(const nqsvqe::Configuration &c) const noexcept {
    return static_cast<std::size_t>(nqsvqe::mix_seed(c.bits(), static_cast<std::uint64_t>(c.size())));
  }
};
