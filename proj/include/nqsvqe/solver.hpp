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
#include <functional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "nqsvqe/common.hpp"
#include "nqsvqe/integrals.hpp"
#include "nqsvqe/wavefunction.hpp"

namespace nqsvqe {

namespace detail {

/// Applies a_q (create=false) or a+_q to `bits`; returns the fermionic sign
/// or 0 if the result vanishes. Ordering follows ascending qubit index.
inline int ladder(std::uint64_t &bits, int q, bool create) {
  const std::uint64_t bit = std::uint64_t{1} << q;
  const bool occ = bits & bit;
  if (occ == create)
    return 0;
  const int sign = (std::popcount(bits & (bit - 1)) & 1) ? -1 : 1;
  bits ^= bit;
  return sign;
}

inline std::vector<int> set_bits(std::uint64_t m) {
  std::vector<int> out;
  while (m) {
    out.push_back(std::countr_zero(m));
    m &= m - 1;
  }
  return out;
}

/// Slater-Condon rules over a generic orbital labelling. `one(p, q)` is the
/// one-electron integral and `anti(p, q, r, s)` the antisymmetrized
/// physicists' integral <pq||rs>.
template <class One, class Anti>
double slater_condon(std::uint64_t a, std::uint64_t b, One one, Anti anti) {
  const std::uint64_t diff = a ^ b;
  const int degree = std::popcount(diff) / 2;
  if (degree > 2)
    return 0.0;
  if (degree == 0) {
    const auto occ = set_bits(a);
    double e = 0.0;
    for (std::size_t i = 0; i < occ.size(); ++i) {
      e += one(occ[i], occ[i]);
      for (std::size_t j = 0; j < i; ++j)
        e += anti(occ[i], occ[j], occ[i], occ[j]);
    }
    return e;
  }
  const auto holes = set_bits(b & diff);     // occupied in b only
  const auto parts = set_bits(a & diff);     // occupied in a only
  if (degree == 1) {
    const int i = holes[0], p = parts[0];
    std::uint64_t t = b;
    int sign = ladder(t, i, false);
    sign *= ladder(t, p, true);
    double v = one(p, i);
    for (int k : set_bits(b & a))
      v += anti(p, k, i, k);
    return sign * v;
  }
  const int i = holes[0], j = holes[1], p = parts[0], q = parts[1];
  std::uint64_t t = b;
  int sign = ladder(t, i, false);
  sign *= ladder(t, j, false);
  sign *= ladder(t, q, true);
  sign *= ladder(t, p, true);
  // a+_p a+_q a_j a_i |b> = sign |a>, element = <pq||ij>
  return sign * anti(p, q, i, j);
}

} // namespace detail

/// <a|H|b> between determinants of the same sector (Slater-Condon rules).
inline double hamiltonian_element(const IntegralSet &ints, const Configuration &a, const Configuration &b) {
  if (a.size() != 2 * ints.n_orb() || b.size() != 2 * ints.n_orb())
    throw DomainError("hamiltonian_element: configuration length must be 2*n_orb");
  if (!(a.sector() == b.sector()))
    throw DomainError("hamiltonian_element: configurations " + a.str() + " and " + b.str() + " in different sectors");
  auto one = [&](int P, int Q) { return (P & 1) == (Q & 1) ? ints.h1(P >> 1, Q >> 1) : 0.0; };
  auto phys = [&](int P, int Q, int R, int S) {
    // <PQ|RS> = (pr|qs) with spin selection
    if ((P & 1) != (R & 1) || (Q & 1) != (S & 1))
      return 0.0;
    return ints.h2(P >> 1, R >> 1, Q >> 1, S >> 1);
  };
  auto anti = [&](int P, int Q, int R, int S) { return phys(P, Q, R, S) - phys(P, Q, S, R); };
  double v = detail::slater_condon(a.bits(), b.bits(), one, anti);
  if (a == b)
    v += ints.e_core();
  return v;
}

enum class CiLevel { FCI, CISD };

/// Determinant space for a CI calculation.
struct CiSpace {
  CiLevel level = CiLevel::FCI;
  Configuration reference;
  std::vector<Configuration> determinants;

  static CiSpace fci(const IntegralSet &ints) {
    CiSpace s;
    s.level = CiLevel::FCI;
    s.reference = hartree_fock_configuration(ints.n_orb(), ints.sector());
    s.determinants = enumerate_sector(ints.n_orb(), ints.sector());
    return s;
  }

  /// Reference plus all spin-conserving singles and doubles.
  static CiSpace cisd(const IntegralSet &ints) {
    CiSpace s;
    s.level = CiLevel::CISD;
    s.reference = hartree_fock_configuration(ints.n_orb(), ints.sector());
    for (const auto &c : enumerate_sector(ints.n_orb(), ints.sector()))
      if (std::popcount(c.bits() ^ s.reference.bits()) <= 4)
        s.determinants.push_back(c);
    return s;
  }
};

struct SolveOptions {
  std::size_t dense_limit = 2000;
  std::size_t max_determinants = 2'000'000;
  int max_iterations = 400;
  double tolerance = 1e-9;
  std::uint64_t seed = 7;
  bool force_iterative = false;
};

struct SolveResult {
  double energy = 0.0;
  WavefunctionTable vector;
  double residual = 0.0;
  int iterations = 0;
};

struct LanczosResult {
  double eigenvalue = 0.0;
  std::vector<double> eigenvector;
  double residual = 0.0;
  int iterations = 0;
};

/// Lowest eigenpair of a symmetric operator by Lanczos with full
/// reorthogonalization. Converged when the Ritz residual drops below tol.
inline LanczosResult lanczos(std::size_t dim, const std::function<void(std::span<const double>, std::span<double>)> &matvec,
                             const SolveOptions &opt, std::span<const double> start = {}) {
  std::vector<std::vector<double>> basis;
  std::vector<double> alpha, beta;
  std::vector<double> v(dim);
  if (start.size() == dim) {
    std::copy(start.begin(), start.end(), v.begin());
  } else {
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    for (auto &x : v)
      x = nd(rng);
  }
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      s += a[i] * b[i];
    return s;
  };
  auto normalize = [&](std::vector<double> &x) {
    const double n = std::sqrt(dot(x, x));
    for (auto &e : x)
      e /= n;
    return n;
  };
  normalize(v);
  std::vector<double> w(dim);
  LanczosResult res;
  const int max_it = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(opt.max_iterations), dim));
  Eigen::VectorXd ritz;
  double theta = 0.0;
  for (int k = 0; k < max_it; ++k) {
    basis.push_back(v);
    matvec(basis.back(), w);
    const double a = dot(w, basis.back());
    alpha.push_back(a);
    // full reorthogonalization, twice for stability
    for (int pass = 0; pass < 2; ++pass)
      for (const auto &b : basis) {
        const double c = dot(w, b);
        for (std::size_t i = 0; i < dim; ++i)
          w[i] -= c * b[i];
      }
    const double bnorm = std::sqrt(dot(w, w));

    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      T(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m)
        T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    theta = es.eigenvalues()(0);
    ritz = es.eigenvectors().col(0);
    const double resid = std::abs(bnorm * ritz(m - 1));
    res.iterations = k + 1;
    res.residual = resid;
    if (resid < opt.tolerance || bnorm < 1e-14 || k + 1 == max_it)
      break;
    beta.push_back(bnorm);
    for (std::size_t i = 0; i < dim; ++i)
      v[i] = w[i] / bnorm;
  }
  res.eigenvalue = theta;
  res.eigenvector.assign(dim, 0.0);
  for (std::size_t j = 0; j < basis.size() && static_cast<Eigen::Index>(j) < ritz.size(); ++j)
    for (std::size_t i = 0; i < dim; ++i)
      res.eigenvector[i] += ritz(static_cast<Eigen::Index>(j)) * basis[j][i];
  normalize(res.eigenvector);
  // true residual
  matvec(res.eigenvector, w);
  double r2 = 0.0;
  for (std::size_t i = 0; i < dim; ++i)
    r2 += (w[i] - theta * res.eigenvector[i]) * (w[i] - theta * res.eigenvector[i]);
  res.residual = std::sqrt(r2);
  if (res.residual > std::max(opt.tolerance, 1e-8) * 10)
    throw NumericalError("lanczos: not converged after " + std::to_string(res.iterations) +
                         " iterations, residual " + std::to_string(res.residual));
  return res;
}

/// Direct-CI Hamiltonian action on the full (N_alpha, N_beta) sector using
/// per-spin string lists. Vectors are indexed ia * n_beta_strings + ib in the
/// alpha-before-beta determinant ordering.
class StringCi {
public:
  explicit StringCi(const IntegralSet &ints) : ints_(ints), n_(ints.n_orb()) {
    const auto s = ints.sector();
    alpha_ = combinations(n_, s.n_alpha);
    beta_ = combinations(n_, s.n_beta);
    index_alpha_ = index_of(alpha_);
    index_beta_ = index_of(beta_);
    h_alpha_ = same_spin_matrix(alpha_);
    h_beta_ = same_spin_matrix(beta_);
    singles_alpha_ = single_list(alpha_, index_alpha_);
    singles_beta_ = single_list(beta_, index_beta_);
    const auto nn = static_cast<std::size_t>(n_ * n_);
    coulomb_.resize(nn * nn);
    for (int p = 0; p < n_; ++p)
      for (int q = 0; q < n_; ++q)
        for (int r = 0; r < n_; ++r)
          for (int t = 0; t < n_; ++t)
            coulomb_[static_cast<std::size_t>(p * n_ + q) * nn + static_cast<std::size_t>(r * n_ + t)] =
                ints_.h2(p, q, r, t);
  }

  std::size_t dim() const { return alpha_.size() * beta_.size(); }
  const std::vector<std::uint64_t> &alpha_strings() const { return alpha_; }
  const std::vector<std::uint64_t> &beta_strings() const { return beta_; }

  void sigma(std::span<const double> c, std::span<double> out) const {
    const std::size_t na = alpha_.size(), nb = beta_.size();
    const std::size_t nn = static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
    const double ecore = ints_.e_core();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t sia = 0; sia < static_cast<std::ptrdiff_t>(na); ++sia) {
      const auto ia = static_cast<std::size_t>(sia);
      double *row = out.data() + ia * nb;
      const double *crow = c.data() + ia * nb;
      for (std::size_t ib = 0; ib < nb; ++ib) {
        double acc = ecore * crow[ib];
        for (const auto &[jb, h] : h_beta_[ib])
          acc += h * crow[jb];
        row[ib] = acc;
      }
      for (const auto &[ja, h] : h_alpha_[ia]) {
        const double *src = c.data() + ja * nb;
        for (std::size_t ib = 0; ib < nb; ++ib)
          row[ib] += h * src[ib];
      }
      for (const auto &ea : singles_alpha_[ia]) {
        const double *src = c.data() + ea.j * nb;
        const double *v = coulomb_.data() + ea.pq * nn;
        for (std::size_t ib = 0; ib < nb; ++ib) {
          double acc = 0.0;
          for (const auto &eb : singles_beta_[ib])
            acc += eb.sign * v[eb.pq] * src[eb.j];
          row[ib] += ea.sign * acc;
        }
      }
    }
  }

  /// Sign taking alpha-before-beta ordering to ascending-qubit ordering.
  double reorder_sign(std::uint64_t a, std::uint64_t b) const {
    int inv = 0;
    for (int p = 0; p < n_; ++p)
      if ((a >> p) & 1u)
        inv += std::popcount(b & ((std::uint64_t{1} << p) - 1));
    return (inv & 1) ? -1.0 : 1.0;
  }

private:
  struct Single {
    std::size_t j;  // source string index
    std::size_t pq; // p * n + q, with <I|E_pq|J> = sign
    double sign;
  };

  static std::unordered_map<std::uint64_t, std::size_t> index_of(const std::vector<std::uint64_t> &s) {
    std::unordered_map<std::uint64_t, std::size_t> m;
    for (std::size_t i = 0; i < s.size(); ++i)
      m.emplace(s[i], i);
    return m;
  }

  /// Same-spin part (one-body plus like-spin two-body) as sparse rows.
  std::vector<std::vector<std::pair<std::size_t, double>>> same_spin_matrix(const std::vector<std::uint64_t> &strings) const {
    auto one = [&](int p, int q) { return ints_.h1(p, q); };
    auto anti = [&](int p, int q, int r, int s) { return ints_.h2(p, r, q, s) - ints_.h2(p, s, q, r); };
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(strings.size());
    for (std::size_t i = 0; i < strings.size(); ++i)
      for (std::size_t j = 0; j < strings.size(); ++j) {
        if (std::popcount(strings[i] ^ strings[j]) > 4)
          continue;
        const double h = detail::slater_condon(strings[i], strings[j], one, anti);
        if (h != 0.0)
          rows[i].emplace_back(j, h);
      }
    return rows;
  }

  std::vector<std::vector<Single>> single_list(const std::vector<std::uint64_t> &strings,
                                               const std::unordered_map<std::uint64_t, std::size_t> &index) const {
    std::vector<std::vector<Single>> out(strings.size());
    for (std::size_t i = 0; i < strings.size(); ++i) {
      // E_pq |J> = sign |I>: J has q occupied, I = J - q + p
      for (int p : detail::set_bits(strings[i]))
        for (int q = 0; q < n_; ++q) {
          std::uint64_t t = strings[i];
          // |J> = a+_q a_p |I> up to sign; recover sign from the forward action
          if (q != p && ((t >> q) & 1u))
            continue;
          std::uint64_t src = (t & ~(std::uint64_t{1} << p)) | (std::uint64_t{1} << q);
          std::uint64_t w = src;
          int sign = detail::ladder(w, q, false);
          sign *= detail::ladder(w, p, true);
          out[i].push_back({index.at(src), static_cast<std::size_t>(p * n_ + q), static_cast<double>(sign)});
        }
    }
    return out;
  }

  IntegralSet ints_;
  int n_;
  std::vector<std::uint64_t> alpha_, beta_;
  std::unordered_map<std::uint64_t, std::size_t> index_alpha_, index_beta_;
  std::vector<std::vector<std::pair<std::size_t, double>>> h_alpha_, h_beta_;
  std::vector<std::vector<Single>> singles_alpha_, singles_beta_;
  std::vector<double> coulomb_; // (pq|rs) as an (n*n) x (n*n) matrix
};

namespace detail {

inline WavefunctionTable make_table(const std::vector<Configuration> &dets, std::span<const double> v, CiLevel level,
                                    const IntegralSet &ints) {
  WavefunctionTable t;
  t.source = level == CiLevel::FCI ? "fci" : "cisd";
  t.n_qubits = 2 * ints.n_orb();
  t.sector = ints.sector();
  t.entries.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i)
    t.entries.push_back({dets[i], cplx(v[i], 0.0)});
  t.sort_by_magnitude();
  t.fix_gauge();
  return t;
}

} // namespace detail

/// Lowest eigenpair in the given determinant space.
inline SolveResult solve(const IntegralSet &ints, const CiSpace &space, const SolveOptions &opt = {}) {
  const std::size_t n = space.determinants.size();
  if (n == 0)
    throw DomainError("solve: empty determinant space");
  if (n > opt.max_determinants)
    throw CapacityError("solve: " + std::to_string(n) + " determinants exceed limit " +
                        std::to_string(opt.max_determinants));
  SolveResult r;
  if (n <= opt.dense_limit && !opt.force_iterative) {
    Eigen::MatrixXd H(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                hamiltonian_element(ints, space.determinants[i], space.determinants[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    r.energy = es.eigenvalues()(0);
    Eigen::VectorXd v = es.eigenvectors().col(0);
    r.residual = (H * v - r.energy * v).norm();
    r.vector = detail::make_table(space.determinants, std::span<const double>(v.data(), n), space.level, ints);
    return r;
  }

  if (space.level == CiLevel::FCI) {
    StringCi ci(ints);
    auto mv = [&](std::span<const double> x, std::span<double> y) { ci.sigma(x, y); };
    const auto lr = lanczos(ci.dim(), mv, opt);
    const std::size_t nb = ci.beta_strings().size();
    std::vector<Configuration> dets;
    std::vector<double> coeffs;
    dets.reserve(ci.dim());
    coeffs.reserve(ci.dim());
    for (std::size_t ia = 0; ia < ci.alpha_strings().size(); ++ia)
      for (std::size_t ib = 0; ib < nb; ++ib) {
        const auto a = ci.alpha_strings()[ia], b = ci.beta_strings()[ib];
        dets.emplace_back(interleave(a, b, ints.n_orb()), 2 * ints.n_orb());
        coeffs.push_back(ci.reorder_sign(a, b) * lr.eigenvector[ia * nb + ib]);
      }
    r.energy = lr.eigenvalue;
    r.residual = lr.residual;
    r.iterations = lr.iterations;
    r.vector = detail::make_table(dets, coeffs, space.level, ints);
    return r;
  }

  // Large truncated spaces: sparse matrix assembled from the excitation rule.
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
    const auto i = static_cast<std::size_t>(si);
    for (std::size_t j = 0; j < n; ++j)
      if (std::popcount(space.determinants[i].bits() ^ space.determinants[j].bits()) <= 4) {
        const double h = hamiltonian_element(ints, space.determinants[i], space.determinants[j]);
        if (h != 0.0)
          rows[i].emplace_back(j, h);
      }
  }
  auto mv = [&](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const auto &[j, h] : rows[i])
        acc += h * x[j];
      y[i] = acc;
    }
  };
  const auto lr = lanczos(n, mv, opt);
  r.energy = lr.eigenvalue;
  r.residual = lr.residual;
  r.iterations = lr.iterations;
  r.vector = detail::make_table(space.determinants, lr.eigenvector, space.level, ints);
  return r;
}

/// Energy of the Hartree-Fock determinant.
inline double hartree_fock_energy(const IntegralSet &ints) {
  const auto hf = hartree_fock_configuration(ints.n_orb(), ints.sector());
  return hamiltonian_element(ints, hf, hf);
}

} // namespace nqsvqe
