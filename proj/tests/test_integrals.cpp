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
#include <gtest/gtest.h>

#include <limits>

#include "nqsvqe/integrals.hpp"
#include "nqsvqe/pauli.hpp"
#include "nqsvqe/wavefunction.hpp"
#include "oracles.hpp"

using namespace nqsvqe;

namespace {

/// Sector block of a Pauli sum, evaluated letter by letter.
Eigen::MatrixXd sector_block(const QubitHamiltonian &h, const std::vector<Configuration> &basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto &t : h.terms()) {
    const auto letters = t.word.str(h.n_qubits());
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        oracle::cplx v = 1.0;
        for (int k = 0; k < h.n_qubits() && v != 0.0; ++k) {
          const int a = basis[static_cast<std::size_t>(i)].occupied(k);
          const int b = basis[static_cast<std::size_t>(j)].occupied(k);
          switch (letters[static_cast<std::size_t>(k)]) {
          case 'I': v *= (a == b) ? 1.0 : 0.0; break;
          case 'Z': v *= (a == b) ? (b ? -1.0 : 1.0) : 0.0; break;
          case 'X': v *= (a != b) ? 1.0 : 0.0; break;
          case 'Y': v *= (a != b) ? (b ? oracle::cplx(0, -1) : oracle::cplx(0, 1)) : 0.0; break;
          }
        }
        m(i, j) += t.coeff * v.real();
      }
  }
  return m;
}

double lowest(const Eigen::MatrixXd &m) { return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues()(0); }

} // namespace

TEST(Fcidump, ParsesLiHHeader) {
  const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  EXPECT_EQ(ints.n_orb(), 6);
  EXPECT_EQ(ints.n_elec(), 4);
  EXPECT_EQ(ints.ms2(), 0);
  EXPECT_EQ(2 * ints.n_orb(), 12); // twelve qubits
  for (int p = 0; p < 6; ++p)
    for (int q = 0; q < 6; ++q)
      EXPECT_EQ(ints.h1(p, q), ints.h1(q, p));
}

TEST(Fcidump, CoreEnergyOnly) {
  const auto ints = parse_fcidump(std::string(" &FCI NORB=1,NELEC=2,MS2=0,\n &END\n 0.7137 0 0 0 0\n"));
  EXPECT_DOUBLE_EQ(ints.e_core(), 0.7137);
  EXPECT_EQ(ints.h1(0, 0), 0.0);
  EXPECT_EQ(ints.h2(0, 0, 0, 0), 0.0);
}

TEST(Fcidump, OneOrbitalCiMatchesHandValue) {
  const auto ints =
      parse_fcidump(std::string(" &FCI NORB=1,NELEC=2,MS2=0,\n &END\n 0.65 1 1 1 1\n -1.25 1 1 0 0\n 0.7 0 0 0 0\n"));
  // the only determinant is |11>; brute-force Fock-space matrix element
  const auto H = oracle::fock_hamiltonian(ints);
  EXPECT_NEAR(H(3, 3), 2 * -1.25 + 0.65 + 0.7, 1e-14);
}

TEST(Fcidump, Errors) {
  EXPECT_THROW(parse_fcidump(std::string(" &FCI NORB=2,NELEC=2\n 1.0 1 1 0 0\n")), ParseError);
  EXPECT_THROW(parse_fcidump(std::string(" &FCI NELEC=2,MS2=0,\n &END\n")), ParseError);
  EXPECT_THROW(parse_fcidump(std::string(" &FCI NORB=2,NELEC=2,MS2=0,\n &END\n 1.0 3 1 0 0\n")), ParseError);
  EXPECT_THROW(parse_fcidump(std::string(" &FCI NORB=2,NELEC=2,MS2=0,\n &END\n 1.0 1 2 0 0\n 1.5 2 1 0 0\n")),
               ParseError);
  EXPECT_THROW(parse_fcidump(std::string(" &FCI NORB=2,NELEC=2,MS2=0,\n &END\n 1.0 1 2 1 1\n 1.1 1 1 2 1\n")),
               ParseError);
  // consistent duplicates are fine
  EXPECT_NO_THROW(parse_fcidump(std::string(" &FCI NORB=2,NELEC=2,MS2=0,\n &END\n 1.0 1 2 1 1\n 1.0 1 1 2 1\n")));
  try {
    parse_fcidump(std::string(" &FCI NORB=2,NELEC=2,MS2=0,\n &END\n 1.0 1 1 0 0\n abc\n"));
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(Fcidump, RoundTripProperty) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const auto ints = oracle::random_integrals(3 + static_cast<int>(seed % 2), 4, seed);
    const auto back = parse_fcidump(write_fcidump(ints));
    EXPECT_EQ(back, ints);
  }
  const auto lih = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  EXPECT_EQ(parse_fcidump(write_fcidump(lih)), lih);
}

TEST(Fcidump, EightFoldSymmetry) {
  const auto ints = load_fcidump(oracle::fixture("h4_square_1.23.fcidump"));
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q)
      for (int r = 0; r < 4; ++r)
        for (int s = 0; s < 4; ++s)
          for (const auto &[a, b, c, d] : IntegralSet::images(p, q, r, s))
            EXPECT_EQ(ints.h2(a, b, c, d), ints.h2(p, q, r, s));
}

TEST(ActiveSpace, EmptyFreezeIsIdentity) {
  const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  EXPECT_EQ(apply_active_space(ints, ActiveSpace::freeze_lowest(ints, 0)), ints);
}

TEST(ActiveSpace, F2FreezeFourGivesTwelveQubits) {
  const auto ints = load_fcidump(oracle::fixture("f2_1.0.fcidump"));
  const auto red = apply_active_space(ints, ActiveSpace::freeze_lowest(ints, 4));
  EXPECT_EQ(red.n_orb(), 6);
  EXPECT_EQ(2 * red.n_orb(), 12);
  EXPECT_EQ(red.n_elec(), 10);
}

TEST(ActiveSpace, FrozenReductionMatchesRestrictedFullSpace) {
  const auto ints = oracle::random_integrals(2, 2, 11);
  const auto red = apply_active_space(ints, ActiveSpace::freeze_lowest(ints, 1));
  // reduced problem: one orbital, zero electrons -> energy = folded core energy
  ASSERT_EQ(red.n_elec(), 0);
  const auto full = oracle::fock_hamiltonian(ints);
  // determinants with orbital 0 doubly occupied and 2 electrons total: |1100>
  EXPECT_NEAR(red.e_core(), full(3, 3), 1e-12);

  // three orbitals, four electrons, freeze orbital 0: 2-electron block restricted to orbital 0 occupied
  const auto big = oracle::random_integrals(3, 4, 12);
  const auto red3 = apply_active_space(big, ActiveSpace::freeze_lowest(big, 1));
  const auto Hf = oracle::fock_hamiltonian(big);
  const auto Hr = oracle::fock_hamiltonian(red3);
  std::vector<Eigen::Index> full_idx, red_idx;
  for (Eigen::Index i = 0; i < Hf.rows(); ++i)
    if ((i & 3) == 3 && std::popcount(static_cast<unsigned>(i)) == 4 &&
        std::popcount(static_cast<unsigned>(i) & 0x15u) == 2)
      full_idx.push_back(i);
  for (Eigen::Index i = 0; i < Hr.rows(); ++i)
    if (std::popcount(static_cast<unsigned>(i)) == 2 && std::popcount(static_cast<unsigned>(i) & 0x5u) == 1)
      red_idx.push_back(i);
  ASSERT_EQ(full_idx.size(), red_idx.size());
  Eigen::MatrixXd a(static_cast<Eigen::Index>(full_idx.size()), static_cast<Eigen::Index>(full_idx.size()));
  Eigen::MatrixXd b = a;
  for (std::size_t i = 0; i < full_idx.size(); ++i)
    for (std::size_t j = 0; j < full_idx.size(); ++j) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = Hf(full_idx[i], full_idx[j]);
      b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = Hr(red_idx[i], red_idx[j]);
    }
  EXPECT_NEAR(lowest(a), lowest(b), 1e-12);
}

TEST(ActiveSpace, ComposedFreezesEqualUnion) {
  const auto ints = oracle::random_integrals(4, 6, 3);
  const auto once = apply_active_space(ints, ActiveSpace::freeze_lowest(ints, 2));
  const auto step1 = apply_active_space(ints, ActiveSpace::freeze_lowest(ints, 1));
  const auto twice = apply_active_space(step1, ActiveSpace::freeze_lowest(step1, 1));
  EXPECT_NEAR(once.e_core(), twice.e_core(), 1e-13);
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q)
      EXPECT_NEAR(once.h1(p, q), twice.h1(p, q), 1e-13);
}

TEST(ActiveSpace, Errors) {
  const auto ints = oracle::random_integrals(3, 4, 1);
  ActiveSpace bad{{5}, {0, 1, 2}, {}, 2};
  EXPECT_THROW(apply_active_space(ints, bad), DomainError);
  ActiveSpace overlap{{0}, {0, 1, 2}, {}, 2};
  EXPECT_THROW(apply_active_space(ints, overlap), DomainError);
  EXPECT_THROW(ActiveSpace::freeze_lowest(ints, 3), DomainError); // would leave -2 electrons
}

TEST(JordanWigner, NumberOperator) {
  const auto h = to_hamiltonian(1, jw_product({{0, true}, {0, false}}));
  ASSERT_EQ(h.size(), 2u);
  EXPECT_DOUBLE_EQ(h.coeff(PauliWord::parse("I")), 0.5);
  EXPECT_DOUBLE_EQ(h.coeff(PauliWord::parse("Z")), -0.5);
}

TEST(JordanWigner, HoppingMatchesDenseMatrix) {
  PauliSum s = jw_product({{0, true}, {1, false}});
  s.add(jw_product({{1, true}, {0, false}}));
  const auto h = to_hamiltonian(2, s);
  EXPECT_DOUBLE_EQ(h.coeff(PauliWord::parse("XX")), 0.5);
  EXPECT_DOUBLE_EQ(h.coeff(PauliWord::parse("YY")), 0.5);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(4, 4);
  for (Eigen::Index col = 0; col < 4; ++col)
    for (auto [p, q] : {std::pair{0, 1}, std::pair{1, 0}}) {
      auto b = static_cast<std::uint64_t>(col);
      int sg = oracle::apply_ladder(b, q, false);
      if (sg)
        sg *= oracle::apply_ladder(b, p, true);
      if (sg)
        expect(static_cast<Eigen::Index>(b), col) += sg;
    }
  EXPECT_LT((oracle::dense(h) - expect.cast<oracle::cplx>()).norm(), 1e-14);
}

TEST(JordanWigner, MatchesFockSpaceOracle) {
  const auto ints = oracle::random_integrals(3, 2, 5);
  const auto h = jordan_wigner(ints);
  EXPECT_EQ(h.n_qubits(), 6);
  const auto diff = oracle::dense(h) - oracle::fock_hamiltonian(ints).cast<oracle::cplx>();
  EXPECT_LT(diff.norm(), 1e-12);
}

TEST(JordanWigner, HermitianAndSectorCommuting) {
  for (const char *name : {"h2_0.74.fcidump", "h4_square_1.23.fcidump"}) {
    const auto h = jordan_wigner(load_fcidump(oracle::fixture(name)));
    const Eigen::MatrixXcd H = oracle::dense(h);
    const int nq = h.n_qubits();
    EXPECT_LT((H - H.adjoint()).norm(), 1e-10) << name;
    const Eigen::MatrixXcd N = oracle::number_operator(nq, -1);
    const Eigen::MatrixXcd Sz = 0.5 * (oracle::number_operator(nq, 0) - oracle::number_operator(nq, 1));
    EXPECT_LT((H * N - N * H).norm(), 1e-10) << name;
    EXPECT_LT((H * Sz - Sz * H).norm(), 1e-10) << name;
    // identity appears once and leads
    int identities = 0;
    for (const auto &t : h.terms())
      identities += t.word.is_identity();
    EXPECT_EQ(identities, 1);
  }
}

TEST(JordanWigner, LiHSectorGroundIsFci) {
  const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  const auto h = jordan_wigner(ints);
  EXPECT_EQ(h.n_qubits(), 12);
  const auto block = sector_block(h, enumerate_sector(6, 2, 2));
  EXPECT_NEAR(lowest(block), -7.81739992, 1e-8);
}

TEST(Tailor, IdentityAndDegenerateThresholds) {
  const auto h = jordan_wigner(load_fcidump(oracle::fixture("h4_square_1.23.fcidump")));
  const auto same = tailor(h, 0.0);
  EXPECT_EQ(same.hamiltonian.size(), h.size());
  EXPECT_EQ(same.dropped_weight, 0.0);
  const auto only_id = tailor(h, std::numeric_limits<double>::infinity());
  ASSERT_EQ(only_id.hamiltonian.size(), 1u);
  EXPECT_TRUE(only_id.hamiltonian.terms()[0].word.is_identity());
  EXPECT_THROW(tailor(h, -1.0), DomainError);
}

TEST(Tailor, IdempotentAndMonotone) {
  const auto h = jordan_wigner(load_fcidump(oracle::fixture("lih_2.6.fcidump")));
  std::size_t prev = h.size() + 1;
  for (double t : {0.0, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    const auto a = tailor(h, t);
    EXPECT_LE(a.hamiltonian.size(), prev);
    prev = a.hamiltonian.size();
    const auto b = tailor(a.hamiltonian, t);
    EXPECT_EQ(b.hamiltonian.size(), a.hamiltonian.size());
    EXPECT_EQ(b.dropped_weight, 0.0);
  }
}

TEST(Tailor, EnergyShiftBoundedByDroppedWeight) {
  const auto h = jordan_wigner(load_fcidump(oracle::fixture("lih_2.6.fcidump")));
  const auto t = tailor(h, 1e-4);
  ASSERT_GT(t.dropped_terms, 0u);
  const auto basis = enumerate_sector(6, 2, 2);
  const double full = lowest(sector_block(h, basis));
  const double cut = lowest(sector_block(t.hamiltonian, basis));
  EXPECT_LE(std::abs(full - cut), t.dropped_weight);
}

TEST(QubitHamiltonianJson, RoundTrip) {
  const auto h = jordan_wigner(load_fcidump(oracle::fixture("h2_0.74.fcidump")));
  const auto j = to_json(h);
  EXPECT_EQ(j["n_qubits"], 4);
  const auto back = hamiltonian_from_json(nlohmann::json::parse(j.dump()));
  ASSERT_EQ(back.size(), h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(back.terms()[i].word, h.terms()[i].word);
    EXPECT_EQ(back.terms()[i].coeff, h.terms()[i].coeff);
  }
  EXPECT_THROW(hamiltonian_from_json(nlohmann::json::parse(R"({"n_qubits":2,"terms":[{"paulis":"X","coeff":1}]})")),
               ParseError);
}
