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

#include <random>

#include "nqsvqe/pauli.hpp"
#include "nqsvqe/solver.hpp"
#include "oracles.hpp"

using namespace nqsvqe;

TEST(SlaterCondon, HartreeFockEnergyLiH) {
  const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  const auto hf = Configuration::parse("111100000000");
  EXPECT_NEAR(hamiltonian_element(ints, hf, hf), -7.75840439, 1e-8);
  EXPECT_NEAR(hartree_fock_energy(ints), -7.75840439, 1e-8);
}

TEST(SlaterCondon, TripleExcitationVanishes) {
  const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  const auto h10 = load_fcidump(oracle::fixture("h10_1.0bohr.fcidump"));
  const auto a = hartree_fock_configuration(10, h10.sector());
  // move three electrons: alpha 4->5, beta 4->5, alpha 3->6
  std::uint64_t b = a.bits();
  b ^= (1ull << 8) | (1ull << 10) | (1ull << 9) | (1ull << 11) | (1ull << 6) | (1ull << 12);
  EXPECT_EQ(hamiltonian_element(h10, a, Configuration(b, 20)), 0.0);
  EXPECT_THROW(hamiltonian_element(ints, Configuration::parse("111100000000"), Configuration::parse("111000000010")),
               DomainError);
  EXPECT_THROW(hamiltonian_element(ints, Configuration::parse("1111"), Configuration::parse("1111")), DomainError);
}

TEST(SlaterCondon, MatchesPauliMatrixOracle) {
  const auto ints = oracle::random_integrals(4, 4, 21);
  const auto H = oracle::dense(jordan_wigner(ints));
  const auto dets = enumerate_sector(4, 2, 2);
  std::mt19937 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, dets.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto &a = dets[pick(rng)];
    const auto &b = dets[pick(rng)];
    const auto ref = H(static_cast<Eigen::Index>(a.bits()), static_cast<Eigen::Index>(b.bits()));
    EXPECT_NEAR(hamiltonian_element(ints, a, b), ref.real(), 1e-10) << a.str() << " " << b.str();
  }
}

TEST(Solver, H4SquareFci) {
  const auto ints = load_fcidump(oracle::fixture("h4_square_1.23.fcidump"));
  const auto r = solve(ints, CiSpace::fci(ints));
  EXPECT_NEAR(r.energy, -1.9695121652, 5e-6);
  EXPECT_LT(r.residual, 1e-8);
  EXPECT_EQ(r.vector.source, "fci");
  EXPECT_NEAR(r.vector.norm_squared(), 1.0, 1e-10);
}

TEST(Solver, LiHCisdAndHierarchy) {
  const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  const auto cisd = solve(ints, CiSpace::cisd(ints));
  const auto fci = solve(ints, CiSpace::fci(ints));
  EXPECT_NEAR(cisd.energy, -7.81734514, 5e-6);
  EXPECT_LE(fci.energy, cisd.energy);
  EXPECT_LE(cisd.energy, hartree_fock_energy(ints));
  for (const auto &e : cisd.vector.entries)
    EXPECT_LE(std::popcount(e.config.bits() ^ 0xFull), 4);
}

TEST(Solver, FciMatchesJordanWignerSectorGround) {
  for (const char *name : {"h2_0.74.fcidump", "h4_square_1.23.fcidump"}) {
    const auto ints = load_fcidump(oracle::fixture(name));
    const auto H = oracle::dense(jordan_wigner(ints));
    const auto s = ints.sector();
    const double ref = oracle::sector_ground(H, 2 * ints.n_orb(), s.n_alpha, s.n_beta);
    EXPECT_NEAR(solve(ints, CiSpace::fci(ints)).energy, ref, 1e-9) << name;
  }
}

TEST(Solver, LanczosStringPathAgreesWithDense) {
  const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  const auto dense = solve(ints, CiSpace::fci(ints));
  SolveOptions opt;
  opt.force_iterative = true;
  const auto iter = solve(ints, CiSpace::fci(ints), opt);
  EXPECT_NEAR(iter.energy, dense.energy, 1e-10);
  EXPECT_LT(iter.residual, 1e-8);
  const auto m = dense.vector.as_map();
  for (const auto &e : iter.vector.entries)
    EXPECT_NEAR(e.coeff.real(), m.at(e.config).real(), 1e-7) << e.config.str();
}

TEST(Solver, LiHFciLeadingConfigurations) {
  const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  const auto r = solve(ints, CiSpace::fci(ints));
  EXPECT_NEAR(r.energy, -7.81739992, 5e-6);
  const auto &e = r.vector.entries;
  EXPECT_EQ(e[0].config.str(), "111100000000");
  EXPECT_NEAR(std::abs(e[0].coeff), 0.91525544, 1e-6);
  EXPECT_GT(e[0].coeff.real(), 0.0);
}

TEST(Solver, EigenvectorResidualInDeterminantBasis) {
  const auto ints = load_fcidump(oracle::fixture("h4_square_1.23.fcidump"));
  const auto r = solve(ints, CiSpace::fci(ints));
  double res2 = 0.0;
  for (const auto &a : r.vector.entries) {
    double hv = 0.0;
    for (const auto &b : r.vector.entries)
      hv += hamiltonian_element(ints, a.config, b.config) * b.coeff.real();
    res2 += std::pow(hv - r.energy * a.coeff.real(), 2);
  }
  EXPECT_LT(std::sqrt(res2), 1e-8);
}

TEST(Solver, CapacityError) {
  const auto ints = load_fcidump(oracle::fixture("h4_square_1.23.fcidump"));
  SolveOptions opt;
  opt.max_determinants = 10;
  EXPECT_THROW(solve(ints, CiSpace::fci(ints), opt), CapacityError);
}
