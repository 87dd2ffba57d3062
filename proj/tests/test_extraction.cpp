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

#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "nqsvqe/extraction.hpp"
#include "nqsvqe/solver.hpp"
#include "nqsvqe/vqe.hpp"
#include "oracles.hpp"

using namespace nqsvqe;
using oracle::cplx;

namespace {

const IntegralSet &lih() {
  static const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  return ints;
}

// Converged LiH UCCSD state, shared across tests (about ten seconds).
const Statevector &lih_uccsd_state() {
  static const Statevector s = [] {
    AnsatzSpec spec;
    spec.reference = hartree_fock_configuration(6, lih().sector());
    VqeOptions opt;
    opt.gradient = GradientMethod::Adjoint;
    const auto r = run_vqe(jordan_wigner(lih()), spec, opt, 1);
    return prepare_state(r.circuit, r.params);
  }();
  return s;
}

Statevector random_sector_state(int n_orb, Sector sec, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Statevector s(2 * n_orb);
  for (const auto &c : enumerate_sector(n_orb, sec))
    s[c.bits()] = cplx(nd(rng), nd(rng));
  const double n = s.norm();
  for (auto &a : s.amps())
    a /= n;
  return s;
}

} // namespace

TEST(EnumerateSector, Counts) {
  EXPECT_EQ(enumerate_sector(2, 1, 1).size(), 4u);
  EXPECT_EQ(enumerate_sector(3, 1, 1).size(), 9u);
  EXPECT_EQ(enumerate_sector(6, 2, 2).size(), 225u);
  const auto all = enumerate_sector(4, 2, 1);
  EXPECT_EQ(all.size(), 24u);
  for (std::size_t i = 1; i < all.size(); ++i)
    EXPECT_LT(all[i - 1].str(), all[i].str());
  for (const auto &c : all)
    EXPECT_EQ(c.sector(), (Sector{2, 1}));
  EXPECT_THROW(enumerate_sector(2, 3, 0), DomainError);
}

TEST(ExtractFull, DeltaState) {
  const auto hf = Configuration::parse("111100000000");
  const auto t = extract_full(basis_state(12, hf), {2, 2});
  ASSERT_EQ(t.entries.size(), 1u);
  EXPECT_EQ(t.entries[0].config, hf);
  EXPECT_EQ(t.entries[0].coeff, cplx(1.0));
  EXPECT_EQ(t.source, "vqe-extract-full");
}

TEST(ExtractFull, LiHFciLeadingConfiguration) {
  const auto fci = solve(lih(), CiSpace::fci(lih()));
  const auto t = extract_full(to_statevector(fci.vector), lih().sector());
  EXPECT_EQ(t.entries[0].config.str(), "111100000000");
  EXPECT_NEAR(std::abs(t.entries[0].coeff), 0.91525544, 1e-6);
  EXPECT_DOUBLE_EQ(t.entries[0].coeff.imag(), 0.0);
  EXPECT_GT(t.entries[0].coeff.real(), 0.0);
}

TEST(ExtractFull, CompletenessAndReembedding) {
  const auto s = random_sector_state(4, {2, 1}, 5);
  ExtractOptions opt;
  opt.cutoff = 0.0;
  const auto t = extract_full(s, {2, 1}, opt);
  EXPECT_EQ(t.entries.size(), 24u);
  EXPECT_NEAR(t.norm_squared(), 1.0, 1e-10);
  t.validate();
  // undo the gauge rotation, then compare amplitude by amplitude
  const auto &lead = t.entries[0];
  const cplx rot = s[lead.config.bits()] / lead.coeff;
  const auto back = to_statevector(t);
  for (std::size_t b = 0; b < s.dim(); ++b)
    EXPECT_NEAR(std::abs(back[b] * rot - s[b]), 0.0, 1e-15);
  for (std::size_t i = 1; i < t.entries.size(); ++i)
    EXPECT_GE(std::abs(t.entries[i - 1].coeff), std::abs(t.entries[i].coeff));
}

TEST(ExtractFull, CutoffAndLimit) {
  const auto s = random_sector_state(4, {2, 2}, 8);
  ExtractOptions opt;
  opt.cutoff = 0.2;
  for (const auto &e : extract_full(s, {2, 2}, opt).entries)
    EXPECT_GE(std::abs(e.coeff), 0.2);
  opt.enumeration_limit = 10;
  EXPECT_THROW(extract_full(s, {2, 2}, opt), CapacityError);
}

TEST(ExtractMc, LiHTopFiveMatchFullEnumeration) {
  const auto &s = lih_uccsd_state();
  const auto H = jordan_wigner(lih());
  const auto full = extract_full(s, lih().sector());
  McOptions opt;
  opt.steps = 5000;
  opt.seed = 3;
  const auto mc = extract_mc(s, lih().sector(), H, hartree_fock_energy(lih()), opt);
  ASSERT_GE(mc.table.entries.size(), 5u);
  for (int i = 0; i < 5; ++i)
    EXPECT_EQ(mc.table.entries[static_cast<std::size_t>(i)].config, full.entries[static_cast<std::size_t>(i)].config);
  // subset with equal coefficients
  const auto m = full.as_map();
  for (const auto &e : mc.table.entries)
    EXPECT_NEAR(std::abs(e.coeff - m.at(e.config)), 0.0, 1e-12);
  EXPECT_NEAR(mc.energy, table_energy(mc.table, H), 1e-10);
  mc.table.validate();
}

TEST(ExtractMc, DescentStepsLowerEnergy) {
  const auto &s = lih_uccsd_state();
  McOptions opt;
  opt.steps = 2000;
  opt.seed = 9;
  const auto mc = extract_mc(s, lih().sector(), jordan_wigner(lih()), hartree_fock_energy(lih()), opt);
  double prev = hartree_fock_energy(lih());
  for (std::size_t i = 0; i < mc.energies.size(); ++i) {
    if (mc.downhill[i]) {
      EXPECT_LT(mc.energies[i], prev);
    }
    prev = mc.energies[i];
  }
}

TEST(ExtractMc, SeedingAndDeterminism) {
  const auto &s = lih_uccsd_state();
  const auto H = jordan_wigner(lih());
  McOptions opt;
  opt.steps = 1;
  const auto one = extract_mc(s, lih().sector(), H, hartree_fock_energy(lih()), opt);
  EXPECT_EQ(one.table.entries.front().config.str(), "111100000000");
  opt.steps = 800;
  opt.seed = 4;
  const auto a = extract_mc(s, lih().sector(), H, hartree_fock_energy(lih()), opt);
  const auto b = extract_mc(s, lih().sector(), H, hartree_fock_energy(lih()), opt);
  ASSERT_EQ(a.table.entries.size(), b.table.entries.size());
  for (std::size_t i = 0; i < a.table.entries.size(); ++i) {
    EXPECT_EQ(a.table.entries[i].config, b.table.entries[i].config);
    EXPECT_EQ(a.table.entries[i].coeff, b.table.entries[i].coeff);
  }
  EXPECT_EQ(a.energies, b.energies);
}

TEST(ExtractMc, Errors) {
  const auto H = jordan_wigner(lih());
  const auto off = basis_state(12, Configuration::parse("110011000000"));
  EXPECT_THROW(extract_mc(off, {2, 2}, H, -7.0, McOptions{}), CannotSeedError);
  McOptions opt;
  opt.steps = 0;
  EXPECT_THROW(extract_mc(lih_uccsd_state(), {2, 2}, H, -7.0, opt), DomainError);
  opt.steps = 10;
  opt.temperature = 0.0;
  EXPECT_THROW(extract_mc(lih_uccsd_state(), {2, 2}, H, -7.0, opt), DomainError);
}

TEST(ExtractMc, SectorPropertyOnRandomCircuits) {
  const auto ints = load_fcidump(oracle::fixture("h4_square_1.23.fcidump"));
  const auto H = jordan_wigner(ints);
  AnsatzSpec spec;
  spec.reference = hartree_fock_configuration(4, ints.sector());
  const auto c = build_uccsd(spec);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> th(26);
    for (auto &x : th)
      x = u(rng);
    const auto s = prepare_state(c, th);
    McOptions opt;
    opt.steps = 300;
    opt.seed = static_cast<std::uint64_t>(trial);
    const auto mc = extract_mc(s, {2, 2}, H, hartree_fock_energy(ints), opt);
    for (const auto &e : mc.table.entries)
      EXPECT_EQ(e.config.sector(), (Sector{2, 2}));
    const auto full = extract_full(s, {2, 2});
    for (const auto &e : full.entries)
      EXPECT_EQ(e.config.sector(), (Sector{2, 2}));
  }
}

TEST(MergeTables, FirstSeenWins) {
  WavefunctionTable a, b;
  a.n_qubits = b.n_qubits = 4;
  a.sector = b.sector = {1, 1};
  a.source = b.source = "vqe-extract-mc";
  a.entries = {{Configuration::parse("1100"), 0.8}, {Configuration::parse("0110"), 0.1}};
  b.entries = {{Configuration::parse("0110"), 0.5}, {Configuration::parse("0011"), 0.3}};
  const auto m = merge_tables({a, b});
  ASSERT_EQ(m.entries.size(), 3u);
  const auto map = m.as_map();
  EXPECT_EQ(map.at(Configuration::parse("0110")), cplx(0.1));
  b.sector = {2, 0};
  EXPECT_THROW(merge_tables({a, b}), DomainError);
}

TEST(EmbedTable, ActiveSpaceVectorKeepsEnergy) {
  const auto H = jordan_wigner(lih());
  for (const auto &active : {std::vector<int>{1, 2, 3, 4, 5}, std::vector<int>{1, 2, 5}, std::vector<int>{5, 1, 2}}) {
    const auto space = ActiveSpace::from_active(lih(), active);
    const auto reduced = apply_active_space(lih(), space);
    const auto r = solve(reduced, CiSpace::fci(reduced));
    const auto lifted = embed_table(r.vector, space, 6);
    lifted.validate();
    EXPECT_EQ(lifted.sector, (Sector{2, 2}));
    EXPECT_NEAR(table_energy(lifted, H), r.energy, 1e-10);
  }
}

TEST(TableJsonl, RoundTripAndErrors) {
  const auto fci = solve(lih(), CiSpace::fci(lih()));
  std::stringstream ss;
  ss.precision(17);
  write_table_jsonl(fci.vector, ss);
  const auto back = read_table_jsonl(ss);
  EXPECT_EQ(back.source, "fci");
  ASSERT_EQ(back.entries.size(), fci.vector.entries.size());
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].config, fci.vector.entries[i].config);
    EXPECT_EQ(back.entries[i].coeff, fci.vector.entries[i].coeff);
  }
  std::stringstream no_meta("{\"config\":\"1100\",\"re\":1,\"im\":0}\n");
  EXPECT_THROW(read_table_jsonl(no_meta), ParseError);
  std::stringstream bad_sector(
      "{\"meta\":{\"source\":\"fci\",\"n_qubits\":4,\"n_alpha\":1,\"n_beta\":1}}\n"
      "{\"config\":\"1010\",\"re\":1,\"im\":0}\n");
  EXPECT_THROW(read_table_jsonl(bad_sector), DomainError);
}
