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
#include <sstream>

#include "nqsvqe/extraction.hpp"
#include "nqsvqe/solver.hpp"
#include "nqsvqe/training.hpp"
#include "nqsvqe/vqe.hpp"
#include "oracles.hpp"

using namespace nqsvqe;
using oracle::cplx;

namespace {

const IntegralSet &lih() {
  static const auto ints = load_fcidump(oracle::fixture("lih_2.6.fcidump"));
  return ints;
}

const IntegralSet &h4() {
  static const auto ints = load_fcidump(oracle::fixture("h4_square_1.23.fcidump"));
  return ints;
}

ModelConfig small_config(int n_orb, Sector s) {
  ModelConfig c;
  c.n_orb = n_orb;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.phase_hidden = {8};
  c.sector = s;
  return c;
}

Model jittered(const ModelConfig &c, std::uint64_t seed, double sd) {
  auto m = Model::init(c, seed);
  std::mt19937_64 rng(seed + 31);
  std::normal_distribution<double> nd(0.0, sd);
  for (auto &x : m.params)
    x += nd(rng);
  return m;
}

// Dense model vector over the full Fock space.
oracle::VectorXcd model_vector(const Model &m) {
  const auto xs = enumerate_sector(m.config.n_orb, m.config.sector);
  const auto a = model_amplitudes(m, xs);
  oracle::VectorXcd v = oracle::VectorXcd::Zero(Eigen::Index{1} << (2 * m.config.n_orb));
  for (std::size_t i = 0; i < xs.size(); ++i)
    v(static_cast<Eigen::Index>(xs[i].bits())) = a[i];
  return v;
}

// Full-sector batch whose integer multiplicities are proportional to p(x),
// so batch weights reproduce the model distribution to ~1e-12.
SampleBatch proportional_batch(const Model &m) {
  const auto xs = enumerate_sector(m.config.n_orb, m.config.sector);
  const auto v = evaluate(m, xs);
  SampleBatch b;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto k = static_cast<std::uint64_t>(std::llround(std::exp(v.log_prob[i]) * 1e12));
    if (k) {
      b.entries.push_back({xs[i], k, v.log_prob[i], v.log_prob[i], v.phase[i]});
      b.total += k;
    }
  }
  return b;
}

} // namespace

TEST(LocalEnergy, FciVectorIsConstant) {
  const auto fci = solve(lih(), CiSpace::fci(lih()));
  const LocalEnergyContext ctx(jordan_wigner(lih()), lih().sector());
  std::vector<Configuration> support;
  for (const auto &e : fci.vector.entries)
    if (std::abs(e.coeff) > 1e-6)
      support.push_back(e.config);
  ASSERT_GT(support.size(), 50u);
  const auto el = local_energies(table_amplitudes(fci.vector), support, ctx);
  for (std::size_t i = 0; i < support.size(); ++i) {
    EXPECT_NEAR(el[i].real(), -7.81739992, 1e-7) << support[i].str();
    EXPECT_NEAR(el[i].imag(), 0.0, 1e-10);
  }
}

TEST(LocalEnergy, DeltaOnHartreeFock) {
  WavefunctionTable t;
  t.n_qubits = 12;
  t.sector = lih().sector();
  const auto hf = hartree_fock_configuration(6, t.sector);
  t.entries = {{hf, cplx(0.3, -0.4)}};
  const LocalEnergyContext ctx(jordan_wigner(lih()), t.sector);
  const auto el = local_energies(table_amplitudes(t), {hf}, ctx);
  EXPECT_NEAR(el[0].real(), hartree_fock_energy(lih()), 1e-10);
  // zero amplitude is reported with the configuration
  const auto other = Configuration::parse("110011000000");
  try {
    local_energies(table_amplitudes(t), {other}, ctx);
    FAIL();
  } catch (const NumericalError &e) {
    EXPECT_NE(std::string(e.what()).find(other.str()), std::string::npos);
  }
}

TEST(LocalEnergy, AverageMatchesDenseRayleighQuotient) {
  const auto H = jordan_wigner(h4());
  const LocalEnergyContext ctx(H, h4().sector());
  ModelConfig c;
  c.n_orb = 4;
  c.sector = h4().sector();
  const auto m = jittered(c, 3, 0.05);
  const auto v = model_vector(m);
  const cplx rq = v.dot(oracle::dense(H) * v) / v.squaredNorm();
  const auto eg = energy_and_gradient_exact(m, ctx);
  EXPECT_NEAR(eg.energy, rq.real(), 1e-8);
  EXPECT_LT(std::abs(eg.imag), 1e-8);
  EXPECT_NEAR(exact_energy(m, ctx), rq.real(), 1e-8);
  // single-configuration entry point agrees with the batched one
  const auto x = Configuration::parse("11110000");
  const auto el = local_energies(model_amplitude_fn(m), {x}, ctx);
  EXPECT_NEAR(std::abs(local_energy(m, x, H) - el[0]), 0.0, 1e-12);
}

TEST(EnergyGradient, ExactModeMatchesFiniteDifferences) {
  const LocalEnergyContext ctx(jordan_wigner(h4()), h4().sector());
  auto m = jittered(small_config(4, h4().sector()), 5, 0.3);
  const auto eg = energy_and_gradient_exact(m, ctx);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < m.params.size(); ++k) {
    const double x0 = m.params[k];
    m.params[k] = x0 + h;
    const double ep = exact_energy(m, ctx);
    m.params[k] = x0 - h;
    const double em = exact_energy(m, ctx);
    m.params[k] = x0;
    const double fd = (ep - em) / (2 * h);
    worst = std::max(worst, std::abs(fd - eg.grad[k]) / std::max({std::abs(fd), std::abs(eg.grad[k]), 1e-4}));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(EnergyGradient, SampledModeOnFrozenBatchMatchesFiniteDifferences) {
  // The frozen batch covers the sector with multiplicities proportional to
  // p(x); its reweighted batch energy is then the model energy, whose
  // central differences the sampled estimator must reproduce.
  const LocalEnergyContext ctx(jordan_wigner(h4()), h4().sector());
  auto m = jittered(small_config(4, h4().sector()), 6, 0.3);
  const auto batch = proportional_batch(m);
  const auto eg = energy_and_gradient(m, batch, ctx);
  EXPECT_EQ(eg.unique, batch.entries.size());
  const double h = 1e-5;
  double worst = 0.0;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, m.params.size() - 1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = pick(rng);
    const double x0 = m.params[k];
    m.params[k] = x0 + h;
    const double ep = exact_energy(m, ctx);
    m.params[k] = x0 - h;
    const double em = exact_energy(m, ctx);
    m.params[k] = x0;
    const double fd = (ep - em) / (2 * h);
    worst = std::max(worst, std::abs(fd - eg.grad[k]) / std::max({std::abs(fd), std::abs(eg.grad[k]), 1e-4}));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(EnergyGradient, VanishesAtAnExactEigenstate) {
  // H' = -|psi><psi| expanded in Pauli strings makes the model its own
  // ground state.
  const auto m = jittered(small_config(2, {1, 1}), 7, 0.5);
  const auto v = model_vector(m);
  const oracle::MatrixXcd M = -v * v.adjoint() / v.squaredNorm();
  std::vector<PauliString> terms;
  const char letters[4] = {'I', 'X', 'Y', 'Z'};
  for (int code = 0; code < 256; ++code) {
    std::string w(4, 'I');
    for (int q = 0; q < 4; ++q)
      w[static_cast<std::size_t>(q)] = letters[(code >> (2 * q)) & 3];
    const cplx c = (oracle::pauli_matrix(w) * M).trace() / 16.0;
    ASSERT_LT(std::abs(c.imag()), 1e-12);
    terms.push_back({PauliWord::parse(w), c.real()});
  }
  const auto H = QubitHamiltonian::from_terms(4, terms);
  const LocalEnergyContext ctx(H, {1, 1});
  const auto eg = energy_and_gradient_exact(m, ctx);
  EXPECT_NEAR(eg.energy, -1.0, 1e-12);
  EXPECT_LT(eg.grad_norm, 1e-10);
  EXPECT_LT(eg.variance, 1e-20);
}

TEST(EnergyGradient, GaugeInvariance) {
  const LocalEnergyContext ctx(jordan_wigner(h4()), h4().sector());
  auto m = jittered(small_config(4, h4().sector()), 8, 0.3);
  const auto a = energy_and_gradient_exact(m, ctx);
  const nn::Layout lay(m.config);
  const std::size_t bias = lay.phase_out_bias().offset;
  m.params[bias] += 0.7;
  const auto b = energy_and_gradient_exact(m, ctx);
  EXPECT_NEAR(a.energy, b.energy, 1e-10);
  for (std::size_t k = 0; k < a.grad.size(); ++k)
    if (k != bias) {
      EXPECT_NEAR(a.grad[k], b.grad[k], 1e-10);
    }
}

TEST(EnergyGradient, RandomModelRespectsVariationalBound) {
  const auto fci = solve(lih(), CiSpace::fci(lih()));
  const LocalEnergyContext ctx(jordan_wigner(lih()), lih().sector());
  for (std::uint64_t seed : {1, 2, 3}) {
    ModelConfig c;
    c.n_orb = 6;
    c.sector = lih().sector();
    EXPECT_GE(energy_and_gradient_exact(Model::init(c, seed), ctx).energy, fci.energy);
    EXPECT_GE(exact_energy(jittered(c, seed, 0.05), ctx), fci.energy);
  }
}

TEST(EnergyGradient, Errors) {
  const LocalEnergyContext ctx(jordan_wigner(h4()), h4().sector());
  const auto m = Model::init(small_config(4, h4().sector()), 1);
  EXPECT_THROW(energy_and_gradient(m, SampleBatch{}, ctx), DomainError);
  EXPECT_THROW(energy_and_gradient_exact(m, ctx, 10), CapacityError);
}

TEST(Pretrain, DeltaTarget) {
  ModelConfig c;
  c.n_orb = 4;
  c.sector = h4().sector();
  WavefunctionTable t;
  t.n_qubits = 8;
  t.sector = c.sector;
  const auto hf = hartree_fock_configuration(4, c.sector);
  t.entries = {{hf, 1.0}};
  PretrainOptions opt;
  opt.max_epochs = 300;
  const auto r = pretrain(Model::init(c, 1), PretrainTarget::from_table(t), opt);
  EXPECT_LT(r.final_loss, r.initial_loss);
  const auto b = sample_batch(r.model, 10000, 1);
  const auto top = std::max_element(b.entries.begin(), b.entries.end(),
                                    [](const auto &x, const auto &y) { return x.count < y.count; });
  EXPECT_EQ(top->config, hf);
  EXPECT_GT(std::exp(log_prob_and_phase(r.model, hf).first), 0.99);
}

TEST(Pretrain, H4FciTable) {
  const auto fci = solve(h4(), CiSpace::fci(h4()));
  const LocalEnergyContext ctx(jordan_wigner(h4()), h4().sector());
  ModelConfig c;
  c.n_orb = 4;
  c.sector = h4().sector();
  const auto init = Model::init(c, 2);
  const auto r = pretrain(init, PretrainTarget::from_table(fci.vector), PretrainOptions{});
  EXPECT_LT(r.final_loss, 1e-2 * r.initial_loss);
  EXPECT_NEAR(exact_energy(r.model, ctx), -1.9695121652, 1e-3);
  EXPECT_GE(exact_energy(r.model, ctx), fci.energy - 1e-9);
}

TEST(Pretrain, LiHUccsdExtraction) {
  const auto H = jordan_wigner(lih());
  AnsatzSpec spec;
  spec.reference = hartree_fock_configuration(6, lih().sector());
  VqeOptions vo;
  vo.gradient = GradientMethod::Adjoint;
  const auto vr = run_vqe(H, spec, vo, 1);
  const auto table = extract_full(prepare_state(vr.circuit, vr.params), lih().sector());
  ModelConfig c;
  c.n_orb = 6;
  c.sector = lih().sector();
  const auto r = pretrain(Model::init(c, 1), PretrainTarget::from_table(table), PretrainOptions{});
  const double e = exact_energy(r.model, LocalEnergyContext(H, c.sector));
  EXPECT_LT(std::abs(e - vr.energy), 5e-3);
  EXPECT_GE(e, -7.81739993);
}

TEST(Pretrain, Errors) {
  const auto m = Model::init(small_config(4, {2, 2}), 1);
  EXPECT_THROW(PretrainTarget::from_table(WavefunctionTable{}), DomainError);
  PretrainTarget bad;
  EXPECT_THROW(pretrain(m, bad, {}), DomainError);
  bad.configs = {Configuration::parse("11100000")};
  bad.probs = {1.0};
  bad.phases = {0.0};
  EXPECT_THROW(pretrain(m, bad, {}), DomainError);
}

TEST(Vmc, ExactEvalTraceIsDeterministicAndVariational) {
  const auto H = jordan_wigner(h4());
  const double e_fci = solve(h4(), CiSpace::fci(h4())).energy;
  const auto m = Model::init(small_config(4, h4().sector()), 3);
  VmcOptions opt;
  opt.max_steps = 60;
  opt.eval_every = 10;
  opt.lr = 1e-2;
  const auto a = train_vmc(m, H, opt, 4, e_fci);
  const auto b = train_vmc(m, H, opt, 4, e_fci);
  EXPECT_EQ(a.trace.mode, "exact-eval");
  ASSERT_EQ(a.trace.rows.size(), b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
    EXPECT_EQ(a.trace.rows[i].step, b.trace.rows[i].step);
    EXPECT_EQ(a.trace.rows[i].energy, b.trace.rows[i].energy);
    EXPECT_EQ(a.trace.rows[i].grad_norm, b.trace.rows[i].grad_norm);
    EXPECT_GE(a.trace.rows[i].energy, e_fci - 1e-9);
  }
  EXPECT_LT(a.best_energy, a.trace.rows.front().energy);
  EXPECT_EQ(a.model.params, b.model.params);
}

TEST(Vmc, SampledModeRunsAndIsSeeded) {
  const auto H = jordan_wigner(h4());
  const auto m = Model::init(small_config(4, h4().sector()), 3);
  VmcOptions opt;
  opt.max_steps = 20;
  opt.eval_every = 5;
  opt.n_samples = 512;
  opt.mode = GradientMode::Sampled;
  const auto a = train_vmc(m, H, opt, 9);
  const auto b = train_vmc(m, H, opt, 9);
  ASSERT_EQ(a.trace.rows.size(), 5u);
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
    EXPECT_EQ(a.trace.rows[i].grad_norm, b.trace.rows[i].grad_norm);
    EXPECT_LE(a.trace.rows[i].unique_samples, 36u);
  }
  EXPECT_THROW(parse_gradient_mode("fast"), DomainError);
  opt.eval_every = 0;
  EXPECT_THROW(train_vmc(m, H, opt, 1), DomainError);
}

TEST(Vmc, DivergenceCarriesTrace) {
  auto m = Model::init(small_config(4, h4().sector()), 3);
  auto terms = jordan_wigner(h4()).terms();
  terms[1].coeff = std::numeric_limits<double>::quiet_NaN();
  const auto H = QubitHamiltonian::from_terms(8, terms);
  VmcOptions opt;
  opt.max_steps = 5;
  EXPECT_THROW(train_vmc(m, H, opt, 1), TrainingDiverged);
}

TEST(TraceCsv, RoundTrip) {
  TrainTrace t;
  t.mode = "exact-eval";
  t.rows = {{0, -1.25, 0.5, 3.0, 36, 1.5}, {25, -1.9601234567891, 1e-3, 0.25, 20, 99.0}};
  std::stringstream ss;
  write_trace_csv(t, ss);
  EXPECT_EQ(ss.str().substr(0, 52), "step,energy,variance,grad_norm,unique_samples,wall_m");
  const auto back = read_trace_csv(ss);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[1].step, 25);
  EXPECT_NEAR(back.rows[1].energy, -1.9601234567891, 1e-13);
  EXPECT_EQ(back.rows[1].unique_samples, 20u);
  std::stringstream bad("nope\n");
  EXPECT_THROW(read_trace_csv(bad), ParseError);
}
