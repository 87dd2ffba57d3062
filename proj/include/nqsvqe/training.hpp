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

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "nqsvqe/common.hpp"
#include "nqsvqe/nnqs.hpp"
#include "nqsvqe/pauli.hpp"
#include "nqsvqe/wavefunction.hpp"

namespace nqsvqe {

/// Batched amplitude lookup; zero means "not in the wavefunction".
using AmplitudeFn = std::function<std::vector<cplx>(const std::vector<Configuration> &)>;

inline AmplitudeFn table_amplitudes(const WavefunctionTable &t) {
  auto m = std::make_shared<std::unordered_map<std::uint64_t, cplx>>();
  for (const auto &e : t.entries)
    m->emplace(e.config.bits(), e.coeff);
  return [m](const std::vector<Configuration> &xs) {
    std::vector<cplx> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto it = m->find(xs[i].bits());
      out[i] = it == m->end() ? cplx(0.0) : it->second;
    }
    return out;
  };
}

inline AmplitudeFn model_amplitude_fn(const Model &m) {
  return [&m](const std::vector<Configuration> &xs) { return model_amplitudes(m, xs); };
}

/// Flip-grouped Hamiltonian plus the sector the wavefunction lives in.
struct LocalEnergyContext {
  std::vector<FlipGroup> groups;
  int n_qubits = 0;
  Sector sector;

  LocalEnergyContext(const QubitHamiltonian &H, Sector s) : groups(group_by_flip(H)), n_qubits(H.n_qubits()), sector(s) {}

  /// In-sector configurations reachable from x by one group (x itself first).
  std::vector<Configuration> connected(const Configuration &x) const {
    std::vector<Configuration> out{x};
    for (const auto &g : groups) {
      if (g.flip == 0)
        continue;
      const Configuration y(x.bits() ^ g.flip, n_qubits);
      if (y.sector() == sector && g.phase_sum(y.bits()) != cplx(0.0))
        out.push_back(y);
    }
    return out;
  }
};

namespace detail {

/// E_loc for each x given amplitudes of every configuration they connect to.
inline std::vector<cplx> local_energies_from(const LocalEnergyContext &ctx, const std::vector<Configuration> &xs,
                                             const std::unordered_map<std::uint64_t, cplx> &psi) {
  std::vector<cplx> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto it = psi.find(xs[i].bits());
    const cplx px = it == psi.end() ? cplx(0.0) : it->second;
    if (px == cplx(0.0))
      throw NumericalError("local_energy: psi(x) = 0 at " + xs[i].str());
    cplx acc = 0.0;
    for (const auto &g : ctx.groups) {
      const std::uint64_t y = xs[i].bits() ^ g.flip;
      const auto jt = psi.find(y);
      if (jt == psi.end() || jt->second == cplx(0.0))
        continue;
      acc += g.phase_sum(y) * jt->second; // <x|G|y> psi(y)
    }
    out[i] = acc / px;
  }
  return out;
}

} // namespace detail

/// E_loc(x) = sum_y <x|H|y> psi(y) / psi(x) for a batch of configurations.
inline std::vector<cplx> local_energies(const AmplitudeFn &psi, const std::vector<Configuration> &xs,
                                        const LocalEnergyContext &ctx) {
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<Configuration> need;
  for (const auto &x : xs) {
    if (x.size() != ctx.n_qubits)
      throw DomainError("local_energy: configuration length does not match the Hamiltonian");
    for (const auto &y : ctx.connected(x))
      if (index.emplace(y.bits(), need.size()).second)
        need.push_back(y);
  }
  const auto amps = psi(need);
  std::unordered_map<std::uint64_t, cplx> m;
  for (std::size_t i = 0; i < need.size(); ++i)
    m.emplace(need[i].bits(), amps[i]);
  return detail::local_energies_from(ctx, xs, m);
}

inline cplx local_energy(const Model &m, const Configuration &x, const QubitHamiltonian &H) {
  return local_energies(model_amplitude_fn(m), {x}, LocalEnergyContext(H, m.config.sector))[0];
}

struct EnergyGradient {
  double energy = 0.0;
  double variance = 0.0;
  double imag = 0.0; // Im <E_loc>, zero up to rounding for a Hermitian H
  std::vector<double> grad;
  double grad_norm = 0.0;
  std::size_t unique = 0;
};

namespace detail {

struct TapedBatch {
  std::unique_ptr<ad::Tape> tape = std::make_unique<ad::Tape>();
  std::vector<ad::Var> P;
  nn::Scores scores;
};

inline TapedBatch taped_scores(const Model &m, const std::vector<Configuration> &xs) {
  TapedBatch tb;
  tb.P = nn::bind(*tb.tape, m, true);
  tb.scores = nn::score(*tb.tape, m.config, tb.P, xs);
  return tb;
}

/// grad of sum_i a_i log p_i + b_i phi_i, in fixed chunk order.
inline std::vector<double> surrogate_gradient(const Model &m, const std::vector<Configuration> &xs,
                                              const std::vector<double> &a, const std::vector<double> &b,
                                              std::size_t chunk, TapedBatch *whole = nullptr) {
  std::vector<double> g(m.params.size(), 0.0);
  auto run = [&](TapedBatch &tb, std::size_t lo, std::size_t hi) {
    const auto n = static_cast<Eigen::Index>(hi - lo);
    const Eigen::VectorXd av = Eigen::Map<const Eigen::VectorXd>(a.data() + lo, n);
    const Eigen::VectorXd bv = Eigen::Map<const Eigen::VectorXd>(b.data() + lo, n);
    tb.tape->backward(ad::add(ad::weighted_sum(tb.scores.log_prob, av), ad::weighted_sum(tb.scores.phase, bv)));
    const auto gc = nn::gather_grad(*tb.tape, m, tb.P);
    for (std::size_t k = 0; k < g.size(); ++k)
      g[k] += gc[k];
  };
  if (whole) {
    run(*whole, 0, xs.size());
    return g;
  }
  for (std::size_t lo = 0; lo < xs.size(); lo += chunk) {
    const std::size_t hi = std::min(xs.size(), lo + chunk);
    auto tb = taped_scores(m, std::vector<Configuration>(xs.begin() + static_cast<std::ptrdiff_t>(lo),
                                                         xs.begin() + static_cast<std::ptrdiff_t>(hi)));
    run(tb, lo, hi);
  }
  return g;
}

/// Shared tail of both modes: weights w (summing to 1), model values for
/// xs, amplitudes for everything xs connects to.
inline EnergyGradient assemble(const Model &m, const LocalEnergyContext &ctx, const std::vector<Configuration> &xs,
                               const std::vector<double> &w, const std::unordered_map<std::uint64_t, cplx> &psi,
                               std::size_t chunk, TapedBatch *whole) {
  const auto eloc = local_energies_from(ctx, xs, psi);
  cplx mean = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    mean += w[i] * eloc[i];
  EnergyGradient r;
  r.energy = mean.real();
  r.imag = mean.imag();
  r.unique = xs.size();
  std::vector<double> a(xs.size()), b(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const cplx d = eloc[i] - mean;
    r.variance += w[i] * std::norm(d);
    // 2 Re[d * conj(dlnpsi)], dlnpsi = dlogp / 2 + i dphi
    a[i] = w[i] * d.real();
    b[i] = 2.0 * w[i] * d.imag();
  }
  if (!std::isfinite(r.energy) || !std::isfinite(r.variance))
    throw NumericalError("energy_and_gradient: non-finite local energy");
  r.grad = surrogate_gradient(m, xs, a, b, chunk, whole);
  double s = 0.0;
  for (double x : r.grad)
    s += x * x;
  r.grad_norm = std::sqrt(s);
  return r;
}

inline cplx amp(double log_prob, double phase) {
  return std::isinf(log_prob) ? cplx(0.0) : std::polar(std::exp(0.5 * log_prob), phase);
}

} // namespace detail

/// Sampled mode: weights are multiplicity / total.
inline EnergyGradient energy_and_gradient(const Model &m, const SampleBatch &batch, const LocalEnergyContext &ctx,
                                          std::size_t chunk = 2048) {
  if (batch.entries.empty() || batch.total == 0)
    throw DomainError("energy_and_gradient: empty batch");
  std::vector<Configuration> xs;
  std::vector<double> w;
  for (const auto &e : batch.entries) {
    xs.push_back(e.config);
    w.push_back(static_cast<double>(e.count) / static_cast<double>(batch.total));
  }
  std::unordered_map<std::uint64_t, cplx> psi;
  std::optional<detail::TapedBatch> whole;
  if (xs.size() <= chunk) {
    whole = detail::taped_scores(m, xs);
    for (std::size_t i = 0; i < xs.size(); ++i)
      psi.emplace(xs[i].bits(), detail::amp(whole->scores.log_prob.value()(static_cast<Eigen::Index>(i), 0),
                                            whole->scores.phase.value()(static_cast<Eigen::Index>(i), 0)));
  } else {
    const auto v = evaluate(m, xs);
    for (std::size_t i = 0; i < xs.size(); ++i)
      psi.emplace(xs[i].bits(), detail::amp(v.log_prob[i], v.phase[i]));
  }
  bool any = false;
  for (const auto &[k, a] : psi)
    any = any || a != cplx(0.0);
  if (!any)
    throw NumericalError("energy_and_gradient: every batch configuration has p(x) = 0");
  std::vector<Configuration> extra;
  for (const auto &x : xs)
    for (const auto &y : ctx.connected(x))
      if (!psi.count(y.bits())) {
        psi.emplace(y.bits(), cplx(0.0));
        extra.push_back(y);
      }
  if (!extra.empty()) {
    const auto v = evaluate(m, extra);
    for (std::size_t i = 0; i < extra.size(); ++i)
      psi[extra[i].bits()] = detail::amp(v.log_prob[i], v.phase[i]);
  }
  return detail::assemble(m, ctx, xs, w, psi, chunk, whole ? &*whole : nullptr);
}

/// Exact-eval mode: full-sector sums weighted by the model's own p(x).
inline EnergyGradient energy_and_gradient_exact(const Model &m, const LocalEnergyContext &ctx,
                                                std::uint64_t limit = 100'000, std::size_t chunk = 2048) {
  const auto &c = m.config;
  if (sector_dimension(c.n_orb, c.sector) > limit)
    throw CapacityError("energy_and_gradient_exact: sector too large to enumerate; use sampled mode");
  const auto xs = enumerate_sector(c.n_orb, c.sector);
  std::vector<double> w(xs.size());
  std::unordered_map<std::uint64_t, cplx> psi;
  std::optional<detail::TapedBatch> whole;
  if (xs.size() <= chunk) {
    whole = detail::taped_scores(m, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double lp = whole->scores.log_prob.value()(static_cast<Eigen::Index>(i), 0);
      w[i] = std::exp(lp);
      psi.emplace(xs[i].bits(), detail::amp(lp, whole->scores.phase.value()(static_cast<Eigen::Index>(i), 0)));
    }
  } else {
    const auto v = evaluate(m, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      w[i] = std::exp(v.log_prob[i]);
      psi.emplace(xs[i].bits(), detail::amp(v.log_prob[i], v.phase[i]));
    }
  }
  // configurations with p = 0 (underflow) carry no weight and no E_loc
  std::vector<Configuration> keep;
  std::vector<double> wk;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (w[i] > 0.0) {
      keep.push_back(xs[i]);
      wk.push_back(w[i]);
    }
  if (keep.size() != xs.size())
    whole.reset();
  return detail::assemble(m, ctx, keep, wk, psi, chunk, whole ? &*whole : nullptr);
}

/// Exact energy <psi|H|psi> of the model over its sector, no gradient.
inline double exact_energy(const Model &m, const LocalEnergyContext &ctx, double *variance = nullptr) {
  const auto xs = enumerate_sector(m.config.n_orb, m.config.sector);
  const auto v = evaluate(m, xs);
  std::unordered_map<std::uint64_t, cplx> psi;
  std::vector<Configuration> keep;
  std::vector<double> w;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    psi.emplace(xs[i].bits(), detail::amp(v.log_prob[i], v.phase[i]));
    if (std::exp(v.log_prob[i]) > 0.0) {
      keep.push_back(xs[i]);
      w.push_back(std::exp(v.log_prob[i]));
    }
  }
  const auto eloc = detail::local_energies_from(ctx, keep, psi);
  double e = 0.0;
  for (std::size_t i = 0; i < keep.size(); ++i)
    e += w[i] * eloc[i].real();
  if (variance) {
    *variance = 0.0;
    for (std::size_t i = 0; i < keep.size(); ++i)
      *variance += w[i] * std::norm(eloc[i] - e);
  }
  return e;
}

/// Plain Adam over a flat parameter vector.
struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  long t = 0;

  void step(std::vector<double> &x, const std::vector<double> &g) {
    if (m.empty()) {
      m.assign(x.size(), 0.0);
      v.assign(x.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = beta1 * m[k] + (1 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1 - beta2) * g[k] * g[k];
      x[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
    }
  }
};

struct TrainTrace {
  struct Row {
    int step = 0;
    double energy = 0.0; // hartree; the pretraining loss for pretrain traces
    double variance = 0.0;
    double grad_norm = 0.0;
    std::size_t unique_samples = 0;
    double wall_ms = 0.0;
  };
  std::string mode; // exact-eval, sampled or pretrain
  std::vector<Row> rows;
};

inline void write_trace_csv(const TrainTrace &t, std::ostream &out) {
  out << "step,energy,variance,grad_norm,unique_samples,wall_ms\n";
  out.precision(17);
  for (const auto &r : t.rows)
    out << r.step << ',' << r.energy << ',' << r.variance << ',' << r.grad_norm << ',' << r.unique_samples << ','
        << r.wall_ms << '\n';
}

inline TrainTrace read_trace_csv(std::istream &in) {
  TrainTrace t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,energy", 0) != 0)
    throw ParseError("trace csv: missing header");
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    TrainTrace::Row r;
    char c1, c2, c3, c4, c5;
    std::istringstream ss(line);
    if (!(ss >> r.step >> c1 >> r.energy >> c2 >> r.variance >> c3 >> r.grad_norm >> c4 >> r.unique_samples >> c5 >>
          r.wall_ms))
      throw ParseError("trace csv: malformed row: " + line);
    t.rows.push_back(r);
  }
  return t;
}

class TrainingDiverged : public NumericalError {
public:
  TrainingDiverged(const std::string &what, TrainTrace trace) : NumericalError(what), trace(std::move(trace)) {}
  TrainTrace trace;
};

// ---- pretraining ---------------------------------------------------------

struct PretrainTarget {
  std::vector<Configuration> configs;
  std::vector<double> probs;
  std::vector<double> phases;

  static PretrainTarget from_table(const WavefunctionTable &t) {
    if (t.entries.empty())
      throw DomainError("pretrain: empty target table");
    const double z = t.norm_squared();
    if (!(z > 0.0))
      throw DomainError("pretrain: target table has zero norm");
    PretrainTarget p;
    for (const auto &e : t.entries) {
      if (std::norm(e.coeff) == 0.0)
        continue;
      p.configs.push_back(e.config);
      p.probs.push_back(std::norm(e.coeff) / z);
      p.phases.push_back(std::arg(e.coeff));
    }
    return p;
  }
};

struct PretrainOptions {
  int max_epochs = 2000;
  double lr = 1e-3;
  double lambda = 1.0; // phase-loss weight
  int patience = 200; // epochs
  double min_improvement = 1e-7;
};

struct PretrainResult {
  Model model;
  TrainTrace trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int epochs = 0;
};

namespace detail {

struct LossGrad {
  double loss;
  std::vector<double> grad;
};

inline LossGrad pretrain_loss(const Model &m, const PretrainTarget &tg, double lambda) {
  auto tb = taped_scores(m, tg.configs);
  auto &t = *tb.tape;
  const auto n = static_cast<Eigen::Index>(tg.configs.size());
  Eigen::VectorXd q(n), mq(n);
  ad::Mat neg_arg(n, 1);
  double entropy = 0.0, qsum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    q(i) = tg.probs[static_cast<std::size_t>(i)];
    mq(i) = -q(i);
    neg_arg(i, 0) = -tg.phases[static_cast<std::size_t>(i)];
    entropy += q(i) * std::log(q(i));
    qsum += q(i);
  }
  // KL(q || p) = sum q log q - sum q log p; phase term lambda * sum q (1 - cos(phi - arg c))
  const auto kl = ad::weighted_sum(tb.scores.log_prob, mq);
  const auto cosd = ad::weighted_sum(ad::cos(ad::add(tb.scores.phase, t.constant(neg_arg))), q * -lambda);
  const auto loss = ad::add(kl, cosd);
  t.backward(loss);
  return {loss.value()(0, 0) + entropy + lambda * qsum, nn::gather_grad(t, m, tb.P)};
}

inline double norm2(const std::vector<double> &g) {
  double s = 0.0;
  for (double x : g)
    s += x * x;
  return std::sqrt(s);
}

} // namespace detail

/// Full-support KL + phase matching with Adam; keeps the lowest-loss params.
inline PretrainResult pretrain(const Model &init, const PretrainTarget &target, const PretrainOptions &opt) {
  if (target.configs.empty())
    throw DomainError("pretrain: empty target");
  for (const auto &c : target.configs)
    if (c.size() != 2 * init.config.n_orb || !(c.sector() == init.config.sector))
      throw DomainError("pretrain: target configuration " + c.str() + " outside the model sector");
  const auto t0 = std::chrono::steady_clock::now();
  PretrainResult r{init, {"pretrain", {}}, 0.0, 0.0, 0};
  Model cur = init;
  Adam adam;
  adam.lr = opt.lr;
  double best = std::numeric_limits<double>::infinity(), prev = best;
  int stale = 0;
  for (int epoch = 0; epoch <= opt.max_epochs; ++epoch) {
    const auto lg = detail::pretrain_loss(cur, target, opt.lambda);
    if (!std::isfinite(lg.loss))
      throw TrainingDiverged("pretrain: non-finite loss at epoch " + std::to_string(epoch), r.trace);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    r.trace.rows.push_back({epoch, lg.loss, 0.0, detail::norm2(lg.grad), target.configs.size(), ms});
    if (epoch == 0)
      r.initial_loss = lg.loss;
    // consecutive epochs whose loss fell by less than min_improvement
    stale = epoch > 0 && prev - lg.loss < opt.min_improvement ? stale + 1 : 0;
    prev = lg.loss;
    if (lg.loss < best) {
      best = lg.loss;
      r.model = cur;
    }
    r.epochs = epoch;
    if (stale >= opt.patience || epoch == opt.max_epochs)
      break;
    adam.step(cur.params, lg.grad);
  }
  r.final_loss = best;
  return r;
}

// ---- variational Monte Carlo ---------------------------------------------

/// Auto picks exact-eval when the sector is enumerable.
enum class GradientMode { Auto, ExactEval, Sampled };

inline std::string to_string(GradientMode m) {
  return m == GradientMode::ExactEval ? "exact-eval" : m == GradientMode::Sampled ? "sampled" : "auto";
}

inline GradientMode parse_gradient_mode(const std::string &s) {
  if (s == "auto")
    return GradientMode::Auto;
  if (s == "exact-eval" || s == "exact")
    return GradientMode::ExactEval;
  if (s == "sampled")
    return GradientMode::Sampled;
  throw DomainError("unknown training mode '" + s + "' (expected auto, exact-eval or sampled)");
}

struct VmcOptions {
  int max_steps = 2000;
  std::uint64_t n_samples = 4096;
  double lr = 1e-3;
  int eval_every = 25;
  double target_gap = 1.6e-3;
  int consecutive = 5;
  GradientMode mode = GradientMode::Auto;
  std::uint64_t exact_limit = 100'000; // largest sector treated as enumerable
};

struct VmcResult {
  Model model; // best recorded checkpoint
  TrainTrace trace;
  double best_energy = 0.0;
  int steps = 0;
  std::optional<int> first_within_target; // first evaluated step inside target_gap
  bool reached = false;                   // stopped on the consecutive criterion
};

inline VmcResult train_vmc(const Model &init, const QubitHamiltonian &H, const VmcOptions &opt, std::uint64_t seed,
                           std::optional<double> oracle_energy = std::nullopt) {
  init.validate();
  if (H.n_qubits() != 2 * init.config.n_orb)
    throw DomainError("train_vmc: Hamiltonian and model disagree on qubit count");
  if (opt.eval_every < 1 || opt.max_steps < 0 || opt.n_samples < 1)
    throw DomainError("train_vmc: bad options");
  const LocalEnergyContext ctx(H, init.config.sector);
  const bool exact = sector_dimension(init.config.n_orb, init.config.sector) <= opt.exact_limit;
  if (opt.mode == GradientMode::ExactEval && !exact)
    throw CapacityError("train_vmc: exact-eval mode needs an enumerable sector");
  const bool exact_grad = opt.mode == GradientMode::ExactEval || (opt.mode == GradientMode::Auto && exact);
  const auto t0 = std::chrono::steady_clock::now();
  VmcResult r{init, {exact ? "exact-eval" : "sampled", {}}, std::numeric_limits<double>::infinity(), 0, {}, false};
  Model cur = init;
  Adam adam;
  adam.lr = opt.lr;
  int streak = 0;
  EnergyGradient last;
  // `current` means `last` was computed on the present parameters
  auto record = [&](int step, bool current) {
    TrainTrace::Row row{step, last.energy, last.variance, last.grad_norm, last.unique, 0.0};
    if (exact && !(current && exact_grad))
      row.energy = exact_energy(cur, ctx, &row.variance);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(row.energy))
      throw TrainingDiverged("train_vmc: non-finite energy at step " + std::to_string(step), r.trace);
    if (exact && oracle_energy && row.energy < *oracle_energy - 1e-9)
      throw NumericalError("train_vmc: exact-eval energy below the oracle ground energy at step " +
                           std::to_string(step));
    r.trace.rows.push_back(row);
    if (row.energy < r.best_energy) {
      r.best_energy = row.energy;
      r.model = cur;
    }
    if (oracle_energy && row.energy - *oracle_energy < opt.target_gap) {
      if (!r.first_within_target)
        r.first_within_target = step;
      ++streak;
    } else {
      streak = 0;
    }
    return oracle_energy && streak >= opt.consecutive;
  };
  int step = 0;
  for (; step < opt.max_steps; ++step) {
    try {
      if (exact_grad) {
        last = energy_and_gradient_exact(cur, ctx, opt.exact_limit);
      } else {
        last = energy_and_gradient(
            cur, sample_batch(cur, opt.n_samples, mix_seed(seed, static_cast<std::uint64_t>(step))), ctx);
      }
    } catch (const TrainingDiverged &) {
      throw;
    } catch (const NumericalError &e) {
      throw TrainingDiverged("train_vmc: step " + std::to_string(step) + ": " + e.what(), r.trace);
    }
    if (!std::isfinite(last.grad_norm))
      throw TrainingDiverged("train_vmc: non-finite gradient at step " + std::to_string(step), r.trace);
    if (step % opt.eval_every == 0 && record(step, true)) {
      r.reached = true;
      break;
    }
    adam.step(cur.params, last.grad);
  }
  if (!r.reached && (r.trace.rows.empty() || r.trace.rows.back().step != step))
    r.reached = record(step, false);
  r.steps = step;
  return r;
}

} // namespace nqsvqe
