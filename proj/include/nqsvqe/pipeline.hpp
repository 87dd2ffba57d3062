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
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nqsvqe/extraction.hpp"
#include "nqsvqe/integrals.hpp"
#include "nqsvqe/nnqs.hpp"
#include "nqsvqe/pauli.hpp"
#include "nqsvqe/solver.hpp"
#include "nqsvqe/training.hpp"
#include "nqsvqe/vqe.hpp"

namespace nqsvqe {

inline constexpr const char *kEngineVersion = "nqsvqe 0.1.0";

struct ExtractSettings {
  std::string method = "full"; // full or mc
  double cutoff = 1e-8;
  McOptions mc;
};

/// Everything one pipeline run depends on. Paths are stored as given after
/// resolution against the config file's directory.
struct RunConfig {
  std::string fcidump;
  int freeze_lowest = 0;
  int n_active = -1;       // orbitals kept after the frozen block; -1 keeps all
  std::vector<int> active; // explicit list; overrides freeze_lowest/n_active
  double tailor_threshold = 0.0;

  AnsatzKind ansatz = AnsatzKind::UCCSD;
  int layers = 1;
  int trotter_steps = 1;
  VqeOptions vqe = [] {
    VqeOptions o;
    o.gradient = GradientMethod::Adjoint;
    return o;
  }();
  ExtractSettings extract;
  ModelConfig model; // n_orb and sector are taken from the integrals
  PretrainOptions pretrain;
  VmcOptions vmc;

  std::uint64_t seed = 1;
  int threads = 0; // 0: OpenMP default
  std::string out;

  void validate() const {
    if (fcidump.empty())
      throw DomainError("config: no FCIDUMP given (set \"fcidump\" or pass --fcidump)");
    if (!std::filesystem::exists(fcidump))
      throw DomainError("config: FCIDUMP not found: " + fcidump);
    if (freeze_lowest < 0)
      throw DomainError("config: freeze_lowest must be >= 0");
    if (!(tailor_threshold >= 0.0))
      throw DomainError("config: tailor_threshold must be >= 0");
    if (layers < 1 || trotter_steps < 1)
      throw DomainError("config: ansatz layers and trotter_steps must be >= 1");
    if (vqe.max_iters < 0 || !(vqe.lr > 0.0) || vqe.group_size < 0 || vqe.patience < 1)
      throw DomainError("config: bad vqe settings");
    if (extract.method != "full" && extract.method != "mc")
      throw DomainError("config: extract.method must be full or mc");
    if (!(extract.cutoff >= 0.0))
      throw DomainError("config: extract.cutoff must be >= 0");
    if (pretrain.max_epochs < 0 || !(pretrain.lr > 0.0) || !(pretrain.lambda >= 0.0) || pretrain.patience < 1)
      throw DomainError("config: bad pretrain settings");
    if (vmc.max_steps < 0 || !(vmc.lr > 0.0) || vmc.eval_every < 1 || vmc.n_samples < 1 || vmc.consecutive < 1 ||
        !(vmc.target_gap > 0.0))
      throw DomainError("config: bad vmc settings");
    if (threads < 0)
      throw DomainError("config: threads must be >= 0");
  }
};

namespace detail {

inline void check_keys(const nlohmann::json &j, std::initializer_list<const char *> allowed, const std::string &where) {
  if (!j.is_object())
    throw DomainError("config: " + where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &[k, v] : j.items())
    if (!ok.count(k))
      throw DomainError("config: unknown key '" + k + "' in " + where);
}

template <class T> void take(const nlohmann::json &j, const char *key, T &dst) {
  if (j.contains(key))
    dst = j.at(key).get<T>();
}

inline std::string gradient_name(GradientMethod g) { return g == GradientMethod::Adjoint ? "adjoint" : "parameter-shift"; }

} // namespace detail

inline GradientMethod parse_gradient_method(const std::string &s) {
  if (s == "adjoint")
    return GradientMethod::Adjoint;
  if (s == "parameter-shift" || s == "shift")
    return GradientMethod::ParameterShift;
  throw DomainError("unknown gradient method '" + s + "' (expected adjoint or parameter-shift)");
}

/// Accepts a plain config or a run manifest (uses its "config" member).
/// Relative FCIDUMP paths resolve against `base_dir`.
inline RunConfig run_config_from_json(const nlohmann::json &in, const std::string &base_dir = ".") {
  using detail::take;
  const nlohmann::json &j = in.contains("config") && in.contains("engine") ? in.at("config") : in;
  detail::check_keys(j,
                     {"fcidump", "freeze_lowest", "n_active", "active", "tailor_threshold", "ansatz", "vqe", "extract",
                      "model", "pretrain", "vmc", "seed", "threads", "out"},
                     "config");
  RunConfig c;
  try {
    take(j, "fcidump", c.fcidump);
    if (!c.fcidump.empty() && std::filesystem::path(c.fcidump).is_relative())
      c.fcidump = (std::filesystem::path(base_dir) / c.fcidump).lexically_normal().string();
    take(j, "freeze_lowest", c.freeze_lowest);
    take(j, "n_active", c.n_active);
    take(j, "active", c.active);
    take(j, "tailor_threshold", c.tailor_threshold);
    if (j.contains("ansatz")) {
      const auto &a = j.at("ansatz");
      detail::check_keys(a, {"kind", "layers", "trotter_steps"}, "ansatz");
      if (a.contains("kind"))
        c.ansatz = parse_ansatz_kind(a.at("kind").get<std::string>());
      take(a, "layers", c.layers);
      take(a, "trotter_steps", c.trotter_steps);
    }
    if (j.contains("vqe")) {
      const auto &v = j.at("vqe");
      detail::check_keys(v, {"max_iters", "lr", "beta1", "beta2", "eps", "tol", "patience", "group_size", "gradient"},
                         "vqe");
      take(v, "max_iters", c.vqe.max_iters);
      take(v, "lr", c.vqe.lr);
      take(v, "beta1", c.vqe.beta1);
      take(v, "beta2", c.vqe.beta2);
      take(v, "eps", c.vqe.eps);
      take(v, "tol", c.vqe.tol);
      take(v, "patience", c.vqe.patience);
      take(v, "group_size", c.vqe.group_size);
      if (v.contains("gradient"))
        c.vqe.gradient = parse_gradient_method(v.at("gradient").get<std::string>());
    }
    if (j.contains("extract")) {
      const auto &e = j.at("extract");
      detail::check_keys(e, {"method", "cutoff", "mc_steps", "mc_temperature", "mc_window", "mc_tol"}, "extract");
      take(e, "method", c.extract.method);
      take(e, "cutoff", c.extract.cutoff);
      take(e, "mc_steps", c.extract.mc.steps);
      take(e, "mc_temperature", c.extract.mc.temperature);
      take(e, "mc_window", c.extract.mc.converge_window);
      take(e, "mc_tol", c.extract.mc.converge_tol);
    }
    if (j.contains("model")) {
      const auto &m = j.at("model");
      detail::check_keys(m, {"d_model", "n_heads", "n_layers", "d_ff", "phase_hidden"}, "model");
      take(m, "d_model", c.model.d_model);
      take(m, "n_heads", c.model.n_heads);
      take(m, "n_layers", c.model.n_layers);
      take(m, "d_ff", c.model.d_ff);
      take(m, "phase_hidden", c.model.phase_hidden);
    }
    if (j.contains("pretrain")) {
      const auto &p = j.at("pretrain");
      detail::check_keys(p, {"max_epochs", "lr", "lambda", "patience", "min_improvement"}, "pretrain");
      take(p, "max_epochs", c.pretrain.max_epochs);
      take(p, "lr", c.pretrain.lr);
      take(p, "lambda", c.pretrain.lambda);
      take(p, "patience", c.pretrain.patience);
      take(p, "min_improvement", c.pretrain.min_improvement);
    }
    if (j.contains("vmc")) {
      const auto &v = j.at("vmc");
      detail::check_keys(
          v, {"max_steps", "n_samples", "lr", "eval_every", "target_gap", "consecutive", "mode", "exact_limit"}, "vmc");
      take(v, "max_steps", c.vmc.max_steps);
      take(v, "n_samples", c.vmc.n_samples);
      take(v, "lr", c.vmc.lr);
      take(v, "eval_every", c.vmc.eval_every);
      take(v, "target_gap", c.vmc.target_gap);
      take(v, "consecutive", c.vmc.consecutive);
      take(v, "exact_limit", c.vmc.exact_limit);
      if (v.contains("mode"))
        c.vmc.mode = parse_gradient_mode(v.at("mode").get<std::string>());
    }
    take(j, "seed", c.seed);
    take(j, "threads", c.threads);
    take(j, "out", c.out);
  } catch (const nlohmann::json::exception &e) {
    throw DomainError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string &path) {
  std::ifstream f(path);
  if (!f)
    throw DomainError("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception &e) {
    throw DomainError("config: " + path + ": " + e.what());
  }
  return run_config_from_json(j, std::filesystem::path(path).parent_path().string());
}

/// Fully resolved form; absolute paths so a manifest replays from anywhere.
inline nlohmann::json to_json(const RunConfig &c) {
  nlohmann::json j;
  j["fcidump"] = c.fcidump.empty() ? "" : std::filesystem::absolute(c.fcidump).lexically_normal().string();
  j["freeze_lowest"] = c.freeze_lowest;
  j["n_active"] = c.n_active;
  j["active"] = c.active;
  j["tailor_threshold"] = c.tailor_threshold;
  j["ansatz"] = {{"kind", to_string(c.ansatz)}, {"layers", c.layers}, {"trotter_steps", c.trotter_steps}};
  j["vqe"] = {{"max_iters", c.vqe.max_iters}, {"lr", c.vqe.lr},         {"beta1", c.vqe.beta1},
              {"beta2", c.vqe.beta2},         {"eps", c.vqe.eps},       {"tol", c.vqe.tol},
              {"patience", c.vqe.patience},   {"group_size", c.vqe.group_size},
              {"gradient", detail::gradient_name(c.vqe.gradient)}};
  j["extract"] = {{"method", c.extract.method},
                  {"cutoff", c.extract.cutoff},
                  {"mc_steps", c.extract.mc.steps},
                  {"mc_temperature", c.extract.mc.temperature},
                  {"mc_window", c.extract.mc.converge_window},
                  {"mc_tol", c.extract.mc.converge_tol}};
  j["model"] = {{"d_model", c.model.d_model},
                {"n_heads", c.model.n_heads},
                {"n_layers", c.model.n_layers},
                {"d_ff", c.model.d_ff},
                {"phase_hidden", c.model.phase_hidden}};
  j["pretrain"] = {{"max_epochs", c.pretrain.max_epochs},
                   {"lr", c.pretrain.lr},
                   {"lambda", c.pretrain.lambda},
                   {"patience", c.pretrain.patience},
                   {"min_improvement", c.pretrain.min_improvement}};
  j["vmc"] = {{"max_steps", c.vmc.max_steps},   {"n_samples", c.vmc.n_samples},
              {"lr", c.vmc.lr},                 {"eval_every", c.vmc.eval_every},
              {"target_gap", c.vmc.target_gap}, {"consecutive", c.vmc.consecutive},
              {"mode", to_string(c.vmc.mode)},  {"exact_limit", c.vmc.exact_limit}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out;
  return j;
}

/// Integrals after the active-space reduction plus the (tailored) qubit
/// Hamiltonian built from them.
struct Problem {
  IntegralSet full;
  IntegralSet ints;
  std::optional<ActiveSpace> space;
  QubitHamiltonian H;
  std::size_t terms_before_tailor = 0;
  std::size_t dropped_terms = 0;
  double dropped_weight = 0.0;

  int n_orb() const { return ints.n_orb(); }
  Sector sector() const { return ints.sector(); }
  int n_qubits() const { return 2 * ints.n_orb(); }
};

inline Problem prepare_problem(const RunConfig &c) {
  c.validate();
  Problem p;
  p.full = load_fcidump(c.fcidump);
  if (!c.active.empty()) {
    p.space = ActiveSpace::from_active(p.full, c.active);
  } else if (c.freeze_lowest > 0 || c.n_active >= 0) {
    p.space = ActiveSpace::freeze_lowest(p.full, c.freeze_lowest, c.n_active);
  }
  p.ints = p.space ? apply_active_space(p.full, *p.space) : p.full;
  const auto H = jordan_wigner(p.ints);
  p.terms_before_tailor = H.terms().size();
  if (c.tailor_threshold > 0.0) {
    auto t = tailor(H, c.tailor_threshold);
    p.H = std::move(t.hamiltonian);
    p.dropped_terms = t.dropped_terms;
    p.dropped_weight = t.dropped_weight;
  } else {
    p.H = H;
  }
  return p;
}

/// FCI ground energy of the reduced problem, used as the convergence target.
/// Unavailable when tailoring changed the Hamiltonian (the solver works on the
/// integrals) or the sector is too large.
inline std::optional<double> reference_energy(const Problem &p, std::uint64_t limit = 200'000) {
  if (p.dropped_terms > 0 || sector_dimension(p.n_orb(), p.sector()) > limit)
    return std::nullopt;
  return solve(p.ints, CiSpace::fci(p.ints)).energy;
}

inline AnsatzSpec ansatz_spec(const RunConfig &c, const Problem &p) {
  AnsatzSpec s;
  s.kind = c.ansatz;
  s.layers = c.layers;
  s.trotter_steps = c.trotter_steps;
  s.reference = hartree_fock_configuration(p.n_orb(), p.sector());
  return s;
}

inline VqeResult run_vqe_stage(const RunConfig &c, const Problem &p) {
  return run_vqe(p.H, ansatz_spec(c, p), c.vqe, c.seed);
}

/// Whether the optimizer stopped on its own tolerance rather than the budget.
inline bool vqe_converged(const VqeResult &r, const VqeOptions &o) {
  return static_cast<int>(r.trace.size()) < o.max_iters || o.max_iters == 0;
}

inline WavefunctionTable extract_stage(const RunConfig &c, const Problem &p, const Statevector &state) {
  if (state.n_qubits() != p.n_qubits())
    throw DomainError("extract: state has " + std::to_string(state.n_qubits()) + " qubits, problem has " +
                      std::to_string(p.n_qubits()));
  if (c.extract.method == "full") {
    ExtractOptions o;
    o.cutoff = c.extract.cutoff;
    return extract_full(state, p.sector(), o);
  }
  McOptions o = c.extract.mc;
  o.cutoff = c.extract.cutoff;
  o.seed = c.seed;
  return extract_mc(state, p.sector(), p.H, hartree_fock_energy(p.ints), o).table;
}

inline ModelConfig model_config(const RunConfig &c, const Problem &p) {
  ModelConfig m = c.model;
  m.n_orb = p.n_orb();
  m.sector = p.sector();
  m.validate();
  return m;
}

inline Model initial_model(const RunConfig &c, const Problem &p) { return Model::init(model_config(c, p), c.seed); }

/// Rejects a checkpoint built for a different problem.
inline void check_model_matches(const Model &m, const Problem &p) {
  if (m.config.n_orb != p.n_orb() || !(m.config.sector == p.sector()))
    throw DomainError("checkpoint is for " + std::to_string(m.config.n_orb) + " orbitals, sector (" +
                      std::to_string(m.config.sector.n_alpha) + "," + std::to_string(m.config.sector.n_beta) +
                      "); problem has " + std::to_string(p.n_orb()) + " orbitals");
}

inline nlohmann::json problem_summary(const Problem &p) {
  return {{"n_orb_full", p.full.n_orb()},
          {"n_orb", p.n_orb()},
          {"n_qubits", p.n_qubits()},
          {"n_alpha", p.sector().n_alpha},
          {"n_beta", p.sector().n_beta},
          {"frozen", p.space ? p.space->frozen : std::vector<int>{}},
          {"terms", p.H.terms().size()},
          {"terms_before_tailor", p.terms_before_tailor},
          {"dropped_terms", p.dropped_terms},
          {"dropped_weight", p.dropped_weight},
          {"sector_dimension", sector_dimension(p.n_orb(), p.sector())}};
}

inline nlohmann::json make_manifest(const std::string &command, const RunConfig &c) {
  return {{"engine", kEngineVersion}, {"command", command}, {"config", to_json(c)}};
}

inline void write_json(const nlohmann::json &j, const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw DomainError("cannot write " + path);
  f << j.dump(2) << '\n';
}

inline void save_trace(const TrainTrace &t, const std::string &path) {
  std::ofstream f(path);
  if (!f)
    throw DomainError("cannot write " + path);
  write_trace_csv(t, f);
}

inline TrainTrace load_trace(const std::string &path) {
  std::ifstream f(path);
  if (!f)
    throw DomainError("cannot open trace " + path);
  return read_trace_csv(f);
}

struct ReportRow {
  int step = 0;
  std::string method;
  double energy = 0.0;
  double abs_error = 0.0;
};

/// Tidy long-format merge; rows keep the input order of methods, then steps.
inline std::vector<ReportRow> merge_traces(const std::vector<std::pair<std::string, TrainTrace>> &traces,
                                           double e_ref) {
  std::vector<ReportRow> rows;
  std::set<std::string> names;
  for (const auto &[name, t] : traces) {
    if (name.empty() || name.find(',') != std::string::npos)
      throw DomainError("report: method name must be non-empty and comma-free");
    if (!names.insert(name).second)
      throw DomainError("report: duplicate method name " + name);
    for (const auto &r : t.rows)
      rows.push_back({r.step, name, r.energy, std::abs(r.energy - e_ref)});
  }
  return rows;
}

inline void write_report_csv(const std::vector<ReportRow> &rows, std::ostream &out) {
  out << "step,method,energy,abs_error\n";
  out.precision(17);
  for (const auto &r : rows)
    out << r.step << ',' << r.method << ',' << r.energy << ',' << r.abs_error << '\n';
}

} // namespace nqsvqe
