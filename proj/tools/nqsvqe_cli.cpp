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

// nqsvqe: FCIDUMP -> VQE -> extraction -> pretraining -> VMC, one stage per
// subcommand. Exit codes: 0 ok, 1 usage/config, 2 numerical failure.

#include <CLI/CLI.hpp>
#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "nqsvqe/pipeline.hpp"

namespace fs = std::filesystem;
using namespace nqsvqe;
using nlohmann::json;

namespace {

/// Thrown when a run finished but missed its target; outputs are kept.
struct NotConverged : NumericalError {
  using NumericalError::NumericalError;
};

struct Flags {
  std::string config, fcidump, out;
  std::optional<int> freeze_lowest, layers, threads, group_size;
  std::optional<double> tailor_threshold;
  std::optional<std::uint64_t> seed;
  std::string ansatz, gradient, mode, method;
  std::string hamiltonian, state, table, checkpoint;
  std::vector<std::string> traces;
  std::optional<double> reference;
  std::string manifest;
};

void add_common(CLI::App *s, Flags &f) {
  s->add_option("--config", f.config, "run config or manifest (JSON)")->check(CLI::ExistingFile);
  s->add_option("--fcidump", f.fcidump, "integral file (overrides config)");
  s->add_option("--freeze-lowest", f.freeze_lowest, "freeze the k lowest orbitals")->check(CLI::NonNegativeNumber);
  s->add_option("--tailor-threshold", f.tailor_threshold, "drop Pauli terms with |c| below this")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--seed", f.seed, "RNG seed");
  s->add_option("--threads", f.threads, "OpenMP threads (0: default)")->check(CLI::NonNegativeNumber);
  s->add_option("--out", f.out, "output directory");
}

void add_ansatz(CLI::App *s, Flags &f) {
  s->add_option("--ansatz", f.ansatz, "circuit ansatz")->check(CLI::IsMember({"uccsd", "hea"}));
  s->add_option("--layers", f.layers, "HEA layers")->check(CLI::PositiveNumber);
  s->add_option("--gradient", f.gradient, "VQE gradient")->check(CLI::IsMember({"adjoint", "parameter-shift"}));
  s->add_option("--group-size", f.group_size, "parameters per Adam group (0: all)")->check(CLI::NonNegativeNumber);
}

void add_mode(CLI::App *s, Flags &f) {
  s->add_option("--mode", f.mode, "VMC gradient mode")->check(CLI::IsMember({"auto", "exact-eval", "sampled"}));
}

RunConfig resolve(const Flags &f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (!f.fcidump.empty())
    c.fcidump = f.fcidump;
  if (f.freeze_lowest) {
    c.freeze_lowest = *f.freeze_lowest;
    c.active.clear();
  }
  if (f.tailor_threshold)
    c.tailor_threshold = *f.tailor_threshold;
  if (f.seed)
    c.seed = *f.seed;
  if (f.threads)
    c.threads = *f.threads;
  if (!f.out.empty())
    c.out = f.out;
  if (!f.ansatz.empty())
    c.ansatz = parse_ansatz_kind(f.ansatz);
  if (f.layers)
    c.layers = *f.layers;
  if (!f.gradient.empty())
    c.vqe.gradient = parse_gradient_method(f.gradient);
  if (f.group_size)
    c.vqe.group_size = *f.group_size;
  if (!f.mode.empty())
    c.vmc.mode = parse_gradient_mode(f.mode);
  if (!f.method.empty())
    c.extract.method = f.method;
  if (c.threads > 0)
    omp_set_num_threads(c.threads);
  return c;
}

std::string out_dir(const RunConfig &c, bool required) {
  if (c.out.empty()) {
    if (required)
      throw DomainError("--out is required for this subcommand");
    return {};
  }
  fs::create_directories(c.out);
  return c.out;
}

std::string in_dir(const std::string &dir, const char *name) { return (fs::path(dir) / name).string(); }

void kv(const char *key, double v) { std::printf("%s: %.10f\n", key, v); }
void kv(const char *key, const std::string &v) { std::printf("%s: %s\n", key, v.c_str()); }
void kvi(const char *key, long long v) { std::printf("%s: %lld\n", key, v); }

json table_summary(const WavefunctionTable &t) {
  double w = 0.0;
  for (const auto &e : t.entries)
    w += std::norm(e.coeff);
  return {{"source", t.source}, {"entries", t.entries.size()}, {"weight", w}};
}

// ---- subcommands -----------------------------------------------------------

int cmd_inspect(const Flags &f) {
  const auto c = resolve(f);
  const auto p = prepare_problem(c);
  kvi("qubits", p.n_qubits());
  std::printf("electrons: %d (alpha %d, beta %d)\n", p.sector().n_alpha + p.sector().n_beta, p.sector().n_alpha,
              p.sector().n_beta);
  std::printf("orbitals: %d active of %d\n", p.n_orb(), p.full.n_orb());
  kvi("terms", static_cast<long long>(p.terms_before_tailor));
  std::printf("tailor_threshold: %g\n", c.tailor_threshold);
  kvi("dropped_terms", static_cast<long long>(p.dropped_terms));
  kv("dropped_weight", p.dropped_weight);
  kvi("remaining_terms", static_cast<long long>(p.H.terms().size()));
  kv("hf_energy", hartree_fock_energy(p.ints));
  kvi("sector_dimension", static_cast<long long>(sector_dimension(p.n_orb(), p.sector())));
  if (const auto dir = out_dir(c, false); !dir.empty()) {
    auto h = to_json(p.H);
    h["sector"] = {{"n_alpha", p.sector().n_alpha}, {"n_beta", p.sector().n_beta}};
    write_json(h, in_dir(dir, "hamiltonian.json"));
    auto m = make_manifest("inspect", c);
    m["problem"] = problem_summary(p);
    write_json(m, in_dir(dir, "manifest.json"));
  }
  return 0;
}

int cmd_ci(const Flags &f, CiLevel level) {
  const auto c = resolve(f);
  const auto p = prepare_problem(c);
  if (p.dropped_terms > 0)
    std::fprintf(stderr, "note: CI runs on the integrals; --tailor-threshold is ignored\n");
  const auto space = level == CiLevel::FCI ? CiSpace::fci(p.ints) : CiSpace::cisd(p.ints);
  const auto r = solve(p.ints, space);
  const double e_hf = hartree_fock_energy(p.ints);
  const char *name = level == CiLevel::FCI ? "fci" : "cisd";
  kv("method", name);
  kvi("determinants", static_cast<long long>(space.determinants.size()));
  kv("hf_energy", e_hf);
  kv("energy", r.energy);
  kv("correlation", r.energy - e_hf);
  if (const auto dir = out_dir(c, false); !dir.empty()) {
    save_table(r.vector, in_dir(dir, level == CiLevel::FCI ? "fci.jsonl" : "cisd.jsonl"));
    const json res = {{"method", name},          {"energy", r.energy},         {"hf_energy", e_hf},
                      {"residual", r.residual},  {"iterations", r.iterations}, {"determinants", space.determinants.size()}};
    write_json(res, in_dir(dir, (std::string(name) + ".json").c_str()));
    auto m = make_manifest(name, c);
    m["problem"] = problem_summary(p);
    m["results"] = res;
    write_json(m, in_dir(dir, "manifest.json"));
  }
  return 0;
}

json vqe_outputs(const VqeResult &r, const VqeOptions &o, const std::string &dir) {
  write_json(to_json(r), in_dir(dir, "vqe.json"));
  save_statevector(prepare_state(r.circuit, r.params), in_dir(dir, "state.bin"));
  return {{"energy", r.energy},
          {"n_params", r.params.size()},
          {"iterations", r.trace.size()},
          {"converged", vqe_converged(r, o)}};
}

void print_vqe(const VqeResult &r, const VqeOptions &o) {
  kv("ansatz", to_string(r.spec.kind));
  kvi("parameters", static_cast<long long>(r.params.size()));
  kvi("iterations", static_cast<long long>(r.trace.size()));
  kv("energy", r.energy);
  kv("converged", vqe_converged(r, o) ? "yes" : "no");
}

int cmd_vqe(const Flags &f) {
  auto c = resolve(f);
  const auto dir = out_dir(c, true);
  VqeResult r;
  json problem;
  if (!f.hamiltonian.empty()) {
    std::ifstream in(f.hamiltonian);
    if (!in)
      throw DomainError("cannot open " + f.hamiltonian);
    json hj;
    try {
      hj = json::parse(in);
    } catch (const json::exception &e) {
      throw ParseError(f.hamiltonian + ": " + e.what());
    }
    if (!hj.contains("sector"))
      throw DomainError(f.hamiltonian + " has no sector; write it with `inspect --out` or pass --fcidump");
    const auto H = hamiltonian_from_json(hj);
    const Sector s{hj["sector"].at("n_alpha").get<int>(), hj["sector"].at("n_beta").get<int>()};
    AnsatzSpec spec;
    spec.kind = c.ansatz;
    spec.layers = c.layers;
    spec.trotter_steps = c.trotter_steps;
    spec.reference = hartree_fock_configuration(H.n_qubits() / 2, s);
    r = run_vqe(H, spec, c.vqe, c.seed);
    problem = {{"hamiltonian", fs::absolute(f.hamiltonian).string()}, {"n_qubits", H.n_qubits()}};
  } else {
    const auto p = prepare_problem(c);
    r = run_vqe_stage(c, p);
    problem = problem_summary(p);
  }
  print_vqe(r, c.vqe);
  auto m = make_manifest("vqe", c);
  m["problem"] = problem;
  m["results"] = vqe_outputs(r, c.vqe, dir);
  write_json(m, in_dir(dir, "manifest.json"));
  if (!vqe_converged(r, c.vqe))
    throw NotConverged("vqe: iteration budget exhausted before the energy settled");
  return 0;
}

int cmd_extract(const Flags &f) {
  const auto c = resolve(f);
  if (f.state.empty())
    throw DomainError("extract needs --state");
  const auto dir = out_dir(c, true);
  const auto p = prepare_problem(c);
  const auto t = extract_stage(c, p, load_statevector(f.state));
  save_table(t, in_dir(dir, "extract.jsonl"));
  const auto s = table_summary(t);
  kv("source", t.source);
  kvi("entries", static_cast<long long>(t.entries.size()));
  kv("weight", s["weight"].get<double>());
  auto m = make_manifest("extract", c);
  m["problem"] = problem_summary(p);
  m["inputs"] = {{"state", fs::absolute(f.state).string()}};
  m["results"] = s;
  write_json(m, in_dir(dir, "manifest.json"));
  return 0;
}

Model starting_model(const RunConfig &c, const Problem &p, const std::string &checkpoint) {
  if (checkpoint.empty())
    return initial_model(c, p);
  auto m = load_checkpoint(checkpoint);
  check_model_matches(m, p);
  return m;
}

json pretrain_outputs(const RunConfig &c, const Problem &p, const WavefunctionTable &t, const Model &init,
                      const std::string &dir) {
  const auto r = pretrain(init, PretrainTarget::from_table(t), c.pretrain);
  save_checkpoint(r.model, in_dir(dir, "pretrain.ckpt"), {{"stage", "pretrain"}, {"seed", c.seed}, {"source", t.source}});
  save_trace(r.trace, in_dir(dir, "pretrain.csv"));
  json res = {{"initial_loss", r.initial_loss}, {"final_loss", r.final_loss}, {"epochs", r.epochs},
              {"parameters", r.model.params.size()}};
  kvi("parameters", static_cast<long long>(r.model.params.size()));
  kvi("epochs", r.epochs);
  kv("initial_loss", r.initial_loss);
  kv("final_loss", r.final_loss);
  if (sector_dimension(p.n_orb(), p.sector()) <= c.vmc.exact_limit) {
    const double e = exact_energy(r.model, LocalEnergyContext(p.H, p.sector()));
    res["energy"] = e;
    kv("energy", e);
  }
  return res;
}

int cmd_pretrain(const Flags &f) {
  const auto c = resolve(f);
  if (f.table.empty())
    throw DomainError("pretrain needs --table");
  const auto dir = out_dir(c, true);
  const auto p = prepare_problem(c);
  const auto t = load_table(f.table);
  auto m = make_manifest("pretrain", c);
  m["problem"] = problem_summary(p);
  m["inputs"] = {{"table", fs::absolute(f.table).string()}, {"checkpoint", f.checkpoint}};
  m["results"] = pretrain_outputs(c, p, t, starting_model(c, p, f.checkpoint), dir);
  write_json(m, in_dir(dir, "manifest.json"));
  return 0;
}

json train_outputs(const RunConfig &c, const Problem &p, const Model &init, const std::string &dir,
                   std::optional<double> e_ref, const std::string &source) {
  json res;
  if (e_ref)
    res["reference_energy"] = *e_ref;
  VmcResult r;
  try {
    r = train_vmc(init, p.H, c.vmc, c.seed, e_ref);
  } catch (const TrainingDiverged &e) {
    save_trace(e.trace, in_dir(dir, "train.csv"));
    throw;
  }
  save_checkpoint(r.model, in_dir(dir, "train.ckpt"), {{"stage", "train"}, {"seed", c.seed}, {"init", source}});
  save_trace(r.trace, in_dir(dir, "train.csv"));
  const double last = r.trace.rows.empty() ? r.best_energy : r.trace.rows.back().energy;
  res["mode"] = r.trace.mode;
  res["steps"] = r.steps;
  res["best_energy"] = r.best_energy;
  res["final_energy"] = last;
  res["reached"] = r.reached;
  res["first_within_target"] = r.first_within_target ? json(*r.first_within_target) : json(nullptr);
  kv("mode", r.trace.mode);
  kvi("steps", r.steps);
  kv("final_energy", last);
  kv("best_energy", r.best_energy);
  if (e_ref) {
    kv("reference_energy", *e_ref);
    kv("error", last - *e_ref);
    kv("first_within_target", r.first_within_target ? std::to_string(*r.first_within_target) : "none");
    kv("reached", r.reached ? "yes" : "no");
  }
  return res;
}

int cmd_train(const Flags &f) {
  const auto c = resolve(f);
  const auto dir = out_dir(c, true);
  const auto p = prepare_problem(c);
  const auto e_ref = reference_energy(p);
  auto m = make_manifest("train", c);
  m["problem"] = problem_summary(p);
  m["inputs"] = {{"checkpoint", f.checkpoint.empty() ? "" : fs::absolute(f.checkpoint).string()}};
  write_json(m, in_dir(dir, "manifest.json"));
  m["results"] = train_outputs(c, p, starting_model(c, p, f.checkpoint), dir, e_ref,
                               f.checkpoint.empty() ? "random" : f.checkpoint);
  write_json(m, in_dir(dir, "manifest.json"));
  if (e_ref && !m["results"]["reached"].get<bool>())
    throw NotConverged("train: step budget exhausted before reaching the target gap");
  return 0;
}

int cmd_pipeline(const Flags &f) {
  const auto c = resolve(f);
  const auto dir = out_dir(c, true);
  const auto p = prepare_problem(c);
  const auto e_ref = reference_energy(p);
  auto m = make_manifest("pipeline", c);
  m["problem"] = problem_summary(p);
  m["results"] = json::object();
  if (e_ref)
    m["results"]["reference_energy"] = *e_ref;
  auto stage = [&](const char *name) {
    std::printf("[%s]\n", name);
    std::fflush(stdout);
  };
  auto checkpoint = [&] { write_json(m, in_dir(dir, "manifest.json")); };
  checkpoint();

  stage("vqe");
  const auto vr = run_vqe_stage(c, p);
  print_vqe(vr, c.vqe);
  m["results"]["vqe"] = vqe_outputs(vr, c.vqe, dir);
  checkpoint();

  stage("extract");
  const auto t = extract_stage(c, p, prepare_state(vr.circuit, vr.params));
  save_table(t, in_dir(dir, "extract.jsonl"));
  m["results"]["extract"] = table_summary(t);
  kvi("entries", static_cast<long long>(t.entries.size()));
  checkpoint();

  stage("pretrain");
  m["results"]["pretrain"] = pretrain_outputs(c, p, t, initial_model(c, p), dir);
  checkpoint();

  stage("train");
  m["results"]["train"] =
      train_outputs(c, p, load_checkpoint(in_dir(dir, "pretrain.ckpt")), dir, e_ref, "pretrain.ckpt");
  checkpoint();
  if (e_ref && !m["results"]["train"]["reached"].get<bool>())
    throw NotConverged("pipeline: VMC step budget exhausted before reaching the target gap");
  return 0;
}

int cmd_report(const Flags &f) {
  if (f.traces.empty())
    throw DomainError("report needs at least one --trace NAME=PATH");
  double e_ref = 0.0;
  if (f.reference) {
    e_ref = *f.reference;
  } else if (!f.manifest.empty()) {
    std::ifstream in(f.manifest);
    if (!in)
      throw DomainError("cannot open " + f.manifest);
    const auto j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("results") || !j["results"].contains("reference_energy"))
      throw DomainError(f.manifest + " has no results.reference_energy");
    e_ref = j["results"]["reference_energy"].get<double>();
  } else {
    throw DomainError("report needs --reference or --manifest");
  }
  std::vector<std::pair<std::string, TrainTrace>> traces;
  for (const auto &spec : f.traces) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
      throw DomainError("--trace expects NAME=PATH, got " + spec);
    traces.emplace_back(spec.substr(0, eq), load_trace(spec.substr(eq + 1)));
  }
  const auto rows = merge_traces(traces, e_ref);
  if (f.out.empty()) {
    write_report_csv(rows, std::cout);
  } else {
    if (const auto parent = fs::path(f.out).parent_path(); !parent.empty())
      fs::create_directories(parent);
    std::ofstream out(f.out);
    if (!out)
      throw DomainError("cannot write " + f.out);
    write_report_csv(rows, out);
  }
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"VQE-pretrained transformer wavefunctions for molecular ground states"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kEngineVersion);
  Flags f;

  auto *inspect = app.add_subcommand("inspect", "Hamiltonian statistics");
  add_common(inspect, f);
  auto *fci = app.add_subcommand("fci", "full CI energy and vector");
  add_common(fci, f);
  auto *cisd = app.add_subcommand("cisd", "CISD energy and vector");
  add_common(cisd, f);
  auto *vqe = app.add_subcommand("vqe", "optimize a UCCSD or HEA circuit");
  add_common(vqe, f);
  add_ansatz(vqe, f);
  vqe->add_option("--hamiltonian", f.hamiltonian, "qubit Hamiltonian JSON from `inspect --out`")
      ->check(CLI::ExistingFile);
  auto *extract = app.add_subcommand("extract", "wavefunction table from a statevector");
  add_common(extract, f);
  extract->add_option("--state", f.state, "statevector dump")->check(CLI::ExistingFile);
  extract->add_option("--method", f.method, "full enumeration or Monte Carlo")->check(CLI::IsMember({"full", "mc"}));
  auto *pre = app.add_subcommand("pretrain", "fit the network to a wavefunction table");
  add_common(pre, f);
  pre->add_option("--table", f.table, "table JSONL")->check(CLI::ExistingFile);
  pre->add_option("--checkpoint", f.checkpoint, "start from this model")->check(CLI::ExistingFile);
  auto *train = app.add_subcommand("train", "variational Monte Carlo");
  add_common(train, f);
  add_mode(train, f);
  train->add_option("--checkpoint", f.checkpoint, "start from this model (default: random init)")
      ->check(CLI::ExistingFile);
  auto *pipe = app.add_subcommand("pipeline", "vqe, extract, pretrain, train");
  add_common(pipe, f);
  add_ansatz(pipe, f);
  add_mode(pipe, f);
  pipe->add_option("--method", f.method, "extraction method")->check(CLI::IsMember({"full", "mc"}));
  auto *report = app.add_subcommand("report", "merge training traces into one CSV");
  report->add_option("--trace", f.traces, "NAME=PATH, repeatable");
  report->add_option("--reference", f.reference, "reference energy");
  report->add_option("--manifest", f.manifest, "take the reference energy from a run manifest")
      ->check(CLI::ExistingFile);
  report->add_option("--out", f.out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*inspect)
      return cmd_inspect(f);
    if (*fci)
      return cmd_ci(f, CiLevel::FCI);
    if (*cisd)
      return cmd_ci(f, CiLevel::CISD);
    if (*vqe)
      return cmd_vqe(f);
    if (*extract)
      return cmd_extract(f);
    if (*pre)
      return cmd_pretrain(f);
    if (*train)
      return cmd_train(f);
    if (*pipe)
      return cmd_pipeline(f);
    if (*report)
      return cmd_report(f);
  } catch (const NumericalError &e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
