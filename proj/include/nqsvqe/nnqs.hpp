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
//
// Autoregressive transformer wavefunction. One token per spatial orbital
// (alpha bit + 2 * beta bit), a decoder-only stack for the conditionals and
// a separate MLP for the phase.
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nqsvqe/autodiff.hpp"
#include "nqsvqe/common.hpp"
#include "nqsvqe/wavefunction.hpp"

namespace nqsvqe {

struct ModelConfig {
  int n_orb = 0;
  int d_model = 32;
  int n_heads = 4;
  int n_layers = 4;
  int d_ff = 0; // 0 means 4 * d_model
  std::vector<int> phase_hidden{512, 512};
  Sector sector;

  int ff_width() const { return d_ff > 0 ? d_ff : 4 * d_model; }

  void validate() const {
    if (n_orb < 1 || n_orb > 32)
      throw DomainError("model: n_orb must be in [1, 32]");
    if (d_model < 1 || n_heads < 1 || d_model % n_heads)
      throw DomainError("model: d_model must be a positive multiple of n_heads");
    if (n_layers < 0 || d_ff < 0)
      throw DomainError("model: negative layer count or width");
    for (int w : phase_hidden)
      if (w < 1)
        throw DomainError("model: phase hidden widths must be positive");
    if (sector.n_alpha < 0 || sector.n_beta < 0 || sector.n_alpha > n_orb || sector.n_beta > n_orb)
      throw DomainError("model: sector exceeds orbital count");
  }
};

inline nlohmann::json to_json(const ModelConfig &c) {
  return {{"n_orb", c.n_orb},     {"d_model", c.d_model},           {"n_heads", c.n_heads},
          {"n_layers", c.n_layers}, {"d_ff", c.ff_width()},           {"phase_hidden", c.phase_hidden},
          {"n_alpha", c.sector.n_alpha}, {"n_beta", c.sector.n_beta}};
}

inline ModelConfig model_config_from_json(const nlohmann::json &j) {
  try {
    ModelConfig c;
    c.n_orb = j.at("n_orb").get<int>();
    c.d_model = j.value("d_model", 32);
    c.n_heads = j.value("n_heads", 4);
    c.n_layers = j.value("n_layers", 4);
    c.d_ff = j.value("d_ff", 0);
    c.phase_hidden = j.value("phase_hidden", std::vector<int>{512, 512});
    c.sector = {j.at("n_alpha").get<int>(), j.at("n_beta").get<int>()};
    c.validate();
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
}

namespace nn {

inline constexpr int kVocab = 4;
inline constexpr int kBegin = 4;

enum class Init { Normal, FanIn, PhaseOut, Zero, One };

struct Block {
  std::string name;
  Eigen::Index rows, cols;
  std::size_t offset;
  Init init;
};

/// Named parameter blocks in storage order.
struct Layout {
  std::vector<Block> blocks;
  std::size_t total = 0;
  // indices into blocks
  int tok = 0, pos = 1;
  int layer0 = 2;
  static constexpr int kPerLayer = 16;
  int lnf_g = 0, lnf_b = 0, w_out = 0, b_out = 0;
  int phase0 = 0; // W, b pairs

  int layer(int l, int k) const { return layer0 + kPerLayer * l + k; }

  explicit Layout(const ModelConfig &c) {
    const Eigen::Index d = c.d_model, f = c.ff_width();
    auto add = [&](std::string name, Eigen::Index r, Eigen::Index col, Init init) {
      blocks.push_back({std::move(name), r, col, total, init});
      total += static_cast<std::size_t>(r * col);
      return static_cast<int>(blocks.size()) - 1;
    };
    tok = add("tok_embed", kVocab + 1, d, Init::Normal);
    pos = add("pos_embed", c.n_orb, d, Init::Normal);
    layer0 = static_cast<int>(blocks.size());
    for (int l = 0; l < c.n_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      add(p + "ln1.gain", 1, d, Init::One);
      add(p + "ln1.bias", 1, d, Init::Zero);
      for (const char *m : {"q", "k", "v", "o"}) {
        add(p + "w" + m, d, d, Init::Normal);
        add(p + "b" + m, 1, d, Init::Zero);
      }
      add(p + "ln2.gain", 1, d, Init::One);
      add(p + "ln2.bias", 1, d, Init::Zero);
      add(p + "ff.w1", d, f, Init::Normal);
      add(p + "ff.b1", 1, f, Init::Zero);
      add(p + "ff.w2", f, d, Init::Normal);
      add(p + "ff.b2", 1, d, Init::Zero);
    }
    lnf_g = add("lnf.gain", 1, d, Init::One);
    lnf_b = add("lnf.bias", 1, d, Init::Zero);
    w_out = add("out.w", d, kVocab, Init::Normal);
    b_out = add("out.b", 1, kVocab, Init::Zero);
    phase0 = static_cast<int>(blocks.size());
    Eigen::Index in = 2 * c.n_orb;
    std::vector<int> widths = c.phase_hidden;
    widths.push_back(4);
    for (std::size_t i = 0; i < widths.size(); ++i) {
      add("phase.w" + std::to_string(i), in, widths[i], i + 1 == widths.size() ? Init::PhaseOut : Init::FanIn);
      add("phase.b" + std::to_string(i), 1, widths[i], Init::Zero);
      in = widths[i];
    }
  }

  int phase_layers() const { return (static_cast<int>(blocks.size()) - phase0) / 2; }
  /// Output bias of the phase head.
  const Block &phase_out_bias() const { return blocks.back(); }
};

} // namespace nn

inline std::size_t parameter_count(const ModelConfig &c) { return nn::Layout(c).total; }

struct Model {
  ModelConfig config;
  std::vector<double> params;

  /// Seeded N(0, 0.02) decoder weights, unit gains, zero biases. The phase
  /// MLP uses 1/sqrt(fan_in) hidden layers and a 0.1 output layer: a zero or
  /// 0.02-scale phase head starts the state real and positive, where the
  /// phase gradient vanishes and VMC settles on an excited state.
  static Model init(const ModelConfig &c, std::uint64_t seed) {
    c.validate();
    const nn::Layout lay(c);
    Model m{c, std::vector<double>(lay.total, 0.0)};
    std::mt19937_64 rng(mix_seed(seed, 0x4e4e5153ull));
    std::normal_distribution<double> nd(0.0, 1.0);
    for (const auto &b : lay.blocks) {
      double sd = 0.0;
      switch (b.init) {
      case nn::Init::Normal: sd = 0.02; break;
      case nn::Init::FanIn: sd = 1.0 / std::sqrt(static_cast<double>(b.rows)); break;
      case nn::Init::PhaseOut: sd = 0.1; break;
      default: break;
      }
      for (Eigen::Index i = 0; i < b.rows * b.cols; ++i)
        m.params[b.offset + static_cast<std::size_t>(i)] = b.init == nn::Init::One ? 1.0 : sd * nd(rng);
    }
    return m;
  }

  void validate() const {
    config.validate();
    if (params.size() != parameter_count(config))
      throw DomainError("model: parameter count does not match config");
    for (double x : params)
      if (!std::isfinite(x))
        throw NumericalError("model: non-finite parameter");
  }
};

/// Token t_p = alpha bit + 2 * beta bit of orbital p.
inline std::vector<int> tokenize(const Configuration &c) {
  if (c.size() % 2)
    throw DomainError("tokenize: odd-length configuration " + c.str());
  std::vector<int> t(static_cast<std::size_t>(c.size() / 2));
  for (int p = 0; p < c.size() / 2; ++p)
    t[static_cast<std::size_t>(p)] = static_cast<int>(c.occupied(2 * p)) + 2 * static_cast<int>(c.occupied(2 * p + 1));
  return t;
}

inline Configuration detokenize(const std::vector<int> &tokens) {
  std::uint64_t bits = 0;
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    if (tokens[p] < 0 || tokens[p] > 3)
      throw DomainError("detokenize: token out of range");
    bits |= static_cast<std::uint64_t>(tokens[p] & 1) << (2 * p);
    bits |= static_cast<std::uint64_t>(tokens[p] >> 1) << (2 * p + 1);
  }
  return Configuration(bits, 2 * static_cast<int>(tokens.size()));
}

/// Allowed tokens at `position` given how many alpha/beta electrons the
/// prefix already holds. Bit t of the result is set when token t is allowed.
inline unsigned sector_mask(Sector s, int n_orb, int a_used, int b_used, int position) {
  const int remaining = n_orb - position - 1;
  unsigned allowed = 0;
  for (int t = 0; t < 4; ++t) {
    const int na = t & 1, nb = t >> 1;
    if (a_used + na <= s.n_alpha && b_used + nb <= s.n_beta && s.n_alpha - a_used - na <= remaining &&
        s.n_beta - b_used - nb <= remaining)
      allowed |= 1u << t;
  }
  return allowed;
}

namespace nn {

inline std::vector<ad::Var> bind(ad::Tape &t, const Model &m, bool trainable) {
  const Layout lay(m.config);
  std::vector<ad::Var> vs;
  vs.reserve(lay.blocks.size());
  for (const auto &b : lay.blocks) {
    ad::Mat v = Eigen::Map<const ad::Mat>(m.params.data() + b.offset, b.rows, b.cols);
    vs.push_back(trainable ? t.parameter(std::move(v)) : t.constant(std::move(v)));
  }
  return vs;
}

/// Parameter gradients after backward, flattened in storage order.
inline std::vector<double> gather_grad(const ad::Tape &t, const Model &m, const std::vector<ad::Var> &vs) {
  const Layout lay(m.config);
  std::vector<double> g(lay.total, 0.0);
  for (std::size_t k = 0; k < vs.size(); ++k) {
    const auto &gk = t.grad(vs[k]);
    if (gk.size())
      std::copy(gk.data(), gk.data() + gk.size(), g.begin() + static_cast<std::ptrdiff_t>(lay.blocks[k].offset));
  }
  return g;
}

/// Decoder logits for `batch` input sequences of length `seq` (row-major
/// token ids, begin token included). Returns (batch*seq) x 4.
inline ad::Var decoder_logits(ad::Tape &, const ModelConfig &c, const std::vector<ad::Var> &P,
                              const std::vector<int> &tokens_in, Eigen::Index batch, Eigen::Index seq) {
  const Layout lay(c);
  std::vector<int> pos(tokens_in.size());
  for (std::size_t i = 0; i < pos.size(); ++i)
    pos[i] = static_cast<int>(i % static_cast<std::size_t>(seq));
  auto x = ad::add(ad::embedding(P[static_cast<std::size_t>(lay.tok)], tokens_in),
                   ad::embedding(P[static_cast<std::size_t>(lay.pos)], pos));
  auto W = [&](int l, int k) { return P[static_cast<std::size_t>(lay.layer(l, k))]; };
  for (int l = 0; l < c.n_layers; ++l) {
    auto h = ad::layer_norm(x, W(l, 0), W(l, 1));
    const auto q = ad::add_bias(ad::matmul(h, W(l, 2)), W(l, 3));
    const auto k = ad::add_bias(ad::matmul(h, W(l, 4)), W(l, 5));
    const auto v = ad::add_bias(ad::matmul(h, W(l, 6)), W(l, 7));
    const auto a = ad::causal_attention(q, k, v, batch, seq, c.n_heads);
    x = ad::add(x, ad::add_bias(ad::matmul(a, W(l, 8)), W(l, 9)));
    h = ad::layer_norm(x, W(l, 10), W(l, 11));
    const auto f = ad::gelu(ad::add_bias(ad::matmul(h, W(l, 12)), W(l, 13)));
    x = ad::add(x, ad::add_bias(ad::matmul(f, W(l, 14)), W(l, 15)));
  }
  x = ad::layer_norm(x, P[static_cast<std::size_t>(lay.lnf_g)], P[static_cast<std::size_t>(lay.lnf_b)]);
  return ad::add_bias(ad::matmul(x, P[static_cast<std::size_t>(lay.w_out)]), P[static_cast<std::size_t>(lay.b_out)]);
}

/// Phase MLP on the +-1 occupation encoding; returns batch x 1.
inline ad::Var phase_head(ad::Tape &t, const ModelConfig &c, const std::vector<ad::Var> &P,
                          const std::vector<Configuration> &configs) {
  const Layout lay(c);
  ad::Mat in(static_cast<Eigen::Index>(configs.size()), 2 * c.n_orb);
  for (std::size_t b = 0; b < configs.size(); ++b)
    for (int q = 0; q < 2 * c.n_orb; ++q)
      in(static_cast<Eigen::Index>(b), q) = configs[b].occupied(q) ? -1.0 : 1.0;
  auto h = t.constant(std::move(in));
  const int L = lay.phase_layers();
  for (int i = 0; i < L; ++i) {
    h = ad::add_bias(ad::matmul(h, P[static_cast<std::size_t>(lay.phase0 + 2 * i)]),
                     P[static_cast<std::size_t>(lay.phase0 + 2 * i + 1)]);
    if (i + 1 < L)
      h = ad::tanh(h);
  }
  return ad::sum_cols(h);
}

struct Scores {
  ad::Var log_prob; // batch x 1
  ad::Var phase;    // batch x 1
};

/// Taped log p and phase for in-sector configurations.
inline Scores score(ad::Tape &t, const ModelConfig &c, const std::vector<ad::Var> &P,
                    const std::vector<Configuration> &configs) {
  const int n = c.n_orb;
  const auto B = static_cast<Eigen::Index>(configs.size());
  std::vector<int> in(static_cast<std::size_t>(B * n)), target(static_cast<std::size_t>(B * n));
  ad::Mat mask = ad::Mat::Zero(B * n, 4);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto &cfg = configs[static_cast<std::size_t>(b)];
    if (cfg.size() != 2 * n || !(cfg.sector() == c.sector))
      throw DomainError("score: configuration " + cfg.str() + " outside the model sector");
    const auto tok = tokenize(cfg);
    int au = 0, bu = 0;
    for (int p = 0; p < n; ++p) {
      const auto r = static_cast<std::size_t>(b * n + p);
      in[r] = p == 0 ? kBegin : tok[static_cast<std::size_t>(p - 1)];
      target[r] = tok[static_cast<std::size_t>(p)];
      const unsigned allowed = sector_mask(c.sector, n, au, bu, p);
      for (int k = 0; k < 4; ++k)
        if (!((allowed >> k) & 1u))
          mask(static_cast<Eigen::Index>(r), k) = 1.0;
      au += tok[static_cast<std::size_t>(p)] & 1;
      bu += tok[static_cast<std::size_t>(p)] >> 1;
    }
  }
  const auto logits = decoder_logits(t, c, P, in, B, n);
  const auto ls = ad::log_softmax_rows(ad::masked_fill(logits, mask, -std::numeric_limits<double>::infinity()));
  return {ad::segment_sum(ad::pick(ls, target), n), phase_head(t, c, P, configs)};
}

} // namespace nn

struct ModelValues {
  std::vector<double> log_prob; // -inf outside the sector
  std::vector<double> phase;
};

/// Untaped evaluation in fixed-size chunks.
inline ModelValues evaluate(const Model &m, const std::vector<Configuration> &configs, std::size_t chunk = 1024) {
  ModelValues out{std::vector<double>(configs.size(), -std::numeric_limits<double>::infinity()),
                  std::vector<double>(configs.size(), 0.0)};
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (configs[i].size() != 2 * m.config.n_orb)
      throw DomainError("evaluate: configuration length does not match the model");
    if (configs[i].sector() == m.config.sector)
      idx.push_back(i);
  }
  const auto n_chunks = static_cast<std::ptrdiff_t>((idx.size() + chunk - 1) / chunk);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ch = 0; ch < n_chunks; ++ch) {
    const std::size_t lo = static_cast<std::size_t>(ch) * chunk, hi = std::min(idx.size(), lo + chunk);
    std::vector<Configuration> part;
    for (std::size_t i = lo; i < hi; ++i)
      part.push_back(configs[idx[i]]);
    ad::Tape t;
    const auto P = nn::bind(t, m, false);
    const auto s = nn::score(t, m.config, P, part);
    for (std::size_t i = lo; i < hi; ++i) {
      out.log_prob[idx[i]] = s.log_prob.value()(static_cast<Eigen::Index>(i - lo), 0);
      out.phase[idx[i]] = s.phase.value()(static_cast<Eigen::Index>(i - lo), 0);
    }
  }
  return out;
}

/// (log p, phase) of a single configuration; log p = -inf outside the sector.
inline std::pair<double, double> log_prob_and_phase(const Model &m, const Configuration &x) {
  const auto v = evaluate(m, {x});
  return {v.log_prob[0], v.phase[0]};
}

/// psi(x) = sqrt(p(x)) * exp(i phi(x)).
inline std::vector<cplx> model_amplitudes(const Model &m, const std::vector<Configuration> &configs) {
  const auto v = evaluate(m, configs);
  std::vector<cplx> a(configs.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = std::isinf(v.log_prob[i]) ? cplx(0.0) : std::polar(std::exp(0.5 * v.log_prob[i]), v.phase[i]);
  return a;
}

struct SampleBatch {
  struct Entry {
    Configuration config;
    std::uint64_t count = 0;
    double log_prob = 0.0;       // from a final scoring pass
    double chain_log_prob = 0.0; // sum of the conditionals used while sampling
    double phase = 0.0;
  };
  std::vector<Entry> entries;
  std::uint64_t total = 0;
};

namespace nn {

/// Binomial split of `n` over the allowed tokens with the given conditionals.
inline std::array<std::uint64_t, 4> split(std::uint64_t n, const std::array<double, 4> &p, std::mt19937_64 &rng) {
  std::array<std::uint64_t, 4> k{};
  double mass = 1.0;
  int last = 3;
  while (last > 0 && p[static_cast<std::size_t>(last)] == 0.0)
    --last;
  for (int t = 0; t < 4 && n > 0; ++t) {
    const double pt = p[static_cast<std::size_t>(t)];
    if (pt == 0.0)
      continue;
    if (t == last || pt >= mass) {
      k[static_cast<std::size_t>(t)] = n;
      break;
    }
    std::binomial_distribution<std::uint64_t> bd(n, std::clamp(pt / mass, 0.0, 1.0));
    const auto kt = bd(rng);
    k[static_cast<std::size_t>(t)] = kt;
    n -= kt;
    mass -= pt;
  }
  return k;
}

} // namespace nn

/// Tree-splitting autoregressive sampler. Each prefix draws its split from
/// a generator keyed on (seed, position, prefix), so the result does not
/// depend on evaluation order.
inline SampleBatch sample_batch(const Model &m, std::uint64_t n_samples, std::uint64_t seed) {
  if (n_samples < 1)
    throw DomainError("sample_batch: n_samples must be >= 1");
  const auto &c = m.config;
  const int n = c.n_orb;
  struct Prefix {
    std::vector<int> tok;
    std::uint64_t count;
    double log_prob;
    int au, bu;
  };
  std::vector<Prefix> cur{{{}, n_samples, 0.0, 0, 0}};
  for (int p = 0; p < n; ++p) {
    const auto B = static_cast<Eigen::Index>(cur.size());
    std::vector<int> in(static_cast<std::size_t>(B * (p + 1)));
    for (Eigen::Index b = 0; b < B; ++b)
      for (int s = 0; s <= p; ++s)
        in[static_cast<std::size_t>(b * (p + 1) + s)] =
            s == 0 ? nn::kBegin : cur[static_cast<std::size_t>(b)].tok[static_cast<std::size_t>(s - 1)];
    ad::Tape t;
    const auto P = nn::bind(t, m, false);
    const ad::Mat logits = nn::decoder_logits(t, c, P, in, B, p + 1).value();
    std::vector<Prefix> next;
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto &pre = cur[static_cast<std::size_t>(b)];
      const unsigned allowed = sector_mask(c.sector, n, pre.au, pre.bu, p);
      const auto row = logits.row(b * (p + 1) + p);
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < 4; ++k)
        if ((allowed >> k) & 1u)
          mx = std::max(mx, row(k));
      std::array<double, 4> lp{}, pr{};
      double z = 0.0;
      for (int k = 0; k < 4; ++k)
        if ((allowed >> k) & 1u)
          z += std::exp(row(k) - mx);
      for (int k = 0; k < 4; ++k) {
        const bool ok = (allowed >> k) & 1u;
        lp[static_cast<std::size_t>(k)] = ok ? row(k) - mx - std::log(z) : -std::numeric_limits<double>::infinity();
        pr[static_cast<std::size_t>(k)] = ok ? std::exp(lp[static_cast<std::size_t>(k)]) : 0.0;
      }
      std::uint64_t key = mix_seed(seed, static_cast<std::uint64_t>(p));
      for (int tk : pre.tok)
        key = mix_seed(key, static_cast<std::uint64_t>(tk));
      std::mt19937_64 rng(key);
      const auto k = nn::split(pre.count, pr, rng);
      for (int tk = 0; tk < 4; ++tk) {
        if (!k[static_cast<std::size_t>(tk)])
          continue;
        Prefix nx{pre.tok, k[static_cast<std::size_t>(tk)], pre.log_prob + lp[static_cast<std::size_t>(tk)],
                  pre.au + (tk & 1), pre.bu + (tk >> 1)};
        nx.tok.push_back(tk);
        next.push_back(std::move(nx));
      }
    }
    cur = std::move(next);
  }
  SampleBatch out;
  std::vector<Configuration> configs;
  for (const auto &pre : cur)
    configs.push_back(detokenize(pre.tok));
  const auto v = evaluate(m, configs);
  for (std::size_t i = 0; i < cur.size(); ++i) {
    out.entries.push_back({configs[i], cur[i].count, v.log_prob[i], cur[i].log_prob, v.phase[i]});
    out.total += cur[i].count;
  }
  return out;
}

/// Scores every sector configuration into a table (sectors up to 1e5).
inline WavefunctionTable model_dump(const Model &m, std::uint64_t limit = 100'000) {
  const auto &c = m.config;
  if (sector_dimension(c.n_orb, c.sector) > limit)
    throw CapacityError("model_dump: sector too large to enumerate");
  const auto configs = enumerate_sector(c.n_orb, c.sector);
  const auto amps = model_amplitudes(m, configs);
  WavefunctionTable t;
  t.source = "model-dump";
  t.n_qubits = 2 * c.n_orb;
  t.sector = c.sector;
  for (std::size_t i = 0; i < configs.size(); ++i)
    t.entries.push_back({configs[i], amps[i]});
  t.sort_by_magnitude();
  return t;
}

// Checkpoint: 8-byte magic, uint64 header length, JSON header, uint64
// parameter count, little-endian doubles.
inline constexpr char kCheckpointMagic[9] = "NQSVQEM1";

inline void save_checkpoint(const Model &m, const std::string &path, const nlohmann::json &extra = {}) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
  m.validate();
  nlohmann::json h{{"config", to_json(m.config)}, {"n_params", m.params.size()}};
  if (!extra.is_null())
    h["meta"] = extra;
  const std::string hs = h.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw Error("save_checkpoint: cannot open " + path);
  const std::uint64_t hl = hs.size(), np = m.params.size();
  f.write(kCheckpointMagic, 8);
  f.write(reinterpret_cast<const char *>(&hl), 8);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  f.write(reinterpret_cast<const char *>(&np), 8);
  f.write(reinterpret_cast<const char *>(m.params.data()), static_cast<std::streamsize>(8 * np));
  if (!f)
    throw Error("save_checkpoint: write failed for " + path);
}

inline Model load_checkpoint(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw Error("load_checkpoint: cannot open " + path);
  char magic[8];
  std::uint64_t hl = 0, np = 0;
  if (!f.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError("load_checkpoint: bad magic in " + path);
  if (!f.read(reinterpret_cast<char *>(&hl), 8) || hl > (1u << 20))
    throw ParseError("load_checkpoint: bad header length");
  std::string hs(hl, '\0');
  if (!f.read(hs.data(), static_cast<std::streamsize>(hl)))
    throw ParseError("load_checkpoint: truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("load_checkpoint: ") + e.what());
  }
  Model m{model_config_from_json(h.at("config")), {}};
  if (!f.read(reinterpret_cast<char *>(&np), 8) || np != parameter_count(m.config))
    throw ParseError("load_checkpoint: parameter count does not match the header config");
  m.params.resize(np);
  if (!f.read(reinterpret_cast<char *>(m.params.data()), static_cast<std::streamsize>(8 * np)))
    throw ParseError("load_checkpoint: truncated parameter array");
  m.validate();
  return m;
}

} // namespace nqsvqe
