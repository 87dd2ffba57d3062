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
// Reverse-mode differentiation over dense row-major matrices. Every op
// appends a node; backward() replays the nodes in reverse.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nqsvqe/common.hpp"

namespace nqsvqe::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_str(const Mat &m) { return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]"; }

class Tape;

/// Handle to a tape node.
struct Var {
  Tape *tape = nullptr;
  int id = -1;
  const Mat &value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Tape {
public:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    bool is_param = false;
    std::function<void(Tape &, int)> backward; // pushes this node's grad to its inputs
  };

  Var constant(Mat v) { return push(std::move(v), false, false, nullptr); }
  Var parameter(Mat v) { return push(std::move(v), true, true, nullptr); }

  const Mat &value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Mat &grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of a parameter leaf after backward(); zero-sized if the leaf
  /// does not feed the output.
  const Mat &grad(Var v) const { return grad(v.id); }

  /// Accumulates `g` into the gradient of node `id` (used by op closures).
  void accumulate(int id, const Mat &g) {
    auto &n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad)
      return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  /// Reverse pass from a scalar node. Gradients from an earlier pass are
  /// cleared first, so repeated calls give identical results.
  void backward(Var out) {
    if (out.tape != this)
      throw DomainError("backward: variable belongs to another tape");
    const auto &o = value(out.id);
    if (o.rows() != 1 || o.cols() != 1)
      throw DomainError("backward: output must be scalar, got " + shape_str(o));
    for (auto &n : nodes_)
      n.grad.resize(0, 0);
    nodes_[static_cast<std::size_t>(out.id)].grad = Mat::Ones(1, 1);
    for (int i = out.id; i >= 0; --i) {
      auto &n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward && n.grad.size() != 0)
        n.backward(*this, i);
    }
  }

  Var push(Mat v, bool needs_grad, bool is_param, std::function<void(Tape &, int)> bw) {
    nodes_.push_back({std::move(v), Mat(), needs_grad, is_param, std::move(bw)});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

private:
  std::vector<Node> nodes_;
};

inline const Mat &Var::value() const { return tape->value(id); }

namespace detail {

inline void same_tape(const Var &a, const Var &b, const char *op) {
  if (a.tape != b.tape)
    throw DomainError(std::string(op) + ": operands on different tapes");
}

inline void shape_error(const char *op, const Mat &a, const Mat &b) {
  throw DomainError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

inline bool any_grad(std::initializer_list<Var> vs) {
  for (const auto &v : vs)
    if (v.tape->needs_grad(v.id))
      return true;
  return false;
}

} // namespace detail

inline Var matmul(Var a, Var b) {
  detail::same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    detail::shape_error("matmul", a.value(), b.value());
  Mat out = a.value() * b.value();
  const int ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), detail::any_grad({a, b}), false, [ia, ib](Tape &t, int self) {
    const Mat &g = t.grad(self);
    if (t.needs_grad(ia))
      t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib))
      t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

inline Var add(Var a, Var b) {
  detail::same_tape(a, b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols())
    detail::shape_error("add", a.value(), b.value());
  const int ia = a.id, ib = b.id;
  return a.tape->push(a.value() + b.value(), detail::any_grad({a, b}), false, [ia, ib](Tape &t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

/// a[m x n] + row vector b[1 x n] on every row (the only broadcast).
inline Var add_bias(Var a, Var b) {
  detail::same_tape(a, b, "add_bias");
  if (b.rows() != 1 || a.cols() != b.cols())
    detail::shape_error("add_bias", a.value(), b.value());
  Mat out = a.value().rowwise() + b.value().row(0);
  const int ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), detail::any_grad({a, b}), false, [ia, ib](Tape &t, int self) {
    t.accumulate(ia, t.grad(self));
    if (t.needs_grad(ib))
      t.accumulate(ib, t.grad(self).colwise().sum());
  });
}

/// Elementwise product.
inline Var multiply(Var a, Var b) {
  detail::same_tape(a, b, "multiply");
  if (a.rows() != b.rows() || a.cols() != b.cols())
    detail::shape_error("multiply", a.value(), b.value());
  Mat out = a.value().cwiseProduct(b.value());
  const int ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), detail::any_grad({a, b}), false, [ia, ib](Tape &t, int self) {
    if (t.needs_grad(ia))
      t.accumulate(ia, t.grad(self).cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib))
      t.accumulate(ib, t.grad(self).cwiseProduct(t.value(ia)));
  });
}

inline Var scale(Var a, double s) {
  const int ia = a.id;
  return a.tape->push(a.value() * s, detail::any_grad({a}), false,
                      [ia, s](Tape &t, int self) { t.accumulate(ia, t.grad(self) * s); });
}

/// Column-wise concatenation of equal-height blocks.
inline Var concat(const std::vector<Var> &parts) {
  if (parts.empty())
    throw DomainError("concat: no inputs");
  const Eigen::Index r = parts[0].rows();
  Eigen::Index c = 0;
  bool ng = false;
  for (const auto &p : parts) {
    detail::same_tape(parts[0], p, "concat");
    if (p.rows() != r)
      detail::shape_error("concat", parts[0].value(), p.value());
    c += p.cols();
    ng = ng || p.tape->needs_grad(p.id);
  }
  Mat out(r, c);
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  Eigen::Index off = 0;
  for (const auto &p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    ids.push_back(p.id);
    widths.push_back(p.cols());
  }
  return parts[0].tape->push(std::move(out), ng, false, [ids, widths](Tape &t, int self) {
    Eigen::Index o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.needs_grad(ids[k]))
        t.accumulate(ids[k], t.grad(self).middleCols(o, widths[k]));
      o += widths[k];
    }
  });
}

inline Var slice(Var a, Eigen::Index row0, Eigen::Index rows, Eigen::Index col0, Eigen::Index cols) {
  if (row0 < 0 || col0 < 0 || rows < 0 || cols < 0 || row0 + rows > a.rows() || col0 + cols > a.cols())
    throw DomainError("slice: block exceeds " + shape_str(a.value()));
  const int ia = a.id;
  const Eigen::Index R = a.rows(), C = a.cols();
  return a.tape->push(a.value().block(row0, col0, rows, cols), detail::any_grad({a}), false,
                      [=](Tape &t, int self) {
                        Mat g = Mat::Zero(R, C);
                        g.block(row0, col0, rows, cols) = t.grad(self);
                        t.accumulate(ia, g);
                      });
}

/// Rows of `table` selected by `index`.
inline Var embedding(Var table, const std::vector<int> &index) {
  const int it = table.id;
  Mat out(static_cast<Eigen::Index>(index.size()), table.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= table.rows())
      throw DomainError("embedding: index " + std::to_string(index[r]) + " outside table " + shape_str(table.value()));
    out.row(static_cast<Eigen::Index>(r)) = table.value().row(index[r]);
  }
  const Eigen::Index R = table.rows(), C = table.cols();
  return table.tape->push(std::move(out), detail::any_grad({table}), false, [it, index, R, C](Tape &t, int self) {
    Mat g = Mat::Zero(R, C);
    for (std::size_t r = 0; r < index.size(); ++r)
      g.row(index[r]) += t.grad(self).row(static_cast<Eigen::Index>(r));
    t.accumulate(it, g);
  });
}

/// Per-row normalization with affine gain/bias; var uses the 1/n form.
inline Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5) {
  detail::same_tape(a, gain, "layer_norm");
  if (gain.rows() != 1 || gain.cols() != a.cols() || bias.rows() != 1 || bias.cols() != a.cols())
    detail::shape_error("layer_norm", a.value(), gain.value());
  const Eigen::Index n = a.cols();
  const Mat &x = a.value();
  Mat xhat(x.rows(), n);
  Eigen::VectorXd inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv(r);
  }
  Mat out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  const int ia = a.id, ig = gain.id, ib = bias.id;
  return a.tape->push(std::move(out), detail::any_grad({a, gain, bias}), false,
                      [ia, ig, ib, xhat, inv](Tape &t, int self) {
                        const Mat &g = t.grad(self);
                        if (t.needs_grad(ig))
                          t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
                        if (t.needs_grad(ib))
                          t.accumulate(ib, g.colwise().sum());
                        if (t.needs_grad(ia)) {
                          const Mat gx = g.array().rowwise() * t.value(ig).row(0).array();
                          const double n = static_cast<double>(gx.cols());
                          Mat dx(gx.rows(), gx.cols());
                          for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                            const double m1 = gx.row(r).mean();
                            const double m2 = gx.row(r).cwiseProduct(xhat.row(r)).sum() / n;
                            dx.row(r) = inv(r) * (gx.row(r).array() - m1 - xhat.row(r).array() * m2);
                          }
                          t.accumulate(ia, dx);
                        }
                      });
}

/// Entries where mask is nonzero are replaced by `value`; no gradient flows there.
inline Var masked_fill(Var a, const Mat &mask, double value) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols())
    detail::shape_error("masked_fill", a.value(), mask);
  Mat out = a.value();
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (mask.data()[i] != 0.0)
      out.data()[i] = value;
  const int ia = a.id;
  return a.tape->push(std::move(out), detail::any_grad({a}), false, [ia, mask](Tape &t, int self) {
    Mat g = t.grad(self);
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (mask.data()[i] != 0.0)
        g.data()[i] = 0.0;
    t.accumulate(ia, g);
  });
}

namespace detail {

inline Mat softmax_rows_value(const Mat &x) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    if (m == -std::numeric_limits<double>::infinity())
      throw DomainError("softmax_rows: row " + std::to_string(r) + " is fully masked");
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

} // namespace detail

/// Max-subtracted softmax; -inf entries give probability 0.
inline Var softmax_rows(Var a) {
  Mat y = detail::softmax_rows_value(a.value());
  const int ia = a.id;
  return a.tape->push(y, detail::any_grad({a}), false, [ia, y](Tape &t, int self) {
    const Mat &g = t.grad(self);
    Mat dx(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double s = g.row(r).cwiseProduct(y.row(r)).sum();
      dx.row(r) = y.row(r).array() * (g.row(r).array() - s);
    }
    t.accumulate(ia, dx);
  });
}

inline Var log_softmax_rows(Var a) {
  const Mat &x = a.value();
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    if (m == -std::numeric_limits<double>::infinity())
      throw DomainError("log_softmax_rows: row " + std::to_string(r) + " is fully masked");
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  const int ia = a.id;
  Mat p = out.array().exp();
  return a.tape->push(std::move(out), detail::any_grad({a}), false, [ia, p](Tape &t, int self) {
    const Mat &g = t.grad(self);
    Mat dx(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        if (p(r, c) > 0.0)
          s += g(r, c);
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        dx(r, c) = p(r, c) > 0.0 ? g(r, c) - p(r, c) * s : 0.0;
    }
    t.accumulate(ia, dx);
  });
}

/// Exact gelu: x * Phi(x).
inline Var gelu(Var a) {
  const Mat &x = a.value();
  Mat out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
  const int ia = a.id;
  return a.tape->push(std::move(out), detail::any_grad({a}), false, [ia](Tape &t, int self) {
    const Mat d = t.value(ia).unaryExpr([](double v) {
      return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)) + v * std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
    });
    t.accumulate(ia, t.grad(self).cwiseProduct(d));
  });
}

inline Var tanh(Var a) {
  Mat y = a.value().array().tanh();
  const int ia = a.id;
  return a.tape->push(y, detail::any_grad({a}), false, [ia, y](Tape &t, int self) {
    t.accumulate(ia, t.grad(self).array() * (1.0 - y.array().square()));
  });
}

inline Var log(Var a) {
  if ((a.value().array() <= 0.0).any())
    throw DomainError("log: non-positive entry");
  const int ia = a.id;
  return a.tape->push(a.value().array().log(), detail::any_grad({a}), false, [ia](Tape &t, int self) {
    t.accumulate(ia, t.grad(self).array() / t.value(ia).array());
  });
}

inline Var exp(Var a) {
  Mat y = a.value().array().exp();
  const int ia = a.id;
  return a.tape->push(y, detail::any_grad({a}), false,
                      [ia, y](Tape &t, int self) { t.accumulate(ia, t.grad(self).cwiseProduct(y)); });
}

inline Var cos(Var a) {
  const int ia = a.id;
  return a.tape->push(a.value().array().cos(), detail::any_grad({a}), false, [ia](Tape &t, int self) {
    t.accumulate(ia, -t.grad(self).array() * t.value(ia).array().sin());
  });
}

/// Sum of all entries, 1x1.
inline Var sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  const int ia = a.id;
  const Eigen::Index R = a.rows(), C = a.cols();
  return a.tape->push(std::move(out), detail::any_grad({a}), false,
                      [ia, R, C](Tape &t, int self) { t.accumulate(ia, Mat::Constant(R, C, t.grad(self)(0, 0))); });
}

/// Row sums, m x 1.
inline Var sum_cols(Var a) {
  Mat out = a.value().rowwise().sum();
  const int ia = a.id;
  const Eigen::Index C = a.cols();
  return a.tape->push(std::move(out), detail::any_grad({a}), false,
                      [ia, C](Tape &t, int self) { t.accumulate(ia, t.grad(self).replicate(1, C)); });
}

/// Sums consecutive blocks of `block` rows: (B*block) x n -> B x n.
inline Var segment_sum(Var a, Eigen::Index block) {
  if (block <= 0 || a.rows() % block)
    throw DomainError("segment_sum: " + std::to_string(a.rows()) + " rows not divisible by " + std::to_string(block));
  const Eigen::Index B = a.rows() / block;
  Mat out = Mat::Zero(B, a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    out.row(r / block) += a.value().row(r);
  const int ia = a.id;
  return a.tape->push(std::move(out), detail::any_grad({a}), false, [ia, block](Tape &t, int self) {
    const Mat &g = t.grad(self);
    Mat d(g.rows() * block, g.cols());
    for (Eigen::Index r = 0; r < d.rows(); ++r)
      d.row(r) = g.row(r / block);
    t.accumulate(ia, d);
  });
}

/// out[r] = a[r, index[r]], m x 1.
inline Var pick(Var a, const std::vector<int> &index) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows())
    throw DomainError("pick: one index per row required");
  Mat out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const int c = index[static_cast<std::size_t>(r)];
    if (c < 0 || c >= a.cols())
      throw DomainError("pick: column index out of range");
    out(r, 0) = a.value()(r, c);
  }
  const int ia = a.id;
  const Eigen::Index R = a.rows(), C = a.cols();
  return a.tape->push(std::move(out), detail::any_grad({a}), false, [ia, index, R, C](Tape &t, int self) {
    Mat g = Mat::Zero(R, C);
    for (Eigen::Index r = 0; r < R; ++r)
      g(r, index[static_cast<std::size_t>(r)]) = t.grad(self)(r, 0);
    t.accumulate(ia, g);
  });
}

/// Weighted sum sum_r w[r] * a[r, 0] with constant weights, 1x1.
inline Var weighted_sum(Var a, const Eigen::VectorXd &w) {
  if (a.cols() != 1 || a.rows() != w.size())
    throw DomainError("weighted_sum: expects an m x 1 input and m weights");
  Mat out(1, 1);
  out(0, 0) = a.value().col(0).dot(w);
  const int ia = a.id;
  return a.tape->push(std::move(out), detail::any_grad({a}), false,
                      [ia, w](Tape &t, int self) { t.accumulate(ia, Mat(w * t.grad(self)(0, 0))); });
}

/// Multi-head causal self-attention over `batch` sequences of length `seq`
/// stacked as rows: q, k, v are (batch*seq) x d with d split into `heads`.
inline Var causal_attention(Var q, Var k, Var v, Eigen::Index batch, Eigen::Index seq, int heads) {
  detail::same_tape(q, k, "causal_attention");
  detail::same_tape(q, v, "causal_attention");
  const Eigen::Index d = q.cols();
  if (q.rows() != batch * seq || k.rows() != q.rows() || v.rows() != q.rows() || k.cols() != d || v.cols() != d ||
      heads <= 0 || d % heads)
    detail::shape_error("causal_attention", q.value(), k.value());
  const Eigen::Index dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat &Q = q.value(), &K = k.value(), &V = v.value();
  Mat out = Mat::Zero(q.rows(), d);
  // attention weights per (batch, head): seq x seq lower triangular
  std::vector<Mat> P(static_cast<std::size_t>(batch * heads));
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int h = 0; h < heads; ++h) {
      const auto Qb = Q.block(b * seq, h * dh, seq, dh);
      const auto Kb = K.block(b * seq, h * dh, seq, dh);
      const auto Vb = V.block(b * seq, h * dh, seq, dh);
      Mat S = (Qb * Kb.transpose()) * sc;
      for (Eigen::Index i = 0; i < seq; ++i)
        for (Eigen::Index j = i + 1; j < seq; ++j)
          S(i, j) = -std::numeric_limits<double>::infinity();
      Mat A = detail::softmax_rows_value(S);
      out.block(b * seq, h * dh, seq, dh) = A * Vb;
      P[static_cast<std::size_t>(b * heads + h)] = std::move(A);
    }
  const int iq = q.id, ik = k.id, iv = v.id;
  return q.tape->push(std::move(out), detail::any_grad({q, k, v}), false,
                      [=, P = std::move(P)](Tape &t, int self) {
                        const Mat &G = t.grad(self);
                        const Mat &Qv = t.value(iq), &Kv = t.value(ik), &Vv = t.value(iv);
                        Mat dQ = Mat::Zero(Qv.rows(), d), dK = Mat::Zero(Qv.rows(), d), dV = Mat::Zero(Qv.rows(), d);
                        for (Eigen::Index b = 0; b < batch; ++b)
                          for (int h = 0; h < heads; ++h) {
                            const Mat &A = P[static_cast<std::size_t>(b * heads + h)];
                            const Mat Gb = G.block(b * seq, h * dh, seq, dh);
                            const Mat Vb = Vv.block(b * seq, h * dh, seq, dh);
                            dV.block(b * seq, h * dh, seq, dh) = A.transpose() * Gb;
                            const Mat dA = Gb * Vb.transpose();
                            Mat dS(seq, seq);
                            for (Eigen::Index i = 0; i < seq; ++i) {
                              const double s = dA.row(i).cwiseProduct(A.row(i)).sum();
                              dS.row(i) = A.row(i).array() * (dA.row(i).array() - s);
                            }
                            dS *= sc;
                            dQ.block(b * seq, h * dh, seq, dh) = dS * Kv.block(b * seq, h * dh, seq, dh);
                            dK.block(b * seq, h * dh, seq, dh) = dS.transpose() * Qv.block(b * seq, h * dh, seq, dh);
                          }
                        t.accumulate(iq, dQ);
                        t.accumulate(ik, dK);
                        t.accumulate(iv, dV);
                      });
}

} // namespace nqsvqe::ad
