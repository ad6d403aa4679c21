#include "rrk/autograd.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace rrk {

const Matrix& Var::value() const { return tape->value(*this); }
const Matrix& Var::grad() const { return tape->grad(*this); }

std::size_t Tape::check(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::invalid_argument("variable does not belong to this tape");
  }
  return static_cast<std::size_t>(v.id);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(const Matrix& value, bool requires_grad) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = record_ && requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[check(v)];
  return n.borrowed ? *n.borrowed : n.owned;
}

const Matrix& Tape::grad(Var v) const {
  if (!record_) throw std::logic_error("gradient requested from a non-recording tape");
  return nodes_[check(v)].grad;
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(backward));
}

Var Tape::push(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  if (record_) {
    for (Var in : inputs) {
      if (nodes_[check(in)].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Matrix& Tape::grad_slot(Var v) {
  Node& n = nodes_[check(v)];
  if (n.grad.size() == 0) {
    const Matrix& val = n.borrowed ? *n.borrowed : n.owned;
    n.grad = Matrix::Zero(val.rows(), val.cols());
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  if (!nodes_[check(v)].requires_grad) return;
  grad_slot(v) += g;
}

void Tape::backward(Var loss) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  const std::size_t root = check(loss);
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got " + shape_string(lv));
  }
  if (!nodes_[root].requires_grad) return;
  grad_slot(loss).setConstant(1.0);
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

namespace ops {
namespace {

bool needs(Tape& t, Var v) { return t.recording() && t.requires_grad(v); }

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  Matrix out = rrk::matmul(a.value(), b.value());
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (needs(t, a)) t.grad_slot(a).noalias() += g * b.value().transpose();
    if (needs(t, b)) t.grad_slot(b).noalias() += a.value().transpose() * g;
  });
}

Var linear(Var x, Var weight) {
  Tape& t = *x.tape;
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  if (xv.cols() != wv.cols()) {
    throw std::invalid_argument("linear: shape mismatch " + shape_string(xv) + " x " +
                                shape_string(wv) + "^T");
  }
  Matrix out = xv * wv.transpose();
  return t.push(std::move(out), {x, weight}, [x, weight](Tape& t, const Matrix& g) {
    if (needs(t, x)) t.grad_slot(x).noalias() += g * weight.value();
    if (needs(t, weight)) t.grad_slot(weight).noalias() += g.transpose() * x.value();
  });
}

Var linear(Var x, Var weight, Var bias) {
  Tape& t = *x.tape;
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  const Matrix& bv = bias.value();
  if (xv.cols() != wv.cols() || bv.rows() != 1 || bv.cols() != wv.rows()) {
    throw std::invalid_argument("linear: shape mismatch " + shape_string(xv) + " x " +
                                shape_string(wv) + "^T + " + shape_string(bv));
  }
  Matrix out = xv * wv.transpose();
  out.rowwise() += bv.row(0);
  return t.push(std::move(out), {x, weight, bias}, [x, weight, bias](Tape& t, const Matrix& g) {
    if (needs(t, x)) t.grad_slot(x).noalias() += g * weight.value();
    if (needs(t, weight)) t.grad_slot(weight).noalias() += g.transpose() * x.value();
    if (needs(t, bias)) t.grad_slot(bias) += g.colwise().sum();
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw std::invalid_argument("add: shape mismatch " + shape_string(av) + " + " +
                                shape_string(bv));
  }
  Matrix out = av + bv;
  return t.push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  Matrix out = a.value() * s;
  return t.push(std::move(out), {a}, [a, s](Tape& t, const Matrix& g) {
    t.grad_slot(a) += g * s;
  });
}

Var layer_norm(Var x, Var gain, Var bias) {
  Tape& t = *x.tape;
  const Matrix& xv = x.value();
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  if (xv.cols() < 2 || gv.cols() != xv.cols() || bv.cols() != xv.cols()) {
    throw std::invalid_argument("layer_norm: shape mismatch " + shape_string(xv));
  }
  const Eigen::Index n = xv.rows(), d = xv.cols();
  auto xhat = std::make_shared<Matrix>(n, d);
  auto rstd = std::make_shared<Eigen::VectorXd>(n);
  Matrix out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = xv.row(i).sum() / static_cast<double>(d);
    const double var = (xv.row(i).array() - mean).square().sum() / static_cast<double>(d);
    const double r = 1.0 / std::sqrt(var + kLayerNormEps);
    (*rstd)(i) = r;
    xhat->row(i) = (xv.row(i).array() - mean) * r;
    out.row(i) = (xhat->row(i).array() * gv.row(0).array() + bv.row(0).array()).matrix();
  }
  if (!t.recording()) xhat.reset();
  return t.push(std::move(out), {x, gain, bias},
                [x, gain, bias, xhat, rstd](Tape& t, const Matrix& g) {
                  const Matrix& gv = gain.value();
                  if (needs(t, gain)) {
                    t.grad_slot(gain) += (g.array() * xhat->array()).colwise().sum().matrix();
                  }
                  if (needs(t, bias)) t.grad_slot(bias) += g.colwise().sum();
                  if (needs(t, x)) {
                    Matrix& gx = t.grad_slot(x);
                    const double d = static_cast<double>(g.cols());
                    for (Eigen::Index i = 0; i < g.rows(); ++i) {
                      Eigen::RowVectorXd dxhat =
                          (g.row(i).array() * gv.row(0).array()).matrix();
                      const double m1 = dxhat.sum() / d;
                      const double m2 = dxhat.dot(xhat->row(i)) / d;
                      gx.row(i).array() +=
                          (*rstd)(i) * (dxhat.array() - m1 - xhat->row(i).array() * m2);
                    }
                  }
                });
}

Var gelu(Var x) {
  Tape& t = *x.tape;
  Matrix out = rrk::gelu(x.value());
  return t.push(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.grad_slot(x).array() += g.array() * rrk::gelu_grad(x.value()).array();
  });
}

Var attention(Var q, Var k, Var v, int n_heads, const AttentionMask& mask) {
  Tape& t = *q.tape;
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  if (n_heads < 1 || qv.cols() % n_heads != 0 || kv.rows() != qv.rows() ||
      vv.rows() != qv.rows() || kv.cols() != qv.cols() || vv.cols() != qv.cols()) {
    throw std::invalid_argument("attention: inconsistent shapes " + shape_string(qv));
  }
  const Eigen::Index dh = qv.cols() / n_heads;
  const bool keep = t.recording() && (t.requires_grad(q) || t.requires_grad(k) ||
                                      t.requires_grad(v));
  auto weights = std::make_shared<std::vector<Matrix>>(keep ? n_heads : 0);
  Matrix out(qv.rows(), qv.cols());
  for (int h = 0; h < n_heads; ++h) {
    const Eigen::Index c = h * dh;
    out.middleCols(c, dh) = attend_head(qv.middleCols(c, dh), kv.middleCols(c, dh),
                                        vv.middleCols(c, dh), mask,
                                        keep ? &(*weights)[h] : nullptr);
  }
  return t.push(std::move(out), {q, k, v}, [q, k, v, n_heads, dh, weights](Tape& t, const Matrix& g) {
    const Matrix& qv = q.value();
    const Matrix& kv = k.value();
    const Matrix& vv = v.value();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < n_heads; ++h) {
      const Eigen::Index c = h * dh;
      const Matrix& p = (*weights)[h];
      const auto go = g.middleCols(c, dh);
      if (needs(t, v)) t.grad_slot(v).middleCols(c, dh).noalias() += p.transpose() * go;
      Matrix dp = go * vv.middleCols(c, dh).transpose();
      // Softmax backward; masked entries have p = 0 and drop out.
      Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
      Matrix ds = (p.array() * (dp.colwise() - rowdot).array()).matrix() * scale;
      if (needs(t, q)) t.grad_slot(q).middleCols(c, dh).noalias() += ds * kv.middleCols(c, dh);
      if (needs(t, k)) {
        t.grad_slot(k).middleCols(c, dh).noalias() += ds.transpose() * qv.middleCols(c, dh);
      }
    }
  });
}

Var gather_rows(Var table, std::span<const TokenId> ids) {
  Tape& t = *table.tape;
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows()) {
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) + " outside table " +
                              shape_string(tv));
    }
    out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  std::vector<TokenId> idx(ids.begin(), ids.end());
  return t.push(std::move(out), {table}, [table, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix& gt = t.grad_slot(table);
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var slice_rows(Var x, int start, int count) {
  Tape& t = *x.tape;
  const Matrix& xv = x.value();
  if (start < 0 || count < 0 || start + count > xv.rows()) {
    throw std::out_of_range("slice_rows: range outside " + shape_string(xv));
  }
  Matrix out = xv.middleRows(start, count);
  return t.push(std::move(out), {x}, [x, start, count](Tape& t, const Matrix& g) {
    t.grad_slot(x).middleRows(start, count) += g;
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Tape& t = *parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].value().cols();
  for (Var p : parts) {
    if (p.value().cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.value().rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, p.value().rows()) = p.value();
    r += p.value().rows();
  }
  std::vector<Var> in(parts.begin(), parts.end());
  return t.push(std::move(out), parts, [in](Tape& t, const Matrix& g) {
    Eigen::Index r = 0;
    for (Var p : in) {
      const Eigen::Index n = p.value().rows();
      if (needs(t, p)) t.grad_slot(p) += g.middleRows(r, n);
      r += n;
    }
  });
}

Var mse(Var pred, const Matrix& target) {
  Tape& t = *pred.tape;
  const Matrix& pv = pred.value();
  if (pv.rows() != target.rows() || pv.cols() != target.cols() || pv.size() == 0) {
    throw std::invalid_argument("mse: shape mismatch " + shape_string(pv) + " vs " +
                                shape_string(target));
  }
  const double n = static_cast<double>(pv.size());
  Matrix diff = pv - target;
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return t.push(std::move(out), {pred}, [pred, diff, n](Tape& t, const Matrix& g) {
    t.grad_slot(pred) += diff * (2.0 * g(0, 0) / n);
  });
}

Var cross_entropy(Var logits, std::span<const TokenId> targets) {
  Tape& t = *logits.tape;
  const Matrix& lv = logits.value();
  if (static_cast<std::size_t>(lv.rows()) != targets.size() || targets.empty()) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for logits " + shape_string(lv));
  }
  auto probs = std::make_shared<Matrix>(row_softmax(lv));
  double nll = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    const double mx = lv.row(r).maxCoeff();
    const double lse = mx + std::log((lv.row(r).array() - mx).exp().sum());
    nll += lse - lv(r, targets[i]);
  }
  const double n = static_cast<double>(targets.size());
  Matrix out(1, 1);
  out(0, 0) = nll / n;
  std::vector<TokenId> tg(targets.begin(), targets.end());
  return t.push(std::move(out), {logits}, [logits, probs, tg = std::move(tg), n](Tape& t, const Matrix& g) {
    Matrix d = *probs;
    for (std::size_t i = 0; i < tg.size(); ++i) d(static_cast<Eigen::Index>(i), tg[i]) -= 1.0;
    t.grad_slot(logits) += d * (g(0, 0) / n);
  });
}

Var sum_squares(Var x) {
  Tape& t = *x.tape;
  Matrix out(1, 1);
  out(0, 0) = x.value().squaredNorm();
  return t.push(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.grad_slot(x) += x.value() * (2.0 * g(0, 0));
  });
}

Var sum(Var x) {
  Tape& t = *x.tape;
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return t.push(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.grad_slot(x).array() += g(0, 0);
  });
}

}  // namespace ops
}  // namespace rrk
