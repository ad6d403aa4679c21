#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "rrk/tensor.hpp"
#include "rrk/tokenizer.hpp"

namespace rrk {

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode tape. Nodes are appended in creation order, which is a
/// topological order, so backward walks the node list once in reverse.
///
/// A tape built with record = false computes values only; asking it for
/// gradients is an error.
class Tape {
public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  /// Leaf referring to caller-owned storage that must outlive the tape.
  Var parameter(const Matrix& value, bool requires_grad = true);

  const Matrix& value(Var v) const;
  /// Zero-shaped until backward has reached the node.
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }

  /// Seeds d(loss)/d(loss) = 1. Throws if loss is not 1 x 1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;
  Var push(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var push(Matrix value, std::span<const Var> inputs, BackwardFn backward);
  /// Adds `g` into the gradient of v (no-op for nodes without grad).
  void accumulate(Var v, const Matrix& g);
  Matrix& grad_slot(Var v);

private:
  struct Node {
    Matrix owned;
    const Matrix* borrowed = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::size_t check(Var v) const;

  bool record_;
  std::deque<Node> nodes_;  // stable references across push
};

namespace ops {

Var matmul(Var a, Var b);
/// x W^T (+ bias): x is n x in, W is out x in, bias 1 x out.
Var linear(Var x, Var weight);
Var linear(Var x, Var weight, Var bias);
Var add(Var a, Var b);
Var scale(Var a, double s);
Var layer_norm(Var x, Var gain, Var bias);
Var gelu(Var x);
/// Multi-head causal/padded attention. q, k, v are seq x d_model with heads
/// laid out as contiguous column blocks.
Var attention(Var q, Var k, Var v, int n_heads, const AttentionMask& mask);
/// Rows of `table` selected by ids.
Var gather_rows(Var table, std::span<const TokenId> ids);
/// Rows [start, start + count) of x.
Var slice_rows(Var x, int start, int count);
Var concat_rows(std::span<const Var> parts);
/// Mean squared error between a column of predictions and constant targets.
Var mse(Var pred, const Matrix& target);
/// Mean negative log-likelihood of `targets` under row-wise softmax(logits).
Var cross_entropy(Var logits, std::span<const TokenId> targets);
Var sum_squares(Var x);
Var sum(Var x);

}  // namespace ops
}  // namespace rrk
