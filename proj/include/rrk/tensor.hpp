#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace rrk {

/// Row-major dense matrix; the working tensor type for the whole model.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kLayerNormEps = 1e-5;

std::string shape_string(const Matrix& m);

/// C = A * B. Throws std::invalid_argument naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Softmax along each row, max-subtracted. Entries equal to -inf get zero
/// weight; a row that is entirely -inf becomes all zeros.
Matrix row_softmax(const Matrix& x);

/// Per-row normalization with population variance and kLayerNormEps.
/// `gain` and `bias` are 1 x d.
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias);

/// tanh-approximated GELU, elementwise. Evaluated as x * sigmoid(2u), the
/// same function as 0.5 x (1 + tanh(u)) without a per-element tanh.
Matrix gelu(const Matrix& x);
Matrix gelu_grad(const Matrix& x);

/// Square boolean matrix, true = query row may attend to key column.
class AttentionMask {
public:
  AttentionMask() = default;
  explicit AttentionMask(int seq) : seq_(seq), allowed_(static_cast<std::size_t>(seq) * seq, 0) {}

  /// Lower-triangular mask over the first `valid` positions; the remaining
  /// positions are padding: they attend to nothing and nobody attends them.
  static AttentionMask causal(int seq, int valid);
  static AttentionMask causal(int seq) { return causal(seq, seq); }

  int size() const { return seq_; }
  bool allowed(int query, int key) const {
    return allowed_[static_cast<std::size_t>(query) * seq_ + key] != 0;
  }
  void set(int query, int key, bool value) {
    allowed_[static_cast<std::size_t>(query) * seq_ + key] = value ? 1 : 0;
  }

private:
  int seq_ = 0;
  std::vector<unsigned char> allowed_;
};

/// Scaled dot-product attention for one head: softmax(QK^T/sqrt(d) + bias) V
/// where disallowed pairs receive a -inf bias. When `weights` is non-null
/// the attention matrix is stored there.
Matrix attend_head(const Eigen::Ref<const Matrix>& q, const Eigen::Ref<const Matrix>& k,
                   const Eigen::Ref<const Matrix>& v, const AttentionMask& mask,
                   Matrix* weights = nullptr);

/// Multi-head form over per-head [seq, d_head] slices.
std::vector<Matrix> attend(const std::vector<Matrix>& q, const std::vector<Matrix>& k,
                           const std::vector<Matrix>& v, const AttentionMask& mask);

}  // namespace rrk
