#include "rrk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rrk {

std::string shape_string(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "]";
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_string(a) + " x " +
                                shape_string(b));
  }
  return a * b;
}

Matrix row_softmax(const Matrix& x) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i).array();
    const double mx = row.maxCoeff();
    if (mx == kNegInf) {
      out.row(i).setZero();
      continue;
    }
    // Masked entries are exactly zero; the vectorized exp would leave a
    // denormal there instead.
    out.row(i) = (row == kNegInf).select(0.0, (row - mx).exp()).matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias) {
  if (x.cols() < 2 || gain.cols() != x.cols() || bias.cols() != x.cols()) {
    throw std::invalid_argument("layer_norm: shape mismatch " + shape_string(x) + " gain " +
                                shape_string(gain));
  }
  Matrix out(x.rows(), x.cols());
  const double d = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() / d;
    const double var = (x.row(i).array() - mean).square().sum() / d;
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    out.row(i) = ((x.row(i).array() - mean) * rstd * gain.row(0).array() + bias.row(0).array())
                     .matrix();
  }
  return out;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}

namespace {

// sigmoid(2u) for u = c (x + 0.044715 x^3).
Matrix gelu_gate(const Matrix& x) {
  const auto u = kGeluC * (x.array() + 0.044715 * x.array().cube());
  return (1.0 / (1.0 + (-2.0 * u).exp())).matrix();
}

}  // namespace

Matrix gelu(const Matrix& x) { return (x.array() * gelu_gate(x).array()).matrix(); }

Matrix gelu_grad(const Matrix& x) {
  const Matrix s = gelu_gate(x);
  const auto du = kGeluC * (1.0 + 3.0 * 0.044715 * x.array().square());
  return (s.array() + 2.0 * x.array() * s.array() * (1.0 - s.array()) * du).matrix();
}

AttentionMask AttentionMask::causal(int seq, int valid) {
  AttentionMask m(seq);
  for (int i = 0; i < valid; ++i) {
    for (int j = 0; j <= i; ++j) m.set(i, j, true);
  }
  return m;
}

Matrix attend_head(const Eigen::Ref<const Matrix>& q, const Eigen::Ref<const Matrix>& k,
                   const Eigen::Ref<const Matrix>& v, const AttentionMask& mask, Matrix* weights) {
  const Eigen::Index seq = q.rows();
  if (k.rows() != seq || v.rows() != seq || k.cols() != q.cols() || mask.size() != seq) {
    throw std::invalid_argument("attend: inconsistent shapes");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  // Rows are processed in blocks, each against the key prefix its mask can
  // reach, so causal masks skip the upper triangle.
  std::vector<Eigen::Index> reach(static_cast<std::size_t>(seq), 0);
  for (Eigen::Index i = 0; i < seq; ++i) {
    for (Eigen::Index j = seq; j > 0; --j) {
      if (mask.allowed(static_cast<int>(i), static_cast<int>(j - 1))) {
        reach[static_cast<std::size_t>(i)] = j;
        break;
      }
    }
  }
  constexpr Eigen::Index kBlock = 64;
  Matrix out = Matrix::Zero(seq, v.cols());
  if (weights) *weights = Matrix::Zero(seq, seq);
  for (Eigen::Index r0 = 0; r0 < seq; r0 += kBlock) {
    const Eigen::Index n = std::min(kBlock, seq - r0);
    const Eigen::Index width = *std::max_element(reach.begin() + r0, reach.begin() + r0 + n);
    if (width == 0) continue;
    Matrix logits = (q.middleRows(r0, n) * k.topRows(width).transpose()) * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < width; ++j) {
        if (!mask.allowed(static_cast<int>(r0 + i), static_cast<int>(j))) logits(i, j) = kNegInf;
      }
    }
    const Matrix p = row_softmax(logits);
    out.middleRows(r0, n).noalias() = p * v.topRows(width);
    if (weights) weights->block(r0, 0, n, width) = p;
  }
  return out;
}

std::vector<Matrix> attend(const std::vector<Matrix>& q, const std::vector<Matrix>& k,
                           const std::vector<Matrix>& v, const AttentionMask& mask) {
  if (q.size() != k.size() || q.size() != v.size()) {
    throw std::invalid_argument("attend: head counts differ");
  }
  std::vector<Matrix> out;
  out.reserve(q.size());
  for (std::size_t h = 0; h < q.size(); ++h) out.push_back(attend_head(q[h], k[h], v[h], mask));
  return out;
}

}  // namespace rrk
