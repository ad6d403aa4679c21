#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rrk/autograd.hpp"
#include "rrk/corpus.hpp"
#include "rrk/random.hpp"
#include "rrk/synthetic.hpp"
#include "rrk/tensor.hpp"
#include "rrk/transformer.hpp"

namespace rrk::test {

/// Small decoder for fast structural tests.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_seq_len = 40;
  return c;
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline SyntheticSuite small_suite(std::uint64_t seed = 7) {
  SyntheticConfig c;
  c.seed = seed;
  c.n_docs = 60;
  c.n_queries = 12;
  return generate_synthetic_corpus(c, Vocabulary(8));
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over every
/// entry of `inputs`, using central differences of step h. `loss` builds a
/// scalar from parameter leaves bound to the given matrices.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double gradcheck(const LossBuilder& loss, std::vector<Matrix>& inputs, double h = 1e-5,
                        double floor = 1e-4) {
  auto eval = [&](bool record, std::vector<Matrix>* grads) {
    Tape tape(record);
    std::vector<Var> leaves;
    for (auto& m : inputs) leaves.push_back(tape.parameter(m, record));
    Var l = loss(tape, leaves);
    const double v = l.value()(0, 0);
    if (grads) {
      tape.backward(l);
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        const Matrix& g = leaves[i].grad();
        grads->push_back(g.size() ? g : Matrix::Zero(inputs[i].rows(), inputs[i].cols()));
      }
    }
    return v;
  };
  std::vector<Matrix> analytic;
  eval(true, &analytic);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index j = 0; j < inputs[i].size(); ++j) {
      double& x = inputs[i].data()[j];
      const double saved = x;
      x = saved + h;
      const double up = eval(false, nullptr);
      x = saved - h;
      const double down = eval(false, nullptr);
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i].data()[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    Rng rng(reinterpret_cast<std::uintptr_t>(this) ^ std::hash<std::string>{}(tag));
    path_ = std::filesystem::temp_directory_path() / ("rrk_" + tag + "_" + std::to_string(rng.next() % 1000000007));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

}  // namespace rrk::test
