#pragma once

#include <cmath>
#include <map>
#include <string>

#include "rrk/transformer.hpp"

namespace rrk {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over named parameters. Only names present in the
/// gradient map are touched.
class Adam {
public:
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(ParameterMap& params, const std::map<std::string, Matrix>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, t_);
    const double c2 = 1.0 - std::pow(config_.beta2, t_);
    for (const auto& [name, g] : grads) {
      Matrix& p = params.at(name);
      auto [mit, fresh] = m_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
      Matrix& m = mit->second;
      Matrix& v = v_.try_emplace(name, Matrix::Zero(p.rows(), p.cols())).first->second;
      m = config_.beta1 * m + (1.0 - config_.beta1) * g;
      v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
      p.array() -= config_.learning_rate * (m.array() / c1) /
                   ((v.array() / c2).sqrt() + config_.eps);
    }
  }

  int steps() const { return t_; }

private:
  AdamConfig config_;
  int t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

/// Gradients of the bound trainable leaves, keyed by parameter name.
inline std::map<std::string, Matrix> collect_grads(const ParamBinder& params) {
  std::map<std::string, Matrix> out;
  for (const auto& [name, var] : params.bound()) {
    if (!var.tape->requires_grad(var)) continue;
    const Matrix& g = var.grad();
    if (g.size() == 0) {
      const Matrix& v = var.value();
      out.emplace(name, Matrix::Zero(v.rows(), v.cols()));
    } else {
      out.emplace(name, g);
    }
  }
  return out;
}

}  // namespace rrk
