#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "domid/tensor.hpp"

namespace domid {

// Plain SGD or adaptive-moment updates with bias correction. State is keyed
// by parameter address, so pass the same Parameter objects to every step.
class Optimizer {
 public:
  static Optimizer sgd(double lr) {
    Optimizer o;
    o.adaptive_ = false;
    o.lr_ = check_lr(lr);
    return o;
  }

  static Optimizer adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8) {
    Optimizer o;
    o.adaptive_ = true;
    o.lr_ = check_lr(lr);
    o.beta1_ = beta1;
    o.beta2_ = beta2;
    o.eps_ = eps;
    return o;
  }

  std::uint64_t step_count() const { return step_; }
  double learning_rate() const { return lr_; }
  bool adaptive() const { return adaptive_; }

  void step(std::span<Parameter* const> params) {
    for (Parameter* p : params)
      for (double g : p->grad)
        if (!std::isfinite(g))
          throw std::runtime_error("Optimizer::step: non-finite gradient in parameter '" +
                                   p->name + "'");
    ++step_;
    if (!adaptive_) {
      for (Parameter* p : params)
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr_ * p->grad[i];
      return;
    }
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (Parameter* p : params) {
      Moments& mo = state_[p];
      if (mo.m.size() != p->value.size()) {
        mo.m.assign(p->value.size(), 0.0);
        mo.v.assign(p->value.size(), 0.0);
      }
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double g = p->grad[i];
        mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
        mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
        const double mhat = mo.m[i] / bc1;
        const double vhat = mo.v[i] / bc2;
        p->value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void step(std::vector<Parameter*>& params) {
    step(std::span<Parameter* const>(params.data(), params.size()));
  }

 private:
  struct Moments {
    std::vector<double> m, v;
  };

  static double check_lr(double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("Optimizer: learning rate must be positive");
    return lr;
  }

  bool adaptive_ = true;
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::uint64_t step_ = 0;
  std::unordered_map<Parameter*, Moments> state_;
};

}  // namespace domid
