#pragma once

#include <cmath>
#include <vector>

#include "rtgan/models.hpp"

namespace rtgan::nn {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed parameter list. Parameters without a gradient are skipped but keep their
// moment estimates.
template <typename Scalar>
class Adam {
 public:
  using Vector = typename Tensor<Scalar>::Vector;

  Adam(ParameterList<Scalar>& params, AdamOptions opt) : params_(&params), opt_(opt) {
    for (const auto& p : params) {
      m_.push_back(Vector::Zero(p.var.value().size()));
      v_.push_back(Vector::Zero(p.var.value().size()));
    }
  }

  void step() {
    ++steps_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(steps_));
    const Scalar b1 = static_cast<Scalar>(opt_.beta1), b2 = static_cast<Scalar>(opt_.beta2);
    const Scalar step_size = static_cast<Scalar>(opt_.learning_rate / bc1);
    const Scalar inv_bc2 = static_cast<Scalar>(1.0 / bc2);
    const Scalar eps = static_cast<Scalar>(opt_.eps);
    for (std::size_t i = 0; i < params_->size(); ++i) {
      auto& var = (*params_)[i].var;
      if (!var.has_grad()) continue;
      const Vector& g = var.grad();
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
      var.mutable_value().data().array() -=
          step_size * m_[i].array() / ((v_[i].array() * inv_bc2).sqrt() + eps);
    }
  }

  void zero_grad() { rtgan::zero_grad(*params_); }

  long long steps() const { return steps_; }
  void set_steps(long long s) { steps_ = s; }
  std::vector<Vector>& first_moments() { return m_; }
  std::vector<Vector>& second_moments() { return v_; }
  const AdamOptions& options() const { return opt_; }

 private:
  ParameterList<Scalar>* params_;
  AdamOptions opt_;
  std::vector<Vector> m_, v_;
  long long steps_ = 0;
};

}  // namespace rtgan::nn
