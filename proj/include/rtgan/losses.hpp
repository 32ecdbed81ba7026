#pragma once

#include <cmath>
#include <string>

#include "rtgan/models.hpp"

namespace rtgan {

enum class GanLoss { bce, lsgan };

std::string to_string(GanLoss kind);
GanLoss parse_gan_loss(const std::string& s);

// Only the temporal weight is tunable; the frame and stationary terms keep unit weight.
struct LossWeights {
  double lambda_t = 1.0;
  static constexpr double w_f = 1.0;
  static constexpr double w_s = 1.0;

  void validate() const;
};

struct LossBreakdown {
  double l_t = 0, l_f = 0, l_s = 0, l_total = 0;
  double d_t_loss = 0, d_f_loss = 0;
};

double total_objective(double l_t, double l_f, double l_s, const LossWeights& w);

template <typename Scalar>
void require_finite(const Var<Scalar>& logits, const std::string& network) {
  if (!logits.value().all_finite()) throw NumericError("non-finite logits from " + network);
}

// Discriminator side: -mean log p(real) - mean log(1 - p(fake)) for bce; least squares toward 1/0
// for lsgan. Means run over every patch position and batch element.
template <typename Scalar>
Var<Scalar> discriminator_loss(const Var<Scalar>& real_logits, const Var<Scalar>& fake_logits, GanLoss kind,
                               const std::string& network) {
  require_finite(real_logits, network);
  require_finite(fake_logits, network);
  if (kind == GanLoss::lsgan) {
    return nn::weighted_sum<Scalar>(
        {nn::mse_to_constant(real_logits, Scalar(1)), nn::mse_to_constant(fake_logits, Scalar(0))},
        {Scalar(1), Scalar(1)});
  }
  return nn::weighted_sum<Scalar>({nn::bce_with_logits(real_logits, true), nn::bce_with_logits(fake_logits, false)},
                                  {Scalar(1), Scalar(1)});
}

// Generator side, non-saturating: -mean log p(fake).
template <typename Scalar>
Var<Scalar> generator_adversarial_loss(const Var<Scalar>& fake_logits, GanLoss kind, const std::string& network) {
  require_finite(fake_logits, network);
  if (kind == GanLoss::lsgan) return nn::mse_to_constant(fake_logits, Scalar(1));
  return nn::bce_with_logits(fake_logits, true);
}

template <typename Scalar>
struct AdversarialTerms {
  Var<Scalar> disc;
  Var<Scalar> gen;
};

// Both sides from one pair of logit maps. Gradient routing (detached fakes for the discriminator
// step, frozen discriminator for the generator step) is the caller's job.
template <typename Scalar>
AdversarialTerms<Scalar> adversarial_loss(const Var<Scalar>& real_logits, const Var<Scalar>& fake_logits,
                                          GanLoss kind = GanLoss::bce, const std::string& network = "discriminator") {
  return {discriminator_loss(real_logits, fake_logits, kind, network),
          generator_adversarial_loss(fake_logits, kind, network)};
}

template <typename Scalar>
struct Triplet {
  Var<Scalar> t0, t1, t2;
};

// Two recurrent generator steps over an input triplet: y1' = G(x0, x1, y_prev) and
// y2' = G(x1, x2, y1'). With horizon 0 the second step sees y1' detached.
template <typename Scalar>
struct Rollout {
  Var<Scalar> y1, y2;
};

template <typename Scalar, typename Gen>
Rollout<Scalar> recurrent_rollout(const Gen& g, const Triplet<Scalar>& x, const Var<Scalar>& y_prev, int horizon = 1) {
  if (!y_prev.defined()) throw PreconditionError("no frame-model output for the triplet; run `rtgan precompute`");
  Rollout<Scalar> r;
  r.y1 = g(x.t0, x.t1, y_prev.detach());
  r.y2 = g(x.t1, x.t2, horizon >= 1 ? r.y1 : r.y1.detach());
  return r;
}

// Temporal term. The fake stack is (F(x0), y1', y2'); F(x0) is a constant, so it carries no
// generator gradient. Discriminator-side sees detached fakes.
template <typename Scalar, typename DiscT>
Var<Scalar> temporal_disc_loss(const DiscT& d_t, const Triplet<Scalar>& real_y, const Var<Scalar>& f0,
                               const Rollout<Scalar>& fake, GanLoss kind) {
  const Var<Scalar> real = d_t(real_y.t0, real_y.t1, real_y.t2);
  const Var<Scalar> fake_logits = d_t(f0.detach(), fake.y1.detach(), fake.y2.detach());
  return discriminator_loss(real, fake_logits, kind, "temporal discriminator");
}

template <typename Scalar, typename DiscT>
Var<Scalar> temporal_gen_loss(const DiscT& d_t, const Var<Scalar>& f0, const Rollout<Scalar>& fake, GanLoss kind) {
  return generator_adversarial_loss(d_t(f0.detach(), fake.y1, fake.y2), kind, "temporal discriminator");
}

// Frame fidelity term: real pair (x1, F(x1)) against fake pair (x1, y1').
template <typename Scalar, typename DiscF>
Var<Scalar> frame_disc_loss(const DiscF& d_f, const Var<Scalar>& x1, const Var<Scalar>& f1, const Var<Scalar>& y1,
                            GanLoss kind) {
  const Var<Scalar> real = d_f(x1, f1.detach());
  const Var<Scalar> fake = d_f(x1, y1.detach());
  return discriminator_loss(real, fake, kind, "frame discriminator");
}

template <typename Scalar, typename DiscF>
Var<Scalar> frame_gen_loss(const DiscF& d_f, const Var<Scalar>& x1, const Var<Scalar>& y1, GanLoss kind) {
  return generator_adversarial_loss(d_f(x1, y1), kind, "frame discriminator");
}

// mean |y1' - G(x1, x1, y1')|: a repeated frame should reproduce the previous output.
template <typename Scalar, typename Gen>
Var<Scalar> stationary_loss(const Gen& g, const Var<Scalar>& x1, const Var<Scalar>& y1) {
  return nn::l1_mean(y1, g(x1, x1, y1.detach()));
}

template <typename Scalar>
Var<Scalar> total_objective(const Var<Scalar>& l_t, const Var<Scalar>& l_f, const Var<Scalar>& l_s,
                            const LossWeights& w) {
  return nn::weighted_sum<Scalar>({l_t, l_f, l_s}, {static_cast<Scalar>(w.lambda_t), static_cast<Scalar>(LossWeights::w_f),
                                                    static_cast<Scalar>(LossWeights::w_s)});
}

// Turns gradient recording off for a parameter list for the guard's lifetime. Keep it alive until
// the backward pass that must not reach these parameters has finished.
template <typename Scalar>
class FrozenParameters {
 public:
  explicit FrozenParameters(ParameterList<Scalar>& params) : params_(params) { set_requires_grad(params_, false); }
  ~FrozenParameters() { set_requires_grad(params_, true); }
  FrozenParameters(const FrozenParameters&) = delete;
  FrozenParameters& operator=(const FrozenParameters&) = delete;

 private:
  ParameterList<Scalar>& params_;
};

}  // namespace rtgan
