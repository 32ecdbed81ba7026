#include "rtgan/losses.hpp"

namespace rtgan {

std::string to_string(GanLoss kind) { return kind == GanLoss::bce ? "bce" : "lsgan"; }

GanLoss parse_gan_loss(const std::string& s) {
  if (s == "bce") return GanLoss::bce;
  if (s == "lsgan") return GanLoss::lsgan;
  throw ConfigError("unknown gan loss '" + s + "' (expected bce or lsgan)");
}

void LossWeights::validate() const {
  if (!(lambda_t >= 0.0) || !std::isfinite(lambda_t)) throw ConfigError("lambda must be a finite value >= 0");
}

double total_objective(double l_t, double l_f, double l_s, const LossWeights& w) {
  return w.lambda_t * l_t + LossWeights::w_f * l_f + LossWeights::w_s * l_s;
}

}  // namespace rtgan
