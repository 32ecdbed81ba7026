#include "rtgan/models.hpp"

namespace rtgan {

void GeneratorConfig::validate() const {
  if (in_channels != 9) {
    throw ConfigError("generator in_channels must be 9 (x_prev, x_cur, y_prev), got " + std::to_string(in_channels));
  }
  if (out_channels != 3) throw ConfigError("generator out_channels must be 3");
  if (base_width < 1) throw ConfigError("generator base_width must be >= 1");
  if (n_res_blocks < 0) throw ConfigError("generator n_res_blocks must be >= 0");
}

void FrameDiscriminatorConfig::validate() const {
  if (in_channels != 6) throw ConfigError("frame discriminator in_channels must be 6, got " + std::to_string(in_channels));
  if (base_width < 1) throw ConfigError("frame discriminator base_width must be >= 1");
  if (n_layers < 1) throw ConfigError("frame discriminator n_layers must be >= 1");
}

void TemporalDiscriminatorConfig::validate() const {
  if (in_channels != 3) throw ConfigError("temporal discriminator in_channels must be 3");
  if (temporal_depth != 3) throw ConfigError("temporal discriminator accepts exactly 3-frame stacks");
  if (base_width < 1) throw ConfigError("temporal discriminator base_width must be >= 1");
  if (n_layers < 1) throw ConfigError("temporal discriminator n_layers must be >= 1");
}

}  // namespace rtgan
