#pragma once

#include <vector>

#include "rtgan/datamodel.hpp"
#include "rtgan/nn/tensor.hpp"

namespace rtgan {

// Stacks same-shaped frames into a (B, C, H, W) batch.
nn::Tensor<float> frames_to_batch(const std::vector<const Frame*>& frames);

inline nn::Tensor<float> frame_to_tensor(const Frame& frame) { return frames_to_batch({&frame}); }

// Batch element `b` as a frame.
Frame tensor_to_frame(const nn::Tensor<float>& batch, nn::Index b, int t_index);

}  // namespace rtgan
