#include "rtgan/frame_tensor.hpp"

namespace rtgan {

nn::Tensor<float> frames_to_batch(const std::vector<const Frame*>& frames) {
  if (frames.empty()) throw ContractError("cannot batch zero frames");
  const Frame& first = *frames.front();
  for (const Frame* f : frames) {
    if (!f->same_shape(first)) throw ContractError("batched frames differ in shape");
  }
  const nn::Index per = first.pixels.size();
  nn::Tensor<float> out({static_cast<nn::Index>(frames.size()), first.channels, first.height, first.width});
  for (std::size_t b = 0; b < frames.size(); ++b) {
    out.data().segment(static_cast<nn::Index>(b) * per, per) = frames[b]->pixels.matrix();
  }
  return out;
}

Frame tensor_to_frame(const nn::Tensor<float>& batch, nn::Index b, int t_index) {
  if (batch.rank() != 4 || b < 0 || b >= batch.dim(0)) {
    throw ContractError("no batch element " + std::to_string(b) + " in " + nn::shape_string(batch.shape()));
  }
  Frame f;
  f.channels = static_cast<int>(batch.dim(1));
  f.height = static_cast<int>(batch.dim(2));
  f.width = static_cast<int>(batch.dim(3));
  f.t_index = t_index;
  const nn::Index per = batch.size() / batch.dim(0);
  f.pixels = batch.data().segment(b * per, per).array();
  return f;
}

}  // namespace rtgan
