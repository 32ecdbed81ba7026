#pragma once

#include <algorithm>

#include "rtgan/nn/tensor.hpp"

namespace rtgan::nn {

// Sliding-window geometry over a (C, D, H, W) volume. 2D convolutions use D = kd = 1.
struct ConvGeometry {
  Index channels = 1;
  Index depth = 1, height = 1, width = 1;
  Index kd = 1, kh = 1, kw = 1;
  Index sd = 1, sh = 1, sw = 1;
  Index pad_front = 0, pad_back = 0;  // depth axis may be padded asymmetrically
  Index ph = 0, pw = 0;

  Index out_depth() const { return (depth + pad_front + pad_back - kd) / sd + 1; }
  Index out_height() const { return (height + 2 * ph - kh) / sh + 1; }
  Index out_width() const { return (width + 2 * pw - kw) / sw + 1; }
  Index positions() const { return out_depth() * out_height() * out_width(); }
  Index patch_size() const { return channels * kd * kh * kw; }
  Index volume() const { return depth * height * width; }

  bool valid() const {
    return depth + pad_front + pad_back >= kd && height + 2 * ph >= kh && width + 2 * pw >= kw;
  }
};

// Unfolds `image` (C*D*H*W) into `col` (patch_size x positions), row-major.
template <typename Scalar>
void im2col(const ConvGeometry& g, const Scalar* image, Scalar* col) {
  const Index od_n = g.out_depth(), oh_n = g.out_height(), ow_n = g.out_width();
  const Index positions = od_n * oh_n * ow_n;
  Index row = 0;
  for (Index c = 0; c < g.channels; ++c) {
    for (Index a = 0; a < g.kd; ++a) {
      for (Index i = 0; i < g.kh; ++i) {
        for (Index j = 0; j < g.kw; ++j, ++row) {
          Scalar* out = col + row * positions;
          for (Index od = 0; od < od_n; ++od) {
            const Index id = od * g.sd - g.pad_front + a;
            const bool d_ok = id >= 0 && id < g.depth;
            for (Index oh = 0; oh < oh_n; ++oh) {
              const Index ih = oh * g.sh - g.ph + i;
              Scalar* dst = out + (od * oh_n + oh) * ow_n;
              if (!d_ok || ih < 0 || ih >= g.height) {
                std::fill(dst, dst + ow_n, Scalar(0));
                continue;
              }
              const Scalar* src = image + ((c * g.depth + id) * g.height + ih) * g.width;
              for (Index ow = 0; ow < ow_n; ++ow) {
                const Index iw = ow * g.sw - g.pw + j;
                dst[ow] = (iw >= 0 && iw < g.width) ? src[iw] : Scalar(0);
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters `col` back into `image` (accumulating).
template <typename Scalar>
void col2im(const ConvGeometry& g, const Scalar* col, Scalar* image) {
  const Index od_n = g.out_depth(), oh_n = g.out_height(), ow_n = g.out_width();
  const Index positions = od_n * oh_n * ow_n;
  Index row = 0;
  for (Index c = 0; c < g.channels; ++c) {
    for (Index a = 0; a < g.kd; ++a) {
      for (Index i = 0; i < g.kh; ++i) {
        for (Index j = 0; j < g.kw; ++j, ++row) {
          const Scalar* in = col + row * positions;
          for (Index od = 0; od < od_n; ++od) {
            const Index id = od * g.sd - g.pad_front + a;
            if (id < 0 || id >= g.depth) continue;
            for (Index oh = 0; oh < oh_n; ++oh) {
              const Index ih = oh * g.sh - g.ph + i;
              if (ih < 0 || ih >= g.height) continue;
              const Scalar* src = in + (od * oh_n + oh) * ow_n;
              Scalar* dst = image + ((c * g.depth + id) * g.height + ih) * g.width;
              for (Index ow = 0; ow < ow_n; ++ow) {
                const Index iw = ow * g.sw - g.pw + j;
                if (iw >= 0 && iw < g.width) dst[iw] += src[ow];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace rtgan::nn
