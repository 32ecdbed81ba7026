#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rtgan/nn/autograd.hpp"
#include "rtgan/nn/conv_geometry.hpp"

// Differentiable operations over Var<Scalar>. Each op computes its value eagerly and, when any
// input requires a gradient, records the adjoint as a closure on the result node.
namespace rtgan::nn {

namespace detail {

template <typename Scalar>
using MatRM = typename Tensor<Scalar>::MatrixRM;
template <typename Scalar>
using MapRM = Eigen::Map<MatRM<Scalar>>;
template <typename Scalar>
using CMapRM = Eigen::Map<const MatRM<Scalar>>;
template <typename Scalar>
using CMapVec = Eigen::Map<const typename Tensor<Scalar>::Vector>;

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

// Shared convolution kernel for 2D and 3D. `x` holds `batch` volumes laid out per `g`;
// `w` is (Co, patch_size) in memory; `b` is (Co).
template <typename Scalar>
Var<Scalar> conv_impl(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b,
                      const ConvGeometry& g, Index batch, Shape out_shape) {
  const Index co = w.dim(0);
  const Index k = g.patch_size();
  const Index p = g.positions();
  const Index in_vol = g.channels * g.volume();
  require(w.value().size() == co * k, "conv weight shape " + shape_string(w.shape()) + " does not fit input");
  require(b.value().size() == co, "conv bias size mismatch");

  Tensor<Scalar> out(std::move(out_shape));
  MatRM<Scalar> col(k, p);
  CMapRM<Scalar> wm(w.value().ptr(), co, k);
  CMapVec<Scalar> bias(b.value().ptr(), co);
  for (Index n = 0; n < batch; ++n) {
    im2col(g, x.value().ptr() + n * in_vol, col.data());
    MapRM<Scalar> ob(out.ptr() + n * co * p, co, p);
    ob.noalias() = wm * col;
    ob.colwise() += bias;
  }

  return make_result<Scalar>(std::move(out), {x, w, b}, [g, batch, co, k, p, in_vol](Node<Scalar>& self) {
    Node<Scalar>& xn = *self.parents[0];
    Node<Scalar>& wn = *self.parents[1];
    Node<Scalar>& bn = *self.parents[2];
    CMapRM<Scalar> wm(wn.value.ptr(), co, k);
    MatRM<Scalar> col(k, p);
    for (Index n = 0; n < batch; ++n) {
      CMapRM<Scalar> go(self.grad.data() + n * co * p, co, p);
      if (wn.requires_grad) {
        im2col(g, xn.value.ptr() + n * in_vol, col.data());
        MapRM<Scalar>(wn.grad_buffer().data(), co, k).noalias() += go * col.transpose();
      }
      if (bn.requires_grad) bn.grad_buffer() += go.rowwise().sum();
      if (xn.requires_grad) {
        col.noalias() = wm.transpose() * go;
        col2im(g, col.data(), xn.grad_buffer().data() + n * in_vol);
      }
    }
  });
}

}  // namespace detail

struct Conv2dOptions {
  Index stride = 1;
  Index padding = 0;
};

// x: (B,Ci,H,W), w: (Co,Ci,k,k), b: (Co) -> (B,Co,Ho,Wo). Zero padding.
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b, Conv2dOptions opt = {}) {
  detail::require(x.value().rank() == 4 && w.value().rank() == 4, "conv2d expects (B,C,H,W) input and 4-d weight");
  detail::require(w.dim(1) == x.dim(1), "conv2d channel mismatch: input " + shape_string(x.shape()) +
                                            ", weight " + shape_string(w.shape()));
  ConvGeometry g;
  g.channels = x.dim(1);
  g.height = x.dim(2);
  g.width = x.dim(3);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.sh = g.sw = opt.stride;
  g.ph = g.pw = opt.padding;
  detail::require(g.valid(), "conv2d kernel larger than padded input " + shape_string(x.shape()));
  return detail::conv_impl(x, w, b, g, x.dim(0), {x.dim(0), w.dim(0), g.out_height(), g.out_width()});
}

struct Conv3dOptions {
  Index stride_depth = 1, stride = 1;
  Index pad_front = 0, pad_back = 0, padding = 0;
};

// x: (B,Ci,D,H,W), w: (Co,Ci,kd,kh,kw), b: (Co) -> (B,Co,Do,Ho,Wo).
template <typename Scalar>
Var<Scalar> conv3d(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b, Conv3dOptions opt = {}) {
  detail::require(x.value().rank() == 5 && w.value().rank() == 5, "conv3d expects (B,C,D,H,W) input and 5-d weight");
  detail::require(w.dim(1) == x.dim(1), "conv3d channel mismatch");
  ConvGeometry g;
  g.channels = x.dim(1);
  g.depth = x.dim(2);
  g.height = x.dim(3);
  g.width = x.dim(4);
  g.kd = w.dim(2);
  g.kh = w.dim(3);
  g.kw = w.dim(4);
  g.sd = opt.stride_depth;
  g.sh = g.sw = opt.stride;
  g.pad_front = opt.pad_front;
  g.pad_back = opt.pad_back;
  g.ph = g.pw = opt.padding;
  detail::require(g.valid(), "conv3d kernel larger than padded input " + shape_string(x.shape()));
  return detail::conv_impl(x, w, b, g, x.dim(0),
                           {x.dim(0), w.dim(0), g.out_depth(), g.out_height(), g.out_width()});
}

struct ConvTranspose2dOptions {
  Index stride = 1;
  Index padding = 0;
  Index output_padding = 0;
};

// x: (B,Ci,H,W), w: (Ci,Co,k,k), b: (Co) -> (B,Co,(H-1)s-2p+k+op, ...).
template <typename Scalar>
Var<Scalar> conv_transpose2d(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b,
                             ConvTranspose2dOptions opt = {}) {
  using namespace detail;
  require(x.value().rank() == 4 && w.value().rank() == 4, "conv_transpose2d expects 4-d input and weight");
  require(w.dim(0) == x.dim(1), "conv_transpose2d channel mismatch");
  const Index batch = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index co = w.dim(1);
  ConvGeometry g;
  g.channels = co;
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.sh = g.sw = opt.stride;
  g.ph = g.pw = opt.padding;
  g.height = (h - 1) * opt.stride - 2 * opt.padding + g.kh + opt.output_padding;
  g.width = (wd - 1) * opt.stride - 2 * opt.padding + g.kw + opt.output_padding;
  require(g.out_height() == h && g.out_width() == wd, "conv_transpose2d geometry mismatch");
  require(b.value().size() == co, "conv_transpose2d bias size mismatch");
  const Index k = g.patch_size();
  const Index hw = h * wd;
  const Index out_vol = g.channels * g.volume();

  Tensor<Scalar> out({batch, co, g.height, g.width});
  MatRM<Scalar> col(k, hw);
  CMapRM<Scalar> wm(w.value().ptr(), ci, k);
  for (Index n = 0; n < batch; ++n) {
    CMapRM<Scalar> xb(x.value().ptr() + n * ci * hw, ci, hw);
    col.noalias() = wm.transpose() * xb;
    Scalar* ob = out.ptr() + n * out_vol;
    col2im(g, col.data(), ob);
    MapRM<Scalar>(ob, co, g.volume()).colwise() += CMapVec<Scalar>(b.value().ptr(), co);
  }

  return make_result<Scalar>(std::move(out), {x, w, b}, [g, batch, ci, co, k, hw, out_vol](Node<Scalar>& self) {
    Node<Scalar>& xn = *self.parents[0];
    Node<Scalar>& wn = *self.parents[1];
    Node<Scalar>& bn = *self.parents[2];
    CMapRM<Scalar> wm(wn.value.ptr(), ci, k);
    MatRM<Scalar> dcol(k, hw);
    for (Index n = 0; n < batch; ++n) {
      const Scalar* go = self.grad.data() + n * out_vol;
      if (bn.requires_grad) bn.grad_buffer() += CMapRM<Scalar>(go, co, g.volume()).rowwise().sum();
      if (!xn.requires_grad && !wn.requires_grad) continue;
      im2col(g, go, dcol.data());
      if (xn.requires_grad) {
        MapRM<Scalar>(xn.grad_buffer().data() + n * ci * hw, ci, hw).noalias() += wm * dcol;
      }
      if (wn.requires_grad) {
        CMapRM<Scalar> xb(xn.value.ptr() + n * ci * hw, ci, hw);
        MapRM<Scalar>(wn.grad_buffer().data(), ci, k).noalias() += xb * dcol.transpose();
      }
    }
  });
}

// Mirror padding on the two trailing axes of a (B,C,H,W) tensor.
template <typename Scalar>
Var<Scalar> reflection_pad2d(const Var<Scalar>& x, Index pad) {
  detail::require(x.value().rank() == 4, "reflection_pad2d expects (B,C,H,W)");
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  detail::require(pad < h && pad < w, "reflection pad larger than input");
  const Index ho = h + 2 * pad, wo = w + 2 * pad;
  auto reflect = [](Index i, Index n) { return i < 0 ? -i : (i >= n ? 2 * (n - 1) - i : i); };
  std::vector<Index> src_index(ho * wo);
  for (Index r = 0; r < ho; ++r) {
    for (Index c = 0; c < wo; ++c) src_index[r * wo + c] = reflect(r - pad, h) * w + reflect(c - pad, w);
  }
  Tensor<Scalar> out({x.dim(0), x.dim(1), ho, wo});
  for (Index p = 0; p < planes; ++p) {
    const Scalar* src = x.value().ptr() + p * h * w;
    Scalar* dst = out.ptr() + p * ho * wo;
    for (Index i = 0; i < ho * wo; ++i) dst[i] = src[src_index[i]];
  }
  return make_result<Scalar>(std::move(out), {x}, [src_index, planes, h, w, ho, wo](Node<Scalar>& self) {
    auto& gx = self.parents[0]->grad_buffer();
    for (Index p = 0; p < planes; ++p) {
      const Scalar* go = self.grad.data() + p * ho * wo;
      Scalar* dst = gx.data() + p * h * w;
      for (Index i = 0; i < ho * wo; ++i) dst[src_index[i]] += go[i];
    }
  });
}

// Per-(sample, channel) normalization over all trailing axes, no affine parameters.
template <typename Scalar>
Var<Scalar> instance_norm(const Var<Scalar>& x, Scalar eps = Scalar(1e-5)) {
  detail::require(x.value().rank() >= 3, "instance_norm expects (B,C,...)");
  const Index groups = x.dim(0) * x.dim(1);
  const Index s = x.value().size() / groups;
  Tensor<Scalar> out(x.shape());
  typename Tensor<Scalar>::Vector inv_std(groups);
  detail::CMapRM<Scalar> xm(x.value().ptr(), groups, s);
  detail::MapRM<Scalar> om(out.ptr(), groups, s);
  for (Index gi = 0; gi < groups; ++gi) {
    const Scalar mean = xm.row(gi).mean();
    const Scalar var = (xm.row(gi).array() - mean).square().mean();
    inv_std[gi] = Scalar(1) / std::sqrt(var + eps);
    om.row(gi) = (xm.row(gi).array() - mean) * inv_std[gi];
  }
  Tensor<Scalar> normalized = out;
  return make_result<Scalar>(std::move(out), {x}, [normalized, inv_std, groups, s](Node<Scalar>& self) {
    detail::CMapRM<Scalar> gy(self.grad.data(), groups, s);
    detail::CMapRM<Scalar> xhat(normalized.ptr(), groups, s);
    detail::MapRM<Scalar> gx(self.parents[0]->grad_buffer().data(), groups, s);
    for (Index gi = 0; gi < groups; ++gi) {
      const Scalar mean_g = gy.row(gi).mean();
      const Scalar mean_gx = gy.row(gi).dot(xhat.row(gi)) / Scalar(s);
      gx.row(gi).array() += inv_std[gi] * (gy.row(gi).array() - mean_g - xhat.row(gi).array() * mean_gx);
    }
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), x.value().data().cwiseMax(Scalar(0)));
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& self) {
    const auto& xv = self.parents[0]->value.data();
    self.parents[0]->grad_buffer().array() += (xv.array() > Scalar(0)).select(self.grad.array(), Scalar(0));
  });
}

template <typename Scalar>
Var<Scalar> leaky_relu(const Var<Scalar>& x, Scalar slope = Scalar(0.2)) {
  const auto& xv = x.value().data().array();
  Tensor<Scalar> out(x.shape(), (xv > Scalar(0)).select(xv, xv * slope).matrix());
  return make_result<Scalar>(std::move(out), {x}, [slope](Node<Scalar>& self) {
    const auto& v = self.parents[0]->value.data().array();
    self.parents[0]->grad_buffer().array() += (v > Scalar(0)).select(self.grad.array(), self.grad.array() * slope);
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), x.value().data().array().tanh().matrix());
  return make_result<Scalar>(std::move(out), {x}, [](Node<Scalar>& self) {
    self.parents[0]->grad_buffer().array() += self.grad.array() * (Scalar(1) - self.value.data().array().square());
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require(a.shape() == b.shape(), "add shape mismatch " + shape_string(a.shape()) + " vs " +
                                              shape_string(b.shape()));
  Tensor<Scalar> out(a.shape(), a.value().data() + b.value().data());
  return make_result<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& self) {
    self.parents[0]->accumulate(self.grad);
    self.parents[1]->accumulate(self.grad);
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar factor) {
  Tensor<Scalar> out(a.shape(), a.value().data() * factor);
  return make_result<Scalar>(std::move(out), {a}, [factor](Node<Scalar>& self) {
    self.parents[0]->accumulate(self.grad * factor);
  });
}

// Concatenation along axis 1 of tensors sharing every other dimension.
template <typename Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& parts) {
  detail::require(!parts.empty(), "concat of nothing");
  Shape shape = parts.front().shape();
  const Index batch = shape[0];
  std::vector<Index> per_sample;
  Index channels = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    detail::require(s.size() == shape.size() && s[0] == batch, "concat rank/batch mismatch");
    for (std::size_t ax = 2; ax < s.size(); ++ax) detail::require(s[ax] == shape[ax], "concat spatial mismatch");
    channels += s[1];
    per_sample.push_back(p.value().size() / batch);
  }
  shape[1] = channels;
  Tensor<Scalar> out(shape);
  const Index out_stride = out.size() / batch;
  Index offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (Index n = 0; n < batch; ++n) {
      std::copy_n(parts[i].value().ptr() + n * per_sample[i], per_sample[i], out.ptr() + n * out_stride + offset);
    }
    offset += per_sample[i];
  }
  return make_result<Scalar>(std::move(out), parts, [per_sample, batch, out_stride](Node<Scalar>& self) {
    Index off = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node<Scalar>& pn = *self.parents[i];
      if (pn.requires_grad) {
        auto& g = pn.grad_buffer();
        for (Index n = 0; n < batch; ++n) {
          g.segment(n * per_sample[i], per_sample[i]) += self.grad.segment(n * out_stride + off, per_sample[i]);
        }
      }
      off += per_sample[i];
    }
  });
}

// Stacks k frames (B,C,H,W) on a new depth axis: (B,C,k,H,W).
template <typename Scalar>
Var<Scalar> stack_depth(const std::vector<Var<Scalar>>& frames) {
  detail::require(!frames.empty(), "stack of nothing");
  const Shape& s = frames.front().shape();
  detail::require(s.size() == 4, "stack_depth expects (B,C,H,W) frames");
  for (const auto& f : frames) detail::require(f.shape() == s, "stack_depth shape mismatch");
  const Index batch = s[0], ch = s[1], hw = s[2] * s[3];
  const Index depth = static_cast<Index>(frames.size());
  Tensor<Scalar> out({batch, ch, depth, s[2], s[3]});
  for (Index d = 0; d < depth; ++d) {
    for (Index n = 0; n < batch; ++n) {
      for (Index c = 0; c < ch; ++c) {
        std::copy_n(frames[d].value().ptr() + (n * ch + c) * hw, hw, out.ptr() + ((n * ch + c) * depth + d) * hw);
      }
    }
  }
  return make_result<Scalar>(std::move(out), frames, [batch, ch, hw, depth](Node<Scalar>& self) {
    for (Index d = 0; d < depth; ++d) {
      Node<Scalar>& pn = *self.parents[d];
      if (!pn.requires_grad) continue;
      auto& g = pn.grad_buffer();
      for (Index n = 0; n < batch; ++n) {
        for (Index c = 0; c < ch; ++c) {
          g.segment((n * ch + c) * hw, hw) += self.grad.segment(((n * ch + c) * depth + d) * hw, hw);
        }
      }
    }
  });
}

// Scalar sum of scalar Vars, each with its own weight.
template <typename Scalar>
Var<Scalar> weighted_sum(const std::vector<Var<Scalar>>& terms, const std::vector<Scalar>& weights) {
  detail::require(terms.size() == weights.size(), "weighted_sum arity mismatch");
  Scalar total = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    detail::require(terms[i].value().size() == 1, "weighted_sum terms must be scalars");
    total += weights[i] * terms[i].value().data()[0];
  }
  return make_result<Scalar>(Tensor<Scalar>::constant({1}, total), terms, [weights](Node<Scalar>& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) self.parents[i]->accumulate(self.grad * weights[i]);
  });
}

// mean(softplus(-z)) for target 1, mean(softplus(z)) for target 0; i.e. -mean log sigmoid / 1-sigmoid.
template <typename Scalar>
Var<Scalar> bce_with_logits(const Var<Scalar>& logits, bool target_real) {
  const auto& z = logits.value().data().array();
  const Scalar sign = target_real ? Scalar(-1) : Scalar(1);
  auto softplus = [](Scalar v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
  Scalar total = 0;
  for (Index i = 0; i < z.size(); ++i) total += softplus(sign * z[i]);
  const Scalar n = static_cast<Scalar>(z.size());
  return make_result<Scalar>(Tensor<Scalar>::constant({1}, total / n), {logits}, [target_real, n](Node<Scalar>& self) {
    const auto& zv = self.parents[0]->value.data().array();
    const Scalar t = target_real ? Scalar(1) : Scalar(0);
    auto sigmoid = (Scalar(1) + (-zv).exp()).inverse();
    self.parents[0]->accumulate((self.grad[0] * (sigmoid - t) / n).matrix());
  });
}

// mean((z - target)^2), target 1 or 0.
template <typename Scalar>
Var<Scalar> mse_to_constant(const Var<Scalar>& logits, Scalar target) {
  const auto diff = (logits.value().data().array() - target).eval();
  const Scalar n = static_cast<Scalar>(diff.size());
  return make_result<Scalar>(Tensor<Scalar>::constant({1}, diff.square().sum() / n), {logits},
                             [target, n](Node<Scalar>& self) {
                               const auto& zv = self.parents[0]->value.data().array();
                               self.parents[0]->accumulate((self.grad[0] * Scalar(2) * (zv - target) / n).matrix());
                             });
}

// mean |a - b|; the subgradient at zero is zero.
template <typename Scalar>
Var<Scalar> l1_mean(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require(a.shape() == b.shape(), "l1 shape mismatch " + shape_string(a.shape()) + " vs " +
                                             shape_string(b.shape()));
  const auto diff = (a.value().data() - b.value().data()).eval();
  const Scalar n = static_cast<Scalar>(diff.size());
  return make_result<Scalar>(Tensor<Scalar>::constant({1}, diff.cwiseAbs().sum() / n), {a, b},
                             [n](Node<Scalar>& self) {
                               const auto d = (self.parents[0]->value.data() - self.parents[1]->value.data()).eval();
                               const auto g = (d.array().sign() * (self.grad[0] / n)).matrix().eval();
                               self.parents[0]->accumulate(g);
                               self.parents[1]->accumulate(-g);
                             });
}

}  // namespace rtgan::nn
