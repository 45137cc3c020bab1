#include "deephash/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "deephash/errors.hpp"

namespace deephash {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;
using Idx = Eigen::Index;

std::size_t batch_of(const Tensor& t) { return t.rank() == 0 ? 0 : t.dim(0); }

Shape batched(std::size_t n, const Shape& per_sample) {
  Shape s{n};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

struct Geometry {
  std::size_t channels, height, width;
  std::size_t out_h, out_w;
};

Geometry conv_geometry(const Layer& l) {
  return {l.input_shape[0], l.input_shape[1], l.input_shape[2], l.output_shape[1],
          l.output_shape[2]};
}

// col [C*k*k, out_h*out_w] from one sample image [C, H, W].
void im2col(const double* image, const Geometry& g, const LayerSpec& s, double* col) {
  const std::size_t k = s.kernel;
  const std::size_t spatial = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = col + ((c * k + ky) * k + kx) * spatial;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) -
                          static_cast<std::ptrdiff_t>(s.pad);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) -
                            static_cast<std::ptrdiff_t>(s.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                                ix < static_cast<std::ptrdiff_t>(g.width);
            row[oy * g.out_w + ox] =
                inside ? image[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                               static_cast<std::size_t>(ix)]
                       : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, const Geometry& g, const LayerSpec& s, double* image) {
  const std::size_t k = s.kernel;
  const std::size_t spatial = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = col + ((c * k + ky) * k + kx) * spatial;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) -
                          static_cast<std::ptrdiff_t>(s.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) -
                            static_cast<std::ptrdiff_t>(s.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            image[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                  static_cast<std::size_t>(ix)] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

Tensor conv_forward(const Layer& l, const Tensor& in) {
  const Geometry g = conv_geometry(l);
  const LayerSpec& s = l.spec;
  const std::size_t n = batch_of(in);
  const std::size_t patch = g.channels * s.kernel * s.kernel;
  const std::size_t spatial = g.out_h * g.out_w;
  Tensor out(batched(n, l.output_shape));
  std::vector<double> col(patch * spatial);
  const ConstMatMap weights(l.params[0].data(), static_cast<Idx>(s.outputs), static_cast<Idx>(patch));
  const Eigen::Map<const Eigen::VectorXd> bias(l.params[1].data(), static_cast<Idx>(s.outputs));
  for (std::size_t i = 0; i < n; ++i) {
    im2col(in.slice(i).data(), g, s, col.data());
    MatMap dst(out.slice(i).data(), static_cast<Idx>(s.outputs), static_cast<Idx>(spatial));
    dst.noalias() = weights * ConstMatMap(col.data(), static_cast<Idx>(patch), static_cast<Idx>(spatial));
    dst.colwise() += bias;
  }
  return out;
}

Tensor conv_backward(const Layer& l, const Tensor& in, const Tensor& grad_out,
                     std::vector<Tensor>& grads) {
  const Geometry g = conv_geometry(l);
  const LayerSpec& s = l.spec;
  const std::size_t n = batch_of(in);
  const std::size_t patch = g.channels * s.kernel * s.kernel;
  const std::size_t spatial = g.out_h * g.out_w;
  Tensor grad_in(in.shape());
  std::vector<double> col(patch * spatial);
  std::vector<double> dcol(patch * spatial);
  const ConstMatMap weights(l.params[0].data(), static_cast<Idx>(s.outputs), static_cast<Idx>(patch));
  MatMap gw(grads[0].data(), static_cast<Idx>(s.outputs), static_cast<Idx>(patch));
  Eigen::Map<Eigen::VectorXd> gb(grads[1].data(), static_cast<Idx>(s.outputs));
  for (std::size_t i = 0; i < n; ++i) {
    im2col(in.slice(i).data(), g, s, col.data());
    const ConstMatMap go(grad_out.slice(i).data(), static_cast<Idx>(s.outputs), static_cast<Idx>(spatial));
    const ConstMatMap cm(col.data(), static_cast<Idx>(patch), static_cast<Idx>(spatial));
    gw.noalias() += go * cm.transpose();
    gb += go.rowwise().sum();
    MatMap dc(dcol.data(), static_cast<Idx>(patch), static_cast<Idx>(spatial));
    dc.noalias() = weights.transpose() * go;
    col2im(dcol.data(), g, s, grad_in.slice(i).data());
  }
  return grad_in;
}

template <bool IsMax>
Tensor pool_forward(const Layer& l, const Tensor& in, LayerAux& aux) {
  const LayerSpec& s = l.spec;
  const std::size_t n = batch_of(in);
  const std::size_t c = l.input_shape[0], h = l.input_shape[1], w = l.input_shape[2];
  const std::size_t oh = l.output_shape[1], ow = l.output_shape[2];
  Tensor out(batched(n, l.output_shape));
  [[maybe_unused]] const std::size_t per_sample = shape_size(l.output_shape);
  if constexpr (IsMax) aux.argmax.assign(out.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = in.slice(i).data();
    double* dst = out.slice(i).data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const auto y0 = static_cast<std::ptrdiff_t>(oy * s.stride) - static_cast<std::ptrdiff_t>(s.pad);
        const std::size_t ys = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
        const std::size_t ye = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0 + static_cast<std::ptrdiff_t>(s.kernel), 0)), h);
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const auto x0 = static_cast<std::ptrdiff_t>(ox * s.stride) - static_cast<std::ptrdiff_t>(s.pad);
          const std::size_t xs = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
          const std::size_t xe = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0 + static_cast<std::ptrdiff_t>(s.kernel), 0)), w);
          const std::size_t o = (ch * oh + oy) * ow + ox;
          if constexpr (IsMax) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t arg = (ch * h + ys) * w + xs;
            for (std::size_t y = ys; y < ye; ++y)
              for (std::size_t x = xs; x < xe; ++x) {
                const std::size_t idx = (ch * h + y) * w + x;
                if (src[idx] > best) {
                  best = src[idx];
                  arg = idx;
                }
              }
            dst[o] = best;
            aux.argmax[i * per_sample + o] = static_cast<std::uint32_t>(arg);
          } else {
            double sum = 0.0;
            for (std::size_t y = ys; y < ye; ++y)
              for (std::size_t x = xs; x < xe; ++x) sum += src[(ch * h + y) * w + x];
            dst[o] = sum / static_cast<double>((ye - ys) * (xe - xs));
          }
        }
      }
    }
  }
  return out;
}

Tensor max_pool_backward(const Layer& l, const Tensor& in, const LayerAux& aux,
                         const Tensor& grad_out) {
  const std::size_t n = batch_of(in);
  const std::size_t per = shape_size(l.output_shape);
  Tensor grad_in(in.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* go = grad_out.slice(i).data();
    double* gi = grad_in.slice(i).data();
    for (std::size_t o = 0; o < per; ++o) gi[aux.argmax[i * per + o]] += go[o];
  }
  return grad_in;
}

Tensor avg_pool_backward(const Layer& l, const Tensor& in, const Tensor& grad_out) {
  const LayerSpec& s = l.spec;
  const std::size_t n = batch_of(in);
  const std::size_t c = l.input_shape[0], h = l.input_shape[1], w = l.input_shape[2];
  const std::size_t oh = l.output_shape[1], ow = l.output_shape[2];
  Tensor grad_in(in.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* go = grad_out.slice(i).data();
    double* gi = grad_in.slice(i).data();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const auto y0 = static_cast<std::ptrdiff_t>(oy * s.stride) - static_cast<std::ptrdiff_t>(s.pad);
        const std::size_t ys = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
        const std::size_t ye = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0 + static_cast<std::ptrdiff_t>(s.kernel), 0)), h);
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const auto x0 = static_cast<std::ptrdiff_t>(ox * s.stride) - static_cast<std::ptrdiff_t>(s.pad);
          const std::size_t xs = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
          const std::size_t xe = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0 + static_cast<std::ptrdiff_t>(s.kernel), 0)), w);
          const double share =
              go[(ch * oh + oy) * ow + ox] / static_cast<double>((ye - ys) * (xe - xs));
          for (std::size_t y = ys; y < ye; ++y)
            for (std::size_t x = xs; x < xe; ++x) gi[(ch * h + y) * w + x] += share;
        }
      }
  }
  return grad_in;
}

Tensor inner_product_forward(const Layer& l, const Tensor& in) {
  const std::size_t n = batch_of(in);
  const std::size_t d = shape_size(l.input_shape);
  Tensor flat = in.reshaped({n, d});
  Tensor out = matmul_nt(flat, l.params[0]);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.slice(i);
    for (std::size_t o = 0; o < row.size(); ++o) row[o] += l.params[1][o];
  }
  return out;
}

Tensor inner_product_backward(const Layer& l, const Tensor& in, const Tensor& grad_out,
                              std::vector<Tensor>& grads) {
  const std::size_t n = batch_of(in);
  const std::size_t d = shape_size(l.input_shape);
  const Tensor flat = in.reshaped({n, d});
  grads[0] = matmul_tn(grad_out, flat);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = grad_out.slice(i);
    for (std::size_t o = 0; o < row.size(); ++o) grads[1][o] += row[o];
  }
  return matmul(grad_out, l.params[0]).reshaped(in.shape());
}

// Channel count and spatial size of one sample for channel-wise layers.
std::pair<std::size_t, std::size_t> channel_layout(const Shape& per_sample) {
  const std::size_t channels = per_sample.empty() ? 1 : per_sample[0];
  return {channels, shape_size(per_sample) / std::max<std::size_t>(channels, 1)};
}

Tensor lrn_forward(const Layer& l, const Tensor& in, LayerAux& aux) {
  const LayerSpec& s = l.spec;
  const auto [channels, spatial] = channel_layout(l.input_shape);
  const std::size_t n = batch_of(in);
  const auto half = static_cast<std::ptrdiff_t>(s.local_size / 2);
  const double coeff = s.alpha / static_cast<double>(s.local_size);
  Tensor out(in.shape());
  aux.scale = Tensor(in.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = in.slice(i).data();
    double* b = out.slice(i).data();
    double* sc = aux.scale.slice(i).data();
    for (std::size_t c = 0; c < channels; ++c) {
      const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(c) - half);
      const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(channels) - 1,
                                               static_cast<std::ptrdiff_t>(c) + half);
      for (std::size_t p = 0; p < spatial; ++p) {
        double sum = 0.0;
        for (auto cc = lo; cc <= hi; ++cc) {
          const double v = a[static_cast<std::size_t>(cc) * spatial + p];
          sum += v * v;
        }
        const double scale = s.k + coeff * sum;
        sc[c * spatial + p] = scale;
        b[c * spatial + p] = a[c * spatial + p] * std::pow(scale, -s.beta);
      }
    }
  }
  return out;
}

Tensor lrn_backward(const Layer& l, const Tensor& in, const Tensor& out, const LayerAux& aux,
                    const Tensor& grad_out) {
  const LayerSpec& s = l.spec;
  const auto [channels, spatial] = channel_layout(l.input_shape);
  const std::size_t n = batch_of(in);
  const auto half = static_cast<std::ptrdiff_t>(s.local_size / 2);
  const double coeff = 2.0 * s.alpha * s.beta / static_cast<double>(s.local_size);
  Tensor grad_in(in.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = in.slice(i).data();
    const double* b = out.slice(i).data();
    const double* g = grad_out.slice(i).data();
    const double* sc = aux.scale.slice(i).data();
    double* gi = grad_in.slice(i).data();
    for (std::size_t c = 0; c < channels; ++c) {
      const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(c) - half);
      const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(channels) - 1,
                                               static_cast<std::ptrdiff_t>(c) + half);
      for (std::size_t p = 0; p < spatial; ++p) {
        const std::size_t idx = c * spatial + p;
        double cross = 0.0;
        for (auto cc = lo; cc <= hi; ++cc) {
          const std::size_t j = static_cast<std::size_t>(cc) * spatial + p;
          cross += g[j] * b[j] / sc[j];
        }
        gi[idx] = g[idx] * std::pow(sc[idx], -s.beta) - coeff * a[idx] * cross;
      }
    }
  }
  return grad_in;
}

}  // namespace

std::size_t pooled_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                          std::size_t pad) {
  const std::size_t padded = input + 2 * pad;
  if (padded < kernel) return 0;
  std::size_t out = (padded - kernel + stride - 1) / stride + 1;
  // The last window must start inside the (left-padded) image.
  if (pad > 0 && (out - 1) * stride >= input + pad) --out;
  return out;
}

Layer make_layer(const LayerSpec& spec, const Shape& input_shape) {
  Layer layer;
  layer.spec = spec;
  layer.input_shape = input_shape;
  const auto fail = [&](const std::string& why) {
    throw DimensionError(std::string(layer_kind_name(spec.kind)) + " on input " +
                         shape_string(input_shape) + ": " + why);
  };
  switch (spec.kind) {
    case LayerKind::convolution: {
      if (input_shape.size() != 3) fail("expects a [c, h, w] input");
      const std::size_t h = input_shape[1] + 2 * spec.pad;
      const std::size_t w = input_shape[2] + 2 * spec.pad;
      if (h < spec.kernel || w < spec.kernel) fail("kernel larger than padded input");
      layer.output_shape = {spec.outputs, (h - spec.kernel) / spec.stride + 1,
                            (w - spec.kernel) / spec.stride + 1};
      layer.params = {Tensor({spec.outputs, input_shape[0] * spec.kernel * spec.kernel}),
                      Tensor({spec.outputs})};
      break;
    }
    case LayerKind::max_pool:
    case LayerKind::avg_pool: {
      if (input_shape.size() != 3) fail("expects a [c, h, w] input");
      const std::size_t oh = pooled_extent(input_shape[1], spec.kernel, spec.stride, spec.pad);
      const std::size_t ow = pooled_extent(input_shape[2], spec.kernel, spec.stride, spec.pad);
      if (oh == 0 || ow == 0) fail("kernel larger than padded input");
      layer.output_shape = {input_shape[0], oh, ow};
      break;
    }
    case LayerKind::inner_product:
      layer.output_shape = {spec.outputs};
      layer.params = {Tensor({spec.outputs, shape_size(input_shape)}), Tensor({spec.outputs})};
      break;
    case LayerKind::relu:
    case LayerKind::lrn:
      layer.output_shape = input_shape;
      break;
    case LayerKind::data:
    case LayerKind::softmax:
    case LayerKind::hash_head:
      fail("not a feature layer");
  }
  return layer;
}

Tensor layer_forward(const Layer& layer, const Tensor& input, LayerAux& aux) {
  if (input.rank() != layer.input_shape.size() + 1 ||
      !std::equal(layer.input_shape.begin(), layer.input_shape.end(), input.shape().begin() + 1)) {
    throw DimensionError(std::string(layer_kind_name(layer.spec.kind)) + " expects samples of shape " +
                         shape_string(layer.input_shape) + ", got batch " +
                         shape_string(input.shape()));
  }
  switch (layer.spec.kind) {
    case LayerKind::convolution:
      return conv_forward(layer, input);
    case LayerKind::max_pool:
      return pool_forward<true>(layer, input, aux);
    case LayerKind::avg_pool:
      return pool_forward<false>(layer, input, aux);
    case LayerKind::inner_product:
      return inner_product_forward(layer, input);
    case LayerKind::relu:
      return map(input, [](double v) { return v > 0.0 ? v : 0.0; });
    case LayerKind::lrn:
      return lrn_forward(layer, input, aux);
    default:
      throw StateError("layer kind has no forward pass");
  }
}

Tensor layer_backward(const Layer& layer, const Tensor& input, const Tensor& output,
                      const LayerAux& aux, const Tensor& grad_output,
                      std::vector<Tensor>& param_grads) {
  if (grad_output.shape() != output.shape()) {
    throw DimensionError("gradient shape " + shape_string(grad_output.shape()) +
                         " does not match layer output " + shape_string(output.shape()));
  }
  param_grads.clear();
  for (const auto& p : layer.params) param_grads.emplace_back(p.shape());
  switch (layer.spec.kind) {
    case LayerKind::convolution:
      return conv_backward(layer, input, grad_output, param_grads);
    case LayerKind::max_pool:
      return max_pool_backward(layer, input, aux, grad_output);
    case LayerKind::avg_pool:
      return avg_pool_backward(layer, input, grad_output);
    case LayerKind::inner_product:
      return inner_product_backward(layer, input, grad_output, param_grads);
    case LayerKind::relu: {
      Tensor grad_in(input.shape());
      for (std::size_t i = 0; i < input.size(); ++i)
        grad_in[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
      return grad_in;
    }
    case LayerKind::lrn:
      return lrn_backward(layer, input, output, aux, grad_output);
    default:
      throw StateError("layer kind has no backward pass");
  }
}

}  // namespace deephash
