#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deephash/netconfig.hpp"
#include "deephash/tensor.hpp"

namespace deephash {

/// A layer instance: its declaration, per-sample input/output shapes and
/// parameter blocks ({weights, bias} for convolution and inner-product,
/// empty otherwise).
///
/// Batched tensors carry the sample count as their leading extent; spatial
/// layers use [n, c, h, w], inner-product outputs are [n, d].
struct Layer {
  LayerSpec spec;
  Shape input_shape;
  Shape output_shape;
  std::vector<Tensor> params;

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Per-layer side results kept by forward for use in backward.
struct LayerAux {
  std::vector<std::uint32_t> argmax;  // max-pool winners (flat input offsets per sample)
  Tensor scale;                        // lrn denominators before the power
};

/// Builds a layer with zero-initialised parameters. Throws DimensionError if
/// the geometry does not fit `input_shape`.
Layer make_layer(const LayerSpec& spec, const Shape& input_shape);

Tensor layer_forward(const Layer& layer, const Tensor& input, LayerAux& aux);

/// Returns the gradient with respect to `input`; parameter gradients are
/// written to `param_grads` (resized to match layer.params).
Tensor layer_backward(const Layer& layer, const Tensor& input, const Tensor& output,
                      const LayerAux& aux, const Tensor& grad_output,
                      std::vector<Tensor>& param_grads);

/// Output extent of pooling with Caffe's ceil rounding.
std::size_t pooled_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                          std::size_t pad);

}  // namespace deephash
