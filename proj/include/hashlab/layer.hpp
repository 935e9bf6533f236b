#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hashlab/tensor.hpp"

namespace hashlab {

enum class LayerKind { conv, maxpool, avgpool, fully_connected, relu, sigmoid, piecewise_threshold };

/// How a fractional sliding-window count is turned into an output extent.
enum class Rounding { floor, ceil };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);
std::string_view to_string(Rounding rounding);
Rounding parse_rounding(std::string_view name);

/// One entry of a network description. Geometry fields are ignored by
/// element-wise kinds; `channels` is the output channel count for conv and
/// the output length for fully_connected.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  Index kernel = 1;
  Index stride = 1;
  Index pad = 0;
  Index channels = 0;
  Rounding rounding = Rounding::floor;
  double beta = 1.0;
  double epsilon = 0.5;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

bool has_params(LayerKind kind);

/// Output extent of a sliding window along one axis. Ceil rounding drops a
/// final window that would start inside the padding only.
Index window_extent(Index input, Index kernel, Index stride, Index pad, Rounding rounding);

/// Throws ShapeError when the layer cannot be applied to `input`.
Shape output_shape(const LayerSpec& layer, const Shape& input);
Shape weight_shape(const LayerSpec& layer, const Shape& input);
Shape bias_shape(const LayerSpec& layer, const Shape& input);
Index fan_in(const LayerSpec& layer, const Shape& input);

/// Per-layer state a backward pass needs beyond the layer's input and output.
template <typename Scalar>
struct LayerCache {
  RowMatrix<Scalar> columns;  // im2col patches for conv
  std::vector<Index> argmax;  // winning input offset per maxpool output
};

template <typename Scalar>
struct LayerGradients {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

template <typename Scalar>
Tensor<Scalar> layer_forward(const LayerSpec& layer, const Tensor<Scalar>& weight,
                             const Tensor<Scalar>& bias, const Tensor<Scalar>& input,
                             LayerCache<Scalar>& cache);

template <typename Scalar>
LayerGradients<Scalar> layer_backward(const LayerSpec& layer, const Tensor<Scalar>& weight,
                                      const Tensor<Scalar>& input, const Tensor<Scalar>& output,
                                      const LayerCache<Scalar>& cache,
                                      const Tensor<Scalar>& output_gradient);

}  // namespace hashlab
