#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hashlab/layer.hpp"
#include "hashlab/tensor.hpp"

namespace hashlab {

/// Ordered stack of layers applied to a fixed input shape.
struct NetworkSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  /// Expected flattened output length, checked by validate() when set.
  std::optional<Index> output_length;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// One output shape per layer. Throws ShapeError on the first layer that cannot be applied.
std::vector<Shape> infer_shapes(const NetworkSpec& spec);

/// Flattened length of the final layer's output (the input length when there are no layers).
Index output_length(const NetworkSpec& spec);

/// Runs shape inference and checks the declared output length.
void validate(const NetworkSpec& spec);

/// Learnable tensors of one layer plus their momentum buffers. Parameterless layers hold
/// empty tensors.
template <typename Scalar>
struct LayerParams {
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
  Tensor<Scalar> weight_velocity;
  Tensor<Scalar> bias_velocity;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

template <typename Scalar>
struct ParamStore {
  std::vector<LayerParams<Scalar>> layers;

  Index parameter_count() const;
  friend bool operator==(const ParamStore&, const ParamStore&) = default;

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (const auto& l : layers) {
      out.layers.push_back({l.weight.template cast<Other>(), l.bias.template cast<Other>(),
                            l.weight_velocity.template cast<Other>(),
                            l.bias_velocity.template cast<Other>()});
    }
    return out;
  }
};

template <typename Scalar>
struct ParamGradient {
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

template <typename Scalar>
using ParamGradients = std::vector<ParamGradient<Scalar>>;

/// Zero gradients congruent with `params`.
template <typename Scalar>
ParamGradients<Scalar> zero_gradients(const ParamStore<Scalar>& params);

/// a += scale * b, tensor by tensor.
template <typename Scalar>
void accumulate(ParamGradients<Scalar>& a, const ParamGradients<Scalar>& b, Scalar scale = Scalar(1));

/// Throws ShapeError unless every tensor matches the spec-derived shape.
template <typename Scalar>
void check_congruent(const NetworkSpec& spec, const ParamStore<Scalar>& params);

/// He-style Gaussian weights (stddev sqrt(2 / fan_in)), zero biases, zero momentum.
template <typename Scalar>
ParamStore<Scalar> init_params(const NetworkSpec& spec, std::uint64_t seed);

template <typename Scalar>
struct ForwardCache {
  std::vector<Tensor<Scalar>> activations;  // activations[i] is the input of layer i
  std::vector<LayerCache<Scalar>> layers;
};

template <typename Scalar>
struct ForwardResult {
  Tensor<Scalar> output;
  ForwardCache<Scalar> cache;
};

template <typename Scalar>
struct BackwardResult {
  Tensor<Scalar> input_gradient;
  ParamGradients<Scalar> param_gradients;
};

/// Throws ShapeError when `input` does not match the spec and NumericError on
/// a non-finite activation.
template <typename Scalar>
ForwardResult<Scalar> forward(const NetworkSpec& spec, const ParamStore<Scalar>& params,
                              const Tensor<Scalar>& input);

template <typename Scalar>
BackwardResult<Scalar> backward(const NetworkSpec& spec, const ParamStore<Scalar>& params,
                                const ForwardCache<Scalar>& cache,
                                const Tensor<Scalar>& output_gradient);

}  // namespace hashlab
