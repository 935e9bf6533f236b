#include "hashlab/network.hpp"

#include <cmath>
#include <random>

namespace hashlab {

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
  if (!shape_valid(spec.input_shape)) {
    throw ShapeError("network input shape " + to_string(spec.input_shape) + " is invalid");
  }
  std::vector<Shape> shapes;
  shapes.reserve(spec.layers.size());
  Shape current = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      current = output_shape(spec.layers[i], current);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
    }
    shapes.push_back(current);
  }
  return shapes;
}

Index output_length(const NetworkSpec& spec) {
  const auto shapes = infer_shapes(spec);
  return numel(shapes.empty() ? spec.input_shape : shapes.back());
}

void validate(const NetworkSpec& spec) {
  const Index length = output_length(spec);
  if (spec.output_length && *spec.output_length != length) {
    throw ShapeError("network produces " + std::to_string(length) + " features but " +
                     std::to_string(*spec.output_length) + " were declared");
  }
}

template <typename Scalar>
Index ParamStore<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename Scalar>
ParamGradients<Scalar> zero_gradients(const ParamStore<Scalar>& params) {
  ParamGradients<Scalar> grads;
  grads.reserve(params.layers.size());
  for (const auto& l : params.layers) grads.push_back({l.weight.zeros_like(), l.bias.zeros_like()});
  return grads;
}

template <typename Scalar>
void accumulate(ParamGradients<Scalar>& a, const ParamGradients<Scalar>& b, Scalar scale) {
  if (a.size() != b.size()) throw ShapeError("gradient sets differ in layer count");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].weight.shape() != b[i].weight.shape() || a[i].bias.shape() != b[i].bias.shape()) {
      throw ShapeError("gradient shapes differ at layer " + std::to_string(i));
    }
    a[i].weight.values() += scale * b[i].weight.values();
    a[i].bias.values() += scale * b[i].bias.values();
  }
}

template <typename Scalar>
void check_congruent(const NetworkSpec& spec, const ParamStore<Scalar>& params) {
  if (params.layers.size() != spec.layers.size()) {
    throw ShapeError("parameter store has " + std::to_string(params.layers.size()) +
                     " layers, network has " + std::to_string(spec.layers.size()));
  }
  Shape current = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    const auto& p = params.layers[i];
    const Shape ws = weight_shape(layer, current);
    const Shape bs = bias_shape(layer, current);
    if (p.weight.shape() != ws || p.bias.shape() != bs || p.weight_velocity.shape() != ws ||
        p.bias_velocity.shape() != bs) {
      throw ShapeError("layer " + std::to_string(i) + " parameters do not match shape " +
                       to_string(ws));
    }
    current = output_shape(layer, current);
  }
}

template <typename Scalar>
ParamStore<Scalar> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamStore<Scalar> params;
  Shape current = spec.input_shape;
  for (const auto& layer : spec.layers) {
    LayerParams<Scalar> p;
    if (has_params(layer.kind)) {
      p.weight = Tensor<Scalar>(weight_shape(layer, current));
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in(layer, current)));
      for (Index j = 0; j < p.weight.size(); ++j) {
        p.weight[j] = static_cast<Scalar>(stddev * normal(rng));
      }
      p.bias = Tensor<Scalar>(bias_shape(layer, current));
      p.weight_velocity = p.weight.zeros_like();
      p.bias_velocity = p.bias.zeros_like();
    }
    params.layers.push_back(std::move(p));
    current = output_shape(layer, current);
  }
  return params;
}

template <typename Scalar>
ForwardResult<Scalar> forward(const NetworkSpec& spec, const ParamStore<Scalar>& params,
                              const Tensor<Scalar>& input) {
  if (input.shape() != spec.input_shape) {
    throw ShapeError("input " + to_string(input.shape()) + " does not match network input " +
                     to_string(spec.input_shape));
  }
  if (params.layers.size() != spec.layers.size()) {
    throw ShapeError("parameter store does not match network depth");
  }
  if (!input.all_finite()) throw NumericError("non-finite network input");
  ForwardResult<Scalar> result;
  auto& cache = result.cache;
  cache.activations.reserve(spec.layers.size() + 1);
  cache.layers.resize(spec.layers.size());
  cache.activations.push_back(input);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& p = params.layers[i];
    Tensor<Scalar> out =
        layer_forward(spec.layers[i], p.weight, p.bias, cache.activations.back(), cache.layers[i]);
    if (!out.all_finite()) {
      throw NumericError("non-finite activation after layer " + std::to_string(i) + " (" +
                         std::string(to_string(spec.layers[i].kind)) + ")");
    }
    cache.activations.push_back(std::move(out));
  }
  result.output = cache.activations.back();
  return result;
}

template <typename Scalar>
BackwardResult<Scalar> backward(const NetworkSpec& spec, const ParamStore<Scalar>& params,
                                const ForwardCache<Scalar>& cache,
                                const Tensor<Scalar>& output_gradient) {
  const std::size_t depth = spec.layers.size();
  if (cache.activations.size() != depth + 1 || cache.layers.size() != depth) {
    throw ShapeError("forward cache does not belong to this network");
  }
  BackwardResult<Scalar> result;
  result.param_gradients.resize(depth);
  Tensor<Scalar> grad = output_gradient;
  for (std::size_t i = depth; i-- > 0;) {
    auto g = layer_backward(spec.layers[i], params.layers[i].weight, cache.activations[i],
                            cache.activations[i + 1], cache.layers[i], grad);
    if (!g.input.all_finite() || !g.weight.all_finite() || !g.bias.all_finite()) {
      throw NumericError("non-finite gradient at layer " + std::to_string(i));
    }
    result.param_gradients[i] = {std::move(g.weight), std::move(g.bias)};
    grad = std::move(g.input);
  }
  if (grad.shape() != spec.input_shape) grad.reshape(spec.input_shape);
  result.input_gradient = std::move(grad);
  return result;
}

#define HASHLAB_INSTANTIATE(S)                                                                   \
  template struct ParamStore<S>;                                                                 \
  template ParamGradients<S> zero_gradients(const ParamStore<S>&);                               \
  template void accumulate(ParamGradients<S>&, const ParamGradients<S>&, S);                     \
  template void check_congruent(const NetworkSpec&, const ParamStore<S>&);                       \
  template ParamStore<S> init_params(const NetworkSpec&, std::uint64_t);                         \
  template ForwardResult<S> forward(const NetworkSpec&, const ParamStore<S>&, const Tensor<S>&); \
  template BackwardResult<S> backward(const NetworkSpec&, const ParamStore<S>&,                  \
                                      const ForwardCache<S>&, const Tensor<S>&);

HASHLAB_INSTANTIATE(float)
HASHLAB_INSTANTIATE(double)
#undef HASHLAB_INSTANTIATE

}  // namespace hashlab
