#include "hashlab/layer.hpp"

#include <algorithm>
#include <limits>

#include "hashlab/activations.hpp"

namespace hashlab {

namespace {

struct Geometry {
  Index channels, height, width;
  Index out_height, out_width;
};

Geometry window_geometry(const LayerSpec& layer, const Shape& input) {
  if (input.size() != 3) {
    throw ShapeError(std::string(to_string(layer.kind)) + " expects a CxHxW input, got " +
                     to_string(input));
  }
  return {input[0], input[1], input[2],
          window_extent(input[1], layer.kernel, layer.stride, layer.pad, layer.rounding),
          window_extent(input[2], layer.kernel, layer.stride, layer.pad, layer.rounding)};
}

void check_geometry(const LayerSpec& layer) {
  if (layer.kernel < 1 || layer.stride < 1 || layer.pad < 0) {
    throw ShapeError(std::string(to_string(layer.kind)) + ": kernel and stride must be >= 1, pad >= 0");
  }
}

template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& input, const Geometry& g, Index k, Index stride,
                         Index pad) {
  RowMatrix<Scalar> cols(g.channels * k * k, g.out_height * g.out_width);
  for (Index c = 0; c < g.channels; ++c) {
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        const Index row = (c * k + ki) * k + kj;
        for (Index oh = 0; oh < g.out_height; ++oh) {
          const Index h = oh * stride - pad + ki;
          for (Index ow = 0; ow < g.out_width; ++ow) {
            const Index w = ow * stride - pad + kj;
            const bool inside = h >= 0 && h < g.height && w >= 0 && w < g.width;
            cols(row, oh * g.out_width + ow) = inside ? input.at(c, h, w) : Scalar(0);
          }
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, const Geometry& g, Index k, Index stride, Index pad,
            Tensor<Scalar>& input_gradient) {
  for (Index c = 0; c < g.channels; ++c) {
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        const Index row = (c * k + ki) * k + kj;
        for (Index oh = 0; oh < g.out_height; ++oh) {
          const Index h = oh * stride - pad + ki;
          if (h < 0 || h >= g.height) continue;
          for (Index ow = 0; ow < g.out_width; ++ow) {
            const Index w = ow * stride - pad + kj;
            if (w < 0 || w >= g.width) continue;
            input_gradient.at(c, h, w) += cols(row, oh * g.out_width + ow);
          }
        }
      }
    }
  }
}

// Window [begin, end) of output position o clipped to the input.
inline std::pair<Index, Index> window(Index o, const LayerSpec& layer, Index extent) {
  const Index start = o * layer.stride - layer.pad;
  return {std::max<Index>(start, 0), std::min<Index>(start + layer.kernel, extent)};
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::fully_connected: return "fc";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::piecewise_threshold: return "threshold";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "conv" || name == "convolution") return LayerKind::conv;
  if (name == "maxpool") return LayerKind::maxpool;
  if (name == "avgpool") return LayerKind::avgpool;
  if (name == "fc" || name == "fully-connected") return LayerKind::fully_connected;
  if (name == "relu") return LayerKind::relu;
  if (name == "sigmoid") return LayerKind::sigmoid;
  if (name == "threshold" || name == "piecewise-threshold") return LayerKind::piecewise_threshold;
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

std::string_view to_string(Rounding rounding) {
  return rounding == Rounding::floor ? "floor" : "ceil";
}

Rounding parse_rounding(std::string_view name) {
  if (name == "floor") return Rounding::floor;
  if (name == "ceil") return Rounding::ceil;
  throw ConfigError("unknown rounding rule '" + std::string(name) + "'");
}

bool has_params(LayerKind kind) {
  return kind == LayerKind::conv || kind == LayerKind::fully_connected;
}

Index window_extent(Index input, Index kernel, Index stride, Index pad, Rounding rounding) {
  const Index span = input + 2 * pad - kernel;
  if (span < 0) {
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded extent " +
                     std::to_string(input + 2 * pad));
  }
  Index out = (rounding == Rounding::floor ? span / stride : (span + stride - 1) / stride) + 1;
  if (rounding == Rounding::ceil && pad > 0 && (out - 1) * stride >= input + pad) --out;
  if (out <= 0) throw ShapeError("non-positive output extent");
  return out;
}

Shape output_shape(const LayerSpec& layer, const Shape& input) {
  if (!shape_valid(input)) throw ShapeError("invalid input shape " + to_string(input));
  switch (layer.kind) {
    case LayerKind::conv: {
      check_geometry(layer);
      if (layer.channels < 1) throw ShapeError("conv: output channels must be >= 1");
      const Geometry g = window_geometry(layer, input);
      return {layer.channels, g.out_height, g.out_width};
    }
    case LayerKind::maxpool:
    case LayerKind::avgpool: {
      check_geometry(layer);
      const Geometry g = window_geometry(layer, input);
      return {g.channels, g.out_height, g.out_width};
    }
    case LayerKind::fully_connected:
      if (layer.channels < 1) throw ShapeError("fc: output length must be >= 1");
      return {layer.channels};
    case LayerKind::relu:
    case LayerKind::sigmoid:
    case LayerKind::piecewise_threshold:
      return input;
  }
  throw ShapeError("unknown layer kind");
}

Shape weight_shape(const LayerSpec& layer, const Shape& input) {
  switch (layer.kind) {
    case LayerKind::conv: return {layer.channels, input.at(0), layer.kernel, layer.kernel};
    case LayerKind::fully_connected: return {layer.channels, numel(input)};
    default: return {};
  }
}

Shape bias_shape(const LayerSpec& layer, const Shape&) {
  return has_params(layer.kind) ? Shape{layer.channels} : Shape{};
}

Index fan_in(const LayerSpec& layer, const Shape& input) {
  switch (layer.kind) {
    case LayerKind::conv: return input.at(0) * layer.kernel * layer.kernel;
    case LayerKind::fully_connected: return numel(input);
    default: return 0;
  }
}

template <typename Scalar>
Tensor<Scalar> layer_forward(const LayerSpec& layer, const Tensor<Scalar>& weight,
                             const Tensor<Scalar>& bias, const Tensor<Scalar>& input,
                             LayerCache<Scalar>& cache) {
  Tensor<Scalar> output(output_shape(layer, input.shape()));
  switch (layer.kind) {
    case LayerKind::conv: {
      const Geometry g = window_geometry(layer, input.shape());
      cache.columns = im2col(input, g, layer.kernel, layer.stride, layer.pad);
      auto out = output.matrix(layer.channels);
      out.noalias() = weight.matrix(layer.channels) * cache.columns;
      out.colwise() += bias.values();
      break;
    }
    case LayerKind::maxpool: {
      const Geometry g = window_geometry(layer, input.shape());
      cache.argmax.assign(static_cast<std::size_t>(output.size()), -1);
      Index o = 0;
      for (Index c = 0; c < g.channels; ++c) {
        for (Index oh = 0; oh < g.out_height; ++oh) {
          const auto [h0, h1] = window(oh, layer, g.height);
          for (Index ow = 0; ow < g.out_width; ++ow, ++o) {
            const auto [w0, w1] = window(ow, layer, g.width);
            Scalar best = -std::numeric_limits<Scalar>::infinity();
            Index arg = -1;
            for (Index h = h0; h < h1; ++h) {
              for (Index w = w0; w < w1; ++w) {
                const Index idx = (c * g.height + h) * g.width + w;
                if (input[idx] > best) {
                  best = input[idx];
                  arg = idx;
                }
              }
            }
            output[o] = arg < 0 ? Scalar(0) : best;
            cache.argmax[static_cast<std::size_t>(o)] = arg;
          }
        }
      }
      break;
    }
    case LayerKind::avgpool: {
      const Geometry g = window_geometry(layer, input.shape());
      Index o = 0;
      for (Index c = 0; c < g.channels; ++c) {
        for (Index oh = 0; oh < g.out_height; ++oh) {
          const auto [h0, h1] = window(oh, layer, g.height);
          for (Index ow = 0; ow < g.out_width; ++ow, ++o) {
            const auto [w0, w1] = window(ow, layer, g.width);
            const Index count = (h1 - h0) * (w1 - w0);
            Scalar sum(0);
            for (Index h = h0; h < h1; ++h) {
              for (Index w = w0; w < w1; ++w) sum += input.at(c, h, w);
            }
            output[o] = count > 0 ? sum / Scalar(count) : Scalar(0);
          }
        }
      }
      break;
    }
    case LayerKind::fully_connected:
      output.values().noalias() = weight.matrix(layer.channels) * input.values();
      output.values() += bias.values();
      break;
    case LayerKind::relu:
      output.values() = input.values().cwiseMax(Scalar(0));
      break;
    case LayerKind::sigmoid: {
      const auto beta = static_cast<Scalar>(layer.beta);
      output.values() = input.values().unaryExpr([beta](Scalar c) { return sigmoid_beta(c, beta); });
      break;
    }
    case LayerKind::piecewise_threshold: {
      const auto eps = static_cast<Scalar>(layer.epsilon);
      output.values() =
          input.values().unaryExpr([eps](Scalar s) { return piecewise_threshold(s, eps); });
      break;
    }
  }
  return output;
}

template <typename Scalar>
LayerGradients<Scalar> layer_backward(const LayerSpec& layer, const Tensor<Scalar>& weight,
                                      const Tensor<Scalar>& input, const Tensor<Scalar>& output,
                                      const LayerCache<Scalar>& cache,
                                      const Tensor<Scalar>& output_gradient) {
  if (output_gradient.shape() != output.shape()) {
    throw ShapeError("output gradient " + to_string(output_gradient.shape()) +
                     " does not match layer output " + to_string(output.shape()));
  }
  LayerGradients<Scalar> grads;
  grads.input = input.zeros_like();
  switch (layer.kind) {
    case LayerKind::conv: {
      const Geometry g = window_geometry(layer, input.shape());
      const auto dout = output_gradient.matrix(layer.channels);
      grads.weight = weight.zeros_like();
      grads.weight.matrix(layer.channels).noalias() = dout * cache.columns.transpose();
      grads.bias = Tensor<Scalar>(Shape{layer.channels}, dout.rowwise().sum());
      const RowMatrix<Scalar> dcols = weight.matrix(layer.channels).transpose() * dout;
      col2im(dcols, g, layer.kernel, layer.stride, layer.pad, grads.input);
      break;
    }
    case LayerKind::maxpool:
      for (Index o = 0; o < output.size(); ++o) {
        const Index arg = cache.argmax[static_cast<std::size_t>(o)];
        if (arg >= 0) grads.input[arg] += output_gradient[o];
      }
      break;
    case LayerKind::avgpool: {
      const Geometry g = window_geometry(layer, input.shape());
      Index o = 0;
      for (Index c = 0; c < g.channels; ++c) {
        for (Index oh = 0; oh < g.out_height; ++oh) {
          const auto [h0, h1] = window(oh, layer, g.height);
          for (Index ow = 0; ow < g.out_width; ++ow, ++o) {
            const auto [w0, w1] = window(ow, layer, g.width);
            const Index count = (h1 - h0) * (w1 - w0);
            if (count == 0) continue;
            const Scalar share = output_gradient[o] / Scalar(count);
            for (Index h = h0; h < h1; ++h) {
              for (Index w = w0; w < w1; ++w) grads.input.at(c, h, w) += share;
            }
          }
        }
      }
      break;
    }
    case LayerKind::fully_connected: {
      const auto& dout = output_gradient.values();
      grads.weight = weight.zeros_like();
      grads.weight.matrix(layer.channels).noalias() = dout * input.values().transpose();
      grads.bias = Tensor<Scalar>(Shape{layer.channels}, dout);
      grads.input.values().noalias() = weight.matrix(layer.channels).transpose() * dout;
      break;
    }
    case LayerKind::relu:
      grads.input.values() = (input.values().array() > Scalar(0))
                                 .select(output_gradient.values(), Scalar(0));
      break;
    case LayerKind::sigmoid: {
      const auto beta = static_cast<Scalar>(layer.beta);
      grads.input.values() = output_gradient.values().cwiseProduct(output.values().unaryExpr(
          [beta](Scalar s) { return sigmoid_beta_derivative(s, beta); }));
      break;
    }
    case LayerKind::piecewise_threshold: {
      const auto eps = static_cast<Scalar>(layer.epsilon);
      grads.input.values() = output_gradient.values().cwiseProduct(input.values().unaryExpr(
          [eps](Scalar s) { return piecewise_threshold_derivative(s, eps); }));
      break;
    }
  }
  return grads;
}

template Tensor<float> layer_forward(const LayerSpec&, const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&, LayerCache<float>&);
template Tensor<double> layer_forward(const LayerSpec&, const Tensor<double>&,
                                      const Tensor<double>&, const Tensor<double>&,
                                      LayerCache<double>&);
template LayerGradients<float> layer_backward(const LayerSpec&, const Tensor<float>&,
                                              const Tensor<float>&, const Tensor<float>&,
                                              const LayerCache<float>&, const Tensor<float>&);
template LayerGradients<double> layer_backward(const LayerSpec&, const Tensor<double>&,
                                               const Tensor<double>&, const Tensor<double>&,
                                               const LayerCache<double>&, const Tensor<double>&);

}  // namespace hashlab
