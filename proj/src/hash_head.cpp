#include "hashlab/hash_head.hpp"

#include <cmath>
#include <random>

#include "hashlab/activations.hpp"

namespace hashlab {

std::string_view to_string(HeadVariant variant) {
  return variant == HeadVariant::divide_and_encode ? "divide-and-encode" : "fc";
}

HeadVariant parse_head_variant(std::string_view name) {
  if (name == "divide-and-encode" || name == "dem") return HeadVariant::divide_and_encode;
  if (name == "fc" || name == "fully-connected") return HeadVariant::fully_connected;
  throw ConfigError("unknown head variant '" + std::string(name) + "'");
}

std::vector<SliceRange> partition_slices(Index d, Index q) {
  if (q < 1) throw DomainError("partition_slices: q must be >= 1");
  if (d < q) {
    throw DomainError("partition_slices: " + std::to_string(d) + " features cannot feed " +
                      std::to_string(q) + " bits");
  }
  const Index base = d / q;
  const Index extra = d % q;
  std::vector<SliceRange> slices;
  slices.reserve(static_cast<std::size_t>(q));
  Index begin = 0;
  for (Index i = 0; i < q; ++i) {
    const Index length = base + (i < extra ? 1 : 0);
    slices.push_back({begin, length});
    begin += length;
  }
  return slices;
}

void validate(const HashHeadSpec& spec) {
  if (spec.bits < 1) throw DomainError("hash head needs q >= 1");
  if (spec.input_length < spec.bits) {
    throw ShapeError("hash head input length " + std::to_string(spec.input_length) +
                     " is smaller than q = " + std::to_string(spec.bits));
  }
  if (!(spec.beta > 0)) throw DomainError("hash head beta must be positive");
  if (!(spec.epsilon > 0 && spec.epsilon <= 0.5)) throw DomainError("hash head epsilon outside (0, 0.5]");
}

Shape head_weight_shape(const HashHeadSpec& spec) {
  if (spec.variant == HeadVariant::divide_and_encode) return {spec.input_length};
  return {spec.bits, spec.input_length};
}

template <typename Scalar>
Tensor<Scalar> init_head_weights(const HashHeadSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<Scalar> w(head_weight_shape(spec));
  if (spec.variant == HeadVariant::divide_and_encode) {
    for (const auto& s : partition_slices(spec.input_length, spec.bits)) {
      const double stddev = 1.0 / std::sqrt(static_cast<double>(s.length));
      for (Index j = s.begin; j < s.begin + s.length; ++j) w[j] = static_cast<Scalar>(stddev * normal(rng));
    }
  } else {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(spec.input_length));
    for (Index j = 0; j < w.size(); ++j) w[j] = static_cast<Scalar>(stddev * normal(rng));
  }
  return w;
}

template <typename Scalar>
HeadForward<Scalar> head_forward(const HashHeadSpec& spec, const Tensor<Scalar>& weights,
                                 const Vector<Scalar>& features) {
  validate(spec);
  if (features.size() != spec.input_length) {
    throw ShapeError("hash head expects " + std::to_string(spec.input_length) + " features, got " +
                     std::to_string(features.size()));
  }
  if (weights.shape() != head_weight_shape(spec)) {
    throw ShapeError("hash head weights " + to_string(weights.shape()) + " do not match " +
                     to_string(head_weight_shape(spec)));
  }
  Vector<Scalar> pre(spec.bits);
  if (spec.variant == HeadVariant::divide_and_encode) {
    const auto slices = partition_slices(spec.input_length, spec.bits);
    for (Index i = 0; i < spec.bits; ++i) {
      const auto& s = slices[static_cast<std::size_t>(i)];
      pre[i] = weights.values().segment(s.begin, s.length).dot(features.segment(s.begin, s.length));
    }
  } else {
    pre.noalias() = weights.matrix(spec.bits) * features;
  }
  const auto beta = static_cast<Scalar>(spec.beta);
  const auto eps = static_cast<Scalar>(spec.epsilon);
  HeadForward<Scalar> out;
  out.cache.features = features;
  out.cache.sigmoid = pre.unaryExpr([beta](Scalar c) { return sigmoid_beta(c, beta); });
  if (spec.apply_threshold) {
    out.code = out.cache.sigmoid.unaryExpr([eps](Scalar s) { return piecewise_threshold(s, eps); });
  } else {
    out.code = out.cache.sigmoid;
  }
  if (!out.code.allFinite()) throw NumericError("non-finite approximate code");
  return out;
}

template <typename Scalar>
HeadBackward<Scalar> head_backward(const HashHeadSpec& spec, const Tensor<Scalar>& weights,
                                   const HeadCache<Scalar>& cache,
                                   const Vector<Scalar>& code_gradient) {
  if (code_gradient.size() != spec.bits || cache.sigmoid.size() != spec.bits) {
    throw ShapeError("hash head gradient must have q entries");
  }
  const auto beta = static_cast<Scalar>(spec.beta);
  const auto eps = static_cast<Scalar>(spec.epsilon);
  // delta_i = dL/dc_i, the gradient at the fully-connected pre-activation.
  Vector<Scalar> delta(spec.bits);
  for (Index i = 0; i < spec.bits; ++i) {
    const Scalar s = cache.sigmoid[i];
    const Scalar gate = spec.apply_threshold ? piecewise_threshold_derivative(s, eps) : Scalar(1);
    delta[i] = code_gradient[i] * gate * sigmoid_beta_derivative(s, beta);
  }
  HeadBackward<Scalar> out;
  out.weight_gradient = weights.zeros_like();
  out.feature_gradient = Vector<Scalar>::Zero(spec.input_length);
  if (spec.variant == HeadVariant::divide_and_encode) {
    const auto slices = partition_slices(spec.input_length, spec.bits);
    for (Index i = 0; i < spec.bits; ++i) {
      const auto& s = slices[static_cast<std::size_t>(i)];
      out.weight_gradient.values().segment(s.begin, s.length) = delta[i] * cache.features.segment(s.begin, s.length);
      out.feature_gradient.segment(s.begin, s.length) = delta[i] * weights.values().segment(s.begin, s.length);
    }
  } else {
    out.weight_gradient.matrix(spec.bits).noalias() = delta * cache.features.transpose();
    out.feature_gradient.noalias() = weights.matrix(spec.bits).transpose() * delta;
  }
  return out;
}

template <typename Scalar>
BitCode quantize(const ApproximateCode<Scalar>& code) {
  BitCode bits(code.size());
  for (Index i = 0; i < code.size(); ++i) bits.set(i, code[i] > Scalar(0.5));
  return bits;
}

#define HASHLAB_INSTANTIATE(S)                                                                    \
  template Tensor<S> init_head_weights(const HashHeadSpec&, std::uint64_t);                       \
  template HeadForward<S> head_forward(const HashHeadSpec&, const Tensor<S>&, const Vector<S>&);  \
  template HeadBackward<S> head_backward(const HashHeadSpec&, const Tensor<S>&,                   \
                                         const HeadCache<S>&, const Vector<S>&);                  \
  template BitCode quantize(const ApproximateCode<S>&);

HASHLAB_INSTANTIATE(float)
HASHLAB_INSTANTIATE(double)
#undef HASHLAB_INSTANTIATE

}  // namespace hashlab
