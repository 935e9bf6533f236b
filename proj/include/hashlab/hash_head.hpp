#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "hashlab/hamming_index.hpp"
#include "hashlab/tensor.hpp"

namespace hashlab {

enum class HeadVariant { divide_and_encode, fully_connected };

std::string_view to_string(HeadVariant variant);
HeadVariant parse_head_variant(std::string_view name);

/// Contiguous feature range [begin, begin + length) feeding one hash bit.
struct SliceRange {
  Index begin = 0;
  Index length = 0;
  friend bool operator==(const SliceRange&, const SliceRange&) = default;
};

/// Splits [0, d) into q contiguous slices. With d = q*s + c, the first c slices
/// get s + 1 features and the rest s. Throws DomainError when d < q.
std::vector<SliceRange> partition_slices(Index d, Index q);

/// Approximate code: q reals in [0, 1].
template <typename Scalar>
using ApproximateCode = Vector<Scalar>;

struct HashHeadSpec {
  HeadVariant variant = HeadVariant::divide_and_encode;
  Index bits = 12;
  Index input_length = 600;
  double beta = 1.0;
  /// Current threshold width; the training schedule rewrites it between steps.
  double epsilon = 0.5;
  /// When false the bits are plain sigmoids (the literal fully-connected alternative).
  bool apply_threshold = true;

  friend bool operator==(const HashHeadSpec&, const HashHeadSpec&) = default;
};

/// Throws DomainError/ShapeError on an inconsistent head.
void validate(const HashHeadSpec& spec);

/// {d} for divide-and-encode (slice weights laid end to end), {q, d} for the dense variant.
Shape head_weight_shape(const HashHeadSpec& spec);

/// Zero-mean Gaussian with stddev 1/sqrt(fan_in), fan_in being the slice length or d.
template <typename Scalar>
Tensor<Scalar> init_head_weights(const HashHeadSpec& spec, std::uint64_t seed);

template <typename Scalar>
struct HeadCache {
  Vector<Scalar> features;
  Vector<Scalar> sigmoid;  // s = sigmoid_beta(c) per bit
};

template <typename Scalar>
struct HeadForward {
  ApproximateCode<Scalar> code;
  HeadCache<Scalar> cache;
};

template <typename Scalar>
struct HeadBackward {
  Vector<Scalar> feature_gradient;
  Tensor<Scalar> weight_gradient;
};

/// bit i = g(sigmoid(<w_i, x_i>)) with w_i, x_i restricted to slice i (divide-and-encode)
/// or to row i of W and the full x (dense variant).
template <typename Scalar>
HeadForward<Scalar> head_forward(const HashHeadSpec& spec, const Tensor<Scalar>& weights,
                                 const Vector<Scalar>& features);

template <typename Scalar>
HeadBackward<Scalar> head_backward(const HashHeadSpec& spec, const Tensor<Scalar>& weights,
                                   const HeadCache<Scalar>& cache,
                                   const Vector<Scalar>& code_gradient);

/// Bit i is 1 iff value i > 0.5; exactly 0.5 maps to 0.
template <typename Scalar>
BitCode quantize(const ApproximateCode<Scalar>& code);

}  // namespace hashlab
