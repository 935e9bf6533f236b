#pragma once

// Finite-difference gradient checks shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "hashlab/hash_head.hpp"
#include "hashlab/network.hpp"
#include "hashlab/trainer.hpp"
#include "oracles.hpp"

namespace gradcheck {

using namespace hashlab;
using oracle::T;

struct Result {
  double worst = 0;          // largest relative error seen
  double worst_forward = 0;  // largest forward deviation from the direct oracle (layers only)
  int trials = 0;
  int resampled = 0;  // draws rejected for lying near a kink
};

constexpr double kLayerKink = 1e-4;
constexpr double kGradientFloor = 1e-6;

inline Index pick(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Distance of `x` to the nearest non-differentiable point of `layer`.
inline double kink_distance(const LayerSpec& layer, const T& x) {
  double d = INFINITY;
  switch (layer.kind) {
    case LayerKind::relu:
      for (Index i = 0; i < x.size(); ++i) d = std::min(d, std::abs(x[i]));
      return d;
    case LayerKind::piecewise_threshold:
      for (Index i = 0; i < x.size(); ++i) {
        d = std::min({d, std::abs(x[i] - (0.5 - layer.epsilon)), std::abs(x[i] - (0.5 + layer.epsilon))});
      }
      return d;
    case LayerKind::maxpool:
      return oracle::maxpool_margin(layer, x);
    default:
      return d;
  }
}

inline LayerSpec random_layer(LayerKind kind, std::mt19937_64& rng, Shape& input) {
  LayerSpec l;
  l.kind = kind;
  const Index c = pick(rng, 1, 3), h = pick(rng, 3, 7), w = pick(rng, 3, 7);
  input = {c, h, w};
  switch (kind) {
    case LayerKind::conv:
      l.kernel = pick(rng, 1, 3);
      l.stride = pick(rng, 1, 2);
      l.pad = pick(rng, 0, l.kernel - 1);
      l.channels = pick(rng, 1, 3);
      l.rounding = rng() & 1u ? Rounding::ceil : Rounding::floor;
      break;
    case LayerKind::maxpool:
    case LayerKind::avgpool:
      l.kernel = pick(rng, 2, 3);
      l.stride = pick(rng, 1, 2);
      l.pad = pick(rng, 0, l.kernel - 1);
      l.rounding = rng() & 1u ? Rounding::ceil : Rounding::floor;
      break;
    case LayerKind::fully_connected:
      l.channels = pick(rng, 1, 4);
      if (rng() & 1u) input = {pick(rng, 1, 12)};
      break;
    case LayerKind::sigmoid:
      l.beta = uniform(rng, 0.5, 2.0);
      break;
    case LayerKind::piecewise_threshold:
      l.epsilon = uniform(rng, 0.05, 0.5);
      break;
    case LayerKind::relu:
      break;
  }
  return l;
}

/// Forward against the direct oracle and backward against central differences of
/// sum(G * layer(x)), for `trials` random draws of one layer kind.
inline Result check_layer(LayerKind kind, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Result r;
  while (r.trials < trials) {
    Shape in;
    const LayerSpec l = random_layer(kind, rng, in);
    T x = kind == LayerKind::piecewise_threshold ? oracle::random_tensor(in, rng, 0, 1) : oracle::random_tensor(in, rng);
    if (kink_distance(l, x) < kLayerKink) {
      ++r.resampled;
      continue;
    }
    T weight, bias;
    if (has_params(kind)) {
      weight = oracle::random_tensor(weight_shape(l, in), rng);
      bias = oracle::random_tensor(bias_shape(l, in), rng);
    }
    LayerCache<double> cache;
    const T y = layer_forward(l, weight, bias, x, cache);
    const T expected = oracle::layer(l, weight, bias, x);
    r.worst_forward = std::max(r.worst_forward, oracle::rel_error(y, expected, 1.0));
    const T g = oracle::random_tensor(y.shape(), rng);
    const auto grads = layer_backward(l, weight, x, y, cache, g);

    auto objective = [&] {
      const T out = oracle::layer(l, weight, bias, x);
      double s = 0;
      for (Index i = 0; i < out.size(); ++i) s += g[i] * out[i];
      return s;
    };
    r.worst = std::max(r.worst, oracle::rel_error(grads.input, oracle::numeric_gradient(objective, x)));
    if (has_params(kind)) {
      r.worst = std::max(r.worst, oracle::rel_error(grads.weight, oracle::numeric_gradient(objective, weight)));
      r.worst = std::max(r.worst, oracle::rel_error(grads.bias, oracle::numeric_gradient(objective, bias)));
    }
    ++r.trials;
  }
  return r;
}

/// Hash head gradients (features and weights) against central differences of sum(G * code).
inline Result check_head(HeadVariant variant, bool apply_threshold, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Result r;
  while (r.trials < trials) {
    HashHeadSpec spec;
    spec.variant = variant;
    spec.bits = pick(rng, 1, 6);
    spec.input_length = pick(rng, spec.bits, 5 * spec.bits + 3);
    spec.beta = uniform(rng, 0.5, 2.0);
    spec.epsilon = uniform(rng, 0.05, 0.5);
    spec.apply_threshold = apply_threshold;
    T w = oracle::random_tensor(head_weight_shape(spec), rng);
    T x = oracle::random_tensor({spec.input_length}, rng);
    const auto fwd = head_forward(spec, w, x.values());
    bool near_kink = false;
    if (apply_threshold) {
      for (Index i = 0; i < spec.bits; ++i) {
        const double s = fwd.cache.sigmoid[i];
        near_kink |= std::min(std::abs(s - (0.5 - spec.epsilon)), std::abs(s - (0.5 + spec.epsilon))) < kLayerKink;
      }
    }
    if (near_kink) {
      ++r.resampled;
      continue;
    }
    const T g = oracle::random_tensor({spec.bits}, rng);
    const auto back = head_backward(spec, w, fwd.cache, g.values());
    auto objective = [&] {
      const auto c = head_forward(spec, w, x.values()).code;
      return g.values().dot(c);
    };
    const T feature_grad(Shape{spec.input_length}, back.feature_gradient);
    r.worst = std::max(r.worst, oracle::rel_error(feature_grad, oracle::numeric_gradient(objective, x)));
    r.worst = std::max(r.worst, oracle::rel_error(back.weight_gradient, oracle::numeric_gradient(objective, w)));
    ++r.trials;
  }
  return r;
}

/// Small conv net + divide-and-encode head, for end-to-end checks.
inline NetworkSpec tiny_network(Index channels, Index bits, Index slice) {
  NetworkSpec net;
  net.input_shape = {channels, 4, 4};
  LayerSpec conv1;
  conv1.kind = LayerKind::conv;
  conv1.kernel = 3;
  conv1.pad = 1;
  conv1.channels = 2;
  LayerSpec relu;
  relu.kind = LayerKind::relu;
  LayerSpec pool;
  pool.kind = LayerKind::maxpool;
  pool.kernel = 2;
  pool.stride = 2;
  LayerSpec conv2;
  conv2.kind = LayerKind::conv;
  conv2.channels = bits * slice;
  LayerSpec avg;
  avg.kind = LayerKind::avgpool;
  avg.kernel = 2;
  net.layers = {conv1, relu, pool, conv2, relu, avg};
  net.output_length = bits * slice;
  return net;
}

/// Smallest distance to a kink over every layer input recorded in `cache`.
inline double network_kink_distance(const NetworkSpec& net, const ForwardCache<double>& cache) {
  double d = INFINITY;
  for (std::size_t i = 0; i < net.layers.size(); ++i) d = std::min(d, kink_distance(net.layers[i], cache.activations[i]));
  return d;
}

/// Whole-pipeline gradient of the mean relaxed triplet loss over a one-triplet batch,
/// for every parameter tensor, against central differences. Draws whose hinge slack lies
/// within `hinge_margin` of zero, or whose activations sit within 1e-4 of a ReLU, max-pool
/// or threshold kink, are redrawn. Parameters behind dead units get gradients near zero,
/// where central-difference roundoff (about 1e-11) is all that remains, so norms below
/// kGradientFloor are compared in absolute terms.
inline Result check_pipeline(SharingMode sharing, int trials, std::uint64_t seed, double hinge_margin = 1e-3) {
  std::mt19937_64 rng(seed);
  Result r;
  while (r.trials < trials) {
    const Index channels = pick(rng, 1, 2), bits = pick(rng, 2, 4), slice = pick(rng, 1, 3);
    const NetworkSpec net = tiny_network(channels, bits, slice);
    HashHeadSpec head;
    head.bits = bits;
    head.input_length = bits * slice;
    head.epsilon = uniform(rng, 0.1, 0.5);
    Model<double> model = init_model<double>(net, head, sharing, rng());
    std::vector<Tensor<double>> items;
    for (int i = 0; i < 3; ++i) items.push_back(oracle::random_tensor(net.input_shape, rng));
    const std::vector<Triplet> batch{{0, 1, 2}};

    bool reject = false;
    const std::size_t other = sharing == SharingMode::fully_shared ? 0 : 1;
    std::vector<Vector<double>> codes;
    for (int i = 0; i < 3; ++i) {
      const auto& params = model.subnets[i == 0 ? 0 : other];
      const auto f = forward(net, params, items[static_cast<std::size_t>(i)]);
      reject |= network_kink_distance(net, f.cache) < kLayerKink;
      const auto h = head_forward(head, model.head_params.weight, f.output.values());
      for (Index b = 0; b < bits; ++b) {
        const double s = h.cache.sigmoid[b];
        reject |= std::min(std::abs(s - (0.5 - head.epsilon)), std::abs(s - (0.5 + head.epsilon))) < kLayerKink;
      }
      codes.push_back(h.code);
    }
    reject |= std::abs(triplet_slack(codes[0], codes[1], codes[2])) < hinge_margin;
    if (reject) {
      ++r.resampled;
      continue;
    }
    TrainConfig config;
    const auto g = batch_gradient(model, batch, items, config);
    auto loss = [&] { return batch_loss(model, batch, items); };
    for (std::size_t s = 0; s < model.subnets.size(); ++s) {
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& p = model.subnets[s].layers[l];
        if (p.weight.empty()) continue;
        r.worst = std::max(r.worst, oracle::rel_error(g.gradients.subnets[s][l].weight, oracle::numeric_gradient(loss, p.weight), kGradientFloor));
        r.worst = std::max(r.worst, oracle::rel_error(g.gradients.subnets[s][l].bias, oracle::numeric_gradient(loss, p.bias), kGradientFloor));
      }
    }
    r.worst = std::max(r.worst, oracle::rel_error(g.gradients.head.weight, oracle::numeric_gradient(loss, model.head_params.weight), kGradientFloor));
    ++r.trials;
  }
  return r;
}

}  // namespace gradcheck
