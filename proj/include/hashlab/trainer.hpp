#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "hashlab/hash_head.hpp"
#include "hashlab/network.hpp"
#include "hashlab/triplet.hpp"

namespace hashlab {

/// fully_shared: one sub-network encodes all three triplet members.
/// query_independent: network P encodes the anchor, network Q the positive and negative.
enum class SharingMode { fully_shared, query_independent };

std::string_view to_string(SharingMode mode);
SharingMode parse_sharing_mode(std::string_view name);

/// Which sub-network encodes an item at prediction time.
enum class Role { query, database };

struct TrainConfig {
  double learning_rate = 0.01;
  double learning_rate_decay = 0.1;
  std::int64_t learning_rate_step = 10000;
  double momentum = 0.9;
  /// 64 images per batch, i.e. 21 triplets.
  Index batch_triplets = 21;
  double weight_decay = 0.0005;
  double epsilon_initial = 0.5;
  double epsilon_decay = 0.8;
  std::int64_t epsilon_step = 20000;
  std::int64_t max_iterations = 2000;
  std::uint64_t seed = 0;
  SharingMode sharing = SharingMode::fully_shared;
  double margin = 1.0;
  bool multilabel = false;
  /// Worker threads for per-triplet gradients; the reduction order is fixed either way.
  int threads = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Triplets per batch for an image budget (three images per triplet, at least one triplet).
Index triplets_for_images(Index images);

/// epsilon_initial * epsilon_decay ^ floor(iteration / epsilon_step).
double epsilon_at(std::int64_t iteration, const TrainConfig& config);
/// learning_rate * learning_rate_decay ^ floor(iteration / learning_rate_step).
double learning_rate_at(std::int64_t iteration, const TrainConfig& config);

/// Sub-network(s) plus hash head. subnets[0] encodes queries (and everything in
/// fully-shared mode); subnets[1], when present, encodes database items.
template <typename Scalar>
struct Model {
  NetworkSpec network;
  HashHeadSpec head;
  SharingMode sharing = SharingMode::fully_shared;
  std::vector<ParamStore<Scalar>> subnets;
  LayerParams<Scalar> head_params;

  const ParamStore<Scalar>& subnet(Role role) const {
    return role == Role::database && subnets.size() > 1 ? subnets[1] : subnets[0];
  }

  friend bool operator==(const Model&, const Model&) = default;
};

/// Throws ShapeError when the network output does not feed the head.
template <typename Scalar>
Model<Scalar> init_model(const NetworkSpec& network, const HashHeadSpec& head, SharingMode sharing,
                         std::uint64_t seed);

template <typename Scalar>
void check_model(const Model<Scalar>& model);

/// Approximate code of one item, using the head's current epsilon.
template <typename Scalar>
ApproximateCode<Scalar> encode(const Model<Scalar>& model, const Tensor<Scalar>& input, Role role);

template <typename Scalar>
struct ModelGradients {
  std::vector<ParamGradients<Scalar>> subnets;
  ParamGradient<Scalar> head;
};

template <typename Scalar>
struct BatchGradient {
  double loss = 0;  // mean relaxed loss over the batch
  Index active = 0;
  ModelGradients<Scalar> gradients;  // of the mean loss
};

/// Mean relaxed triplet loss over `batch` and its gradient with respect to every
/// parameter. Branch gradients are summed into the shared parameters.
template <typename Scalar>
BatchGradient<Scalar> batch_gradient(const Model<Scalar>& model, const std::vector<Triplet>& batch,
                                     const std::vector<Tensor<Scalar>>& items,
                                     const TrainConfig& config);

/// Mean relaxed loss only (no backward pass).
template <typename Scalar>
double batch_loss(const Model<Scalar>& model, const std::vector<Triplet>& batch,
                  const std::vector<Tensor<Scalar>>& items, double margin = 1.0);

/// Heavy-ball update with decay folded into the gradient:
/// v <- momentum * v - lr * (g + weight_decay * w);  w <- w + v.
template <typename Scalar>
void sgd_momentum_step(LayerParams<Scalar>& params, const ParamGradient<Scalar>& gradient,
                       double learning_rate, double momentum, double weight_decay);

template <typename Scalar>
void sgd_momentum_step(ParamStore<Scalar>& params, const ParamGradients<Scalar>& gradients,
                       double learning_rate, double momentum, double weight_decay);

template <typename Scalar>
struct TrainState {
  Model<Scalar> model;
  std::int64_t iteration = 0;
  double epsilon = 0.5;
  double last_loss = 0;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct StepReport {
  std::int64_t iteration = 0;  // iteration the step ran at
  double loss = 0;             // pre-update mean batch loss
  double epsilon = 0;
  double learning_rate = 0;
  Index active = 0;
};

/// One optimizer step on `batch` at state.iteration; advances the iteration counter.
/// Throws InfeasibleError on an empty batch and NumericError on a non-finite update.
template <typename Scalar>
StepReport train_step(const std::vector<Triplet>& batch, const std::vector<Tensor<Scalar>>& items,
                      TrainState<Scalar>& state, const TrainConfig& config);

/// Batch for `iteration`, drawn from an RNG seeded by (seed, iteration) so a resumed
/// run sees the same stream as an uninterrupted one.
std::vector<Triplet> batch_for_iteration(const TripletSampler& sampler, std::int64_t iteration,
                                         const TrainConfig& config);

/// Runs steps until state.iteration reaches config.max_iterations.
template <typename Scalar>
void train(TrainState<Scalar>& state, const std::vector<Tensor<Scalar>>& items,
           const TripletSampler& sampler, const TrainConfig& config,
           const std::function<void(const StepReport&)>& on_step = {});

}  // namespace hashlab
