#include "hashlab/trainer.hpp"

#include <cmath>
#include <thread>

namespace hashlab {

namespace {

template <typename Scalar>
ModelGradients<Scalar> zero_model_gradients(const Model<Scalar>& model) {
  ModelGradients<Scalar> g;
  for (const auto& s : model.subnets) g.subnets.push_back(zero_gradients(s));
  g.head = {model.head_params.weight.zeros_like(), {}};
  return g;
}

template <typename Scalar>
void add_scaled(ModelGradients<Scalar>& into, const ModelGradients<Scalar>& g, Scalar scale) {
  for (std::size_t i = 0; i < into.subnets.size(); ++i) accumulate(into.subnets[i], g.subnets[i], scale);
  into.head.weight.values() += scale * g.head.weight.values();
}

struct Branch {
  Index item;
  std::size_t subnet;
};

// Loss of one triplet and, when the hinge is active, its full parameter gradient.
template <typename Scalar>
LossValue triplet_contribution(const Model<Scalar>& model, const Triplet& t,
                               const std::vector<Tensor<Scalar>>& items, double margin,
                               ModelGradients<Scalar>* grads) {
  const std::size_t other = model.sharing == SharingMode::fully_shared ? 0 : 1;
  const Branch branches[3] = {{t.anchor, 0}, {t.positive, other}, {t.negative, other}};
  ForwardResult<Scalar> net[3];
  HeadForward<Scalar> head[3];
  for (int b = 0; b < 3; ++b) {
    const auto item = static_cast<std::size_t>(branches[b].item);
    if (item >= items.size()) throw DomainError("triplet index " + std::to_string(item) + " out of range");
    net[b] = forward(model.network, model.subnets[branches[b].subnet], items[item]);
    head[b] = head_forward(model.head, model.head_params.weight, net[b].output.values());
  }
  const LossValue loss = relaxed_triplet_loss(head[0].code, head[1].code, head[2].code, margin);
  if (!grads || !loss.active) return loss;
  const auto sub = triplet_subgradients(head[0].code, head[1].code, head[2].code, margin);
  const Vector<Scalar>* code_grads[3] = {&sub.anchor, &sub.positive, &sub.negative};
  for (int b = 0; b < 3; ++b) {
    const auto hb = head_backward(model.head, model.head_params.weight, head[b].cache, *code_grads[b]);
    grads->head.weight.values() += hb.weight_gradient.values();
    Tensor<Scalar> feature_grad(net[b].output.shape(), hb.feature_gradient);
    const auto nb = backward(model.network, model.subnets[branches[b].subnet], net[b].cache, feature_grad);
    accumulate(grads->subnets[branches[b].subnet], nb.param_gradients);
  }
  return loss;
}

}  // namespace

std::string_view to_string(SharingMode mode) {
  return mode == SharingMode::fully_shared ? "shared" : "independent";
}

SharingMode parse_sharing_mode(std::string_view name) {
  if (name == "shared" || name == "fully-shared") return SharingMode::fully_shared;
  if (name == "independent" || name == "query-independent") return SharingMode::query_independent;
  throw ConfigError("unknown sharing mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("train." + field + ": " + why); };
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be finite and >= 0");
  if (!(learning_rate_decay > 0)) fail("learning_rate_decay", "must be > 0");
  if (learning_rate_step < 1) fail("learning_rate_step", "must be >= 1");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum", "must lie in [0, 1)");
  if (batch_triplets < 1) fail("batch_triplets", "must be >= 1");
  if (!(weight_decay >= 0)) fail("weight_decay", "must be >= 0");
  if (!(epsilon_initial > 0 && epsilon_initial <= 0.5)) fail("epsilon_initial", "must lie in (0, 0.5]");
  if (!(epsilon_decay > 0 && epsilon_decay <= 1)) fail("epsilon_decay", "must lie in (0, 1]");
  if (epsilon_step < 1) fail("epsilon_step", "must be >= 1");
  if (max_iterations < 0) fail("iterations", "must be >= 0");
  if (threads < 1) fail("threads", "must be >= 1");
}

Index triplets_for_images(Index images) { return std::max<Index>(1, images / 3); }

double epsilon_at(std::int64_t iteration, const TrainConfig& config) {
  if (iteration < 0) throw DomainError("iteration must be >= 0");
  return config.epsilon_initial * std::pow(config.epsilon_decay, static_cast<double>(iteration / config.epsilon_step));
}

double learning_rate_at(std::int64_t iteration, const TrainConfig& config) {
  if (iteration < 0) throw DomainError("iteration must be >= 0");
  return config.learning_rate *
         std::pow(config.learning_rate_decay, static_cast<double>(iteration / config.learning_rate_step));
}

template <typename Scalar>
Model<Scalar> init_model(const NetworkSpec& network, const HashHeadSpec& head, SharingMode sharing,
                         std::uint64_t seed) {
  validate(network);
  Model<Scalar> model;
  model.network = network;
  model.head = head;
  model.sharing = sharing;
  const std::size_t count = sharing == SharingMode::fully_shared ? 1 : 2;
  for (std::size_t i = 0; i < count; ++i) model.subnets.push_back(init_params<Scalar>(network, seed + 1000003u * i));
  model.head_params.weight = init_head_weights<Scalar>(head, seed + 7919u);
  model.head_params.weight_velocity = model.head_params.weight.zeros_like();
  check_model(model);
  return model;
}

template <typename Scalar>
void check_model(const Model<Scalar>& model) {
  validate(model.network);
  validate(model.head);
  if (output_length(model.network) != model.head.input_length) {
    throw ShapeError("network emits " + std::to_string(output_length(model.network)) +
                     " features, hash head expects " + std::to_string(model.head.input_length));
  }
  const std::size_t expected = model.sharing == SharingMode::fully_shared ? 1 : 2;
  if (model.subnets.size() != expected) throw ShapeError("sub-network count does not match sharing mode");
  for (const auto& s : model.subnets) check_congruent(model.network, s);
  if (model.head_params.weight.shape() != head_weight_shape(model.head) ||
      model.head_params.weight_velocity.shape() != head_weight_shape(model.head)) {
    throw ShapeError("hash head parameters do not match head spec");
  }
}

template <typename Scalar>
ApproximateCode<Scalar> encode(const Model<Scalar>& model, const Tensor<Scalar>& input, Role role) {
  const auto net = forward(model.network, model.subnet(role), input);
  return head_forward(model.head, model.head_params.weight, net.output.values()).code;
}

template <typename Scalar>
BatchGradient<Scalar> batch_gradient(const Model<Scalar>& model, const std::vector<Triplet>& batch,
                                     const std::vector<Tensor<Scalar>>& items,
                                     const TrainConfig& config) {
  if (batch.empty()) throw InfeasibleError("empty triplet batch");
  const std::size_t n = batch.size();
  std::vector<ModelGradients<Scalar>> parts(n);
  std::vector<LossValue> losses(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      parts[i] = zero_model_gradients(model);
      losses[i] = triplet_contribution(model, batch[i], items, config.margin, &parts[i]);
    }
  };
  const auto workers = static_cast<std::size_t>(std::min<Index>(config.threads, static_cast<Index>(n)));
  if (workers <= 1) {
    work(0, n);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            work(n * w / workers, n * (w + 1) / workers);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  // Fixed reduction order: triplet 0, 1, 2, ... regardless of thread count.
  BatchGradient<Scalar> out;
  out.gradients = zero_model_gradients(model);
  const Scalar scale = Scalar(1) / static_cast<Scalar>(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += losses[i].value;
    out.active += losses[i].active ? 1 : 0;
    if (losses[i].active) add_scaled(out.gradients, parts[i], scale);
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

template <typename Scalar>
double batch_loss(const Model<Scalar>& model, const std::vector<Triplet>& batch,
                  const std::vector<Tensor<Scalar>>& items, double margin) {
  if (batch.empty()) throw InfeasibleError("empty triplet batch");
  double total = 0;
  for (const auto& t : batch) total += triplet_contribution<Scalar>(model, t, items, margin, nullptr).value;
  return total / static_cast<double>(batch.size());
}

template <typename Scalar>
void sgd_momentum_step(LayerParams<Scalar>& params, const ParamGradient<Scalar>& gradient,
                       double learning_rate, double momentum, double weight_decay) {
  const auto lr = static_cast<Scalar>(learning_rate);
  const auto mu = static_cast<Scalar>(momentum);
  const auto wd = static_cast<Scalar>(weight_decay);
  auto update = [&](Tensor<Scalar>& w, Tensor<Scalar>& v, const Tensor<Scalar>& g) {
    if (w.empty()) return;
    if (g.shape() != w.shape() || v.shape() != w.shape()) throw ShapeError("gradient/momentum shape mismatch");
    v.values() = mu * v.values() - lr * (g.values() + wd * w.values());
    w.values() += v.values();
    if (!w.all_finite() || !v.all_finite()) throw NumericError("non-finite parameter after update");
  };
  update(params.weight, params.weight_velocity, gradient.weight);
  update(params.bias, params.bias_velocity, gradient.bias);
}

template <typename Scalar>
void sgd_momentum_step(ParamStore<Scalar>& params, const ParamGradients<Scalar>& gradients,
                       double learning_rate, double momentum, double weight_decay) {
  if (params.layers.size() != gradients.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    sgd_momentum_step(params.layers[i], gradients[i], learning_rate, momentum, weight_decay);
  }
}

template <typename Scalar>
StepReport train_step(const std::vector<Triplet>& batch, const std::vector<Tensor<Scalar>>& items,
                      TrainState<Scalar>& state, const TrainConfig& config) {
  if (batch.empty()) throw InfeasibleError("empty triplet batch");
  StepReport report;
  report.iteration = state.iteration;
  report.epsilon = epsilon_at(state.iteration, config);
  report.learning_rate = learning_rate_at(state.iteration, config);
  state.epsilon = report.epsilon;
  state.model.head.epsilon = report.epsilon;
  const auto g = batch_gradient(state.model, batch, items, config);
  for (std::size_t i = 0; i < state.model.subnets.size(); ++i) {
    sgd_momentum_step(state.model.subnets[i], g.gradients.subnets[i], report.learning_rate, config.momentum,
                      config.weight_decay);
  }
  sgd_momentum_step(state.model.head_params, g.gradients.head, report.learning_rate, config.momentum,
                    config.weight_decay);
  report.loss = g.loss;
  report.active = g.active;
  state.last_loss = g.loss;
  ++state.iteration;
  return report;
}

std::vector<Triplet> batch_for_iteration(const TripletSampler& sampler, std::int64_t iteration,
                                         const TrainConfig& config) {
  const auto it = static_cast<std::uint64_t>(iteration);
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(it), static_cast<std::uint32_t>(it >> 32)};
  std::mt19937_64 rng(seq);
  return sampler.sample(config.batch_triplets, rng);
}

template <typename Scalar>
void train(TrainState<Scalar>& state, const std::vector<Tensor<Scalar>>& items,
           const TripletSampler& sampler, const TrainConfig& config,
           const std::function<void(const StepReport&)>& on_step) {
  config.validate();
  while (state.iteration < config.max_iterations) {
    const auto batch = batch_for_iteration(sampler, state.iteration, config);
    const StepReport r = train_step(batch, items, state, config);
    if (on_step) on_step(r);
  }
  state.epsilon = epsilon_at(state.iteration, config);
  state.model.head.epsilon = state.epsilon;
}

#define HASHLAB_INSTANTIATE(S)                                                                        \
  template Model<S> init_model(const NetworkSpec&, const HashHeadSpec&, SharingMode, std::uint64_t); \
  template void check_model(const Model<S>&);                                                         \
  template ApproximateCode<S> encode(const Model<S>&, const Tensor<S>&, Role);                        \
  template BatchGradient<S> batch_gradient(const Model<S>&, const std::vector<Triplet>&,              \
                                           const std::vector<Tensor<S>>&, const TrainConfig&);        \
  template double batch_loss(const Model<S>&, const std::vector<Triplet>&,                            \
                             const std::vector<Tensor<S>>&, double);                                  \
  template void sgd_momentum_step(LayerParams<S>&, const ParamGradient<S>&, double, double, double);  \
  template void sgd_momentum_step(ParamStore<S>&, const ParamGradients<S>&, double, double, double);  \
  template StepReport train_step(const std::vector<Triplet>&, const std::vector<Tensor<S>>&,          \
                                 TrainState<S>&, const TrainConfig&);                                 \
  template void train(TrainState<S>&, const std::vector<Tensor<S>>&, const TripletSampler&,           \
                      const TrainConfig&, const std::function<void(const StepReport&)>&);

HASHLAB_INSTANTIATE(float)
HASHLAB_INSTANTIATE(double)
#undef HASHLAB_INSTANTIATE

}  // namespace hashlab
