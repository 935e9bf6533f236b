#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "hashlab/network.hpp"
#include "hashlab/network_config.hpp"

using namespace hashlab;

namespace {

const std::string kSource = HASHLAB_SOURCE_DIR;

}  // namespace

TEST_CASE("reference network configuration reproduces the published extents") {
  const NetworkSpec spec = load_network_spec(kSource + "/configs/reference_224.ini", 12);
  const auto shapes = infer_shapes(spec);
  std::vector<Shape> convs_and_pools;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind != LayerKind::relu) convs_and_pools.push_back(shapes[i]);
  }
  const std::vector<Shape> expected{{96, 54, 54},  {96, 54, 54},  {96, 27, 27},  {256, 27, 27},
                                    {256, 27, 27}, {256, 13, 13}, {384, 13, 13}, {384, 13, 13},
                                    {384, 6, 6},   {1024, 6, 6},  {600, 6, 6},   {600, 1, 1}};
  CHECK(convs_and_pools == expected);
  CHECK(output_length(spec) == 50 * 12);
  CHECK_NOTHROW(validate(spec));
  CHECK(output_length(load_network_spec(kSource + "/configs/reference_224.ini", 48)) == 2400);
}

TEST_CASE("network text round trip") {
  const NetworkSpec spec = load_network_spec(kSource + "/configs/reference_224.ini", 32);
  CHECK(parse_network_spec(format_network_spec(spec)) == spec);
  const NetworkSpec toy = load_network_spec(kSource + "/configs/toy_net.ini", 3);
  CHECK(parse_network_spec(format_network_spec(toy)) == toy);
}

TEST_CASE("network text errors name the problem") {
  CHECK_THROWS_AS(parse_network_spec("[network]\ninput = 3,8,8\n[l]\nkind = conv\nchannels = hash\n"), ConfigError);
  CHECK_THROWS_AS(parse_network_spec("[l]\nkind = relu\n"), ConfigError);
  CHECK_THROWS_AS(parse_network_spec("[network]\ninput = 3,8,8\n[l]\nkind = wobble\n"), ConfigError);
  CHECK_THROWS_AS(parse_network_spec("[network]\ninput = 3,8,8\n[l]\nkind = conv\nkernel = x\nchannels = 2\n"),
                  ConfigError);
  try {
    infer_shapes(parse_network_spec("[network]\ninput = 3,4,4\n[a]\nkind = relu\n[b]\nkind = conv\nkernel = 5\nchannels = 2\n"));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("declared output length is enforced") {
  NetworkSpec spec = gradcheck::tiny_network(1, 3, 2);
  CHECK_NOTHROW(validate(spec));
  spec.output_length = 5;
  CHECK_THROWS_AS(validate(spec), ShapeError);
}

TEST_CASE("parameter initialisation") {
  const NetworkSpec spec = gradcheck::tiny_network(2, 3, 2);
  const auto a = init_params<double>(spec, 11);
  const auto b = init_params<double>(spec, 11);
  const auto c = init_params<double>(spec, 12);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (const auto& l : a.layers) {
    if (l.weight.empty()) continue;
    CHECK(l.bias.values().isZero());
    CHECK(l.weight_velocity.values().isZero());
    CHECK(l.bias_velocity.values().isZero());
  }
  CHECK_NOTHROW(check_congruent(spec, a));
}

TEST_CASE("initial weights are centred") {
  NetworkSpec spec;
  spec.input_shape = {100};
  LayerSpec fc;
  fc.kind = LayerKind::fully_connected;
  fc.channels = 100;
  spec.layers = {fc};
  const auto p = init_params<double>(spec, 3);
  const auto& w = p.layers[0].weight.values();
  REQUIRE(w.size() == 10000);
  const double sigma = std::sqrt(2.0 / 100.0);
  CHECK(std::abs(w.mean()) <= 5 * sigma / 100);
  const double sd = std::sqrt((w.array() - w.mean()).square().mean());
  CHECK(sd == doctest::Approx(sigma).epsilon(0.05));
}

TEST_CASE("network forward equals layer-by-layer oracle") {
  std::mt19937_64 rng(8);
  const NetworkSpec spec = gradcheck::tiny_network(2, 3, 2);
  auto params = init_params<double>(spec, 9);
  for (auto& l : params.layers) {
    if (!l.bias.empty()) l.bias = oracle::random_tensor(l.bias.shape(), rng);
  }
  const auto x = oracle::random_tensor(spec.input_shape, rng);
  const auto result = forward(spec, params, x);
  oracle::T cur = x;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    cur = oracle::layer(spec.layers[i], params.layers[i].weight, params.layers[i].bias, cur);
  }
  CHECK(oracle::rel_error(result.output, cur, 1.0) <= 1e-12);
  CHECK(result.output.shape() == infer_shapes(spec).back());
  const auto again = forward(spec, params, x);
  CHECK(again.output == result.output);
}

TEST_CASE("network backward matches finite differences") {
  std::mt19937_64 rng(10);
  int done = 0;
  while (done < 10) {
    const NetworkSpec spec = gradcheck::tiny_network(1, 2, 2);
    auto params = init_params<double>(spec, rng());
    auto x = oracle::random_tensor(spec.input_shape, rng);
    const auto fwd = forward(spec, params, x);
    if (gradcheck::network_kink_distance(spec, fwd.cache) < 1e-4) continue;
    const auto g = oracle::random_tensor(fwd.output.shape(), rng);
    const auto back = backward(spec, params, fwd.cache, g);
    auto objective = [&] { return g.values().dot(forward(spec, params, x).output.values()); };
    CHECK(oracle::rel_error(back.input_gradient, oracle::numeric_gradient(objective, x)) <= 1e-5);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      auto& l = params.layers[i];
      if (l.weight.empty()) continue;
      CHECK(oracle::rel_error(back.param_gradients[i].weight, oracle::numeric_gradient(objective, l.weight)) <= 1e-5);
      CHECK(oracle::rel_error(back.param_gradients[i].bias, oracle::numeric_gradient(objective, l.bias)) <= 1e-5);
    }
    ++done;
  }
}

TEST_CASE("forward rejects mismatched input and non-finite values") {
  const NetworkSpec spec = gradcheck::tiny_network(1, 2, 2);
  const auto params = init_params<double>(spec, 1);
  CHECK_THROWS_AS(forward(spec, params, Tensor<double>({2, 4, 4})), ShapeError);
  Tensor<double> x({1, 4, 4});
  x[3] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(forward(spec, params, x), NumericError);
  ParamStore<double> wrong = params;
  wrong.layers.pop_back();
  CHECK_THROWS_AS(forward(spec, wrong, Tensor<double>({1, 4, 4})), ShapeError);
}

TEST_CASE("one-by-one images pass shape inference") {
  NetworkSpec spec;
  spec.input_shape = {3, 1, 1};
  LayerSpec conv;
  conv.kind = LayerKind::conv;
  conv.channels = 2;
  LayerSpec pool;
  pool.kind = LayerKind::avgpool;
  spec.layers = {conv, pool};
  CHECK(infer_shapes(spec).back() == Shape{2, 1, 1});
}
