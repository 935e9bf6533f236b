#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "hashlab/hash_head.hpp"

using namespace hashlab;

namespace {

std::vector<Index> lengths(const std::vector<SliceRange>& slices) {
  std::vector<Index> out;
  for (const auto& s : slices) out.push_back(s.length);
  return out;
}

HashHeadSpec spec(HeadVariant variant, Index q, Index d, double eps = 0.5) {
  HashHeadSpec s;
  s.variant = variant;
  s.bits = q;
  s.input_length = d;
  s.epsilon = eps;
  return s;
}

}  // namespace

TEST_CASE("slice partition") {
  CHECK(lengths(partition_slices(150, 3)) == std::vector<Index>{50, 50, 50});
  CHECK(lengths(partition_slices(10, 3)) == std::vector<Index>{4, 3, 3});
  CHECK(lengths(partition_slices(5, 5)) == std::vector<Index>{1, 1, 1, 1, 1});
  CHECK_THROWS_AS(partition_slices(2, 3), DomainError);
  for (Index q = 1; q <= 9; ++q) {
    for (Index d = q; d <= 40; ++d) {
      const auto s = partition_slices(d, q);
      REQUIRE(static_cast<Index>(s.size()) == q);
      Index next = 0;
      for (Index i = 0; i < q; ++i) {
        CHECK(s[static_cast<std::size_t>(i)].begin == next);
        CHECK(s[static_cast<std::size_t>(i)].length == d / q + (i < d % q ? 1 : 0));
        next += s[static_cast<std::size_t>(i)].length;
      }
      CHECK(next == d);
    }
  }
}

TEST_CASE("zero weights give a code of one halves") {
  for (auto variant : {HeadVariant::divide_and_encode, HeadVariant::fully_connected}) {
    for (double eps : {0.1, 0.5}) {
      const HashHeadSpec s = spec(variant, 4, 12, eps);
      std::mt19937_64 rng(1);
      const auto x = oracle::random_tensor({12}, rng);
      const auto out = head_forward(s, Tensor<double>(head_weight_shape(s)), x.values());
      CHECK(out.code == Vector<double>::Constant(4, 0.5));
    }
  }
}

TEST_CASE("divide-and-encode bits only see their own slice") {
  std::mt19937_64 rng(2);
  const HashHeadSpec s = spec(HeadVariant::divide_and_encode, 3, 10, 0.3);
  const auto w = oracle::random_tensor(head_weight_shape(s), rng);
  const auto slices = partition_slices(10, 3);
  const auto x = oracle::random_tensor({10}, rng);
  const auto base = head_forward(s, w, x.values()).code;
  for (Index j = 0; j < 10; ++j) {
    Vector<double> moved = x.values();
    moved[j] += 0.37;
    const auto code = head_forward(s, w, moved).code;
    for (Index i = 0; i < 3; ++i) {
      const auto& sl = slices[static_cast<std::size_t>(i)];
      if (j < sl.begin || j >= sl.begin + sl.length) CHECK(code[i] == base[i]);
    }
  }
}

TEST_CASE("feature Jacobian is block structured for divide-and-encode and dense for fc") {
  std::mt19937_64 rng(3);
  for (auto variant : {HeadVariant::divide_and_encode, HeadVariant::fully_connected}) {
    const HashHeadSpec s = spec(variant, 4, 11);
    const auto w = oracle::random_tensor(head_weight_shape(s), rng);
    const auto x = oracle::random_tensor({11}, rng);
    const auto fwd = head_forward(s, w, x.values());
    const auto slices = partition_slices(11, 4);
    Index off_block_nonzero = 0;
    for (Index i = 0; i < 4; ++i) {
      Vector<double> e = Vector<double>::Zero(4);
      e[i] = 1;
      const auto back = head_backward(s, w, fwd.cache, e);
      const auto& sl = slices[static_cast<std::size_t>(i)];
      for (Index j = 0; j < 11; ++j) {
        const bool inside = j >= sl.begin && j < sl.begin + sl.length;
        if (!inside && back.feature_gradient[j] != 0.0) ++off_block_nonzero;
      }
    }
    if (variant == HeadVariant::divide_and_encode) {
      CHECK(off_block_nonzero == 0);
    } else {
      CHECK(off_block_nonzero == 4 * 11 - 11);
    }
  }
}

TEST_CASE("head gradients match finite differences") {
  for (auto variant : {HeadVariant::divide_and_encode, HeadVariant::fully_connected}) {
    for (bool threshold : {true, false}) {
      const auto r = gradcheck::check_head(variant, threshold, 25, 40 + static_cast<int>(variant) * 2 + threshold);
      CHECK(r.worst <= 1e-5);
    }
  }
}

TEST_CASE("head backward edge cases") {
  std::mt19937_64 rng(4);
  const HashHeadSpec s = spec(HeadVariant::divide_and_encode, 3, 9, 0.1);
  auto w = oracle::random_tensor(head_weight_shape(s), rng, 2, 3);
  const auto x = oracle::random_tensor({9}, rng, 1, 2);
  const auto fwd = head_forward(s, w, x.values());
  // Large positive pre-activations saturate every bit.
  CHECK(fwd.code == Vector<double>(Vector<double>::Ones(3)));
  const auto back = head_backward(s, w, fwd.cache, Vector<double>(Vector<double>::Ones(3)));
  CHECK(back.feature_gradient.isZero());
  CHECK(back.weight_gradient.values().isZero());
  const auto fwd2 = head_forward(spec(HeadVariant::fully_connected, 3, 9, 0.5),
                                 oracle::random_tensor({3, 9}, rng), x.values());
  const auto back2 = head_backward(spec(HeadVariant::fully_connected, 3, 9, 0.5), oracle::random_tensor({3, 9}, rng),
                                   fwd2.cache, Vector<double>(Vector<double>::Zero(3)));
  CHECK(back2.feature_gradient.isZero());
  CHECK(back2.weight_gradient.values().isZero());
}

TEST_CASE("threshold width one half equals a plain sigmoid head") {
  std::mt19937_64 rng(5);
  for (auto variant : {HeadVariant::divide_and_encode, HeadVariant::fully_connected}) {
    HashHeadSpec with = spec(variant, 4, 10, 0.5);
    HashHeadSpec without = with;
    without.apply_threshold = false;
    const auto w = oracle::random_tensor(head_weight_shape(with), rng, -3, 3);
    const auto x = oracle::random_tensor({10}, rng);
    const auto a = head_forward(with, w, x.values());
    const auto b = head_forward(without, w, x.values());
    CHECK(a.code == b.code);
    const Vector<double> g = oracle::random_tensor({4}, rng).values();
    CHECK(head_backward(with, w, a.cache, g).feature_gradient == head_backward(without, w, b.cache, g).feature_gradient);
  }
}

TEST_CASE("codes stay in the unit cube for any weight scale") {
  std::mt19937_64 rng(6);
  for (double scale : {1e-3, 1.0, 1e3, 1e8}) {
    for (auto variant : {HeadVariant::divide_and_encode, HeadVariant::fully_connected}) {
      const HashHeadSpec s = spec(variant, 5, 17, 0.2);
      const auto w = oracle::random_tensor(head_weight_shape(s), rng, -scale, scale);
      const auto code = head_forward(s, w, oracle::random_tensor({17}, rng).values()).code;
      CHECK(code.minCoeff() >= 0.0);
      CHECK(code.maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("head input checks") {
  const HashHeadSpec s = spec(HeadVariant::divide_and_encode, 3, 9);
  CHECK_THROWS_AS(head_forward(s, Tensor<double>(head_weight_shape(s)), Vector<double>(Vector<double>::Zero(8))), ShapeError);
  CHECK_THROWS(validate(spec(HeadVariant::divide_and_encode, 10, 9)));
  CHECK_THROWS(validate(spec(HeadVariant::divide_and_encode, 0, 9)));
  CHECK(head_weight_shape(spec(HeadVariant::fully_connected, 3, 9)) == Shape{3, 9});
  CHECK(head_weight_shape(s) == Shape{9});
  CHECK(parse_head_variant("dem") == HeadVariant::divide_and_encode);
  CHECK(parse_head_variant(to_string(HeadVariant::fully_connected)) == HeadVariant::fully_connected);
}

TEST_CASE("quantization") {
  CHECK(unpack(quantize(Vector<double>{{0.7, 0.2, 0.5}})) == std::vector<int>{1, 0, 0});
  CHECK(unpack(quantize(Vector<double>(Vector<double>::Constant(6, 0.5)))) == std::vector<int>(6, 0));
  const std::vector<int> bits{1, 0, 1, 1, 0};
  Vector<double> binary(5);
  for (int i = 0; i < 5; ++i) binary[i] = bits[static_cast<std::size_t>(i)];
  CHECK(unpack(quantize(binary)) == bits);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const Vector<double> v = oracle::random_tensor({13}, rng, 0, 1).values();
    const auto once = unpack(quantize(v));
    Vector<double> as_reals(13);
    for (int i = 0; i < 13; ++i) as_reals[i] = once[static_cast<std::size_t>(i)];
    CHECK(unpack(quantize(as_reals)) == once);
  }
  CHECK(quantize(Vector<float>{{0.6f, 0.4f}}) == quantize(Vector<double>{{0.6, 0.4}}));
}
