#include <doctest.h>

#include <fstream>
#include <iterator>

#include "gradcheck.hpp"
#include "hashlab/checkpoint.hpp"

using namespace hashlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Fixture {
  TrainState<double> state;
  std::vector<Tensor<double>> items;
  std::vector<LabelSet> labels;
};

Fixture fixture(SharingMode sharing) {
  const NetworkSpec net = gradcheck::tiny_network(1, 3, 2);
  HashHeadSpec head;
  head.bits = 3;
  head.input_length = 6;
  Fixture f{{init_model<double>(net, head, sharing, 21), 0, 0.5, 0}, {}, {}};
  std::mt19937_64 rng(5);
  for (int i = 0; i < 12; ++i) {
    f.items.push_back(oracle::random_tensor(net.input_shape, rng));
    f.labels.push_back({i % 3});
  }
  return f;
}

}  // namespace

TEST_CASE("save, load, save is byte-identical") {
  oracle::TempDir dir;
  for (auto sharing : {SharingMode::fully_shared, SharingMode::query_independent}) {
    Fixture f = fixture(sharing);
    TrainConfig c;
    c.max_iterations = 3;
    train(f.state, f.items, TripletSampler(f.labels, false), c);
    save_checkpoint(dir / "a.ckpt", f.state, "notes here");
    std::string notes;
    const auto loaded = load_checkpoint<double>(dir / "a.ckpt", &notes);
    CHECK(notes == "notes here");
    CHECK(loaded == f.state);
    save_checkpoint(dir / "b.ckpt", loaded, notes);
    CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
    CHECK(checkpoint_scalar_bytes(dir / "a.ckpt") == 8);
  }
}

TEST_CASE("truncated or corrupt checkpoints are rejected") {
  oracle::TempDir dir;
  Fixture f = fixture(SharingMode::fully_shared);
  save_checkpoint(dir / "a.ckpt", f.state);
  const std::string bytes = slurp(dir / "a.ckpt");
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    std::ofstream(dir / "t.ckpt", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(cut));
    CHECK_THROWS_AS(load_checkpoint<double>(dir / "t.ckpt"), FormatError);
  }
  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir / "m.ckpt", std::ios::binary) << bad;
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "m.ckpt"), FormatError);
  std::ofstream(dir / "x.ckpt", std::ios::binary) << bytes << "extra";
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "x.ckpt"), FormatError);
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "missing.ckpt"), IoError);
}

TEST_CASE("precision conversion on load") {
  oracle::TempDir dir;
  Fixture f = fixture(SharingMode::query_independent);
  save_checkpoint(dir / "d.ckpt", f.state);
  const auto as_float = load_checkpoint<float>(dir / "d.ckpt");
  save_checkpoint(dir / "f.ckpt", as_float);
  CHECK(checkpoint_scalar_bytes(dir / "f.ckpt") == 4);
  const auto back = load_checkpoint<double>(dir / "f.ckpt");
  const auto& a = f.state.model.head_params.weight.values();
  const auto& b = back.model.head_params.weight.values();
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(back.model.network == f.state.model.network);
  CHECK(back.model.subnets.size() == 2);
}

TEST_CASE("resuming from a checkpoint matches an uninterrupted run") {
  oracle::TempDir dir;
  Fixture f = fixture(SharingMode::query_independent);
  const TripletSampler sampler(f.labels, false);
  TrainConfig c;
  c.batch_triplets = 4;
  c.epsilon_step = 4;
  c.learning_rate_step = 6;
  c.max_iterations = 10;
  TrainState<double> straight = f.state;
  train(straight, f.items, sampler, c);

  TrainState<double> first = f.state;
  c.max_iterations = 5;
  train(first, f.items, sampler, c);
  save_checkpoint(dir / "mid.ckpt", first);
  TrainState<double> resumed = load_checkpoint<double>(dir / "mid.ckpt");
  c.max_iterations = 10;
  train(resumed, f.items, sampler, c);
  CHECK(resumed == straight);
}
