#include "hashlab/checkpoint.hpp"

#include "hashlab/binary_io.hpp"
#include "hashlab/network_config.hpp"

namespace hashlab {

namespace {

constexpr std::string_view kMagic = "HLCK";
constexpr std::string_view kTrainerMagic = "TRST";
constexpr std::string_view kEndMagic = "END!";
constexpr std::uint32_t kVersion = 1;

void put_shape(ByteWriter& w, const Shape& shape) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
  for (Index e : shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
}

Shape get_shape(ByteReader& r) {
  const auto rank = r.get<std::uint32_t>();
  if (rank > 8) throw FormatError(r.what() + ": implausible tensor rank");
  Shape shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<Index>(r.get<std::uint32_t>()));
  if (!shape.empty() && !shape_valid(shape)) throw FormatError(r.what() + ": invalid tensor shape");
  return shape;
}

template <typename Scalar>
void put_values(ByteWriter& w, const Tensor<Scalar>& t) {
  for (Index i = 0; i < t.size(); ++i) w.put<Scalar>(t[i]);
}

template <typename Stored, typename Scalar>
Tensor<Scalar> get_values(ByteReader& r, const Shape& shape) {
  if (shape.empty()) return {};
  const Index n = numel(shape);
  if (static_cast<std::size_t>(n) > r.remaining() / sizeof(Stored)) throw FormatError(r.what() + ": truncated");
  Vector<Scalar> v(n);
  for (Index i = 0; i < n; ++i) v[i] = static_cast<Scalar>(r.get<Stored>());
  return Tensor<Scalar>(shape, std::move(v));
}

template <typename Stored, typename Scalar>
LayerParams<Scalar> get_layer(ByteReader& r) {
  const Shape ws = get_shape(r);
  const Shape bs = get_shape(r);
  LayerParams<Scalar> p;
  p.weight = get_values<Stored, Scalar>(r, ws);
  p.bias = get_values<Stored, Scalar>(r, bs);
  p.weight_velocity = get_values<Stored, Scalar>(r, ws);
  p.bias_velocity = get_values<Stored, Scalar>(r, bs);
  return p;
}

template <typename Stored, typename Scalar>
TrainState<Scalar> parse(ByteReader& r, std::uint32_t layer_count, std::string* notes) {
  std::vector<LayerParams<Scalar>> layers;
  for (std::uint32_t i = 0; i < layer_count; ++i) layers.push_back(get_layer<Stored, Scalar>(r));

  r.expect_magic(kTrainerMagic);
  TrainState<Scalar> state;
  state.iteration = r.get<std::int64_t>();
  state.epsilon = r.get<double>();
  state.last_loss = r.get<double>();
  const auto sharing = r.get<std::uint32_t>();
  const auto subnet_count = r.get<std::uint32_t>();
  const auto variant = r.get<std::uint32_t>();
  if (sharing > 1 || variant > 1 || subnet_count < 1 || subnet_count > 2) {
    throw FormatError(r.what() + ": bad trainer block");
  }
  auto& model = state.model;
  model.sharing = static_cast<SharingMode>(sharing);
  model.head.variant = static_cast<HeadVariant>(variant);
  model.head.bits = static_cast<Index>(r.get<std::uint64_t>());
  model.head.input_length = static_cast<Index>(r.get<std::uint64_t>());
  model.head.beta = r.get<double>();
  model.head.apply_threshold = r.get<std::uint8_t>() != 0;
  model.head.epsilon = state.epsilon;
  const std::string network_text = r.string();
  std::string stored_notes = r.string();
  r.expect_magic(kEndMagic);
  if (!r.at_end()) throw FormatError(r.what() + ": trailing bytes");

  try {
    model.network = parse_network_spec(network_text);
  } catch (const Error& e) {
    throw FormatError(r.what() + ": embedded network spec: " + e.what());
  }
  const std::size_t depth = model.network.layers.size();
  if (layer_count != subnet_count * depth + 1) throw FormatError(r.what() + ": layer count does not match network");
  for (std::uint32_t s = 0; s < subnet_count; ++s) {
    ParamStore<Scalar> store;
    for (std::size_t i = 0; i < depth; ++i) store.layers.push_back(std::move(layers[s * depth + i]));
    model.subnets.push_back(std::move(store));
  }
  model.head_params = std::move(layers.back());
  try {
    check_model(model);
  } catch (const Error& e) {
    throw FormatError(r.what() + ": " + e.what());
  }
  if (notes) *notes = std::move(stored_notes);
  return state;
}

}  // namespace

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const TrainState<Scalar>& state,
                     const std::string& notes) {
  const auto& model = state.model;
  check_model(model);
  std::vector<const LayerParams<Scalar>*> layers;
  for (const auto& s : model.subnets) {
    for (const auto& l : s.layers) layers.push_back(&l);
  }
  layers.push_back(&model.head_params);

  ByteWriter w;
  w.bytes(kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(sizeof(Scalar));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(layers.size()));
  for (const auto* l : layers) {
    put_shape(w, l->weight.shape());
    put_shape(w, l->bias.shape());
    put_values(w, l->weight);
    put_values(w, l->bias);
    put_values(w, l->weight_velocity);
    put_values(w, l->bias_velocity);
  }
  w.bytes(kTrainerMagic);
  w.put<std::int64_t>(state.iteration);
  w.put<double>(state.epsilon);
  w.put<double>(state.last_loss);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.sharing));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.subnets.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.head.variant));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(model.head.bits));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(model.head.input_length));
  w.put<double>(model.head.beta);
  w.put<std::uint8_t>(model.head.apply_threshold ? 1 : 0);
  w.string(format_network_spec(model.network));
  w.string(notes);
  w.bytes(kEndMagic);
  write_file_atomic(path, w.buffer());
}

template <typename Scalar>
TrainState<Scalar> load_checkpoint(const std::filesystem::path& path, std::string* notes) {
  ByteReader r(read_file(path), path.string());
  r.expect_magic(kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto width = r.get<std::uint32_t>();
  const auto layer_count = r.get<std::uint32_t>();
  if (width == 4) return parse<float, Scalar>(r, layer_count, notes);
  if (width == 8) return parse<double, Scalar>(r, layer_count, notes);
  throw FormatError(path.string() + ": unsupported scalar width " + std::to_string(width));
}

int checkpoint_scalar_bytes(const std::filesystem::path& path) {
  ByteReader r(read_file(path), path.string());
  r.expect_magic(kMagic);
  r.get<std::uint32_t>();
  return static_cast<int>(r.get<std::uint32_t>());
}

template void save_checkpoint(const std::filesystem::path&, const TrainState<float>&, const std::string&);
template void save_checkpoint(const std::filesystem::path&, const TrainState<double>&, const std::string&);
template TrainState<float> load_checkpoint(const std::filesystem::path&, std::string*);
template TrainState<double> load_checkpoint(const std::filesystem::path&, std::string*);

}  // namespace hashlab
