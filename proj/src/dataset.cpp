#include "hashlab/dataset.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "hashlab/binary_io.hpp"

namespace hashlab {

namespace {

constexpr std::string_view kDatasetMagic = "HLDS";
constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) out.push_back(part);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

LabelSet parse_labels(const std::string& field) {
  LabelSet labels;
  for (const auto& p : split_on(field, ';')) {
    std::size_t used = 0;
    labels.push_back(std::stoi(p, &used));
    if (used != p.size()) throw std::invalid_argument(p);
  }
  std::sort(labels.begin(), labels.end());
  return labels;
}

std::string format_labels(const LabelSet& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? ";" : "") + std::to_string(labels[i]);
  return s;
}

// Reorders rows by ascending id.
void sort_by_id(Dataset& d) {
  std::vector<Index> order(static_cast<std::size_t>(d.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return d.ids[static_cast<std::size_t>(a)] < d.ids[static_cast<std::size_t>(b)];
  });
  d = d.subset(order);
}

struct Netpbm {
  Index channels = 0, height = 0, width = 0;
  std::vector<unsigned char> pixels;  // interleaved HWC
};

Netpbm read_netpbm(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < raw.size()) {
      if (raw[pos] == '#') {
        while (pos < raw.size() && raw[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(raw[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < raw.size() && !std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
    if (start == pos) throw FormatError(path.string() + ": truncated netpbm header");
    return raw.substr(start, pos - start);
  };
  Netpbm img;
  const std::string magic = token();
  if (magic == "P5") img.channels = 1;
  else if (magic == "P6") img.channels = 3;
  else throw FormatError(path.string() + ": only binary PGM (P5) and PPM (P6) are supported");
  try {
    img.width = std::stoll(token());
    img.height = std::stoll(token());
    const long long maxval = std::stoll(token());
    if (maxval < 1 || maxval > 255) throw FormatError(path.string() + ": maxval must be in [1,255]");
  } catch (const std::invalid_argument&) {
    throw FormatError(path.string() + ": malformed netpbm header");
  }
  ++pos;  // single whitespace before raster
  const auto n = static_cast<std::size_t>(img.channels * img.height * img.width);
  if (img.width < 1 || img.height < 1 || raw.size() < pos + n) throw FormatError(path.string() + ": truncated raster");
  img.pixels.assign(raw.begin() + static_cast<std::ptrdiff_t>(pos), raw.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

Dataset ingest_binary(const std::filesystem::path& path) {
  ByteReader r(read_file(path), path.string());
  r.expect_magic(kDatasetMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) throw FormatError(path.string() + ": unsupported dataset version " + std::to_string(version));
  Dataset d;
  const auto split = r.get<std::uint32_t>();
  if (split > 3) throw FormatError(path.string() + ": bad split tag");
  d.split = static_cast<Split>(split);
  const auto rank = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < rank; ++i) d.item_shape.push_back(static_cast<Index>(r.get<std::uint32_t>()));
  if (!shape_valid(d.item_shape)) throw FormatError(path.string() + ": invalid item shape");
  const auto count = r.get<std::uint64_t>();
  const Index dim = numel(d.item_shape);
  if (count > r.remaining() / static_cast<std::uint64_t>(dim * 8)) throw FormatError(path.string() + ": truncated");
  d.items.resize(static_cast<Index>(count), dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    try {
      d.ids.push_back(r.get<std::int64_t>());
      LabelSet labels(r.get<std::uint32_t>());
      for (auto& l : labels) l = r.get<std::int32_t>();
      std::sort(labels.begin(), labels.end());
      d.labels.push_back(std::move(labels));
      for (Index j = 0; j < dim; ++j) d.items(static_cast<Index>(i), j) = r.get<double>();
    } catch (const FormatError&) {
      throw FormatError(path.string() + ": truncated at record " + std::to_string(i));
    }
  }
  if (!r.at_end()) throw FormatError(path.string() + ": trailing bytes after record " + std::to_string(count));
  return d;
}

Dataset ingest_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = split_on(line, ',');
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw FormatError(path.string() + ": header must start with 'id,label,f0'");
  }
  const auto dim = static_cast<Index>(header.size() - 2);
  std::vector<std::vector<double>> rows;
  Dataset d;
  d.item_shape = {dim};
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_on(line, ',');
    try {
      if (static_cast<Index>(fields.size()) != dim + 2) throw std::invalid_argument("field count");
      d.ids.push_back(std::stoll(fields[0]));
      d.labels.push_back(parse_labels(fields[1]));
      std::vector<double> values;
      for (std::size_t j = 2; j < fields.size(); ++j) values.push_back(std::stod(fields[j]));
      rows.push_back(std::move(values));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad record " + std::to_string(record));
    }
    ++record;
  }
  d.items.resize(static_cast<Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < dim; ++j) d.items(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  return d;
}

Dataset ingest_image_dir(const std::filesystem::path& root) {
  std::map<std::int64_t, std::pair<LabelSet, std::vector<double>>> found;
  Shape shape;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (std::size_t record = 0; record < files.size(); ++record) {
    const auto& file = files[record];
    int label = 0;
    std::int64_t id = 0;
    try {
      label = std::stoi(file.parent_path().filename().string());
      id = std::stoll(file.stem().string());
    } catch (const std::exception&) {
      throw FormatError(file.string() + ": expected <label>/<id>.ppm (record " + std::to_string(record) + ")");
    }
    const Netpbm img = read_netpbm(file);
    const Shape item{img.channels, img.height, img.width};
    if (shape.empty()) shape = item;
    if (item != shape) throw FormatError(file.string() + ": shape " + to_string(item) + " differs from " + to_string(shape));
    std::vector<double> values(img.pixels.size());
    for (Index c = 0; c < img.channels; ++c) {
      for (Index h = 0; h < img.height; ++h) {
        for (Index w = 0; w < img.width; ++w) {
          values[static_cast<std::size_t>((c * img.height + h) * img.width + w)] =
              img.pixels[static_cast<std::size_t>((h * img.width + w) * img.channels + c)] / 255.0;
        }
      }
    }
    auto [it, inserted] = found.try_emplace(id, LabelSet{}, values);
    if (!inserted && it->second.second != values) {
      throw FormatError(file.string() + ": id " + std::to_string(id) + " appears with different pixels");
    }
    it->second.first.push_back(label);
  }
  if (found.empty()) throw FormatError(root.string() + ": no .pgm/.ppm images found");
  Dataset d;
  d.item_shape = shape;
  d.items.resize(static_cast<Index>(found.size()), numel(shape));
  Index row = 0;
  for (auto& [id, entry] : found) {
    d.ids.push_back(id);
    std::sort(entry.first.begin(), entry.first.end());
    d.labels.push_back(entry.first);
    for (Index j = 0; j < numel(shape); ++j) d.items(row, j) = entry.second[static_cast<std::size_t>(j)];
    ++row;
  }
  return d;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::database: return "database";
    default: return "unspecified";
  }
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.item_shape == b.item_shape && a.items.rows() == b.items.rows() &&
         a.items.cols() == b.items.cols() && a.items == b.items && a.labels == b.labels &&
         a.ids == b.ids && a.split == b.split;
}

void Dataset::validate() const {
  if (!shape_valid(item_shape)) throw FormatError("dataset item shape " + to_string(item_shape) + " is invalid");
  if (items.cols() != numel(item_shape)) throw FormatError("dataset rows do not match item shape");
  if (static_cast<Index>(labels.size()) != size() || static_cast<Index>(ids.size()) != size()) {
    throw FormatError("dataset labels/ids do not match item count");
  }
  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!seen.insert(ids[i]).second) throw FormatError("duplicate id " + std::to_string(ids[i]) + " at record " + std::to_string(i));
  }
  if (!items.allFinite()) throw FormatError("dataset contains non-finite values");
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset d;
  d.item_shape = item_shape;
  d.split = split;
  d.items.resize(static_cast<Index>(rows.size()), items.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.items.row(static_cast<Index>(i)) = items.row(rows[i]);
    d.labels.push_back(labels.at(static_cast<std::size_t>(rows[i])));
    d.ids.push_back(ids.at(static_cast<std::size_t>(rows[i])));
  }
  return d;
}

DatasetFormat detect_format(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return DatasetFormat::image_dir;
  if (path.extension() == ".csv") return DatasetFormat::csv;
  return DatasetFormat::binary;
}

Dataset ingest(const std::filesystem::path& path, DatasetFormat format) {
  if (!std::filesystem::exists(path)) throw IoError("dataset not found: " + path.string());
  Dataset d;
  switch (format) {
    case DatasetFormat::binary: d = ingest_binary(path); break;
    case DatasetFormat::csv: d = ingest_csv(path); break;
    case DatasetFormat::image_dir: d = ingest_image_dir(path); break;
  }
  sort_by_id(d);
  try {
    d.validate();
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return d;
}

Dataset ingest(const std::filesystem::path& path) { return ingest(path, detect_format(path)); }

void write_dataset_binary(const std::filesystem::path& path, const Dataset& d) {
  d.validate();
  ByteWriter w;
  w.bytes(kDatasetMagic);
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.split));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.item_shape.size()));
  for (Index e : d.item_shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(d.size()));
  for (Index i = 0; i < d.size(); ++i) {
    w.put<std::int64_t>(d.ids[static_cast<std::size_t>(i)]);
    const auto& labels = d.labels[static_cast<std::size_t>(i)];
    w.put<std::uint32_t>(static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) w.put<std::int32_t>(l);
    for (Index j = 0; j < d.items.cols(); ++j) w.put<double>(d.items(i, j));
  }
  write_file_atomic(path, w.buffer());
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& d) {
  d.validate();
  std::ostringstream out;
  out << "id,label";
  for (Index j = 0; j < d.items.cols(); ++j) out << ",f" << j;
  out << "\n";
  out.precision(17);
  for (Index i = 0; i < d.size(); ++i) {
    out << d.ids[static_cast<std::size_t>(i)] << "," << format_labels(d.labels[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < d.items.cols(); ++j) out << "," << d.items(i, j);
    out << "\n";
  }
  write_file_atomic(path, out.str());
}

void write_image_dir(const std::filesystem::path& root, const Dataset& d) {
  d.validate();
  if (d.item_shape.size() != 3 || (d.item_shape[0] != 1 && d.item_shape[0] != 3)) {
    throw ShapeError("image export needs 1xHxW or 3xHxW items");
  }
  const Index c = d.item_shape[0], h = d.item_shape[1], w = d.item_shape[2];
  for (Index i = 0; i < d.size(); ++i) {
    std::string img = (c == 1 ? "P5\n" : "P6\n") + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        for (Index ch = 0; ch < c; ++ch) {
          const double v = std::clamp(d.items(i, (ch * h + y) * w + x), 0.0, 1.0);
          img.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
      }
    }
    for (int label : d.labels[static_cast<std::size_t>(i)]) {
      const auto file = root / std::to_string(label) /
                        (std::to_string(d.ids[static_cast<std::size_t>(i)]) + (c == 1 ? ".pgm" : ".ppm"));
      write_file_atomic(file, img);
    }
  }
}

Dataset synth_blobs(Index classes, Index per_class, const Shape& shape, double separation,
                    std::uint64_t seed, double noise) {
  return synth_splits(classes, 0, 0, per_class, shape, separation, seed, noise).database;
}

SyntheticSplits synth_splits(Index classes, Index train_per_class, Index query_per_class,
                             Index database_per_class, const Shape& shape, double separation,
                             std::uint64_t seed, double noise) {
  if (classes < 2) throw DomainError("synthetic data needs at least 2 classes");
  if (!(separation >= 0)) throw DomainError("separation must be >= 0");
  if (!shape_valid(shape)) throw ShapeError("invalid synthetic item shape " + to_string(shape));
  if (train_per_class > database_per_class) throw DomainError("training split is drawn from the database split and cannot exceed it");
  const Index dim = numel(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix<double> centroids(classes, dim);
  for (Index c = 0; c < classes; ++c) {
    for (Index j = 0; j < dim; ++j) centroids(c, j) = separation * normal(rng);
  }
  std::int64_t next_id = 0;
  auto draw = [&](Index per_class, Split split) {
    Dataset d;
    d.item_shape = shape;
    d.split = split;
    d.items.resize(classes * per_class, dim);
    for (Index c = 0; c < classes; ++c) {
      for (Index k = 0; k < per_class; ++k) {
        const Index row = c * per_class + k;
        for (Index j = 0; j < dim; ++j) d.items(row, j) = centroids(c, j) + noise * normal(rng);
        d.labels.push_back({static_cast<int>(c)});
        d.ids.push_back(next_id++);
      }
    }
    return d;
  };
  SyntheticSplits s;
  s.database = draw(database_per_class, Split::database);
  s.query = draw(query_per_class, Split::query);
  std::vector<Index> picked;
  for (Index c = 0; c < classes; ++c) {
    std::vector<Index> rows(static_cast<std::size_t>(database_per_class));
    std::iota(rows.begin(), rows.end(), c * database_per_class);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(train_per_class));
    std::sort(rows.begin(), rows.end());
    picked.insert(picked.end(), rows.begin(), rows.end());
  }
  s.train = s.database.subset(picked);
  s.train.split = Split::train;
  return s;
}

double nearest_centroid_accuracy(const Dataset& reference, const Dataset& evaluated) {
  std::map<int, std::pair<Vector<double>, Index>> sums;
  for (Index i = 0; i < reference.size(); ++i) {
    const int label = reference.labels[static_cast<std::size_t>(i)].at(0);
    auto [it, inserted] = sums.try_emplace(label, Vector<double>::Zero(reference.items.cols()), 0);
    it->second.first += reference.items.row(i).transpose();
    ++it->second.second;
  }
  Index correct = 0;
  for (Index i = 0; i < evaluated.size(); ++i) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [label, acc] : sums) {
      const double dist = (evaluated.items.row(i).transpose() - acc.first / static_cast<double>(acc.second)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = label;
      }
    }
    correct += evaluated.labels[static_cast<std::size_t>(i)].at(0) == best ? 1 : 0;
  }
  return evaluated.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(evaluated.size());
}

}  // namespace hashlab
