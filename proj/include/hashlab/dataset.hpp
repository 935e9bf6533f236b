#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "hashlab/hamming_index.hpp"
#include "hashlab/tensor.hpp"

namespace hashlab {

enum class Split { unspecified, train, query, database };

std::string_view to_string(Split split);

/// Items of uniform shape (images C x H x W or flat feature vectors) with labels and ids,
/// stored one item per row, ordered by id.
struct Dataset {
  Shape item_shape;
  RowMatrix<double> items;
  std::vector<LabelSet> labels;
  std::vector<std::int64_t> ids;
  Split split = Split::unspecified;

  Index size() const { return items.rows(); }

  /// Throws FormatError when shapes, labels or ids are inconsistent or ids repeat.
  void validate() const;

  template <typename Scalar>
  Tensor<Scalar> item(Index i) const {
    return Tensor<Scalar>(item_shape, items.row(i).transpose().template cast<Scalar>());
  }

  Dataset subset(std::span<const Index> rows) const;

  friend bool operator==(const Dataset& a, const Dataset& b);
};

enum class DatasetFormat { binary, csv, image_dir };

/// Directory -> image_dir, ".csv" -> csv, anything else -> binary.
DatasetFormat detect_format(const std::filesystem::path& path);

/// Loads and validates a dataset, sorted by id. Throws IoError or FormatError (with the
/// offending record index).
///
/// binary:    "HLDS", u32 version, u32 split, u32 rank, rank x u32 extents, u64 count,
///            then per item: i64 id, u32 label count, i32 labels, f64 values (little-endian).
/// csv:       header "id,label,f0,...", labels joined by ';'.
/// image_dir: <root>/<label>/<id>.pgm|.ppm (binary netpbm, maxval <= 255), scaled to [0,1];
///            an id present under several label directories gets all of those labels.
Dataset ingest(const std::filesystem::path& path, DatasetFormat format);
Dataset ingest(const std::filesystem::path& path);

void write_dataset_binary(const std::filesystem::path& path, const Dataset& dataset);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset);
/// Quantizes values in [0,1] to 8 bits; items must be 1 x H x W or 3 x H x W.
void write_image_dir(const std::filesystem::path& root, const Dataset& dataset);

/// Gaussian blobs: class centroids ~ separation * N(0, I), items = centroid + noise * N(0, I).
/// Classes are laid out class-major; ids run 0..classes*per_class-1.
Dataset synth_blobs(Index classes, Index per_class, const Shape& shape, double separation,
                    std::uint64_t seed, double noise = 1.0);

struct SyntheticSplits {
  Dataset train;
  Dataset query;
  Dataset database;
};

/// Query and database items are drawn independently around shared centroids (disjoint ids);
/// the training split is a random per-class subset of the database.
SyntheticSplits synth_splits(Index classes, Index train_per_class, Index query_per_class,
                             Index database_per_class, const Shape& shape, double separation,
                             std::uint64_t seed, double noise = 1.0);

/// Fraction of items whose nearest class centroid (estimated from `reference`) matches
/// their label. Used to sanity-check synthetic separation.
double nearest_centroid_accuracy(const Dataset& reference, const Dataset& evaluated);

}  // namespace hashlab
