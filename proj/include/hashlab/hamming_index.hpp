#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hashlab/tensor.hpp"

namespace hashlab {

/// Labels of one item; a single-label item holds exactly one id. Kept sorted.
using LabelSet = std::vector<int>;

/// q-bit binary code. Bit i lives in words[i / 64] at position i % 64; bits at
/// positions >= q are always zero.
class BitCode {
 public:
  BitCode() = default;
  explicit BitCode(Index bits);
  BitCode(Index bits, std::vector<std::uint64_t> words);

  Index bits() const { return bits_; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool test(Index i) const;
  void set(Index i, bool value);

  friend bool operator==(const BitCode&, const BitCode&) = default;

 private:
  Index bits_ = 0;
  std::vector<std::uint64_t> words_;
};

inline Index words_per_code(Index bits) { return (bits + 63) / 64; }

/// Throws DomainError if any entry is not 0 or 1.
BitCode pack(std::span<const int> bits);
std::vector<int> unpack(const BitCode& code);

/// Popcount of the XOR of two packed codes. Throws LengthMismatch on differing q.
Index hamming(const BitCode& a, const BitCode& b);
Index hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

/// Immutable set of equal-length codes with parallel labels and optional ids.
class CodeDatabase {
 public:
  CodeDatabase() = default;
  CodeDatabase(Index bits, std::vector<std::uint64_t> words, std::vector<LabelSet> labels,
               std::vector<std::int64_t> ids = {});
  CodeDatabase(const std::vector<BitCode>& codes, std::vector<LabelSet> labels,
               std::vector<std::int64_t> ids = {});

  Index bits() const { return bits_; }
  Index size() const { return count_; }
  std::span<const std::uint64_t> code_words(Index i) const;
  BitCode code(Index i) const;
  const std::vector<LabelSet>& labels() const { return labels_; }
  const LabelSet& label(Index i) const { return labels_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::int64_t>& ids() const { return ids_; }
  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const CodeDatabase&, const CodeDatabase&) = default;

 private:
  Index bits_ = 0;
  Index count_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<LabelSet> labels_;
  std::vector<std::int64_t> ids_;
};

/// Distance from `query` to every database code, in database order.
std::vector<Index> distances(const BitCode& query, const CodeDatabase& db);

/// Database indices by ascending Hamming distance, ties by ascending index.
std::vector<Index> rank_all(const BitCode& query, const CodeDatabase& db);

/// Indices (ascending) whose distance to `query` is at most `radius`.
std::vector<Index> radius_search(const BitCode& query, const CodeDatabase& db, Index radius);

/// Binary code file: "HLBC", u32 version, u32 q, u64 count, then count * ceil(q/64)
/// little-endian u64 words. Labels and ids go to a sidecar CSV.
void write_code_file(const std::filesystem::path& path, const CodeDatabase& db);
/// Reads codes only; labels are empty unless loaded with read_labels_csv.
CodeDatabase read_code_file(const std::filesystem::path& path);

/// Sidecar CSV: header "index,label,id", labels joined with ';'.
void write_labels_csv(const std::filesystem::path& path, const std::vector<LabelSet>& labels,
                      const std::vector<std::int64_t>& ids);
void read_labels_csv(const std::filesystem::path& path, std::vector<LabelSet>& labels,
                     std::vector<std::int64_t>& ids);

/// Code file plus its "<path>.labels.csv" sidecar.
void save_code_database(const std::filesystem::path& path, const CodeDatabase& db);
CodeDatabase load_code_database(const std::filesystem::path& path);

}  // namespace hashlab
