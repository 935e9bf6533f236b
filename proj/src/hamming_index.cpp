#include "hashlab/hamming_index.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "hashlab/binary_io.hpp"

namespace hashlab {

namespace {

constexpr std::string_view kCodeMagic = "HLBC";
constexpr std::uint32_t kCodeVersion = 1;

void check_padding(Index bits, std::span<const std::uint64_t> words) {
  const Index tail = bits % 64;
  if (tail != 0 && !words.empty() && (words.back() >> tail) != 0) {
    throw DomainError("bit code has non-zero padding bits");
  }
}

}  // namespace

BitCode::BitCode(Index bits) : bits_(bits), words_(static_cast<std::size_t>(words_per_code(bits)), 0) {
  if (bits < 1) throw DomainError("bit code length must be >= 1");
}

BitCode::BitCode(Index bits, std::vector<std::uint64_t> words) : bits_(bits), words_(std::move(words)) {
  if (bits < 1) throw DomainError("bit code length must be >= 1");
  if (static_cast<Index>(words_.size()) != words_per_code(bits)) {
    throw LengthMismatch("bit code of " + std::to_string(bits) + " bits needs " +
                         std::to_string(words_per_code(bits)) + " words");
  }
  check_padding(bits_, words_);
}

bool BitCode::test(Index i) const {
  return (words_[static_cast<std::size_t>(i / 64)] >> (i % 64)) & 1u;
}

void BitCode::set(Index i, bool value) {
  auto& w = words_[static_cast<std::size_t>(i / 64)];
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  w = value ? (w | mask) : (w & ~mask);
}

BitCode pack(std::span<const int> bits) {
  BitCode code(static_cast<Index>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0 && bits[i] != 1) throw DomainError("pack: non-binary value at bit " + std::to_string(i));
    code.set(static_cast<Index>(i), bits[i] == 1);
  }
  return code;
}

std::vector<int> unpack(const BitCode& code) {
  std::vector<int> bits(static_cast<std::size_t>(code.bits()));
  for (Index i = 0; i < code.bits(); ++i) bits[static_cast<std::size_t>(i)] = code.test(i) ? 1 : 0;
  return bits;
}

Index hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw LengthMismatch("hamming: codes differ in word count");
  Index d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

Index hamming(const BitCode& a, const BitCode& b) {
  if (a.bits() != b.bits()) {
    throw LengthMismatch("hamming: " + std::to_string(a.bits()) + "-bit vs " +
                         std::to_string(b.bits()) + "-bit code");
  }
  return hamming(a.words(), b.words());
}

CodeDatabase::CodeDatabase(Index bits, std::vector<std::uint64_t> words, std::vector<LabelSet> labels,
                           std::vector<std::int64_t> ids)
    : bits_(bits), words_(std::move(words)), labels_(std::move(labels)), ids_(std::move(ids)) {
  if (bits < 1) throw DomainError("code database needs q >= 1");
  const Index wpc = words_per_code(bits);
  if (static_cast<Index>(words_.size()) % wpc != 0) throw LengthMismatch("code words not a multiple of code size");
  count_ = static_cast<Index>(words_.size()) / wpc;
  if (!labels_.empty() && static_cast<Index>(labels_.size()) != count_) {
    throw LengthMismatch("code database: " + std::to_string(labels_.size()) + " labels for " +
                         std::to_string(count_) + " codes");
  }
  if (!ids_.empty() && static_cast<Index>(ids_.size()) != count_) {
    throw LengthMismatch("code database: ids do not match code count");
  }
  for (Index i = 0; i < count_; ++i) check_padding(bits_, code_words(i));
}

CodeDatabase::CodeDatabase(const std::vector<BitCode>& codes, std::vector<LabelSet> labels,
                           std::vector<std::int64_t> ids) {
  if (codes.empty()) throw DomainError("code database needs at least one code to fix q");
  const Index bits = codes.front().bits();
  std::vector<std::uint64_t> words;
  words.reserve(codes.size() * static_cast<std::size_t>(words_per_code(bits)));
  for (const auto& c : codes) {
    if (c.bits() != bits) throw LengthMismatch("code database: mixed code lengths");
    words.insert(words.end(), c.words().begin(), c.words().end());
  }
  *this = CodeDatabase(bits, std::move(words), std::move(labels), std::move(ids));
}

std::span<const std::uint64_t> CodeDatabase::code_words(Index i) const {
  const auto wpc = static_cast<std::size_t>(words_per_code(bits_));
  return std::span<const std::uint64_t>(words_).subspan(static_cast<std::size_t>(i) * wpc, wpc);
}

BitCode CodeDatabase::code(Index i) const {
  const auto w = code_words(i);
  return BitCode(bits_, {w.begin(), w.end()});
}

std::vector<Index> distances(const BitCode& query, const CodeDatabase& db) {
  if (query.bits() != db.bits()) {
    throw LengthMismatch("query has " + std::to_string(query.bits()) + " bits, database " +
                         std::to_string(db.bits()));
  }
  std::vector<Index> d(static_cast<std::size_t>(db.size()));
  for (Index i = 0; i < db.size(); ++i) d[static_cast<std::size_t>(i)] = hamming(query.words(), db.code_words(i));
  return d;
}

std::vector<Index> rank_all(const BitCode& query, const CodeDatabase& db) {
  const auto d = distances(query, db);
  // Counting sort over distances 0..q is stable, so ties keep database order.
  std::vector<Index> offsets(static_cast<std::size_t>(db.bits() + 2), 0);
  for (Index v : d) ++offsets[static_cast<std::size_t>(v + 1)];
  for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
  std::vector<Index> order(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    order[static_cast<std::size_t>(offsets[static_cast<std::size_t>(d[i])]++)] = static_cast<Index>(i);
  }
  return order;
}

std::vector<Index> radius_search(const BitCode& query, const CodeDatabase& db, Index radius) {
  if (radius < 0 || radius > query.bits()) throw DomainError("radius must lie in [0, q]");
  std::vector<Index> hits;
  const auto d = distances(query, db);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] <= radius) hits.push_back(static_cast<Index>(i));
  }
  return hits;
}

void write_code_file(const std::filesystem::path& path, const CodeDatabase& db) {
  ByteWriter w;
  w.bytes(kCodeMagic);
  w.put<std::uint32_t>(kCodeVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(db.bits()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(db.size()));
  for (std::uint64_t word : db.words()) w.put(word);
  write_file_atomic(path, w.buffer());
}

CodeDatabase read_code_file(const std::filesystem::path& path) {
  ByteReader r(read_file(path), path.string());
  r.expect_magic(kCodeMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCodeVersion) throw FormatError(path.string() + ": unsupported code file version " + std::to_string(version));
  const auto bits = static_cast<Index>(r.get<std::uint32_t>());
  const auto count = r.get<std::uint64_t>();
  if (bits < 1) throw FormatError(path.string() + ": q must be >= 1");
  const std::uint64_t n = count * static_cast<std::uint64_t>(words_per_code(bits));
  if (r.remaining() != n * 8) throw FormatError(path.string() + ": payload size does not match header");
  std::vector<std::uint64_t> words(n);
  for (auto& word : words) word = r.get<std::uint64_t>();
  try {
    return CodeDatabase(bits, std::move(words), {});
  } catch (const DomainError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<LabelSet>& labels,
                      const std::vector<std::int64_t>& ids) {
  std::ostringstream out;
  out << "index,label,id\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << i << ",";
    for (std::size_t j = 0; j < labels[i].size(); ++j) out << (j ? ";" : "") << labels[i][j];
    out << "," << (ids.empty() ? static_cast<std::int64_t>(i) : ids[i]) << "\n";
  }
  write_file_atomic(path, out.str());
}

void read_labels_csv(const std::filesystem::path& path, std::vector<LabelSet>& labels,
                     std::vector<std::int64_t>& ids) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("index,label", 0) != 0) {
    throw FormatError(path.string() + ": missing 'index,label' header");
  }
  labels.clear();
  ids.clear();
  bool have_ids = line == "index,label,id";
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string index, label, id;
    std::getline(fields, index, ',');
    std::getline(fields, label, ',');
    std::getline(fields, id, ',');
    try {
      if (std::stoull(index) != row) throw FormatError("out of order");
      LabelSet set;
      std::istringstream parts(label);
      std::string part;
      while (std::getline(parts, part, ';')) set.push_back(std::stoi(part));
      std::sort(set.begin(), set.end());
      labels.push_back(std::move(set));
      if (have_ids) ids.push_back(std::stoll(id));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad record at index " + std::to_string(row));
    }
    ++row;
  }
}

void save_code_database(const std::filesystem::path& path, const CodeDatabase& db) {
  write_code_file(path, db);
  std::filesystem::path sidecar = path;
  sidecar += ".labels.csv";
  write_labels_csv(sidecar, db.labels(), db.ids());
}

CodeDatabase load_code_database(const std::filesystem::path& path) {
  const CodeDatabase codes = read_code_file(path);
  std::filesystem::path sidecar = path;
  sidecar += ".labels.csv";
  std::vector<LabelSet> labels;
  std::vector<std::int64_t> ids;
  if (std::filesystem::exists(sidecar)) read_labels_csv(sidecar, labels, ids);
  const auto words = codes.words();
  try {
    return CodeDatabase(codes.bits(), {words.begin(), words.end()}, std::move(labels), std::move(ids));
  } catch (const LengthMismatch& e) {
    throw FormatError(sidecar.string() + ": " + e.what());
  }
}

}  // namespace hashlab
