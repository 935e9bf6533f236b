#include "hashlab/triplet.hpp"

#include <map>
#include <sstream>

#include "hashlab/binary_io.hpp"

namespace hashlab {

namespace {

bool share_any(const LabelSet& a, const LabelSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i; else ++j;
  }
  return false;
}

Index uniform_index(Index n, std::mt19937_64& rng) {
  return std::uniform_int_distribution<Index>(0, n - 1)(rng);
}

}  // namespace

LossValue hamming_triplet_loss(const BitCode& anchor, const BitCode& positive,
                               const BitCode& negative, double margin) {
  const auto to_positive = static_cast<double>(hamming(anchor, positive));
  const auto to_negative = static_cast<double>(hamming(anchor, negative));
  const double slack = margin - (to_negative - to_positive);
  return {std::max(slack, 0.0), slack > 0};
}

TripletSampler::TripletSampler(std::vector<LabelSet> labels, bool multilabel)
    : labels_(std::move(labels)), multilabel_(multilabel) {
  for (auto& l : labels_) std::sort(l.begin(), l.end());
  const auto n = static_cast<Index>(labels_.size());
  if (!multilabel_) {
    std::map<int, std::size_t> position;
    class_of_.resize(labels_.size());
    for (Index i = 0; i < n; ++i) {
      const auto& l = labels_[static_cast<std::size_t>(i)];
      if (l.size() != 1) {
        throw DomainError("single-label sampling: item " + std::to_string(i) + " has " +
                          std::to_string(l.size()) + " labels");
      }
      auto [it, inserted] = position.try_emplace(l.front(), members_.size());
      if (inserted) members_.emplace_back();
      members_[it->second].push_back(i);
      class_of_[static_cast<std::size_t>(i)] = static_cast<Index>(it->second);
    }
    if (members_.size() >= 2) {
      for (Index i = 0; i < n; ++i) {
        if (members_[static_cast<std::size_t>(class_of_[static_cast<std::size_t>(i)])].size() >= 2) {
          anchors_.push_back(i);
        }
      }
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      bool has_positive = false, has_negative = false;
      for (Index j = 0; j < n && !(has_positive && has_negative); ++j) {
        if (j == i) continue;
        (related(i, j) ? has_positive : has_negative) = true;
      }
      if (has_positive && has_negative) anchors_.push_back(i);
    }
  }
  if (anchors_.empty()) throw InfeasibleError("no item has both a valid positive and a valid negative");
}

bool TripletSampler::related(Index a, Index b) const {
  const auto& la = labels_[static_cast<std::size_t>(a)];
  const auto& lb = labels_[static_cast<std::size_t>(b)];
  return multilabel_ ? share_any(la, lb) : la == lb;
}

Triplet TripletSampler::sample(std::mt19937_64& rng) const {
  const Index anchor = anchors_[static_cast<std::size_t>(uniform_index(static_cast<Index>(anchors_.size()), rng))];
  const auto n = static_cast<Index>(labels_.size());
  if (!multilabel_) {
    const auto& same = members_[static_cast<std::size_t>(class_of_[static_cast<std::size_t>(anchor)])];
    // Uniform over the class minus the anchor: draw from size - 1 slots and skip the anchor.
    const auto self = std::lower_bound(same.begin(), same.end(), anchor) - same.begin();
    Index k = uniform_index(static_cast<Index>(same.size()) - 1, rng);
    if (k >= self) ++k;
    const Index positive = same[static_cast<std::size_t>(k)];
    Index negative;
    do {
      negative = uniform_index(n, rng);
    } while (related(anchor, negative));
    return {anchor, positive, negative};
  }
  std::vector<Index> positives, negatives;
  for (Index j = 0; j < n; ++j) {
    if (j == anchor) continue;
    (related(anchor, j) ? positives : negatives).push_back(j);
  }
  const Index positive = positives[static_cast<std::size_t>(uniform_index(static_cast<Index>(positives.size()), rng))];
  const Index negative = negatives[static_cast<std::size_t>(uniform_index(static_cast<Index>(negatives.size()), rng))];
  return {anchor, positive, negative};
}

std::vector<Triplet> TripletSampler::sample(Index count, std::mt19937_64& rng) const {
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(std::max<Index>(count, 0)));
  for (Index i = 0; i < count; ++i) out.push_back(sample(rng));
  return out;
}

std::vector<Triplet> sample_triplets(const std::vector<LabelSet>& labels, Index count,
                                     std::uint64_t seed, bool multilabel) {
  TripletSampler sampler(labels, multilabel);
  std::mt19937_64 rng(seed);
  return sampler.sample(count, rng);
}

std::vector<Triplet> triplets_from_pairs(const std::vector<IndexPair>& similar,
                                         const std::vector<IndexPair>& dissimilar) {
  std::map<Index, std::vector<Index>> similar_to, dissimilar_to;
  for (const auto& p : similar) {
    similar_to[p.first].push_back(p.second);
    similar_to[p.second].push_back(p.first);
  }
  for (const auto& p : dissimilar) {
    dissimilar_to[p.first].push_back(p.second);
    dissimilar_to[p.second].push_back(p.first);
  }
  std::vector<Triplet> out;
  for (const auto& [anchor, positives] : similar_to) {
    const auto it = dissimilar_to.find(anchor);
    if (it == dissimilar_to.end()) continue;
    for (Index p : positives) {
      for (Index n : it->second) {
        if (p != anchor && n != anchor && p != n) out.push_back({anchor, p, n});
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void write_triplets_csv(const std::filesystem::path& path, const std::vector<Triplet>& triplets) {
  std::ostringstream out;
  out << "anchor,positive,negative\n";
  for (const auto& t : triplets) out << t.anchor << "," << t.positive << "," << t.negative << "\n";
  write_file_atomic(path, out.str());
}

std::vector<Triplet> read_triplets_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "anchor,positive,negative") {
    throw FormatError(path.string() + ": missing 'anchor,positive,negative' header");
  }
  std::vector<Triplet> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Triplet t;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> t.anchor >> c1 >> t.positive >> c2 >> t.negative) || c1 != ',' || c2 != ',') {
      throw FormatError(path.string() + ": bad triplet record " + std::to_string(out.size()));
    }
    out.push_back(t);
  }
  return out;
}

void read_pairs_csv(const std::filesystem::path& path, std::vector<IndexPair>& similar,
                    std::vector<IndexPair>& dissimilar) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "first,second,similar") {
    throw FormatError(path.string() + ": missing 'first,second,similar' header");
  }
  similar.clear();
  dissimilar.clear();
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    IndexPair p;
    int flag = -1;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> p.first >> c1 >> p.second >> c2 >> flag) || c1 != ',' || c2 != ',' ||
        (flag != 0 && flag != 1)) {
      throw FormatError(path.string() + ": bad pair record " + std::to_string(record));
    }
    (flag == 1 ? similar : dissimilar).push_back(p);
    ++record;
  }
}

void write_pairs_csv(const std::filesystem::path& path, const std::vector<IndexPair>& similar,
                     const std::vector<IndexPair>& dissimilar) {
  std::ostringstream out;
  out << "first,second,similar\n";
  for (const auto& p : similar) out << p.first << "," << p.second << ",1\n";
  for (const auto& p : dissimilar) out << p.first << "," << p.second << ",0\n";
  write_file_atomic(path, out.str());
}

}  // namespace hashlab
