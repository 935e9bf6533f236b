#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "hashlab/hamming_index.hpp"
#include "hashlab/tensor.hpp"

namespace hashlab {

/// (anchor, positive, negative): the anchor is more similar to the positive.
struct Triplet {
  Index anchor = 0;
  Index positive = 0;
  Index negative = 0;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct LossValue {
  double value = 0;
  bool active = false;  // hinge engaged (slack > 0)
};

/// Hinge loss on binary codes: max(0, margin - (H(b, b-) - H(b, b+))).
LossValue hamming_triplet_loss(const BitCode& anchor, const BitCode& positive,
                               const BitCode& negative, double margin = 1.0);

/// ||b - b+||^2 - ||b - b-||^2 + margin, the argument of the relaxed hinge.
template <typename DA, typename DP, typename DN>
typename DA::Scalar triplet_slack(const Eigen::MatrixBase<DA>& anchor,
                                  const Eigen::MatrixBase<DP>& positive,
                                  const Eigen::MatrixBase<DN>& negative, double margin = 1.0) {
  using Scalar = typename DA::Scalar;
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw LengthMismatch("triplet codes differ in length");
  }
  const Scalar to_positive = (anchor - positive).squaredNorm();
  const Scalar to_negative = (anchor - negative).squaredNorm();
  return to_positive - to_negative + static_cast<Scalar>(margin);
}

/// Relaxed loss on approximate codes in [0,1]^q: max(0, ||b - b+||^2 - ||b - b-||^2 + margin).
/// Throws DomainError when any entry lies outside [0, 1].
template <typename DA, typename DP, typename DN>
LossValue relaxed_triplet_loss(const Eigen::MatrixBase<DA>& anchor,
                               const Eigen::MatrixBase<DP>& positive,
                               const Eigen::MatrixBase<DN>& negative, double margin = 1.0) {
  using Scalar = typename DA::Scalar;
  auto in_range = [](const auto& v) {
    return v.size() == 0 || (v.minCoeff() >= Scalar(0) && v.maxCoeff() <= Scalar(1));
  };
  if (!in_range(anchor) || !in_range(positive) || !in_range(negative)) {
    throw DomainError("relaxed triplet loss needs codes in [0,1]");
  }
  const Scalar slack = triplet_slack(anchor, positive, negative, margin);
  return {static_cast<double>(std::max(slack, Scalar(0))), slack > Scalar(0)};
}

template <typename Scalar>
struct TripletGradients {
  Vector<Scalar> anchor;
  Vector<Scalar> positive;
  Vector<Scalar> negative;
};

/// (2b- - 2b+, 2b+ - 2b, 2b - 2b-), all scaled by the indicator slack > 0.
/// The last term is the derivative of the relaxed loss with respect to b-; the
/// printed form 2b- - 2b has its sign flipped and would pull negatives closer.
template <typename DA, typename DP, typename DN>
TripletGradients<typename DA::Scalar> triplet_subgradients(const Eigen::MatrixBase<DA>& anchor,
                                                           const Eigen::MatrixBase<DP>& positive,
                                                           const Eigen::MatrixBase<DN>& negative,
                                                           double margin = 1.0) {
  using Scalar = typename DA::Scalar;
  const Scalar indicator = triplet_slack(anchor, positive, negative, margin) > Scalar(0) ? 1 : 0;
  return {indicator * (Scalar(2) * negative - Scalar(2) * positive),
          indicator * (Scalar(2) * positive - Scalar(2) * anchor),
          indicator * (Scalar(2) * anchor - Scalar(2) * negative)};
}

/// Draws label-consistent triplets. Single-label mode: positive shares the anchor's
/// class, negative does not. Multilabel mode: positive shares at least one label,
/// negative shares none. Anchors are uniform over items admitting both.
class TripletSampler {
 public:
  /// Throws InfeasibleError when no item can anchor a triplet.
  TripletSampler(std::vector<LabelSet> labels, bool multilabel);

  Triplet sample(std::mt19937_64& rng) const;
  std::vector<Triplet> sample(Index count, std::mt19937_64& rng) const;

  const std::vector<Index>& anchors() const { return anchors_; }

 private:
  bool related(Index a, Index b) const;

  std::vector<LabelSet> labels_;
  bool multilabel_;
  std::vector<Index> anchors_;
  std::vector<std::vector<Index>> members_;  // single-label: items per class position
  std::vector<Index> class_of_;             // single-label: class position per item
};

std::vector<Triplet> sample_triplets(const std::vector<LabelSet>& labels, Index count,
                                     std::uint64_t seed, bool multilabel);

struct IndexPair {
  Index first = 0;
  Index second = 0;
};

/// For every similar pair (a, b) and dissimilar pair (a, c) sharing an endpoint a,
/// emits (a, b, c). Pairs are unordered; triplets with repeated indices are dropped.
/// Result is sorted and deduplicated.
std::vector<Triplet> triplets_from_pairs(const std::vector<IndexPair>& similar,
                                         const std::vector<IndexPair>& dissimilar);

void write_triplets_csv(const std::filesystem::path& path, const std::vector<Triplet>& triplets);
std::vector<Triplet> read_triplets_csv(const std::filesystem::path& path);

/// CSV "first,second,similar" with similar in {0, 1}.
void read_pairs_csv(const std::filesystem::path& path, std::vector<IndexPair>& similar,
                    std::vector<IndexPair>& dissimilar);
void write_pairs_csv(const std::filesystem::path& path, const std::vector<IndexPair>& similar,
                     const std::vector<IndexPair>& dissimilar);

}  // namespace hashlab
