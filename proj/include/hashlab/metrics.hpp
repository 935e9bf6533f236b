#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hashlab/hamming_index.hpp"

namespace hashlab {

enum class RelevanceRule { single_label_equality, multilabel_share_any };

std::string_view to_string(RelevanceRule rule);
RelevanceRule parse_relevance_rule(std::string_view name);

bool is_relevant(const LabelSet& query, const LabelSet& item, RelevanceRule rule);

/// Relevance of every database item to `query`, in database order.
std::vector<bool> relevance_mask(const LabelSet& query, const CodeDatabase& db, RelevanceRule rule);

/// Denominator of truncated AP: relevant items found within the top N, or all relevant items.
enum class TruncationDenominator { relevant_retrieved, total_relevant };

/// Average precision of `ranking` (database indices, best first) against a relevance mask.
///
/// Untruncated: (1/R) * sum over relevant positions p of precision@p, R = all relevant.
/// Truncated to N: only positions p <= N count; the denominator is the number of relevant
/// items within the top N (or R, if so configured), and 0 when none were retrieved.
/// Throws UndefinedError when the mask has no relevant item.
double average_precision(std::span<const Index> ranking, const std::vector<bool>& relevant,
                         std::optional<Index> truncate = std::nullopt,
                         TruncationDenominator denominator = TruncationDenominator::relevant_retrieved);

struct MapResult {
  double map = 0;
  /// nullopt for queries with no relevant database item (skipped).
  std::vector<std::optional<double>> per_query;
  Index evaluated = 0;
  Index skipped = 0;
};

/// Unweighted mean of per-query AP over queries with at least one relevant item.
/// Throws UndefinedError when no query has one.
MapResult mean_average_precision(const CodeDatabase& queries, const CodeDatabase& db,
                                 RelevanceRule rule, std::optional<Index> truncate = std::nullopt,
                                 TruncationDenominator denominator = TruncationDenominator::relevant_retrieved);

/// Mean over all queries of relevant / retrieved within Hamming radius r. A query that
/// retrieves nothing scores 0, or is left out when `empty_counts_as_zero` is false.
double precision_within_radius(const CodeDatabase& queries, const CodeDatabase& db,
                               RelevanceRule rule, Index radius = 2,
                               bool empty_counts_as_zero = true);

struct PrPoint {
  double recall = 0;
  double precision = 0;
  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

/// Micro-averaged curve over cutoffs k = 1..|db|: relevant-in-top-k summed over queries,
/// divided by (queries * k) for precision and by total relevant for recall.
std::vector<PrPoint> precision_recall_curve(const CodeDatabase& queries, const CodeDatabase& db,
                                            RelevanceRule rule);

struct TopKPoint {
  Index k = 0;
  double precision = 0;
  friend bool operator==(const TopKPoint&, const TopKPoint&) = default;
};

/// Mean over queries of (relevant in top k) / k. Throws DomainError if some k > |db| or k < 1.
std::vector<TopKPoint> precision_at_topk(const CodeDatabase& queries, const CodeDatabase& db,
                                         RelevanceRule rule, std::span<const Index> ks);

/// 1, 5, 10, 20, 50, 100, 200, 500, 1000, ... capped at and always including |db|.
std::vector<Index> default_topk(Index db_size);

struct EvalOptions {
  RelevanceRule rule = RelevanceRule::single_label_equality;
  std::optional<Index> truncate;
  TruncationDenominator denominator = TruncationDenominator::relevant_retrieved;
  Index radius = 2;
  bool empty_radius_counts_as_zero = true;
  std::vector<Index> topk;  // empty: default_topk(|db|)

  friend bool operator==(const EvalOptions&, const EvalOptions&) = default;
};

struct MetricReport {
  double map = 0;
  Index map_queries = 0;
  Index skipped_queries = 0;
  std::optional<Index> truncate;
  double precision_at_radius = 0;
  Index radius = 2;
  std::vector<PrPoint> pr_curve;
  std::vector<TopKPoint> precision_at_topk;
  std::vector<std::optional<double>> per_query_ap;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport evaluate(const CodeDatabase& queries, const CodeDatabase& db, const EvalOptions& options);

/// report.json (scalars + per-query AP), pr_curve.csv (recall,precision), topk.csv (k,precision).
void write_metric_report(const std::filesystem::path& dir, const MetricReport& report);
MetricReport read_metric_report(const std::filesystem::path& dir);

}  // namespace hashlab
