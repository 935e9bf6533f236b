#include "hashlab/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "hashlab/binary_io.hpp"

namespace hashlab {

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_queries(const CodeDatabase& queries, const CodeDatabase& db) {
  if (queries.bits() != db.bits()) throw LengthMismatch("query and database codes differ in q");
  if (static_cast<Index>(queries.labels().size()) != queries.size() ||
      static_cast<Index>(db.labels().size()) != db.size()) {
    throw DomainError("evaluation needs labels for every query and database item");
  }
}

struct QueryView {
  std::vector<Index> ranking;
  std::vector<bool> relevant;
  Index relevant_count = 0;
};

QueryView view(const CodeDatabase& queries, Index q, const CodeDatabase& db, RelevanceRule rule) {
  QueryView v;
  const BitCode code = queries.code(q);
  v.ranking = rank_all(code, db);
  v.relevant = relevance_mask(queries.label(q), db, rule);
  v.relevant_count = static_cast<Index>(std::count(v.relevant.begin(), v.relevant.end(), true));
  return v;
}

}  // namespace

std::string_view to_string(RelevanceRule rule) {
  return rule == RelevanceRule::single_label_equality ? "single-label" : "multilabel";
}

RelevanceRule parse_relevance_rule(std::string_view name) {
  if (name == "single-label" || name == "single") return RelevanceRule::single_label_equality;
  if (name == "multilabel" || name == "multi" || name == "share-any") return RelevanceRule::multilabel_share_any;
  throw ConfigError("unknown relevance rule '" + std::string(name) + "'");
}

bool is_relevant(const LabelSet& query, const LabelSet& item, RelevanceRule rule) {
  if (rule == RelevanceRule::single_label_equality) return query == item;
  auto i = query.begin();
  auto j = item.begin();
  while (i != query.end() && j != item.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i; else ++j;
  }
  return false;
}

std::vector<bool> relevance_mask(const LabelSet& query, const CodeDatabase& db, RelevanceRule rule) {
  std::vector<bool> mask(static_cast<std::size_t>(db.size()));
  for (Index i = 0; i < db.size(); ++i) mask[static_cast<std::size_t>(i)] = is_relevant(query, db.label(i), rule);
  return mask;
}

double average_precision(std::span<const Index> ranking, const std::vector<bool>& relevant,
                         std::optional<Index> truncate, TruncationDenominator denominator) {
  const auto total = static_cast<Index>(std::count(relevant.begin(), relevant.end(), true));
  if (total == 0) throw UndefinedError("average precision undefined: no relevant items");
  if (truncate && *truncate < 1) throw DomainError("truncation depth must be >= 1");
  const Index depth = std::min<Index>(static_cast<Index>(ranking.size()), truncate.value_or(static_cast<Index>(ranking.size())));
  double sum = 0;
  Index hits = 0;
  for (Index p = 0; p < depth; ++p) {
    if (relevant.at(static_cast<std::size_t>(ranking[static_cast<std::size_t>(p)]))) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(p + 1);
    }
  }
  if (truncate && denominator == TruncationDenominator::relevant_retrieved) {
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
  }
  return sum / static_cast<double>(total);
}

MapResult mean_average_precision(const CodeDatabase& queries, const CodeDatabase& db,
                                 RelevanceRule rule, std::optional<Index> truncate,
                                 TruncationDenominator denominator) {
  check_queries(queries, db);
  MapResult result;
  double sum = 0;
  for (Index q = 0; q < queries.size(); ++q) {
    const QueryView v = view(queries, q, db, rule);
    if (v.relevant_count == 0) {
      result.per_query.push_back(std::nullopt);
      ++result.skipped;
      continue;
    }
    const double ap = average_precision(v.ranking, v.relevant, truncate, denominator);
    result.per_query.push_back(ap);
    sum += ap;
    ++result.evaluated;
  }
  if (result.evaluated == 0) throw UndefinedError("MAP undefined: no query has a relevant database item");
  result.map = sum / static_cast<double>(result.evaluated);
  return result;
}

double precision_within_radius(const CodeDatabase& queries, const CodeDatabase& db,
                               RelevanceRule rule, Index radius, bool empty_counts_as_zero) {
  check_queries(queries, db);
  double sum = 0;
  Index counted = 0;
  for (Index q = 0; q < queries.size(); ++q) {
    const auto hits = radius_search(queries.code(q), db, radius);
    if (hits.empty()) {
      if (empty_counts_as_zero) ++counted;
      continue;
    }
    Index good = 0;
    for (Index i : hits) good += is_relevant(queries.label(q), db.label(i), rule) ? 1 : 0;
    sum += static_cast<double>(good) / static_cast<double>(hits.size());
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

std::vector<PrPoint> precision_recall_curve(const CodeDatabase& queries, const CodeDatabase& db,
                                            RelevanceRule rule) {
  check_queries(queries, db);
  const auto n = static_cast<std::size_t>(db.size());
  std::vector<Index> hits_at(n, 0);  // relevant within top k+1, summed over queries
  Index total_relevant = 0;
  for (Index q = 0; q < queries.size(); ++q) {
    const QueryView v = view(queries, q, db, rule);
    total_relevant += v.relevant_count;
    Index hits = 0;
    for (std::size_t k = 0; k < n; ++k) {
      hits += v.relevant[static_cast<std::size_t>(v.ranking[k])] ? 1 : 0;
      hits_at[k] += hits;
    }
  }
  std::vector<PrPoint> curve(n);
  const auto nq = static_cast<double>(queries.size());
  for (std::size_t k = 0; k < n; ++k) {
    const auto h = static_cast<double>(hits_at[k]);
    curve[k].precision = nq == 0 ? 0.0 : h / (nq * static_cast<double>(k + 1));
    curve[k].recall = total_relevant == 0 ? 0.0 : h / static_cast<double>(total_relevant);
  }
  return curve;
}

std::vector<TopKPoint> precision_at_topk(const CodeDatabase& queries, const CodeDatabase& db,
                                         RelevanceRule rule, std::span<const Index> ks) {
  check_queries(queries, db);
  for (Index k : ks) {
    if (k < 1 || k > db.size()) {
      throw DomainError("top-k cutoff " + std::to_string(k) + " outside [1, " + std::to_string(db.size()) + "]");
    }
  }
  std::vector<double> sums(ks.size(), 0.0);
  for (Index q = 0; q < queries.size(); ++q) {
    const QueryView v = view(queries, q, db, rule);
    for (std::size_t j = 0; j < ks.size(); ++j) {
      Index good = 0;
      for (Index p = 0; p < ks[j]; ++p) good += v.relevant[static_cast<std::size_t>(v.ranking[static_cast<std::size_t>(p)])] ? 1 : 0;
      sums[j] += static_cast<double>(good) / static_cast<double>(ks[j]);
    }
  }
  std::vector<TopKPoint> out;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    out.push_back({ks[j], queries.size() == 0 ? 0.0 : sums[j] / static_cast<double>(queries.size())});
  }
  return out;
}

std::vector<Index> default_topk(Index db_size) {
  std::vector<Index> ks;
  const Index steps[] = {1, 2, 5};
  for (Index scale = 1; scale <= db_size; scale *= 10) {
    for (Index s : steps) {
      const Index k = s * scale;
      if (k < db_size && k != 2) ks.push_back(k);
    }
  }
  if (db_size >= 1) ks.push_back(db_size);
  return ks;
}

MetricReport evaluate(const CodeDatabase& queries, const CodeDatabase& db, const EvalOptions& options) {
  MetricReport report;
  const auto map = mean_average_precision(queries, db, options.rule, options.truncate, options.denominator);
  report.map = map.map;
  report.map_queries = map.evaluated;
  report.skipped_queries = map.skipped;
  report.per_query_ap = map.per_query;
  report.truncate = options.truncate;
  report.radius = options.radius;
  report.precision_at_radius =
      precision_within_radius(queries, db, options.rule, options.radius, options.empty_radius_counts_as_zero);
  report.pr_curve = precision_recall_curve(queries, db, options.rule);
  const auto ks = options.topk.empty() ? default_topk(db.size()) : options.topk;
  report.precision_at_topk = precision_at_topk(queries, db, options.rule, ks);
  return report;
}

void write_metric_report(const std::filesystem::path& dir, const MetricReport& report) {
  nlohmann::ordered_json j;
  j["map"] = report.map;
  j["map_queries"] = report.map_queries;
  j["skipped_queries"] = report.skipped_queries;
  j["truncate"] = report.truncate ? nlohmann::ordered_json(*report.truncate) : nlohmann::ordered_json(nullptr);
  j["radius"] = report.radius;
  j["precision_at_radius"] = report.precision_at_radius;
  auto per_query = nlohmann::ordered_json::array();
  for (const auto& ap : report.per_query_ap) {
    per_query.push_back(ap ? nlohmann::ordered_json(*ap) : nlohmann::ordered_json(nullptr));
  }
  j["per_query_ap"] = std::move(per_query);
  write_file_atomic(dir / "report.json", j.dump(2) + "\n");

  std::ostringstream pr;
  pr << "recall,precision\n";
  for (const auto& p : report.pr_curve) pr << format_real(p.recall) << "," << format_real(p.precision) << "\n";
  write_file_atomic(dir / "pr_curve.csv", pr.str());

  std::ostringstream topk;
  topk << "k,precision\n";
  for (const auto& p : report.precision_at_topk) topk << p.k << "," << format_real(p.precision) << "\n";
  write_file_atomic(dir / "topk.csv", topk.str());
}

MetricReport read_metric_report(const std::filesystem::path& dir) {
  MetricReport report;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / "report.json"));
    report.map = j.at("map").get<double>();
    report.map_queries = j.at("map_queries").get<Index>();
    report.skipped_queries = j.at("skipped_queries").get<Index>();
    if (!j.at("truncate").is_null()) report.truncate = j.at("truncate").get<Index>();
    report.radius = j.at("radius").get<Index>();
    report.precision_at_radius = j.at("precision_at_radius").get<double>();
    for (const auto& ap : j.at("per_query_ap")) {
      report.per_query_ap.push_back(ap.is_null() ? std::nullopt : std::optional<double>(ap.get<double>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "report.json").string() + ": " + e.what());
  }
  auto read_csv = [&](const std::filesystem::path& path, const std::string& header, auto&& row) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != header) throw FormatError(path.string() + ": bad header");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw FormatError(path.string() + ": bad row '" + line + "'");
      row(line.substr(0, comma), line.substr(comma + 1));
    }
  };
  read_csv(dir / "pr_curve.csv", "recall,precision", [&](const std::string& a, const std::string& b) {
    report.pr_curve.push_back({std::stod(a), std::stod(b)});
  });
  read_csv(dir / "topk.csv", "k,precision", [&](const std::string& a, const std::string& b) {
    report.precision_at_topk.push_back({std::stoll(a), std::stod(b)});
  });
  return report;
}

}  // namespace hashlab
