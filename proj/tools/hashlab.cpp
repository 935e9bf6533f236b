#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "hashlab/experiment.hpp"

namespace {

using namespace hashlab;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
  std::string precision;
};

ExperimentConfig load_config(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config: required for this command");
  ExperimentConfig c = load_experiment_config(g.config);
  if (g.seed) c.train.seed = *g.seed;
  if (g.deterministic) c.deterministic = true;
  if (!g.out.empty()) c.output = g.out;
  if (!g.precision.empty()) c.double_precision = g.precision == "f64";
  c.validate();
  return c;
}

ProgressFn printer(std::int64_t every) {
  return [every](const StepReport& r) {
    if (every > 0 && (r.iteration + 1) % every == 0) {
      std::fprintf(stderr, "iter %lld  loss %.6f  eps %.4f  lr %.6g  active %lld\n",
                   static_cast<long long>(r.iteration + 1), r.loss, r.epsilon, r.learning_rate,
                   static_cast<long long>(r.active));
    }
  };
}

void print_report(const MetricReport& r) {
  std::printf("map %.6f  (queries %lld, skipped %lld)\n", r.map, static_cast<long long>(r.map_queries),
              static_cast<long long>(r.skipped_queries));
  std::printf("precision within radius %lld %.6f\n", static_cast<long long>(r.radius), r.precision_at_radius);
}

std::string join_labels(const LabelSet& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? ";" : "") + std::to_string(labels[i]);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep supervised hashing: train, encode, evaluate and compare"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Experiment configuration (INI)");
  app.add_option("--seed", g.seed, "Training seed");
  app.add_flag("--deterministic", g.deterministic, "Serialize reductions (single worker)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--precision", g.precision, "Floating-point precision")->check(CLI::IsMember({"f32", "f64"}));

  auto* train = app.add_subcommand("train", "Train a model; --pipeline also encodes and evaluates");
  std::string resume;
  bool pipeline = false;
  std::int64_t log_every = 100;
  train->add_option("--resume", resume, "Continue from a checkpoint");
  train->add_flag("--pipeline", pipeline, "Encode query/database splits and evaluate after training");
  train->add_option("--log-every", log_every, "Progress line interval (0 = quiet)");

  auto* encode = app.add_subcommand("encode", "Encode a dataset with a trained checkpoint");
  std::string checkpoint, data, role = "database", name;
  encode->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  encode->add_option("--data", data, "Dataset (binary, .csv or image directory)")->required();
  encode->add_option("--role", role, "Which sub-network encodes the items")->check(CLI::IsMember({"query", "database"}));
  encode->add_option("--name", name, "Output file stem (default: the role)");

  auto* eval = app.add_subcommand("eval", "Evaluate query codes against database codes");
  std::string query_codes, database_codes;
  std::string rule, denominator, empty_radius;
  std::optional<Index> truncate, radius;
  std::vector<Index> topk;
  eval->add_option("--queries", query_codes, "Query code file")->required();
  eval->add_option("--database", database_codes, "Database code file")->required();
  eval->add_option("--rule", rule, "Relevance rule")->check(CLI::IsMember({"single-label", "multilabel"}));
  eval->add_option("--truncate", truncate, "Truncate AP at this rank");
  eval->add_option("--denominator", denominator, "Truncated AP denominator")
      ->check(CLI::IsMember({"relevant-retrieved", "total-relevant"}));
  eval->add_option("--radius", radius, "Hamming radius for precision");
  eval->add_option("--empty-radius", empty_radius, "Queries retrieving nothing score zero or are skipped")
      ->check(CLI::IsMember({"zero", "skip"}));
  eval->add_option("--topk", topk, "Cutoffs for precision@k")->delimiter(',');

  auto* ret = app.add_subcommand("retrieve", "Rank database items for one query");
  std::string ret_queries, ret_database, ret_checkpoint, ret_query_data, ret_database_data;
  std::int64_t query_id = 0;
  Index k = 10;
  ret->add_option("--queries", ret_queries, "Query code file");
  ret->add_option("--database", ret_database, "Database code file");
  ret->add_option("--checkpoint", ret_checkpoint, "Encode on the fly with this checkpoint");
  ret->add_option("--query-data", ret_query_data, "Query dataset (with --checkpoint)");
  ret->add_option("--database-data", ret_database_data, "Database dataset (with --checkpoint)");
  ret->add_option("--id", query_id, "Query id")->required();
  ret->add_option("-k,--k", k, "Number of results");

  auto* compare = app.add_subcommand("compare", "Side-by-side runs along one axis");
  std::string axis = "head-variant";
  compare->add_option("--axis", axis, "head-variant, sharing-mode or both")
      ->check(CLI::IsMember({"head-variant", "sharing-mode", "both"}));
  compare->add_option("--log-every", log_every, "Progress line interval (0 = quiet)");

  auto* synth = app.add_subcommand("synth", "Write the configured synthetic splits to disk");
  std::string format = "bin";
  synth->add_option("--format", format, "Dataset format")->check(CLI::IsMember({"bin", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) {
      const ExperimentConfig c = load_config(g);
      if (pipeline) {
        if (!resume.empty()) throw ConfigError("--resume: not supported with --pipeline");
        const PipelineResult r = run_pipeline(c, printer(log_every));
        std::printf("checkpoint %s\n", r.training.checkpoint.string().c_str());
        std::printf("initial ");
        print_report(r.initial);
        print_report(r.report);
      } else {
        std::optional<fs::path> from;
        if (!resume.empty()) from = resume;
        const TrainOutcome r = cmd_train(c, printer(log_every), from);
        std::printf("checkpoint %s  iterations %lld  loss %.6f\n", r.checkpoint.string().c_str(),
                    static_cast<long long>(r.iterations), r.final_loss);
      }
    } else if (encode->parsed()) {
      const fs::path out = g.out.empty() ? fs::path(".") : fs::path(g.out);
      const fs::path prefix = out / (name.empty() ? role : name);
      const CodeDatabase db = cmd_encode(checkpoint, fs::path(data), role == "query" ? Role::query : Role::database, prefix);
      std::printf("%lld codes of %lld bits -> %s.codes\n", static_cast<long long>(db.size()),
                  static_cast<long long>(db.bits()), prefix.string().c_str());
    } else if (eval->parsed()) {
      EvalOptions options;
      if (!g.config.empty()) options = load_config(g).eval;
      if (!rule.empty()) options.rule = parse_relevance_rule(rule);
      if (truncate) options.truncate = *truncate;
      if (!denominator.empty()) {
        options.denominator = denominator == "total-relevant" ? TruncationDenominator::total_relevant
                                                              : TruncationDenominator::relevant_retrieved;
      }
      if (radius) options.radius = *radius;
      if (!empty_radius.empty()) options.empty_radius_counts_as_zero = empty_radius == "zero";
      if (!topk.empty()) options.topk = topk;
      const fs::path out = g.out.empty() ? fs::path("metrics") : fs::path(g.out);
      print_report(cmd_eval(query_codes, database_codes, options, out));
    } else if (ret->parsed()) {
      CodeDatabase q, d;
      if (!ret_checkpoint.empty()) {
        if (ret_query_data.empty() || ret_database_data.empty()) {
          throw ConfigError("--checkpoint: needs --query-data and --database-data");
        }
        const fs::path tmp = fs::temp_directory_path() / "hashlab-retrieve";
        q = cmd_encode(ret_checkpoint, fs::path(ret_query_data), Role::query, tmp / "query");
        d = cmd_encode(ret_checkpoint, fs::path(ret_database_data), Role::database, tmp / "database");
        fs::remove_all(tmp);
      } else {
        if (ret_queries.empty() || ret_database.empty()) {
          throw ConfigError("--queries/--database: both code files are required without --checkpoint");
        }
        q = load_code_database(ret_queries);
        d = load_code_database(ret_database);
      }
      std::printf("rank,id,distance,labels\n");
      Index rank = 1;
      for (const auto& hit : retrieve(q, d, query_id, k)) {
        std::printf("%lld,%lld,%lld,%s\n", static_cast<long long>(rank++), static_cast<long long>(hit.id),
                    static_cast<long long>(hit.distance), join_labels(hit.labels).c_str());
      }
    } else if (compare->parsed()) {
      const ExperimentConfig c = load_config(g);
      std::vector<CompareAxis> axes;
      if (axis != "sharing-mode") axes.push_back(CompareAxis::head_variant);
      if (axis != "head-variant") axes.push_back(CompareAxis::sharing_mode);
      for (CompareAxis a : axes) {
        std::printf("%s\n%-20s %6s %10s %14s\n", std::string(to_string(a)).c_str(), "variant", "bits", "map",
                    "precision_r2");
        for (const auto& row : cmd_compare(c, a, printer(log_every))) {
          std::printf("%-20s %6lld %10.6f %14.6f\n", row.variant.c_str(), static_cast<long long>(row.bits), row.map,
                      row.precision_r2);
        }
      }
    } else if (synth->parsed()) {
      const ExperimentConfig c = load_config(g);
      const fs::path out = g.out.empty() ? fs::path("data") : fs::path(g.out);
      cmd_synth(c, out, format == "csv" ? DatasetFormat::csv : DatasetFormat::binary);
      std::printf("wrote train, query and database splits to %s\n", out.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
  return 0;
}
