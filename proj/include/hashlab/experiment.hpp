#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hashlab/dataset.hpp"
#include "hashlab/hash_head.hpp"
#include "hashlab/metrics.hpp"
#include "hashlab/trainer.hpp"

namespace hashlab {

namespace fs = std::filesystem;

/// Gaussian-blob splits generated in process instead of read from disk.
struct SyntheticData {
  Index classes = 3;
  Index train_per_class = 100;
  Index query_per_class = 20;
  Index database_per_class = 100;
  Shape shape{3, 8, 8};
  double separation = 1.0;
  double noise = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticData&, const SyntheticData&) = default;
};

/// Experiment description, read from an INI file:
///
///   [experiment]  name, output, seed, precision = f32|f64, deterministic
///   [network]     spec (path to a network description)
///   [head]        variant, bits (comma list), beta, apply_threshold
///   [train]       learning_rate, learning_rate_decay, learning_rate_step, momentum,
///                 batch_triplets | batch_images, weight_decay, epsilon_initial,
///                 epsilon_decay, epsilon_step, iterations, sharing, margin,
///                 multilabel, threads, checkpoint_every
///   [data]        source = files | synthetic; train, query, database (files);
///                 classes, train_per_class, query_per_class, database_per_class,
///                 shape, separation, noise, seed (synthetic)
///   [eval]        rule, truncate (count or none), denominator, radius,
///                 empty_radius = zero | skip, topk (comma list)
///
/// Relative paths resolve against the directory holding the file. Unknown keys are
/// rejected.
struct ExperimentConfig {
  std::string name = "experiment";
  fs::path output = "run";
  bool double_precision = true;
  bool deterministic = true;

  fs::path network_path;
  HeadVariant variant = HeadVariant::divide_and_encode;
  std::vector<Index> bits{12};
  double beta = 1.0;
  bool apply_threshold = true;

  TrainConfig train;
  std::int64_t checkpoint_every = 0;

  std::optional<SyntheticData> synthetic;
  fs::path train_data;
  fs::path query_data;
  fs::path database_data;

  EvalOptions eval;

  /// Throws ConfigError naming the offending field; checks that referenced files exist.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir);
ExperimentConfig load_experiment_config(const fs::path& path);

/// Resolved INI text; parses back to an equal config. `with_output` = false leaves out
/// the output directory so two runs differing only in location produce the same text.
std::string format_experiment_config(const ExperimentConfig& config, bool with_output = true);

/// Network for `bits`, with the head geometry it implies.
NetworkSpec resolve_network(const ExperimentConfig& config, Index bits);
HashHeadSpec resolve_head(const ExperimentConfig& config, const NetworkSpec& network, Index bits);

/// Train/query/database splits. Throws FormatError if query and database share an id.
SyntheticSplits load_splits(const ExperimentConfig& config);

/// Output layout below the run directory.
struct RunLayout {
  fs::path root;
  fs::path config() const { return root / "config.ini"; }
  fs::path network() const { return root / "network.ini"; }
  fs::path log() const { return root / "log.csv"; }
  fs::path checkpoints() const { return root / "checkpoints"; }
  fs::path final_checkpoint() const { return checkpoints() / "final.ckpt"; }
  fs::path codes() const { return root / "codes"; }
  fs::path metrics() const { return root / "metrics"; }
};

struct TrainOutcome {
  fs::path checkpoint;
  std::int64_t iterations = 0;
  double final_loss = 0;
};

using ProgressFn = std::function<void(const StepReport&)>;

/// Trains on the configured data and writes config.ini, network.ini, log.csv
/// (iteration,loss,epsilon,learning_rate) and checkpoints/ under config.output, using
/// config.bits.front(). Files are staged and moved into place only on success.
/// With `resume`, training continues from that checkpoint.
TrainOutcome cmd_train(const ExperimentConfig& config, const ProgressFn& progress = {},
                       const std::optional<fs::path>& resume = std::nullopt);

/// Encodes every item of `dataset` with the sub-network for `role` and writes
/// <prefix>.approx.csv (id then q approximate bits at 17 significant digits),
/// <prefix>.codes and <prefix>.codes.labels.csv. Returns the quantized codes.
CodeDatabase cmd_encode(const fs::path& checkpoint, const Dataset& dataset, Role role,
                        const fs::path& prefix);
CodeDatabase cmd_encode(const fs::path& checkpoint, const fs::path& dataset, Role role,
                        const fs::path& prefix);

/// Evaluates query codes against database codes and writes the report to `out_dir`.
MetricReport cmd_eval(const fs::path& query_codes, const fs::path& database_codes,
                      const EvalOptions& options, const fs::path& out_dir);

struct RetrievalHit {
  std::int64_t id = 0;
  Index distance = 0;
  LabelSet labels;
};

/// Top `k` database items for the query whose id is `query_id`, nearest first.
std::vector<RetrievalHit> retrieve(const CodeDatabase& queries, const CodeDatabase& database,
                                   std::int64_t query_id, Index k);

struct PipelineResult {
  TrainOutcome training;
  MetricReport initial;  // codes from the untrained model
  MetricReport report;
};

/// cmd_train, then encodes query (network P) and database (network Q) splits into
/// codes/ and evaluates into metrics/ (metrics/initial/ for the untrained model).
PipelineResult run_pipeline(const ExperimentConfig& config, const ProgressFn& progress = {});

enum class CompareAxis { head_variant, sharing_mode };

std::string_view to_string(CompareAxis axis);
CompareAxis parse_compare_axis(std::string_view name);

struct CompareRow {
  std::string variant;
  Index bits = 0;
  double map = 0;
  double precision_r2 = 0;
  friend bool operator==(const CompareRow&, const CompareRow&) = default;
};

/// Runs the pipeline for both settings of `axis` at every configured bit width, each in
/// <output>/<axis>/<variant>-q<bits>/, and writes <output>/compare-<axis>.csv with
/// columns variant,bits,map,precision_r2.
std::vector<CompareRow> cmd_compare(const ExperimentConfig& config, CompareAxis axis,
                                    const ProgressFn& progress = {});

std::vector<CompareRow> read_compare_csv(const fs::path& path);

/// Writes train/query/database splits of the synthetic config as <dir>/<split>.bin
/// (or .csv).
void cmd_synth(const ExperimentConfig& config, const fs::path& dir, DatasetFormat format);

/// 1 for configuration errors, 2 for data errors, 3 for numeric failures.
int exit_code_for(const std::exception& error);

}  // namespace hashlab
