#include "hashlab/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hashlab/binary_io.hpp"
#include "hashlab/checkpoint.hpp"
#include "hashlab/ini.hpp"
#include "hashlab/network_config.hpp"

namespace hashlab {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view denominator_name(TruncationDenominator d) {
  return d == TruncationDenominator::relevant_retrieved ? "relevant-retrieved" : "total-relevant";
}

template <typename F>
auto field(const std::string& name, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(name, 0) == 0) throw;
    throw ConfigError(name + ": " + what);
  } catch (const Error& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

void reject_unknown(const IniSection& section, std::initializer_list<std::string_view> known) {
  for (const auto& [key, value] : section.entries) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(section.name + "." + key + ": unknown key");
    }
  }
}

fs::path resolve_path(const fs::path& base, const std::string& text) {
  fs::path p(text);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

std::vector<Index> to_indices(const std::vector<long long>& v) { return {v.begin(), v.end()}; }

std::vector<long long> to_longs(const std::vector<Index>& v) { return {v.begin(), v.end()}; }

/// Collects a command's outputs in <root>/.staging and moves them into <root> on commit;
/// otherwise they are discarded.
class Staging {
 public:
  explicit Staging(fs::path root) : root_(std::move(root)), dir_(root_ / ".staging") {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    std::error_code ec;
    if (!committed_) fs::remove_all(dir_, ec);
  }

  const fs::path& dir() const { return dir_; }

  void commit() {
    for (const auto& entry : fs::directory_iterator(dir_)) {
      const fs::path target = root_ / entry.path().filename();
      fs::remove_all(target);
      fs::rename(entry.path(), target);
    }
    fs::remove_all(dir_);
    committed_ = true;
  }

 private:
  fs::path root_;
  fs::path dir_;
  bool committed_ = false;
};

template <typename Scalar>
std::vector<Tensor<Scalar>> tensors(const Dataset& d) {
  std::vector<Tensor<Scalar>> out;
  out.reserve(static_cast<std::size_t>(d.size()));
  for (Index i = 0; i < d.size(); ++i) out.push_back(d.item<Scalar>(i));
  return out;
}

void check_item_shape(const Dataset& d, const NetworkSpec& net, const std::string& what) {
  if (d.item_shape != net.input_shape && numel(d.item_shape) != numel(net.input_shape)) {
    throw ConfigError(what + ": items of shape " + to_string(d.item_shape) + " do not fit network input " +
                      to_string(net.input_shape));
  }
}

Dataset reshaped(Dataset d, const NetworkSpec& net) {
  d.item_shape = net.input_shape;
  return d;
}

template <typename Scalar>
CodeDatabase encode_dataset(const Model<Scalar>& model, const Dataset& data, Role role,
                            const fs::path* prefix) {
  const Dataset d = reshaped(data, model.network);
  std::vector<BitCode> codes;
  std::ostringstream csv;
  if (prefix) {
    csv << "id";
    for (Index b = 0; b < model.head.bits; ++b) csv << ",c" << b;
    csv << '\n';
  }
  for (Index i = 0; i < d.size(); ++i) {
    const ApproximateCode<Scalar> code = encode(model, d.item<Scalar>(i), role);
    codes.push_back(quantize(code));
    if (prefix) {
      csv << d.ids[static_cast<std::size_t>(i)];
      for (Index b = 0; b < code.size(); ++b) csv << ',' << fmt17(static_cast<double>(code[b]));
      csv << '\n';
    }
  }
  CodeDatabase db(codes, d.labels, d.ids);
  if (d.size() == 0) db = CodeDatabase(model.head.bits, {}, {}, {});
  if (prefix) {
    write_file_atomic(fs::path(prefix->string() + ".approx.csv"), csv.str());
    save_code_database(fs::path(prefix->string() + ".codes"), db);
  }
  return db;
}

std::string log_header() { return "iteration,loss,epsilon,learning_rate\n"; }

std::string log_line(const StepReport& r) {
  return std::to_string(r.iteration) + "," + fmt17(r.loss) + "," + fmt17(r.epsilon) + "," + fmt17(r.learning_rate) + "\n";
}

template <typename Scalar>
struct Trained {
  TrainOutcome outcome;
  Model<Scalar> initial;
  Model<Scalar> final;
};

template <typename Scalar>
Trained<Scalar> train_impl(const ExperimentConfig& config, const SyntheticSplits& splits,
                           const ProgressFn& progress, const std::optional<fs::path>& resume) {
  const Index bits = config.bits.front();
  const NetworkSpec network = resolve_network(config, bits);
  const HashHeadSpec head = resolve_head(config, network, bits);
  check_item_shape(splits.train, network, "data.train");

  TrainConfig tc = config.train;
  if (config.deterministic) tc.threads = 1;

  TrainState<Scalar> state;
  if (resume) {
    state = load_checkpoint<Scalar>(*resume);
    if (!(state.model.network == network) || state.model.head.variant != head.variant ||
        state.model.head.bits != head.bits || state.model.sharing != tc.sharing) {
      throw ConfigError("resume: checkpoint " + resume->string() + " does not match the configured model");
    }
  } else {
    state.model = init_model<Scalar>(network, head, tc.sharing, tc.seed);
    state.epsilon = epsilon_at(0, tc);
    state.model.head.epsilon = state.epsilon;
  }
  Trained<Scalar> result;
  result.initial = state.model;

  const Dataset train_data = reshaped(splits.train, network);
  const TripletSampler sampler(train_data.labels, tc.multilabel);
  const auto items = tensors<Scalar>(train_data);

  const RunLayout out{config.output};
  fs::create_directories(out.root);
  Staging staging(out.root);
  const RunLayout staged{staging.dir()};
  fs::create_directories(staged.checkpoints());
  const std::string notes = format_experiment_config(config, false);

  std::string log = log_header();
  train(state, items, sampler, tc, [&](const StepReport& r) {
    log += log_line(r);
    if (config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0 &&
        state.iteration < tc.max_iterations) {
      char name[32];
      std::snprintf(name, sizeof name, "iter-%08lld.ckpt", static_cast<long long>(state.iteration));
      save_checkpoint(staged.checkpoints() / name, state, notes);
    }
    if (progress) progress(r);
  });

  write_file_atomic(staged.config(), format_experiment_config(config));
  write_file_atomic(staged.network(), format_network_spec(network));
  write_file_atomic(staged.log(), log);
  save_checkpoint(staged.final_checkpoint(), state, notes);
  staging.commit();

  result.outcome.checkpoint = out.final_checkpoint();
  result.outcome.iterations = state.iteration;
  result.outcome.final_loss = state.last_loss;
  result.final = std::move(state.model);
  return result;
}

template <typename Scalar>
PipelineResult pipeline_impl(const ExperimentConfig& config, const ProgressFn& progress) {
  const SyntheticSplits splits = load_splits(config);
  const Trained<Scalar> trained = train_impl<Scalar>(config, splits, progress, std::nullopt);
  const RunLayout out{config.output};
  PipelineResult result;
  result.training = trained.outcome;

  const CodeDatabase q0 = encode_dataset(trained.initial, splits.query, Role::query, nullptr);
  const CodeDatabase d0 = encode_dataset(trained.initial, splits.database, Role::database, nullptr);
  result.initial = evaluate(q0, d0, config.eval);

  fs::create_directories(out.codes());
  const fs::path qp = out.codes() / "query";
  const fs::path dp = out.codes() / "database";
  const CodeDatabase q = encode_dataset(trained.final, splits.query, Role::query, &qp);
  const CodeDatabase d = encode_dataset(trained.final, splits.database, Role::database, &dp);
  result.report = evaluate(q, d, config.eval);
  write_metric_report(out.metrics(), result.report);
  write_metric_report(out.metrics() / "initial", result.initial);
  return result;
}

void check_exists(const fs::path& p, const std::string& field) {
  if (p.empty()) throw ConfigError(field + ": required");
  if (!fs::exists(p)) throw ConfigError(field + ": " + p.string() + " does not exist");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("experiment.name: must not be empty");
  if (output.empty()) throw ConfigError("experiment.output: must not be empty");
  check_exists(network_path, "network.spec");
  if (bits.empty()) throw ConfigError("head.bits: at least one width is required");
  for (Index b : bits) {
    if (b < 1) throw ConfigError("head.bits: widths must be >= 1");
  }
  if (!(beta > 0)) throw ConfigError("head.beta: must be > 0");
  train.validate();
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every: must be >= 0");
  if (synthetic) {
    const auto& s = *synthetic;
    if (s.classes < 2) throw ConfigError("data.classes: must be >= 2");
    if (s.train_per_class < 1) throw ConfigError("data.train_per_class: must be >= 1");
    if (s.query_per_class < 1) throw ConfigError("data.query_per_class: must be >= 1");
    if (s.database_per_class < s.train_per_class) {
      throw ConfigError("data.database_per_class: must be >= train_per_class (training is drawn from the database)");
    }
    if (!shape_valid(s.shape)) throw ConfigError("data.shape: invalid shape");
    if (!(s.separation >= 0)) throw ConfigError("data.separation: must be >= 0");
    if (!(s.noise >= 0)) throw ConfigError("data.noise: must be >= 0");
  } else {
    check_exists(train_data, "data.train");
    check_exists(query_data, "data.query");
    check_exists(database_data, "data.database");
  }
  if (eval.truncate && *eval.truncate < 1) throw ConfigError("eval.truncate: must be >= 1");
  if (eval.radius < 0) throw ConfigError("eval.radius: must be >= 0");
  for (Index k : eval.topk) {
    if (k < 1) throw ConfigError("eval.topk: values must be >= 1");
  }
}

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir) {
  const IniDocument doc = parse_ini(text);
  for (const auto& s : doc.sections) {
    static const std::set<std::string> known{"experiment", "network", "head", "train", "data", "eval"};
    if (!known.contains(s.name)) throw ConfigError(s.name + ": unknown section");
  }
  const IniSection empty;
  auto section = [&](const std::string& name) -> const IniSection& {
    const IniSection* s = doc.section(name);
    return s ? *s : empty;
  };

  ExperimentConfig c;
  std::uint64_t seed = 0;
  {
    const auto& s = section("experiment");
    reject_unknown(s, {"name", "output", "seed", "precision", "deterministic"});
    c.name = s.get("name", c.name);
    c.output = resolve_path(base_dir, s.get("output", c.output.string()));
    seed = static_cast<std::uint64_t>(s.get_int("seed", 0));
    const std::string precision = s.get("precision", "f64");
    if (precision != "f32" && precision != "f64") throw ConfigError("experiment.precision: expected f32 or f64");
    c.double_precision = precision == "f64";
    c.deterministic = s.get_bool("deterministic", true);
  }
  {
    const auto& s = section("network");
    reject_unknown(s, {"spec"});
    if (const auto spec = s.find("spec")) c.network_path = resolve_path(base_dir, *spec);
  }
  {
    const auto& s = section("head");
    reject_unknown(s, {"variant", "bits", "beta", "apply_threshold"});
    if (const auto v = s.find("variant")) c.variant = field("head.variant", [&] { return parse_head_variant(*v); });
    if (const auto v = s.find("bits")) c.bits = to_indices(parse_int_list(*v, "head.bits"));
    c.beta = s.get_double("beta", c.beta);
    c.apply_threshold = s.get_bool("apply_threshold", c.apply_threshold);
  }
  {
    const auto& e = section("eval");
    reject_unknown(e, {"rule", "truncate", "denominator", "radius", "empty_radius", "topk"});
    if (const auto v = e.find("rule")) c.eval.rule = field("eval.rule", [&] { return parse_relevance_rule(*v); });
    if (const auto v = e.find("truncate"); v && *v != "none") c.eval.truncate = e.get_int("truncate", 0);
    if (const auto v = e.find("denominator")) {
      if (*v == "relevant-retrieved") {
        c.eval.denominator = TruncationDenominator::relevant_retrieved;
      } else if (*v == "total-relevant") {
        c.eval.denominator = TruncationDenominator::total_relevant;
      } else {
        throw ConfigError("eval.denominator: expected relevant-retrieved or total-relevant");
      }
    }
    c.eval.radius = e.get_int("radius", c.eval.radius);
    const std::string empty_radius = e.get("empty_radius", "zero");
    if (empty_radius != "zero" && empty_radius != "skip") throw ConfigError("eval.empty_radius: expected zero or skip");
    c.eval.empty_radius_counts_as_zero = empty_radius == "zero";
    if (const auto v = e.find("topk")) c.eval.topk = to_indices(parse_int_list(*v, "eval.topk"));
  }
  {
    const auto& s = section("train");
    reject_unknown(s, {"learning_rate", "learning_rate_decay", "learning_rate_step", "momentum", "batch_triplets",
                       "batch_images", "weight_decay", "epsilon_initial", "epsilon_decay", "epsilon_step",
                       "iterations", "sharing", "margin", "multilabel", "threads", "checkpoint_every"});
    auto& t = c.train;
    t.learning_rate = s.get_double("learning_rate", t.learning_rate);
    t.learning_rate_decay = s.get_double("learning_rate_decay", t.learning_rate_decay);
    t.learning_rate_step = s.get_int("learning_rate_step", t.learning_rate_step);
    t.momentum = s.get_double("momentum", t.momentum);
    if (s.find("batch_triplets") && s.find("batch_images")) {
      throw ConfigError("train.batch_images: give either batch_triplets or batch_images");
    }
    if (s.find("batch_images")) t.batch_triplets = triplets_for_images(s.get_int("batch_images", 64));
    t.batch_triplets = s.get_int("batch_triplets", t.batch_triplets);
    t.weight_decay = s.get_double("weight_decay", t.weight_decay);
    t.epsilon_initial = s.get_double("epsilon_initial", t.epsilon_initial);
    t.epsilon_decay = s.get_double("epsilon_decay", t.epsilon_decay);
    t.epsilon_step = s.get_int("epsilon_step", t.epsilon_step);
    t.max_iterations = s.get_int("iterations", t.max_iterations);
    if (const auto v = s.find("sharing")) t.sharing = field("train.sharing", [&] { return parse_sharing_mode(*v); });
    t.margin = s.get_double("margin", t.margin);
    t.multilabel = s.get_bool("multilabel", c.eval.rule == RelevanceRule::multilabel_share_any);
    t.threads = static_cast<int>(s.get_int("threads", t.threads));
    t.seed = seed;
    c.checkpoint_every = s.get_int("checkpoint_every", 0);
  }
  {
    const auto& s = section("data");
    reject_unknown(s, {"source", "train", "query", "database", "classes", "train_per_class", "query_per_class",
                       "database_per_class", "shape", "separation", "noise", "seed"});
    const std::string source = s.get("source", s.find("train") ? "files" : "synthetic");
    if (source == "synthetic") {
      for (const char* key : {"train", "query", "database"}) {
        if (s.find(key)) throw ConfigError(std::string("data.") + key + ": not used with source = synthetic");
      }
      SyntheticData d;
      d.classes = s.get_int("classes", d.classes);
      d.train_per_class = s.get_int("train_per_class", d.train_per_class);
      d.query_per_class = s.get_int("query_per_class", d.query_per_class);
      d.database_per_class = s.get_int("database_per_class", d.database_per_class);
      if (const auto v = s.find("shape")) d.shape = parse_shape(*v, "data.shape");
      d.separation = s.get_double("separation", d.separation);
      d.noise = s.get_double("noise", d.noise);
      d.seed = static_cast<std::uint64_t>(s.get_int("seed", static_cast<long long>(seed)));
      c.synthetic = d;
    } else if (source == "files") {
      c.train_data = resolve_path(base_dir, s.get("train", ""));
      c.query_data = resolve_path(base_dir, s.get("query", ""));
      c.database_data = resolve_path(base_dir, s.get("database", ""));
      if (!s.find("train")) c.train_data.clear();
      if (!s.find("query")) c.query_data.clear();
      if (!s.find("database")) c.database_data.clear();
    } else {
      throw ConfigError("data.source: expected files or synthetic");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment_config(text.str(), fs::absolute(path).parent_path());
}

std::string format_experiment_config(const ExperimentConfig& c, bool with_output) {
  IniDocument doc;
  auto& e = doc.section_or_add("experiment");
  e.set("name", c.name);
  if (with_output) e.set("output", fs::absolute(c.output).string());
  e.set("seed", std::to_string(c.train.seed));
  e.set("precision", c.double_precision ? "f64" : "f32");
  e.set("deterministic", c.deterministic ? "true" : "false");

  doc.section_or_add("network").set("spec", fs::absolute(c.network_path).string());

  auto& h = doc.section_or_add("head");
  h.set("variant", std::string(to_string(c.variant)));
  h.set("bits", format_int_list(to_longs(c.bits)));
  h.set("beta", fmt17(c.beta));
  h.set("apply_threshold", c.apply_threshold ? "true" : "false");

  const auto& t = c.train;
  auto& s = doc.section_or_add("train");
  s.set("learning_rate", fmt17(t.learning_rate));
  s.set("learning_rate_decay", fmt17(t.learning_rate_decay));
  s.set("learning_rate_step", std::to_string(t.learning_rate_step));
  s.set("momentum", fmt17(t.momentum));
  s.set("batch_triplets", std::to_string(t.batch_triplets));
  s.set("weight_decay", fmt17(t.weight_decay));
  s.set("epsilon_initial", fmt17(t.epsilon_initial));
  s.set("epsilon_decay", fmt17(t.epsilon_decay));
  s.set("epsilon_step", std::to_string(t.epsilon_step));
  s.set("iterations", std::to_string(t.max_iterations));
  s.set("sharing", std::string(to_string(t.sharing)));
  s.set("margin", fmt17(t.margin));
  s.set("multilabel", t.multilabel ? "true" : "false");
  s.set("threads", std::to_string(t.threads));
  s.set("checkpoint_every", std::to_string(c.checkpoint_every));

  auto& d = doc.section_or_add("data");
  if (c.synthetic) {
    const auto& y = *c.synthetic;
    d.set("source", "synthetic");
    d.set("classes", std::to_string(y.classes));
    d.set("train_per_class", std::to_string(y.train_per_class));
    d.set("query_per_class", std::to_string(y.query_per_class));
    d.set("database_per_class", std::to_string(y.database_per_class));
    d.set("shape", format_int_list(to_longs(y.shape)));
    d.set("separation", fmt17(y.separation));
    d.set("noise", fmt17(y.noise));
    d.set("seed", std::to_string(y.seed));
  } else {
    d.set("source", "files");
    d.set("train", fs::absolute(c.train_data).string());
    d.set("query", fs::absolute(c.query_data).string());
    d.set("database", fs::absolute(c.database_data).string());
  }

  auto& v = doc.section_or_add("eval");
  v.set("rule", std::string(to_string(c.eval.rule)));
  v.set("truncate", c.eval.truncate ? std::to_string(*c.eval.truncate) : "none");
  v.set("denominator", std::string(denominator_name(c.eval.denominator)));
  v.set("radius", std::to_string(c.eval.radius));
  v.set("empty_radius", c.eval.empty_radius_counts_as_zero ? "zero" : "skip");
  if (!c.eval.topk.empty()) v.set("topk", format_int_list(to_longs(c.eval.topk)));
  return format_ini(doc);
}

NetworkSpec resolve_network(const ExperimentConfig& config, Index bits) {
  return field("network.spec", [&] { return load_network_spec(config.network_path, bits); });
}

HashHeadSpec resolve_head(const ExperimentConfig& config, const NetworkSpec& network, Index bits) {
  HashHeadSpec head;
  head.variant = config.variant;
  head.bits = bits;
  head.input_length = output_length(network);
  head.beta = config.beta;
  head.epsilon = config.train.epsilon_initial;
  head.apply_threshold = config.apply_threshold;
  field("head", [&] {
    validate(head);
    return 0;
  });
  return head;
}

SyntheticSplits load_splits(const ExperimentConfig& config) {
  SyntheticSplits s;
  if (config.synthetic) {
    const auto& y = *config.synthetic;
    s = synth_splits(y.classes, y.train_per_class, y.query_per_class, y.database_per_class, y.shape, y.separation,
                     y.seed, y.noise);
  } else {
    s.train = ingest(config.train_data);
    s.query = ingest(config.query_data);
    s.database = ingest(config.database_data);
  }
  std::set<std::int64_t> db_ids(s.database.ids.begin(), s.database.ids.end());
  for (auto id : s.query.ids) {
    if (db_ids.contains(id)) throw FormatError("query and database splits share id " + std::to_string(id));
  }
  if (s.query.item_shape != s.database.item_shape || s.train.item_shape != s.database.item_shape) {
    throw FormatError("train, query and database items differ in shape");
  }
  return s;
}

TrainOutcome cmd_train(const ExperimentConfig& config, const ProgressFn& progress,
                       const std::optional<fs::path>& resume) {
  config.validate();
  const SyntheticSplits splits = load_splits(config);
  if (config.double_precision) return train_impl<double>(config, splits, progress, resume).outcome;
  return train_impl<float>(config, splits, progress, resume).outcome;
}

CodeDatabase cmd_encode(const fs::path& checkpoint, const Dataset& dataset, Role role, const fs::path& prefix) {
  if (checkpoint_scalar_bytes(checkpoint) == 4) {
    const auto state = load_checkpoint<float>(checkpoint);
    check_item_shape(dataset, state.model.network, "dataset");
    return encode_dataset(state.model, dataset, role, &prefix);
  }
  const auto state = load_checkpoint<double>(checkpoint);
  check_item_shape(dataset, state.model.network, "dataset");
  return encode_dataset(state.model, dataset, role, &prefix);
}

CodeDatabase cmd_encode(const fs::path& checkpoint, const fs::path& dataset, Role role, const fs::path& prefix) {
  return cmd_encode(checkpoint, ingest(dataset), role, prefix);
}

MetricReport cmd_eval(const fs::path& query_codes, const fs::path& database_codes, const EvalOptions& options,
                      const fs::path& out_dir) {
  const CodeDatabase q = load_code_database(query_codes);
  const CodeDatabase d = load_code_database(database_codes);
  MetricReport report = evaluate(q, d, options);
  write_metric_report(out_dir, report);
  return report;
}

std::vector<RetrievalHit> retrieve(const CodeDatabase& queries, const CodeDatabase& database, std::int64_t query_id,
                                   Index k) {
  if (k < 1) throw DomainError("k must be >= 1");
  const auto& ids = queries.ids();
  const auto it = std::find(ids.begin(), ids.end(), query_id);
  if (it == ids.end()) throw DomainError("no query with id " + std::to_string(query_id));
  const BitCode code = queries.code(it - ids.begin());
  const auto ranking = rank_all(code, database);
  const auto dist = distances(code, database);
  std::vector<RetrievalHit> hits;
  for (Index r = 0; r < std::min<Index>(k, database.size()); ++r) {
    const Index i = ranking[static_cast<std::size_t>(r)];
    RetrievalHit h;
    h.id = database.ids().empty() ? i : database.ids()[static_cast<std::size_t>(i)];
    h.distance = dist[static_cast<std::size_t>(i)];
    if (!database.labels().empty()) h.labels = database.label(i);
    hits.push_back(std::move(h));
  }
  return hits;
}

PipelineResult run_pipeline(const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  if (config.double_precision) return pipeline_impl<double>(config, progress);
  return pipeline_impl<float>(config, progress);
}

std::string_view to_string(CompareAxis axis) {
  return axis == CompareAxis::head_variant ? "head-variant" : "sharing-mode";
}

CompareAxis parse_compare_axis(std::string_view name) {
  if (name == "head-variant" || name == "head") return CompareAxis::head_variant;
  if (name == "sharing-mode" || name == "sharing") return CompareAxis::sharing_mode;
  throw ConfigError("unknown comparison axis '" + std::string(name) + "'");
}

std::vector<CompareRow> cmd_compare(const ExperimentConfig& config, CompareAxis axis, const ProgressFn& progress) {
  config.validate();
  std::vector<CompareRow> rows;
  std::string csv = "variant,bits,map,precision_r2\n";
  for (int setting = 0; setting < 2; ++setting) {
    for (Index bits : config.bits) {
      ExperimentConfig run = config;
      run.bits = {bits};
      std::string label;
      if (axis == CompareAxis::head_variant) {
        run.variant = setting == 0 ? HeadVariant::divide_and_encode : HeadVariant::fully_connected;
        label = std::string(to_string(run.variant));
      } else {
        run.train.sharing = setting == 0 ? SharingMode::fully_shared : SharingMode::query_independent;
        label = std::string(to_string(run.train.sharing));
      }
      run.output = config.output / std::string(to_string(axis)) / (label + "-q" + std::to_string(bits));
      const PipelineResult r = run_pipeline(run, progress);
      rows.push_back({label, bits, r.report.map, r.report.precision_at_radius});
      csv += label + "," + std::to_string(bits) + "," + fmt17(r.report.map) + "," +
             fmt17(r.report.precision_at_radius) + "\n";
    }
  }
  write_file_atomic(config.output / ("compare-" + std::string(to_string(axis)) + ".csv"), csv);
  return rows;
}

std::vector<CompareRow> read_compare_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "variant,bits,map,precision_r2") {
    throw FormatError(path.string() + ": bad header");
  }
  std::vector<CompareRow> rows;
  Index record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4) throw FormatError(path.string() + ": record " + std::to_string(record) + " malformed");
    try {
      rows.push_back({cells[0], std::stoll(cells[1]), std::stod(cells[2]), std::stod(cells[3])});
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": record " + std::to_string(record) + " malformed");
    }
    ++record;
  }
  return rows;
}

void cmd_synth(const ExperimentConfig& config, const fs::path& dir, DatasetFormat format) {
  if (!config.synthetic) throw ConfigError("data.source: synth needs source = synthetic");
  const SyntheticSplits s = load_splits(config);
  const char* ext = format == DatasetFormat::csv ? ".csv" : ".bin";
  auto write = [&](const Dataset& d, const std::string& name) {
    const fs::path p = dir / (name + ext);
    if (format == DatasetFormat::csv) {
      write_dataset_csv(p, d);
    } else if (format == DatasetFormat::binary) {
      write_dataset_binary(p, d);
    } else {
      throw ConfigError("format: synth writes binary or csv");
    }
  };
  write(s.train, "train");
  write(s.query, "query");
  write(s.database, "database");
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const NumericError*>(&error)) return 3;
  if (dynamic_cast<const ConfigError*>(&error)) return 1;
  if (dynamic_cast<const Error*>(&error)) return 2;
  if (dynamic_cast<const fs::filesystem_error*>(&error)) return 2;
  return 1;
}

}  // namespace hashlab
