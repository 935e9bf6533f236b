// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "hashlab/activations.hpp"
#include "hashlab/checkpoint.hpp"
#include "hashlab/experiment.hpp"
#include "hashlab/metrics.hpp"
#include "hashlab/triplet.hpp"

using namespace hashlab;

namespace {

const fs::path kSource = HASHLAB_SOURCE_DIR;

int failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double layer_worst = 0, forward_worst = 0, head_worst = 0, pipe_worst = 0;
  int resampled = 0;
  const LayerKind kinds[] = {LayerKind::conv,    LayerKind::fully_connected, LayerKind::relu,
                             LayerKind::maxpool, LayerKind::avgpool,         LayerKind::sigmoid,
                             LayerKind::piecewise_threshold};
  std::uint64_t seed = 100;
  for (LayerKind k : kinds) {
    const auto r = gradcheck::check_layer(k, 100, seed++);
    layer_worst = std::max(layer_worst, r.worst);
    forward_worst = std::max(forward_worst, r.worst_forward);
    resampled += r.resampled;
  }
  for (HeadVariant v : {HeadVariant::divide_and_encode, HeadVariant::fully_connected}) {
    for (bool threshold : {true, false}) {
      const auto r = gradcheck::check_head(v, threshold, 100, seed++);
      head_worst = std::max(head_worst, r.worst);
      resampled += r.resampled;
    }
  }
  for (SharingMode s : {SharingMode::fully_shared, SharingMode::query_independent}) {
    const auto r = gradcheck::check_pipeline(s, 100, seed++);
    pipe_worst = std::max(pipe_worst, r.worst);
    resampled += r.resampled;
  }
  const double secs = seconds_since(t0);
  const bool ok = layer_worst <= 1e-5 && forward_worst <= 1e-12 && head_worst <= 1e-5 && pipe_worst <= 1e-4 && secs <= 120;
  report(ok, "gradient-correctness",
         fmt("layers %.2e, heads %.2e, end-to-end %.2e (forward vs direct %.1e), %d draws near kinks redrawn, %.1fs",
             layer_worst, head_worst, pipe_worst, forward_worst, resampled, secs));
}

void subgradients() {
  std::mt19937_64 rng(7);
  int checked = 0, closed_form_mismatch = 0, printed_sign_agrees = 0;
  double worst = 0;
  while (checked < 1000) {
    const Index q = 1 + static_cast<Index>(rng() % 48);
    Vector<double> b = oracle::random_tensor({q}, rng, 0, 1).values();
    Vector<double> p = oracle::random_tensor({q}, rng, 0, 1).values();
    Vector<double> n = oracle::random_tensor({q}, rng, 0, 1).values();
    // Non-boundary: hinge clearly on or off, entries inside (0, 1).
    if (std::abs(triplet_slack(b, p, n)) < 1e-3) continue;
    const double lo = std::min({b.minCoeff(), p.minCoeff(), n.minCoeff()});
    const double hi = std::max({b.maxCoeff(), p.maxCoeff(), n.maxCoeff()});
    if (lo < 1e-4 || hi > 1 - 1e-4) continue;

    const auto g = triplet_subgradients(b, p, n);
    const double ind = relaxed_triplet_loss(b, p, n).active ? 1.0 : 0.0;
    const Vector<double> ea = ind * (2 * n - 2 * p), ep = ind * (2 * p - 2 * b), en = ind * (2 * b - 2 * n);
    if (g.anchor != ea || g.positive != ep || g.negative != en) ++closed_form_mismatch;

    auto fd = [&](Vector<double>& x) {
      Vector<double> out(q);
      for (Index i = 0; i < q; ++i) {
        const double keep = x[i], h = 1e-6;
        x[i] = keep + h;
        const double up = relaxed_triplet_loss(b, p, n).value;
        x[i] = keep - h;
        const double down = relaxed_triplet_loss(b, p, n).value;
        x[i] = keep;
        out[i] = (up - down) / (2 * h);
      }
      return out;
    };
    auto rel = [](const Vector<double>& a, const Vector<double>& e) {
      return (a - e).norm() / std::max({a.norm(), e.norm(), 1e-12});
    };
    const Vector<double> fn = fd(n);
    worst = std::max({worst, rel(g.anchor, fd(b)), rel(g.positive, fd(p)), rel(g.negative, fn)});
    const Vector<double> flipped = ind * (2 * n - 2 * b);
    if (ind > 0 && rel(flipped, fn) <= 1e-6) ++printed_sign_agrees;
    ++checked;
  }
  const bool ok = closed_form_mismatch == 0 && worst <= 1e-6 && printed_sign_agrees == 0;
  report(ok, "subgradient-fidelity",
         fmt("1000 triples: closed form exact (%d mismatches), finite differences %.2e. DEVIATION: the negative "
             "component is checked as 2b - 2b-; the form 2b- - 2b disagrees with finite differences on every "
             "active triple (%d agreements), so the sign-corrected form is implemented",
             closed_form_mismatch, worst, printed_sign_agrees));
}

void threshold() {
  int mismatches = 0, points = 0;
  for (double eps : {0.05, 0.1, 0.25, 0.4, 0.5}) {
    const double lo = 0.5 - eps, hi = 0.5 + eps;
    std::vector<double> grid{0.0, 1.0, lo, hi, std::nextafter(lo, 0.0), std::nextafter(lo, 1.0),
                             std::nextafter(hi, 0.0), std::nextafter(hi, 1.0), 0.5};
    for (int i = 0; i <= 200; ++i) grid.push_back(i / 200.0);
    for (double s : grid) {
      const double expected = s < lo ? 0.0 : (s > hi ? 1.0 : s);
      mismatches += piecewise_threshold(s, eps) != expected;
      ++points;
    }
  }
  TrainConfig c;
  const double e0 = epsilon_at(0, c), e1 = epsilon_at(19999, c), e2 = epsilon_at(20000, c);
  const bool schedule = e0 == 0.5 && e1 == 0.5 && std::abs(e2 - 0.4) <= 1e-15;
  report(mismatches == 0 && schedule, "threshold-and-schedule",
         fmt("%d grid points, %d mismatches; epsilon %.17g at 0, %.17g at 19999, %.17g at 20000", points, mismatches,
             e0, e1, e2));
}

void hamming_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  long mismatches = 0, pairs = 0;
  for (Index q : {12, 24, 32, 48}) {
    for (int t = 0; t < 10000; ++t) {
      const auto a = oracle::random_bits(q, rng), b = oracle::random_bits(q, rng);
      mismatches += hamming(pack(a), pack(b)) != oracle::hamming(a, b);
      ++pairs;
    }
  }
  const double secs = seconds_since(t0);
  report(mismatches == 0 && secs <= 10, "hamming-oracle",
         fmt("%ld pairs over q = 12, 24, 32, 48, %ld mismatches, %.2fs", pairs, mismatches, secs));
}

oracle::Codes random_codes(std::mt19937_64& rng, Index n, Index bits, int classes, bool multilabel) {
  oracle::Codes c;
  for (Index i = 0; i < n; ++i) {
    c.bits.push_back(oracle::random_bits(bits, rng));
    LabelSet l{static_cast<int>(rng() % static_cast<std::uint64_t>(classes))};
    if (multilabel && rng() % 2) {
      const int extra = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
      if (extra != l[0]) l.push_back(extra);
      std::sort(l.begin(), l.end());
    }
    c.labels.push_back(l);
  }
  return c;
}

void metric_oracle() {
  std::mt19937_64 rng(13);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const bool multilabel = trial % 2 == 1;
    const Index bits = std::vector<Index>{6, 12, 24, 48}[static_cast<std::size_t>(trial % 4)];
    const Index nq = 10 + static_cast<Index>(rng() % 31), nd = 20 + static_cast<Index>(rng() % 141);
    const auto q = random_codes(rng, nq, bits, 5, multilabel);
    const auto d = random_codes(rng, nd, bits, 5, multilabel);
    const auto rule = multilabel ? RelevanceRule::multilabel_share_any : RelevanceRule::single_label_equality;
    const Index truncate = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(nd));
    const std::vector<Index> ks{1, std::max<Index>(1, nd / 3), nd};
    const auto e = oracle::metrics(q, d, multilabel, truncate, ks);
    const CodeDatabase pq = oracle::pack(q), pd = oracle::pack(d);
    worst = std::max(worst, std::abs(mean_average_precision(pq, pd, rule).map - e.map));
    worst = std::max(worst, std::abs(mean_average_precision(pq, pd, rule, truncate).map - e.map_truncated));
    worst = std::max(worst, std::abs(precision_within_radius(pq, pd, rule, 2) - e.precision_r2));
    const auto pr = precision_recall_curve(pq, pd, rule);
    if (pr.size() != e.pr.size()) worst = INFINITY;
    for (std::size_t k = 0; k < std::min(pr.size(), e.pr.size()); ++k) {
      worst = std::max({worst, std::abs(pr[k].recall - e.pr[k].first), std::abs(pr[k].precision - e.pr[k].second)});
    }
    const auto top = precision_at_topk(pq, pd, rule, ks);
    for (std::size_t j = 0; j < ks.size(); ++j) worst = std::max(worst, std::abs(top[j].precision - e.topk[j]));
  }
  report(worst <= 1e-12, "metric-oracle",
         fmt("20 instances of at most 200 items, MAP / truncated MAP / radius-2 / PR / top-k worst deviation %.1e", worst));
}

void random_baseline() {
  std::mt19937_64 rng(17);
  const Index classes = 10, per_class_db = 1000, queries = 200;
  oracle::Codes d, q;
  for (Index i = 0; i < classes * per_class_db; ++i) {
    d.bits.push_back(oracle::random_bits(48, rng));
    d.labels.push_back({static_cast<int>(i % classes)});
  }
  for (Index i = 0; i < queries; ++i) {
    q.bits.push_back(oracle::random_bits(48, rng));
    q.labels.push_back({static_cast<int>(i % classes)});
  }
  const auto r = mean_average_precision(oracle::pack(q), oracle::pack(d), RelevanceRule::single_label_equality);
  double var = 0;
  for (const auto& ap : r.per_query) var += (*ap - r.map) * (*ap - r.map);
  var /= static_cast<double>(r.per_query.size() - 1);
  const double se = std::sqrt(var / static_cast<double>(r.per_query.size()));
  const double z = (r.map - 0.1) / se;
  report(std::abs(z) <= 3, "random-code-baseline",
         fmt("48-bit random codes, 10 balanced classes, %lld queries x %lld items: MAP %.5f, standard error %.5f, "
             "%.2f standard errors from 0.1",
             static_cast<long long>(queries), static_cast<long long>(d.bits.size()), r.map, se, z));
}

ExperimentConfig toy_config(const fs::path& out) {
  ExperimentConfig c = load_experiment_config(kSource / "configs" / "toy.ini");
  c.output = out;
  return c;
}

void toy_and_determinism(const fs::path& scratch) {
  ExperimentConfig c = toy_config(scratch / "toy-a");
  c.bits = {12};
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineResult a = run_pipeline(c);
  const double secs = seconds_since(t0);
  const double ratio = a.report.map / a.initial.map;
  report(a.report.map >= 0.85 && ratio >= 2 && secs <= 300 && a.training.iterations <= 2000, "toy-end-to-end",
         fmt("3 classes, 300 train / 60 query / 300 database, 12 bits, %lld iterations: MAP %.4f vs %.4f at "
             "initialization (x%.2f), precision within radius 2 %.4f, %.1fs single-threaded",
             static_cast<long long>(a.training.iterations), a.report.map, a.initial.map, ratio,
             a.report.precision_at_radius, secs));

  c.output = scratch / "toy-b";
  const PipelineResult b = run_pipeline(c);
  const bool same_ckpt = slurp(a.training.checkpoint) == slurp(b.training.checkpoint);
  const bool same_report = a.report == b.report && a.initial == b.initial &&
                           slurp(scratch / "toy-a" / "metrics" / "report.json") ==
                               slurp(scratch / "toy-b" / "metrics" / "report.json");
  const bool same_codes = slurp(scratch / "toy-a" / "codes" / "database.codes") ==
                          slurp(scratch / "toy-b" / "codes" / "database.codes");
  report(same_ckpt && same_report && same_codes, "determinism",
         fmt("two seeded double-precision toy runs: checkpoints %s, reports %s, codes %s",
             same_ckpt ? "bit-identical" : "DIFFER", same_report ? "identical" : "DIFFER",
             same_codes ? "identical" : "DIFFER"));
}

void compare(const fs::path& scratch) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c = toy_config(scratch / "compare");
  c.bits = {12, 48};
  bool ok = true;
  std::string detail;
  for (CompareAxis axis : {CompareAxis::head_variant, CompareAxis::sharing_mode}) {
    const auto rows = cmd_compare(c, axis);
    const auto table = read_compare_csv(c.output / ("compare-" + std::string(to_string(axis)) + ".csv"));
    std::set<std::pair<std::string, Index>> cells;
    for (const auto& r : rows) cells.insert({r.variant, r.bits});
    bool finite = true;
    for (const auto& r : rows) finite &= std::isfinite(r.map) && std::isfinite(r.precision_r2);
    const bool shape = rows.size() == 4 && cells.size() == 4 && table == rows && finite;
    ok &= shape;
    detail += std::string(to_string(axis)) + ":";
    for (const auto& r : rows) detail += fmt(" %s/q%lld map %.4f", r.variant.c_str(), static_cast<long long>(r.bits), r.map);
    detail += "; ";

    // Same seed, same numbers: rerun the 12-bit cells on their own.
    ExperimentConfig again = c;
    again.bits = {12};
    again.output = scratch / ("compare-again-" + std::string(to_string(axis)));
    const auto rerun = cmd_compare(again, axis);
    for (const auto& r : rerun) {
      const auto it = std::find_if(rows.begin(), rows.end(),
                                   [&](const CompareRow& x) { return x.variant == r.variant && x.bits == r.bits; });
      ok &= it != rows.end() && *it == r;
    }
  }
  detail += fmt("12-bit cells reproduced exactly on rerun, %.1fs", seconds_since(t0));
  report(ok, "comparison-harness", detail);
}

}  // namespace

int main() {
  oracle::TempDir scratch;
  const std::vector<std::function<void()>> steps{
      gradients, subgradients, threshold, hamming_oracle, metric_oracle, random_baseline,
      [&] { toy_and_determinism(scratch.path()); }, [&] { compare(scratch.path()); }};
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      report(false, "exception", e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
