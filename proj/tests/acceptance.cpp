// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "urbanfuse/classifiers.hpp"
#include "urbanfuse/eval.hpp"
#include "urbanfuse/fusion.hpp"
#include "urbanfuse/geo_features.hpp"
#include "urbanfuse/graph_builder.hpp"
#include "urbanfuse/node_embedding.hpp"
#include "urbanfuse/pipeline.hpp"
#include "urbanfuse/rng.hpp"
#include "urbanfuse/skipgram.hpp"
#include "urbanfuse/synth.hpp"
#include "urbanfuse/temporal_features.hpp"
#include "urbanfuse/text_features.hpp"
#include "urbanfuse/visual_features.hpp"

namespace fs = std::filesystem;
using namespace urbanfuse;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s.setf(std::ios::scientific);
  s.precision(2);
  s << v;
  return s.str();
}

fs::path g_work;

// ---------------------------------------------------------------------------

Outcome spatial_oracle() {
  const auto start = Clock::now();
  Rng rng(derive_seed(101, "spatial"));
  std::size_t compared = 0;
  std::size_t mismatches = 0;
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t num_types = 2 + rng.below(4);
    const std::size_t n = 200 + rng.below(1801);
    const double span = 0.002 + 0.03 * rng.uniform01();
    const double lat0 = 52.33 + 0.05 * rng.uniform01();
    const double lon0 = 4.83 + 0.1 * rng.uniform01();
    std::vector<GeoObject> objects;
    for (std::size_t i = 0; i < n; ++i) {
      GeoObject o{"t" + std::to_string(rng.below(num_types)), lat0 + span * rng.uniform01(), lon0 + span * rng.uniform01()};
      // Duplicates exercise distance ties.
      if (!objects.empty() && rng.bernoulli(0.05)) {
        o.lat = objects.back().lat;
        o.lon = objects.back().lon;
      }
      objects.push_back(o);
    }
    const auto index = build_spatial_index(objects);
    std::map<std::string, std::vector<LatLon>> by_type;
    for (const auto& o : objects) by_type[o.object_type].push_back({o.lat, o.lon});
    std::vector<std::string> query_types(index.types());
    query_types.push_back("absent");

    for (int qi = 0; qi < 50; ++qi) {
      const double pad = qi % 10 == 0 ? 0.05 : 0.002;
      const LatLon q{lat0 - pad + (span + 2 * pad) * rng.uniform01(), lon0 - pad + (span + 2 * pad) * rng.uniform01()};
      for (const auto& type : query_types) {
        // Brute force: every distance, sorted, summed in ascending order.
        std::vector<double> d;
        for (const auto& p : by_type[type]) d.push_back(haversine_m(q, p));
        std::sort(d.begin(), d.end());
        auto mean_k = [&](std::size_t k) {
          if (d.empty()) return kAbsentTypeDistanceM;
          const std::size_t m = std::min(k, d.size());
          double s = 0.0;
          for (std::size_t i = 0; i < m; ++i) s += d[i];
          return s / static_cast<double>(m);
        };
        auto count_within = [&](double r) {
          return static_cast<std::size_t>(std::upper_bound(d.begin(), d.end(), r) - d.begin());
        };
        const double expect_p[4] = {d.empty() ? kAbsentTypeDistanceM : d[0], mean_k(5), mean_k(10), mean_k(100)};
        const std::size_t expect_c[4] = {count_within(25), count_within(50), count_within(100), count_within(200)};
        const auto prox = proximity_features(index, q, type);
        const auto dens = density_features(index, q, type);
        const double got_p[4] = {prox.nearest_1, prox.mean_5, prox.mean_10, prox.mean_100};
        const std::size_t got_c[4] = {dens.count_25, dens.count_50, dens.count_100, dens.count_200};
        for (int k = 0; k < 4; ++k) {
          mismatches += got_p[k] != expect_p[k];
          mismatches += got_c[k] != expect_c[k];
          compared += 2;
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 30.0, std::to_string(compared) + " feature values over 20 instances, " +
                                                 std::to_string(mismatches) + " mismatches, " + fmt(elapsed, 1) + " s"};
}

// ---------------------------------------------------------------------------

ConfusionMatrix make_cm(std::size_t k, std::vector<std::uint64_t> counts) {
  ConfusionMatrix cm;
  cm.num_classes = k;
  cm.counts = std::move(counts);
  for (std::size_t i = 0; i < k; ++i) cm.class_labels.push_back("c" + std::to_string(i));
  return cm;
}

struct HandCase {
  ConfusionMatrix cm;
  std::vector<double> f1;  // NaN: class has no support, only checked to be 0
  double macro;
  double weighted;
  double accuracy;
};

Outcome metric_oracle() {
  const double nan = std::nan("");
  std::vector<HandCase> cases = {
      {make_cm(2, {1, 1, 0, 1}), {2.0 / 3, 2.0 / 3}, 2.0 / 3, 2.0 / 3, 2.0 / 3},
      {make_cm(2, {5, 0, 0, 3}), {1.0, 1.0}, 1.0, 1.0, 1.0},
      {make_cm(3, {2, 1, 0, 1, 3, 1, 0, 0, 4}), {2.0 / 3, 2.0 / 3, 8.0 / 9}, 20.0 / 27, 20.0 / 27, 3.0 / 4},
      {make_cm(3, {3, 1, 0, 0, 0, 0, 1, 0, 2}), {3.0 / 4, nan, 4.0 / 5}, 31.0 / 40, 27.0 / 35, 5.0 / 7},
      {make_cm(2, {0, 2, 0, 3}), {0.0, 3.0 / 4}, 3.0 / 8, 9.0 / 20, 3.0 / 5},
      {make_cm(4, {10, 2, 0, 0, 3, 5, 1, 1, 0, 0, 0, 2, 1, 0, 0, 7}),
       {10.0 / 13, 10.0 / 17, 0.0, 7.0 / 9},
       (10.0 / 13 + 10.0 / 17 + 7.0 / 9) / 4,
       (12 * 10.0 / 13 + 10 * 10.0 / 17 + 8 * 7.0 / 9) / 32,
       22.0 / 32},
  };
  double worst = 0.0;
  for (const auto& c : cases) {
    const auto r = f1_report(c.cm);
    for (std::size_t i = 0; i < c.f1.size(); ++i) {
      const double expect = std::isnan(c.f1[i]) ? 0.0 : c.f1[i];
      worst = std::max(worst, std::abs(r.per_class[i].f1 - expect));
    }
    worst = std::max({worst, std::abs(r.macro_f1 - c.macro), std::abs(r.weighted_f1 - c.weighted),
                      std::abs(r.accuracy - c.accuracy), std::abs(r.micro_f1 - c.accuracy)});
  }

  Rng rng(derive_seed(102, "metrics"));
  std::size_t identity_failures = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + rng.below(9);
    std::vector<std::uint64_t> counts(k * k);
    std::uint64_t trace = 0, total = 0;
    for (std::size_t i = 0; i < k * k; ++i) {
      counts[i] = rng.below(21);
      total += counts[i];
      if (i % (k + 1) == 0) trace += counts[i];
    }
    if (total == 0) {
      counts[0] = 1;
      total = trace = 1;
    }
    const auto r = f1_report(make_cm(k, counts));
    const double acc = static_cast<double>(trace) / static_cast<double>(total);
    identity_failures += !(r.micro_f1 == r.accuracy && std::abs(r.accuracy - acc) <= 1e-12);
  }
  return {worst <= 1e-12 && identity_failures == 0,
          std::to_string(cases.size()) + " hand-computed matrices, max abs error " + sci(worst) +
              "; micro==accuracy failures " + std::to_string(identity_failures) + "/50"};
}

// ---------------------------------------------------------------------------

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

Outcome gradient_checks() {
  constexpr double h = 1e-5;
  Rng rng(derive_seed(103, "gradients"));
  double worst_lr = 0.0;
  for (int point = 0; point < 100; ++point) {
    const std::size_t n = 6, d = 4, k = 3;
    Matrix x(n, d);
    std::vector<std::size_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
      y[i] = rng.below(k);
    }
    const double l2 = rng.uniform01();
    std::vector<double> params(k * d + k);
    for (auto& v : params) v = rng.normal(0.0, 0.5);
    std::vector<double> analytic(params.size());
    logreg_objective(x, y, k, l2, params, analytic);
    std::vector<double> numeric(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto plus = params, minus = params;
      plus[i] += h;
      minus[i] -= h;
      numeric[i] = (logreg_objective(x, y, k, l2, plus) - logreg_objective(x, y, k, l2, minus)) / (2 * h);
    }
    worst_lr = std::max(worst_lr, relative_error(analytic, numeric));
  }

  double worst_sg = 0.0;
  for (int point = 0; point < 100; ++point) {
    const std::size_t dims = 10, negs = 3;
    // Block 0 center, 1 context, 2.. negatives.
    std::vector<std::vector<double>> vecs(2 + negs, std::vector<double>(dims));
    for (auto& v : vecs)
      for (auto& e : v) e = rng.normal(0.0, 0.5);
    auto loss = [&](const std::vector<std::vector<double>>& v) {
      std::vector<std::span<const double>> neg;
      for (std::size_t i = 2; i < v.size(); ++i) neg.emplace_back(v[i]);
      return skipgram_pair_loss(v[0], v[1], neg);
    };
    std::vector<std::span<const double>> neg;
    for (std::size_t i = 2; i < vecs.size(); ++i) neg.emplace_back(vecs[i]);
    const auto g = skipgram_pair_gradient(vecs[0], vecs[1], neg);
    std::vector<double> analytic(g.center);
    analytic.insert(analytic.end(), g.context.begin(), g.context.end());
    for (const auto& n : g.negatives) analytic.insert(analytic.end(), n.begin(), n.end());
    std::vector<double> numeric;
    for (std::size_t b = 0; b < vecs.size(); ++b) {
      for (std::size_t i = 0; i < dims; ++i) {
        auto plus = vecs, minus = vecs;
        plus[b][i] += h;
        minus[b][i] -= h;
        numeric.push_back((loss(plus) - loss(minus)) / (2 * h));
      }
    }
    worst_sg = std::max(worst_sg, relative_error(analytic, numeric));
  }
  return {worst_lr < 1e-4 && worst_sg < 1e-4, "100 points each; max relative error logreg " + sci(worst_lr) +
                                                  ", skip-gram pair " + sci(worst_sg)};
}

// ---------------------------------------------------------------------------

MultimodalGraph random_graph(Rng& rng, std::size_t n) {
  std::vector<std::pair<std::string, NodeKind>> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.emplace_back("n" + std::string(i < 10 ? "0" : "") + std::to_string(i), NodeKind::report);
  std::vector<std::tuple<std::string, std::string, double>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || rng.bernoulli(0.3)) edges.emplace_back(nodes[i].first, nodes[j].first, rng.uniform(0.5, 3.0));
    }
  }
  return MultimodalGraph::from_edges(nodes, edges);
}

// The biased transition written out from its definition.
std::vector<double> oracle_transition(const MultimodalGraph& g, std::size_t prev, std::size_t curr, double p, double q) {
  std::vector<double> s;
  for (const auto& nb : g.neighbors(curr)) {
    double alpha = 1.0 / q;
    if (nb.node == prev) alpha = 1.0 / p;
    else if (g.edge_weight(prev, nb.node)) alpha = 1.0;
    s.push_back(alpha * nb.weight);
  }
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  for (auto& v : s) v /= total;
  return s;
}

Outcome walk_correctness() {
  const auto abc = MultimodalGraph::from_edges({{"A", NodeKind::word}, {"B", NodeKind::word}, {"C", NodeKind::word}},
                                               {{"A", "B", 1.0}, {"B", "C", 1.0}});
  const auto worked = transition_distribution(abc, *abc.index_of("A"), *abc.index_of("B"), 2.0, 0.5);
  const bool worked_ok = worked.size() == 2 && worked[0] == 0.2 && worked[1] == 0.8;

  Rng graph_rng(derive_seed(104, "walk-graph"));
  const auto g = random_graph(graph_rng, 16);
  constexpr std::size_t kSteps = 100000;
  const std::pair<double, double> settings[] = {{1.0, 1.0}, {2.0, 0.5}, {0.25, 4.0}};
  double worst = 0.0;
  double worst_analytic = 0.0;
  std::size_t checked = 0;
  for (const auto& [p, q] : settings) {
    for (const auto mode : {SamplingMode::inversion, SamplingMode::alias}) {
      WalkConfig cfg;
      cfg.p = p;
      cfg.q = q;
      cfg.sampling = mode;
      const Node2VecWalker walker(g, cfg);
      Rng rng(derive_seed(104, std::to_string(p) + "/" + std::to_string(q) + (mode == SamplingMode::alias ? "a" : "i")));
      // Three (prev, curr) pairs: the richest node and two others.
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      for (std::size_t curr : {std::size_t{0}, std::size_t{5}, std::size_t{11}}) {
        pairs.emplace_back(g.neighbors(curr).front().node, curr);
      }
      for (const auto& [prev, curr] : pairs) {
        const auto expect = transition_distribution(g, prev, curr, p, q);
        const auto oracle = oracle_transition(g, prev, curr, p, q);
        for (std::size_t i = 0; i < expect.size(); ++i) worst_analytic = std::max(worst_analytic, std::abs(expect[i] - oracle[i]));
        std::map<std::size_t, std::size_t> counts;
        for (std::size_t s = 0; s < kSteps; ++s) ++counts[walker.next_step(prev, curr, rng)];
        const auto nbs = g.neighbors(curr);
        for (std::size_t i = 0; i < nbs.size(); ++i) {
          const double freq = static_cast<double>(counts[nbs[i].node]) / kSteps;
          worst = std::max(worst, std::abs(freq - expect[i]));
        }
        ++checked;
      }
    }
  }
  return {worked_ok && worst <= 0.02 && worst_analytic <= 1e-12,
          std::string("worked example ") + (worked_ok ? "P(A)=0.2, P(C)=0.8 exactly" : "WRONG") + "; " + std::to_string(checked) +
              " (prev,curr) pairs x 100000 steps, max |freq - p| " + fmt(worst, 4) + ", analytic vs definition " +
              sci(worst_analytic)};
}

// ---------------------------------------------------------------------------

struct SyntheticBlocks {
  std::vector<std::string> names;
  std::vector<FeatureBlock> train;
  std::vector<FeatureBlock> test;
  std::vector<std::size_t> y_train;
  std::vector<std::size_t> y_test;
  std::vector<std::string> classes;
};

SyntheticBlocks planted_blocks(std::uint64_t seed) {
  SynthConfig sc;
  sc.seed = seed;
  const auto data = generate(sc);
  const auto split = split_dataset(data.dataset, 0.2, derive_seed(seed, "split"));
  const auto corpus = tokenize_reports(split.train);
  const auto tfidf = tfidf_fit(corpus, build_vocabulary(corpus, 50000, 2));
  const auto index = build_spatial_index(data.geo_objects);
  SyntheticBlocks out;
  out.classes = class_names(data.dataset.taxonomy, LabelLevel::main);
  auto add = [&](auto make) {
    out.train.push_back(make(split.train));
    out.test.push_back(make(split.test));
    out.names.push_back(out.train.back().name());
  };
  add([&](const Dataset& d) { return report_text_block(d, tfidf, "text"); });
  add([&](const Dataset& d) { return visual_block(d, data.visual, "image"); });
  add([&](const Dataset& d) { return geo_block(d, index, "geo"); });
  add([&](const Dataset& d) { return time_block(d, "time"); });
  for (int v : label_indices(split.train, LabelLevel::main)) out.y_train.push_back(static_cast<std::size_t>(v));
  for (int v : label_indices(split.test, LabelLevel::main)) out.y_test.push_back(static_cast<std::size_t>(v));
  return out;
}

Outcome stacking_leakage() {
  const std::uint64_t seed = 105;
  auto data = planted_blocks(seed);
  const std::size_t k = data.classes.size();
  // Permute labels so no feature carries signal.
  Rng rng(derive_seed(seed, "permute"));
  rng.shuffle(std::span<std::size_t>(data.y_train));
  rng.shuffle(std::span<std::size_t>(data.y_test));

  const ClassifierConfig clf;
  const std::size_t folds = 5;
  OofCache cache;
  std::size_t violations = 0, audited = 0;
  double worst_oof = 0.0;
  std::string oof_detail;
  for (std::size_t b = 0; b < data.names.size(); ++b) {
    auto oof = oof_probabilities(data.train[b], data.test[b], data.y_train, data.classes, clf, folds,
                                 oof_seed(seed, data.names[b]));
    for (std::size_t r = 0; r < oof.fold_of_row.size(); ++r) {
      const auto& rows = oof.fold_training_rows.at(oof.fold_of_row[r]);
      violations += std::find(rows.begin(), rows.end(), r) != rows.end();
      ++audited;
    }
    // Each fold model must also train on every row outside its fold.
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> expect;
      for (std::size_t r = 0; r < oof.fold_of_row.size(); ++r)
        if (oof.fold_of_row[r] != f) expect.push_back(r);
      auto rows = oof.fold_training_rows[f];
      std::sort(rows.begin(), rows.end());
      violations += rows != expect;
    }
    const auto f1 = f1_report(confusion(data.y_train, predict_labels(oof.train.matrix()), k)).weighted_f1;
    worst_oof = std::max(worst_oof, std::abs(f1 - 1.0 / k));
    oof_detail += " " + data.names[b] + "=" + fmt(f1, 3);
    cache.emplace(data.names[b], std::move(oof));
  }

  FusionConfig stacked;
  stacked.prob_blocks = data.names;
  const auto fused = hybrid_fuse(stacked, data.train, data.test, data.y_train, data.classes, seed, &cache);
  const auto meta = train_classifier(fused.train, data.y_train, k, clf);
  const HoldoutScorer scorer(data.y_test, data.classes);
  const double stacked_f1 = scorer.score_proba(predict_proba(meta, fused.test)).weighted_f1;

  const double chance = 1.0 / k;
  const bool pass = violations == 0 && std::abs(stacked_f1 - chance) <= 0.05 && worst_oof <= 0.05;
  return {pass, std::to_string(audited) + " OOF rows audited, " + std::to_string(violations) +
                    " violations; permuted labels: stacked weighted F1 " + fmt(stacked_f1, 3) + " vs chance " +
                    fmt(chance, 3) + ", OOF weighted F1" + oof_detail};
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(split_csv_line(line));
  return rows;
}

Outcome fusion_superiority() {
  const auto start = Clock::now();
  PipelineConfig c;
  c.seed = 2024;
  c.out_dir = g_work / "superiority";
  fs::remove_all(c.out_dir);
  for (const char* stage : {"synth", "featurize", "train", "evaluate"}) run_stage(stage, c);
  const double elapsed = seconds_since(start);

  const auto rows = read_csv(c.out_dir / "results" / "leaderboard.csv");
  double best_uni = -1.0, best_fused = -1.0;
  std::string uni_name, fused_name;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& features = rows[i].at(2);
    const double f1 = std::stod(rows[i].at(3));
    const bool unimodal = features.find(',') == std::string::npos && features.rfind("prob_", 0) != 0;
    auto& best = unimodal ? best_uni : best_fused;
    if (f1 > best) {
      best = f1;
      (unimodal ? uni_name : fused_name) = features;
    }
  }
  const double margin = best_fused - best_uni;
  return {margin >= 0.05 && elapsed < 600.0,
          "fused \"" + fused_name + "\" " + fmt(best_fused) + " vs unimodal \"" + uni_name + "\" " + fmt(best_uni) +
              " (margin " + fmt(margin) + "); full run " + fmt(elapsed, 1) + " s on " +
              std::to_string(c.thread_count()) + " thread(s)"};
}

// ---------------------------------------------------------------------------

using Snapshot = std::map<std::string, std::string>;

Snapshot snapshot(const fs::path& dir) {
  Snapshot out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    out[e.path().lexically_relative(dir).generic_string()] = buf.str();
  }
  return out;
}

struct RepeatedRun {
  Snapshot first;
  Snapshot second;
  std::vector<std::string> stages;
  double seconds = 0.0;
};

const RepeatedRun& repeated_run() {
  static const RepeatedRun run = [] {
    RepeatedRun r;
    PipelineConfig c;
    c.seed = 77;
    c.out_dir = g_work / "repeat";
    c.synth.num_reports = 300;
    RouteOptions route;
    route.threshold = 0.5;
    fs::remove_all(c.out_dir);
    const auto start = Clock::now();
    for (int pass = 0; pass < 2; ++pass) {
      for (const char* stage : kStages) {
        run_stage(stage, c, route);
        if (pass == 0) r.stages.emplace_back(stage);
      }
      (pass == 0 ? r.first : r.second) = snapshot(c.out_dir);
    }
    r.seconds = seconds_since(start);
    return r;
  }();
  return run;
}

Outcome experiment_structure() {
  const auto& run = repeated_run();
  const std::string key = "results/search_leaderboard.csv";
  if (!run.first.count(key)) return {false, "no search leaderboard written"};
  std::istringstream in(run.first.at(key));
  std::string line;
  std::getline(in, line);
  const bool header_ok = line == "rank,classifier,features,weighted_f1,macro_f1,micro_f1,accuracy";
  std::set<std::string> configs;
  std::set<std::string> blocks;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto fields = split_csv_line(line);
    ++rows;
    configs.insert(fields.at(2));
    std::istringstream names(fields.at(2));
    std::string name;
    while (std::getline(names, name, ',')) {
      name.erase(0, name.find_first_not_of(' '));
      if (name.rfind("prob_", 0) == 0) name = name.substr(5);
      blocks.insert(name);
    }
  }
  // Each block absent, raw or stacked, minus the empty config.
  const std::size_t expected = 728;
  const bool same = run.second.count(key) && run.first.at(key) == run.second.at(key);
  return {header_ok && blocks.size() == 6 && rows == expected && configs.size() == expected && same,
          std::to_string(rows) + " ranked configs (" + std::to_string(configs.size()) + " distinct) over " +
              std::to_string(blocks.size()) + " blocks; rerun " + (same ? "identical" : "DIFFERS")};
}

Outcome determinism() {
  const auto& run = repeated_run();
  std::size_t differing = 0;
  std::string first_diff;
  for (const auto& [path, bytes] : run.first) {
    const auto it = run.second.find(path);
    if (it == run.second.end() || it->second != bytes) {
      if (differing++ == 0) first_diff = path;
    }
  }
  differing += run.second.size() > run.first.size() ? run.second.size() - run.first.size() : 0;
  std::string detail = std::to_string(run.stages.size()) + " stages run twice, " + std::to_string(run.first.size()) +
                       " output files compared, " + std::to_string(differing) + " differ";
  if (differing) detail += " (first: " + first_diff + ")";
  return {differing == 0 && run.first.size() == run.second.size(), detail + "; " + fmt(run.seconds, 1) + " s"};
}

// ---------------------------------------------------------------------------

Outcome gbdt_sanity() {
  Rng rng(derive_seed(106, "gbdt"));
  const std::size_t n = 200;
  Matrix x(n, 4);
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.below(2);
    x(i, 0) = static_cast<double>(y[i]);
    for (std::size_t j = 1; j < 4; ++j) x(i, j) = rng.uniform01();
  }
  GbdtConfig cfg;
  cfg.rounds = 100;
  const auto model = train_gbdt(x, y, 2, cfg);
  std::size_t first_perfect = 0;
  double prev_loss = INFINITY;
  std::size_t increases = 0;
  for (std::size_t r = 0; r <= cfg.rounds; ++r) {
    const auto p = predict_proba(model, x, r);
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      loss -= std::log(std::max(p(i, y[i]), 1e-300));
      correct += argmax(p.row(i)) == y[i];
    }
    loss /= n;
    increases += loss > prev_loss;
    prev_loss = loss;
    if (!first_perfect && r > 0 && correct == n) first_perfect = r;
  }
  return {first_perfect >= 1 && first_perfect <= 20 && increases == 0,
          "training accuracy 1.0 from round " + std::to_string(first_perfect) + "; log-loss increases over " +
              std::to_string(cfg.rounds) + " rounds: " + std::to_string(increases) + ", final " + fmt(prev_loss, 6)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string work = (fs::temp_directory_path() / "urbanfuse_acceptance").string();
  std::vector<std::string> only;
  app.add_option("--work-dir", work, "scratch directory for pipeline runs");
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);
  g_work = work;
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"spatial-oracle", spatial_oracle},
      {"metric-oracle", metric_oracle},
      {"gradient-checks", gradient_checks},
      {"walk-correctness", walk_correctness},
      {"stacking-leakage", stacking_leakage},
      {"fusion-superiority", fusion_superiority},
      {"experiment-structure", experiment_structure},
      {"determinism", determinism},
      {"gbdt-sanity", gbdt_sanity},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
