// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero when any criterion fails.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "postprocess_fixtures.hpp"
#include "typedom/typedom.hpp"

namespace fs = std::filesystem;
using namespace typedom;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Collects failures for one criterion; the first few are kept as detail.
struct Check {
  int failures = 0;
  std::vector<std::string> notes;
  std::string summary;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures;
    if (notes.size() < 3) notes.push_back(what);
  }
};

int g_failed = 0;

void report(const std::string& name, const std::function<void(Check&)>& body) {
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  std::cout << (c.failures == 0 ? "PASS " : "FAIL ") << name;
  if (!c.summary.empty()) std::cout << " | " << c.summary;
  for (const auto& n : c.notes) std::cout << " | " << n;
  std::cout << std::endl;
  if (c.failures != 0) ++g_failed;
}

SquareMatrix<double> to_matrix(const oracle::Matrix& s) {
  SquareMatrix<double> m(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) m(i, j) = s[i][j];
  }
  return m;
}

using MemberSets = std::set<std::vector<std::string>>;

MemberSets member_sets(const Clustering& c) {
  MemberSets out;
  for (const auto& cl : c.clusters) out.insert(cl.members);
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

struct Run {
  int status = -1;
  std::string output;
};

Run run_cli(const std::string& args) {
  const std::string cmd =
      "cd '" + std::string(TYPEDOM_SOURCE_DIR) + "' && '" + std::string(TYPEDOM_CLI) + "' " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) r.output += buf.data();
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("typedom_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---- criteria ----

void ap_oracle(Check& c) {
  const auto start = Clock::now();
  int instances = 0;
  for (const auto& ps : fixtures::ap_point_sets()) {
    const auto s = ps.similarity();
    if (s.size() > 8) continue;
    for (double pref : default_preferences()) {
      APParams p;
      p.preference = pref;
      const auto r = affinity_propagation(to_matrix(s), p);
      const double got = ap_objective(to_matrix(s), pref, r.assignment);
      const double best = oracle::best_ap_objective(s, pref);
      c.expect(std::abs(got - best) <= 1e-9,
               ps.name + " at " + fmt(pref) + ": " + fmt(got) + " vs optimum " + fmt(best));
      ++instances;
    }
  }
  const double t = seconds_since(start);
  c.expect(t < 1.0, "took " + fmt(t) + " s");
  c.summary = std::to_string(instances) + " fixture/preference runs, " + fmt(t) + " s";
}

void clustering_suite(Check& c) {
  const auto start = Clock::now();
  std::size_t total_labels = 0;
  for (int seed = 0; seed < 1000; ++seed) {
    std::mt19937 rng(static_cast<unsigned>(seed));
    const std::size_t n = 1 + rng() % 50;
    const std::size_t dim = 2 + rng() % 10;
    const std::size_t groups = 1 + rng() % 6;
    std::normal_distribution<double> g;
    std::vector<std::vector<double>> centers(groups, std::vector<double>(dim));
    for (auto& ctr : centers)
      for (auto& x : ctr) x = g(rng);
    std::vector<LabelVector> labels;
    for (std::size_t i = 0; i < n; ++i) {
      auto v = centers[rng() % groups];
      for (auto& x : v) x += 0.3 * g(rng);
      labels.push_back({"label" + std::to_string(i), v, true});
    }
    if (seed % 7 == 0) labels.push_back({"unresolved", std::vector<double>(dim, 0.0), false});
    total_labels += n;

    const auto a = build_domains(labels);
    const auto b = build_domains(labels);
    auto shuffled = labels;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto d = build_domains(shuffled);

    const std::string tag = "seed " + std::to_string(seed);
    c.expect(serialize_domains(a) == serialize_domains(b), tag + ": reruns differ");
    for (std::size_t k = 0; k < a.clusterings().size(); ++k) {
      const auto& cl = a.clusterings()[k];
      std::map<std::string, int> seen;
      for (const auto& cluster : cl.clusters) {
        c.expect(cluster.contains(cluster.exemplar), tag + ": exemplar outside its cluster");
        for (const auto& m : cluster.members) ++seen[m];
      }
      bool partition = seen.size() == n;
      for (const auto& [label, count] : seen) partition = partition && count == 1 && label != "unresolved";
      c.expect(partition, tag + ": clusters are not a partition");
      c.expect(member_sets(cl) == member_sets(d.clusterings()[k]), tag + ": not permutation equivariant");
    }
  }
  const double t = seconds_since(start);
  c.summary = "1000 label sets (" + std::to_string(total_labels) + " labels), " + fmt(t) + " s";
}

void emergency_fixture(Check& c) {
  const auto vocab = fixtures::emergency_vocabulary();
  const std::vector<std::string> five{"air ambulance", "ambulance", "fire engine", "fire truck", "police car"};
  // fixture geometry as stated
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    for (std::size_t j = i + 1; j < vocab.size(); ++j) {
      const bool mi = i < 5, mj = j < 5;
      const double s = oracle::cosine(vocab[i].vector, vocab[j].vector);
      if (mi && mj) c.expect(s >= 0.95, "members too far apart");
      if (mi != mj) c.expect(s <= 0.2, "distractor too close");
    }
  }
  const auto domains = build_domains(vocab);
  for (const auto& cl : domains.clusterings()) {
    c.expect(member_sets(cl).contains(five), "no five-member domain at preference " + fmt(cl.preference));
  }
  for (const auto* cl : domains.clusters_of("ambulance")) c.expect(cl->members == five, "ambulance domain differs");
  c.summary = std::to_string(domains.clusterings().size()) + " preferences";
}

void postprocess_suite(Check& c) {
  const auto domains = fixtures::qualitative_domains();
  const auto cn = fixtures::qualitative_cn();
  for (const auto& row : fixtures::qualitative_cases()) {
    auto [out, delta] = pipeline(row.base, domains, cn);
    c.expect(out.predicted == row.expected, row.name + ": final labels differ");
    c.expect(delta.added == row.expected_added, row.name + ": added labels differ");
    c.expect(delta.removed == row.expected_removed, row.name + ": removed labels differ");
  }
  std::mt19937 rng(10000);
  int predictions = 0;
  while (predictions < 10000) {
    const auto w = fixtures::random_world(rng);
    for (int i = 0; i < 50; ++i, ++predictions) {
      const auto p = fixtures::random_prediction(w, rng, i);
      std::vector<std::string> gold;
      for (const auto& l : w.labels) {
        if (rng() % 3 == 0) gold.push_back(l);
      }
      auto recall = [&](const Prediction& q) {
        std::size_t hit = 0;
        for (const auto& l : gold) hit += q.predicted.contains(l) ? 1 : 0;
        return gold.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(gold.size());
      };
      auto [filled, added] = infer_missing(p, w.domains);
      c.expect(recall(filled) >= recall(p), "infer_missing lowered recall");
      for (const auto& l : p.predicted) c.expect(filled.predicted.contains(l), "infer_missing dropped a label");

      auto [pruned, removed] = remove_conflicts(filled, w.cn);
      for (const auto& x : pruned.predicted)
        for (const auto& y : pruned.predicted) c.expect(!w.cn.conflicts(x, y), "conflict survived");

      auto [out, delta] = pipeline(p, w.domains, w.cn);
      auto [again, delta2] = pipeline(out, w.domains, w.cn);
      c.expect(again == out && delta2.empty(), "pipeline is not a fixed point");
    }
  }
  c.summary = std::to_string(fixtures::qualitative_cases().size()) + " qualitative rows, " +
              std::to_string(predictions) + " random predictions";
}

void lle_suite(Check& c) {
  const std::vector<std::vector<double>> nb{{0, 0, 2}, {2, 4, 0}};
  const auto mid = lle_weights(std::vector<double>{1, 2, 1}, nb);
  c.expect(std::abs(mid[0] - 0.5) <= 1e-9 && std::abs(mid[1] - 0.5) <= 1e-9, "midpoint weights off");

  std::mt19937 rng(100);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    oracle::LLEObjective f;
    f.l.resize(3 + trial % 4);
    for (auto& x : f.l) x = u(rng);
    f.p.assign(3, std::vector<double>(f.l.size()));
    for (auto& q : f.p)
      for (auto& x : q) x = u(rng);
    f.eps = 1e-3;
    const auto w = lle_weights(f.l, f.p, f.eps);
    const auto g = oracle::grid_search(f);
    const double gap = f.value(w[0], w[1]) - g.value;
    worst = std::max(worst, std::abs(gap));
    c.expect(std::abs(gap) <= 1e-5, "trial " + std::to_string(trial) + ": objective differs from grid by " + fmt(gap));
    c.expect(std::abs(w[0] + w[1] + w[2] - 1.0) <= 1e-9, "weights do not sum to 1");
  }

  std::size_t records = 0;
  const auto table = load_embeddings(fs::path(TYPEDOM_SOURCE_DIR) / "data/mini/embeddings.txt");
  const auto labels = io::read_label_list(fs::path(TYPEDOM_SOURCE_DIR) / "data/mini/labels.txt");
  for (std::size_t k : {1u, 3u, 10u}) {
    for (const auto& r : compute_lle(embed_labels(labels, table), k, 1e-3)) {
      double s = 0;
      for (double x : r.weights) s += x;
      c.expect(std::abs(s - 1.0) <= 1e-9, r.label + ": exported weights sum to " + fmt(s));
      ++records;
    }
  }
  c.summary = "100 grid-oracle instances (max |gap| " + fmt(worst) + "), " + std::to_string(records) + " records";
}

Prediction with_labels(std::string id, std::set<std::string, std::less<>> labels) {
  Prediction p;
  p.id = std::move(id);
  p.predicted = std::move(labels);
  return p;
}

void eval_oracle(Check& c) {
  const std::vector<Prediction> preds{with_labels("1", {"a", "b"}), with_labels("2", {"c"})};
  const std::vector<Example> gold{{"1", "s", {0, 1}, {"a"}}, {"2", "s", {0, 1}, {"c", "d"}}};
  const auto r = evaluate(preds, gold);
  c.expect(r.macro_p == 0.75 && r.macro_r == 0.75 && r.macro_f1 == 0.75, "macro scores differ from 0.75");
  c.expect(r.micro_p == 2.0 / 3.0 && r.micro_r == 2.0 / 3.0 && std::abs(r.micro_f1 - 2.0 / 3.0) < 1e-15,
           "micro scores differ from 2/3");

  // synthetic run: post-process random predictions and recount from deltas
  std::mt19937 rng(6);
  const auto w = fixtures::random_world(rng);
  std::vector<PredictionRecord> before, after;
  std::vector<Example> g;
  std::size_t added = 0, removed = 0, touched_missing = 0, touched_cn = 0, correct = 0, justified = 0;
  for (int i = 0; i < 200; ++i) {
    auto p = fixtures::random_prediction(w, rng, i);
    std::vector<std::string> labels;
    for (const auto& l : w.labels) {
      if (rng() % 4 == 0) labels.push_back(l);
    }
    g.push_back({p.id, "s", {0, 1}, labels});
    auto [out, delta] = pipeline(p, w.domains, w.cn);
    added += delta.added.size();
    removed += delta.removed.size();
    touched_missing += delta.added.empty() ? 0 : 1;
    touched_cn += delta.removed.empty() ? 0 : 1;
    for (const auto& [l, src] : delta.added) correct += std::count(labels.begin(), labels.end(), l);
    for (const auto& [l, kept] : delta.removed) justified += std::count(labels.begin(), labels.end(), l) ? 0 : 1;
    before.push_back({p, std::nullopt});
    after.push_back({out, delta});
  }
  const auto s = strategy_stats(before, after, g);
  c.expect(s.labels_added == added && s.labels_removed == removed, "label counts differ from delta sums");
  c.expect(s.instances_affected_missing == touched_missing && s.instances_affected_cn == touched_cn,
           "instance counts differ from delta sums");
  c.expect(s.additions_correct == correct && s.removals_justified == justified, "correctness counts differ");
  c.expect(s.n_instances == 200, "instance total differs");
  c.summary = render(s);
}

double macro_f1_of(const fs::path& report) {
  return nlohmann::json::parse(io::read_file(report)).at("macro_f1").get<double>();
}

void golden_run(Check& c) {
  const auto dir = fresh_dir("golden");
  const auto start = Clock::now();
  const auto r = run_cli("--log-level warn --config data/mini/demo.toml pipeline --out-dir '" + dir.string() + "'");
  const double t = seconds_since(start);
  c.expect(r.status == 0, "pipeline exited with " + std::to_string(r.status) + ": " + r.output);
  c.expect(t < 10.0, "took " + fmt(t) + " s");
  const fs::path golden = fs::path(TYPEDOM_SOURCE_DIR) / "tests/golden/mini";
  for (const char* name :
       {"domains.json", "train_aug.jsonl", "cn_pairs.jsonl", "preds_pp.jsonl", "report.json", "sweep.json"}) {
    c.expect(fs::exists(dir / name) && io::read_file(dir / name) == io::read_file(golden / name),
             std::string(name) + " differs from golden");
  }
  const auto base = run_cli("--log-level warn eval --predictions data/mini/test_preds.jsonl --gold data/mini/test.jsonl "
                            "--report '" + (dir / "base_report.json").string() + "'");
  c.expect(base.status == 0, "base eval failed: " + base.output);
  const double before = macro_f1_of(dir / "base_report.json");
  const double after = macro_f1_of(dir / "report.json");
  c.expect(after >= before, "post-processed macro-F1 " + fmt(after) + " below base " + fmt(before));

  std::size_t examples = 0;
  for (const char* split : {"train.jsonl", "dev.jsonl", "test.jsonl"}) {
    examples += load_examples(fs::path(TYPEDOM_SOURCE_DIR) / "data/mini" / split).size();
  }
  const auto labels = io::read_label_list(fs::path(TYPEDOM_SOURCE_DIR) / "data/mini/labels.txt");
  const auto table = load_embeddings(fs::path(TYPEDOM_SOURCE_DIR) / "data/mini/embeddings.txt");
  c.expect(examples == 50 && labels.size() == 30 && table.dim() == 25, "mini corpus shape differs");
  c.summary = fmt(t) + " s, macro-F1 " + fmt(before) + " -> " + fmt(after) + ", " + std::to_string(examples) +
              " examples, " + std::to_string(labels.size()) + " labels, dim " + std::to_string(table.dim());
}

void threshold_sweep_check(Check& c) {
  const fs::path mini = fs::path(TYPEDOM_SOURCE_DIR) / "data/mini";
  // fixture preconditions: one compatible pair at 0.6, conceptual neighbours >= 0.9
  const auto fixture = parse_scored_pairs(io::read_file(mini / "cn_fixture.jsonl"));
  std::size_t at_06 = 0, low = 0, high = 0;
  for (const auto& p : fixture) {
    if (p.score == 0.6) ++at_06;
    else if (p.score >= 0.9) ++high;
    else if (p.score <= 0.35) ++low;
  }
  c.expect(at_06 == 2 && at_06 + low + high == fixture.size(), "fixture does not have the stated shape");

  const auto dir = fresh_dir("sweep");
  const auto p = [&](const char* name) { return "'" + (dir / name).string() + "'"; };
  const std::string m = "data/mini/";
  for (const std::string step : {
           "cluster --embeddings " + m + "embeddings.txt --labels " + m + "labels.txt --out " + p("domains.json"),
           "cn-candidates --domains " + p("domains.json") + " --out " + p("candidates.jsonl"),
           "cn-score --pairs " + p("candidates.jsonl") + " --fixture " + m + "cn_fixture.jsonl --out " +
               p("scored.jsonl"),
           "cn-sweep --scored " + p("scored.jsonl") + " --predictions " + m + "dev_preds.jsonl --gold " + m +
               "dev.jsonl --domains " + p("domains.json") + " --out " + p("sweep.json"),
       }) {
    const auto r = run_cli("--log-level warn " + step);
    c.expect(r.status == 0, "step failed: " + r.output);
  }
  const auto sweep = nlohmann::json::parse(io::read_file(dir / "sweep.json"));
  const double t = sweep.at("threshold").get<double>();
  c.expect(t > 0.6, "selected threshold " + fmt(t));
  c.summary = "selected " + fmt(t) + " (dev macro-F1 " + fmt(sweep.at("macro_f1").get<double>()) + ")";
}

}  // namespace

int main() {
  report("ap-oracle-equivalence", ap_oracle);
  report("clustering-determinism-partition", clustering_suite);
  report("emergency-domain-fixture", emergency_fixture);
  report("postprocess-behaviour", postprocess_suite);
  report("lle-weights", lle_suite);
  report("eval-oracle", eval_oracle);
  report("end-to-end-golden", golden_run);
  report("cn-threshold-sweep", threshold_sweep_check);
  std::cout << (g_failed == 0 ? "all criteria passed" : std::to_string(g_failed) + " criteria failed") << std::endl;
  return g_failed == 0 ? 0 : 1;
}
