#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

// before httplib: <resolv.h> defines a `_res` macro that breaks Eigen
#include "typedom/typedom.hpp"

#include "typedom/http_scorer.hpp"

namespace fs = std::filesystem;
using namespace typedom;

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };
Level g_level = Level::info;

void log(Level level, std::string_view cmd, const std::string& msg) {
  if (level > g_level) return;
  static constexpr const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "level=" << names[static_cast<int>(level)] << " cmd=" << cmd << " msg=" << nlohmann::json(msg).dump()
            << '\n';
}

void require_files(std::initializer_list<const std::string*> paths) {
  for (const auto* p : paths) {
    if (p->empty()) continue;
    if (!fs::is_regular_file(*p)) throw Error(ErrorKind::io, "input file not found: " + *p);
  }
}

// Refuses to write over any input.
void check_outputs(std::initializer_list<const std::string*> inputs, std::initializer_list<fs::path> outputs) {
  for (const auto& out : outputs) {
    if (!fs::exists(out)) continue;
    for (const auto* in : inputs) {
      if (!in->empty() && fs::exists(*in) && fs::equivalent(*in, out)) {
        throw Error(ErrorKind::usage, "output " + out.string() + " would overwrite input " + *in);
      }
    }
  }
}

EmbeddingTable read_embeddings(const std::string& path, bool header) {
  return load_embeddings(path, header ? EmbeddingFormat::text_with_count_header : EmbeddingFormat::plain_text);
}

MissingMode parse_mode(const std::string& s) { return s == "joint" ? MissingMode::joint : MissingMode::sequential; }

std::vector<Prediction> predictions_of(const std::vector<PredictionRecord>& records) {
  std::vector<Prediction> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.prediction);
  return out;
}

// Synthetic domain labels are never gold; scoring drops them.
std::vector<Prediction> real_labels_of(const std::vector<PredictionRecord>& records) {
  std::vector<Prediction> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(strip_synthetic(r.prediction));
  return out;
}

// ---- steps shared by the single subcommands and `pipeline` ----

struct ClusterArgs {
  std::string embeddings, labels, out;
  std::vector<double> preferences = default_preferences();
  double damping = 0.5;
  int max_iter = 200;
  int convergence_iter = 15;
  bool header = false;
  bool single_precision = false;
};

DomainSet run_cluster(const ClusterArgs& a, std::string_view cmd) {
  const auto table = read_embeddings(a.embeddings, a.header);
  const auto labels = io::read_label_list(a.labels);
  const auto vectors = embed_labels(labels, table);
  std::size_t unresolved = 0;
  for (const auto& v : vectors) unresolved += v.resolved ? 0 : 1;
  if (unresolved > 0) log(Level::warn, cmd, std::to_string(unresolved) + " label(s) have no embedding and are skipped");
  DomainOptions opts;
  opts.preferences = a.preferences;
  opts.damping = a.damping;
  opts.max_iter = a.max_iter;
  opts.convergence_iter = a.convergence_iter;
  opts.single_precision = a.single_precision;
  auto domains = build_domains(vectors, opts);
  for (const auto& c : domains.clusterings()) {
    if (!c.converged) {
      log(Level::warn, cmd, "affinity propagation did not converge at preference " + io::format_real(c.preference));
    }
    log(Level::info, cmd,
        "preference " + io::format_real(c.preference) + ": " + std::to_string(c.clusters.size()) + " clusters");
  }
  return domains;
}

std::vector<ScoredPair> run_score(const std::vector<LabelPair>& pairs, const std::string& url, const std::string& fixture,
                                  const std::string& cache_path, std::size_t batch, std::size_t concurrency,
                                  std::string_view cmd) {
  if (!url.empty() && !fixture.empty()) throw Error(ErrorKind::usage, "give either --scorer-url or --fixture, not both");
  if (url.empty() && fixture.empty()) throw Error(ErrorKind::usage, "one of --scorer-url or --fixture is required");
  std::unique_ptr<ContradictionScorer> scorer;
  if (!fixture.empty()) {
    scorer = std::make_unique<FixtureScorer>(FixtureScorer::load(fixture));
  } else {
    HttpScorerOptions o;
    o.batch_size = batch;
    o.concurrency = concurrency;
    scorer = std::make_unique<HttpScorer>(url, o);
  }
  std::optional<ScoreCache> cache;
  if (!cache_path.empty()) cache.emplace(cache_path);
  const auto queries = build_queries(pairs);
  auto scored = score_pairs(queries, *scorer, cache ? &*cache : nullptr);
  if (cache) cache->save();
  log(Level::info, cmd, "scored " + std::to_string(scored.size()) + " pairs with " + std::to_string(queries.size()) +
                            " queries");
  return scored;
}

std::string candidates_jsonl(const std::vector<LabelPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["a"] = p.a;
    j["b"] = p.b;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<LabelPair> parse_candidates(const std::string& path) {
  std::vector<LabelPair> out;
  const auto lines = io::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(lines[i]);
      out.emplace_back(j.at("a").get<std::string>(), j.at("b").get<std::string>());
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::parse, "malformed pair at line " + std::to_string(i + 1) + " of " + path);
    }
  }
  return out;
}

nlohmann::ordered_json sweep_to_json(const SweepResult& r) {
  nlohmann::ordered_json j;
  j["threshold"] = r.threshold;
  j["macro_f1"] = r.macro_f1;
  j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : r.points) {
    j["points"].push_back({{"threshold", p.threshold}, {"macro_f1", p.macro_f1}, {"accepted_pairs", p.accepted_pairs}});
  }
  return j;
}

std::string postprocess_jsonl(const std::vector<PredictionRecord>& records, const DomainSet& domains,
                              const CNPairSet& cn, const PostprocessOptions& opts,
                              std::vector<PredictionRecord>* processed = nullptr) {
  std::string out;
  for (const auto& r : records) {
    auto [p, delta] = pipeline(r.prediction, domains, cn, opts);
    out += serialize_prediction(p, &delta) + "\n";
    if (processed != nullptr) processed->push_back({std::move(p), std::move(delta)});
  }
  return out;
}

std::string json_doc(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::string elapsed() const {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return std::to_string(ms.count()) + " ms";
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-domain post-processing for fine-grained entity typing"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file; flags override it");
  app.get_config_formatter_base()->arrayDelimiter(',');
  std::string level = "info";
  app.add_option("--log-level", level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Reserved; every step is deterministic");

  // cluster
  ClusterArgs cl;
  auto* cluster = app.add_subcommand("cluster", "Build label domains with affinity propagation");
  cluster->add_option("--embeddings", cl.embeddings)->required();
  cluster->add_option("--labels", cl.labels)->required();
  cluster->add_option("--preferences", cl.preferences)->delimiter(',');
  cluster->add_option("--damping", cl.damping);
  cluster->add_option("--max-iter", cl.max_iter);
  cluster->add_option("--convergence-iter", cl.convergence_iter);
  cluster->add_flag("--embeddings-header", cl.header, "Embedding file starts with a count/dim line");
  cluster->add_flag("--single-precision", cl.single_precision);
  cluster->add_option("--out", cl.out)->required();

  // augment
  std::string aug_examples, aug_domains, aug_out;
  auto* augment = app.add_subcommand("augment", "Add synthetic domain labels to training examples");
  augment->add_option("--examples", aug_examples)->required();
  augment->add_option("--domains", aug_domains)->required();
  augment->add_option("--out", aug_out)->required();

  // cn-candidates
  std::string cand_domains, cand_out;
  auto* cn_candidates = app.add_subcommand("cn-candidates", "List within-domain label pairs");
  cn_candidates->add_option("--domains", cand_domains)->required();
  cn_candidates->add_option("--out", cand_out)->required();

  // cn-score
  std::string score_pairs_path, score_url, score_fixture, score_cache, score_out;
  std::size_t batch = 32, concurrency = 8;
  auto* cn_score = app.add_subcommand("cn-score", "Score candidate pairs for contradiction");
  cn_score->add_option("--pairs", score_pairs_path)->required();
  cn_score->add_option("--scorer-url", score_url);
  cn_score->add_option("--fixture", score_fixture);
  cn_score->add_option("--cache", score_cache);
  cn_score->add_option("--batch-size", batch);
  cn_score->add_option("--concurrency", concurrency);
  cn_score->add_option("--out", score_out)->required();

  // cn-sweep
  std::string sweep_scored, sweep_preds, sweep_gold, sweep_domains, sweep_out, sweep_mode = "sequential";
  std::vector<double> sweep_grid = default_cn_grid();
  double sweep_threshold = kDefaultThreshold;
  auto* cn_sweep = app.add_subcommand("cn-sweep", "Choose the CN threshold on dev macro-F1");
  cn_sweep->add_option("--scored", sweep_scored)->required();
  cn_sweep->add_option("--predictions", sweep_preds)->required();
  cn_sweep->add_option("--gold", sweep_gold)->required();
  cn_sweep->add_option("--domains", sweep_domains)->required();
  cn_sweep->add_option("--grid", sweep_grid)->delimiter(',');
  cn_sweep->add_option("--threshold", sweep_threshold, "Prediction threshold");
  cn_sweep->add_option("--missing-mode", sweep_mode)->check(CLI::IsMember({"sequential", "joint"}));
  cn_sweep->add_option("--out", sweep_out)->required();

  // cn-filter
  std::string filter_scored, filter_out;
  double filter_threshold = 0.9;
  auto* cn_filter = app.add_subcommand("cn-filter", "Accept scored pairs at or above a threshold");
  cn_filter->add_option("--scored", filter_scored)->required();
  cn_filter->add_option("--threshold", filter_threshold)->required();
  cn_filter->add_option("--out", filter_out)->required();

  // postprocess
  std::string pp_preds, pp_domains, pp_cn, pp_out, pp_mode = "sequential";
  double pp_threshold = kDefaultThreshold;
  auto* postprocess = app.add_subcommand("postprocess", "Infer missing labels and remove conflicts");
  postprocess->add_option("--predictions", pp_preds)->required();
  postprocess->add_option("--domains", pp_domains)->required();
  postprocess->add_option("--cn", pp_cn)->required();
  postprocess->add_option("--threshold", pp_threshold);
  postprocess->add_option("--missing-mode", pp_mode)->check(CLI::IsMember({"sequential", "joint"}));
  postprocess->add_option("--out", pp_out)->required();

  // lle-weights
  std::string lle_emb, lle_labels, lle_out;
  std::size_t lle_k = 10;
  double lle_eps = 1e-3;
  bool lle_header = false;
  auto* lle = app.add_subcommand("lle-weights", "Export locally linear reconstruction weights");
  lle->add_option("--embeddings", lle_emb)->required();
  lle->add_option("--labels", lle_labels)->required();
  lle->add_option("--k", lle_k);
  lle->add_option("--epsilon", lle_eps);
  lle->add_flag("--embeddings-header", lle_header);
  lle->add_option("--out", lle_out)->required();

  // eval
  std::string ev_preds, ev_gold, ev_report;
  double ev_threshold = kDefaultThreshold;
  auto* eval = app.add_subcommand("eval", "Macro and micro precision, recall and F1");
  eval->add_option("--predictions", ev_preds)->required();
  eval->add_option("--gold", ev_gold)->required();
  eval->add_option("--threshold", ev_threshold);
  eval->add_option("--report", ev_report)->required();

  // stats
  std::string st_before, st_after, st_gold, st_out;
  double st_threshold = kDefaultThreshold;
  auto* stats = app.add_subcommand("stats", "Count what post-processing changed");
  stats->add_option("--before", st_before)->required();
  stats->add_option("--after", st_after)->required();
  stats->add_option("--gold", st_gold)->required();
  stats->add_option("--threshold", st_threshold);
  stats->add_option("--out", st_out);

  // pipeline
  ClusterArgs pl;
  std::string pl_train, pl_dev_preds, pl_dev_gold, pl_preds, pl_gold, pl_url, pl_fixture, pl_cache, pl_out_dir = ".";
  std::string pl_mode = "sequential";
  std::vector<double> pl_grid = default_cn_grid();
  std::optional<double> pl_cn_threshold;
  double pl_threshold = kDefaultThreshold;
  auto* pipe = app.add_subcommand("pipeline", "cluster, augment, cn-*, postprocess and eval in one run");
  pipe->add_option("--embeddings", pl.embeddings)->required();
  pipe->add_option("--labels", pl.labels)->required();
  pipe->add_option("--preferences", pl.preferences)->delimiter(',');
  pipe->add_option("--damping", pl.damping);
  pipe->add_flag("--embeddings-header", pl.header);
  pipe->add_option("--train", pl_train)->required();
  pipe->add_option("--dev-predictions", pl_dev_preds);
  pipe->add_option("--dev-gold", pl_dev_gold);
  pipe->add_option("--predictions", pl_preds)->required();
  pipe->add_option("--gold", pl_gold)->required();
  pipe->add_option("--scorer-url", pl_url);
  pipe->add_option("--fixture", pl_fixture);
  pipe->add_option("--cache", pl_cache);
  pipe->add_option("--batch-size", batch);
  pipe->add_option("--concurrency", concurrency);
  pipe->add_option("--cn-grid", pl_grid)->delimiter(',');
  pipe->add_option("--cn-threshold", pl_cn_threshold, "Fixed CN threshold; skips the dev sweep");
  pipe->add_option("--threshold", pl_threshold, "Prediction threshold");
  pipe->add_option("--missing-mode", pl_mode)->check(CLI::IsMember({"sequential", "joint"}));
  pipe->add_option("--out-dir", pl_out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    const auto rest = app.remaining();
    if (app.get_subcommands().empty() && !rest.empty()) msg = "unknown subcommand '" + rest.front() + "'";
    std::cerr << "error: kind=usage message=" << nlohmann::json(msg).dump() << '\n';
    return 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  g_level = level == "error" ? Level::error : level == "warn" ? Level::warn : level == "debug" ? Level::debug : Level::info;
  if (seed) log(Level::debug, cmd, "--seed is reserved and has no effect");

  try {
    const Timer timer;
    if (*cluster) {
      require_files({&cl.embeddings, &cl.labels});
      check_outputs({&cl.embeddings, &cl.labels}, {cl.out});
      io::write_atomic(cl.out, serialize_domains(run_cluster(cl, cmd)));
    } else if (*augment) {
      require_files({&aug_examples, &aug_domains});
      check_outputs({&aug_examples, &aug_domains}, {aug_out});
      const auto domains = load_domains(aug_domains);
      save_examples(augment_examples(load_examples(aug_examples), domains), aug_out);
    } else if (*cn_candidates) {
      require_files({&cand_domains});
      check_outputs({&cand_domains}, {cand_out});
      const auto pairs = candidate_pairs(load_domains(cand_domains));
      log(Level::info, cmd, std::to_string(pairs.size()) + " candidate pairs");
      io::write_atomic(cand_out, candidates_jsonl(pairs));
    } else if (*cn_score) {
      require_files({&score_pairs_path, &score_fixture});
      check_outputs({&score_pairs_path, &score_fixture}, {score_out});
      const auto scored = run_score(parse_candidates(score_pairs_path), score_url, score_fixture, score_cache, batch,
                                    concurrency, cmd);
      io::write_atomic(score_out, serialize_scored_pairs(scored, false));
    } else if (*cn_sweep) {
      require_files({&sweep_scored, &sweep_preds, &sweep_gold, &sweep_domains});
      check_outputs({&sweep_scored, &sweep_preds, &sweep_gold, &sweep_domains}, {sweep_out});
      PostprocessOptions opts;
      opts.missing_mode = parse_mode(sweep_mode);
      const auto dev = predictions_of(load_predictions(sweep_preds, sweep_threshold));
      const auto r = threshold_sweep(dev, load_examples(sweep_gold), parse_scored_pairs(io::read_file(sweep_scored)),
                                     sweep_grid, load_domains(sweep_domains), opts);
      log(Level::info, cmd, "selected threshold " + io::format_real(r.threshold) + " (dev macro-F1 " +
                                io::format_real(r.macro_f1) + ")");
      io::write_atomic(sweep_out, json_doc(sweep_to_json(r)));
    } else if (*cn_filter) {
      require_files({&filter_scored});
      check_outputs({&filter_scored}, {filter_out});
      const auto cn = filter_pairs(parse_scored_pairs(io::read_file(filter_scored)), filter_threshold);
      log(Level::info, cmd, std::to_string(cn.accepted_count()) + " of " + std::to_string(cn.pairs().size()) +
                                " pairs accepted");
      io::write_atomic(filter_out, serialize_scored_pairs(cn.pairs(), true));
    } else if (*postprocess) {
      require_files({&pp_preds, &pp_domains, &pp_cn});
      check_outputs({&pp_preds, &pp_domains, &pp_cn}, {pp_out});
      PostprocessOptions opts;
      opts.missing_mode = parse_mode(pp_mode);
      const auto records = load_predictions(pp_preds, pp_threshold);
      io::write_atomic(pp_out, postprocess_jsonl(records, load_domains(pp_domains), load_cn_pairs(pp_cn), opts));
    } else if (*lle) {
      require_files({&lle_emb, &lle_labels});
      check_outputs({&lle_emb, &lle_labels}, {lle_out});
      const auto table = read_embeddings(lle_emb, lle_header);
      export_weights(embed_labels(io::read_label_list(lle_labels), table), lle_k, lle_eps, lle_out);
    } else if (*eval) {
      require_files({&ev_preds, &ev_gold});
      check_outputs({&ev_preds, &ev_gold}, {ev_report});
      const auto report =
          evaluate(real_labels_of(load_predictions(ev_preds, ev_threshold)), load_examples(ev_gold));
      log(Level::info, cmd, "macro-F1 " + io::format_real(report.macro_f1) + ", micro-F1 " +
                                io::format_real(report.micro_f1));
      io::write_atomic(ev_report, json_doc(report_to_json(report)));
    } else if (*stats) {
      require_files({&st_before, &st_after, &st_gold});
      if (!st_out.empty()) check_outputs({&st_before, &st_after, &st_gold}, {st_out});
      const auto s = strategy_stats(load_predictions(st_before, st_threshold), load_predictions(st_after, st_threshold),
                                    load_examples(st_gold));
      std::cout << render(s) << '\n';
      if (!st_out.empty()) io::write_atomic(st_out, json_doc(stats_to_json(s)));
    } else if (*pipe) {
      if (!pl_url.empty() && !pl_fixture.empty()) {
        throw Error(ErrorKind::usage, "give either --scorer-url or --fixture, not both");
      }
      if (pl_dev_preds.empty() != pl_dev_gold.empty()) {
        throw Error(ErrorKind::usage, "--dev-predictions and --dev-gold go together");
      }
      if (pl_dev_preds.empty() && !pl_cn_threshold) {
        throw Error(ErrorKind::usage, "without dev data a --cn-threshold is required");
      }
      if (pl.preferences.empty()) throw Error(ErrorKind::usage, "preferences must not be empty");
      require_files({&pl.embeddings, &pl.labels, &pl_train, &pl_dev_preds, &pl_dev_gold, &pl_preds, &pl_gold,
                     &pl_fixture});
      const fs::path dir(pl_out_dir);
      const std::vector<fs::path> outs{dir / "domains.json",   dir / "train_aug.jsonl", dir / "cn_pairs.jsonl",
                                       dir / "preds_pp.jsonl", dir / "report.json",     dir / "sweep.json"};
      for (const auto& o : outs) {
        check_outputs({&pl.embeddings, &pl.labels, &pl_train, &pl_dev_preds, &pl_dev_gold, &pl_preds, &pl_gold,
                       &pl_fixture, &pl_cache},
                      {o});
      }
      PostprocessOptions opts;
      opts.missing_mode = parse_mode(pl_mode);

      const auto domains = run_cluster(pl, cmd);
      io::write_atomic(outs[0], serialize_domains(domains));
      log(Level::info, cmd, "wrote " + outs[0].string());

      save_examples(augment_examples(load_examples(pl_train), domains), outs[1]);
      log(Level::info, cmd, "wrote " + outs[1].string());

      const auto pairs = candidate_pairs(domains);
      log(Level::info, cmd, std::to_string(pairs.size()) + " candidate pairs");
      const auto scored = run_score(pairs, pl_url, pl_fixture, pl_cache, batch, concurrency, cmd);

      double cn_threshold = 0;
      if (pl_cn_threshold) {
        cn_threshold = *pl_cn_threshold;
      } else {
        const auto dev = predictions_of(load_predictions(pl_dev_preds, pl_threshold));
        const auto sweep = threshold_sweep(dev, load_examples(pl_dev_gold), scored, pl_grid, domains, opts);
        io::write_atomic(outs[5], json_doc(sweep_to_json(sweep)));
        cn_threshold = sweep.threshold;
        log(Level::info, cmd, "selected CN threshold " + io::format_real(cn_threshold) + " (dev macro-F1 " +
                                  io::format_real(sweep.macro_f1) + ")");
      }
      const auto cn = filter_pairs(scored, cn_threshold);
      io::write_atomic(outs[2], serialize_scored_pairs(cn.pairs(), true));
      log(Level::info, cmd, std::to_string(cn.accepted_count()) + " conceptual-neighbour pairs accepted");

      const auto records = load_predictions(pl_preds, pl_threshold);
      std::vector<PredictionRecord> processed;
      io::write_atomic(outs[3], postprocess_jsonl(records, domains, cn, opts, &processed));

      const auto gold = load_examples(pl_gold);
      const auto base = evaluate(real_labels_of(records), gold);
      const auto report = evaluate(real_labels_of(processed), gold);
      io::write_atomic(outs[4], json_doc(report_to_json(report)));
      log(Level::info, cmd, "macro-F1 " + io::format_real(base.macro_f1) + " -> " + io::format_real(report.macro_f1));
      log(Level::info, cmd, render(strategy_stats(records, processed, gold)));
    }
    log(Level::debug, cmd, "done in " + timer.elapsed());
  } catch (const Error& e) {
    std::cerr << "error: kind=" << to_string(e.kind()) << " message=" << nlohmann::json(std::string(e.what())).dump()
              << '\n';
    return e.kind() == ErrorKind::usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: kind=internal message=" << nlohmann::json(std::string(e.what())).dump() << '\n';
    return 1;
  }
  return 0;
}
