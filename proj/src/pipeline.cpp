#include "nlb/pipeline.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "nlb/cluster_select.hpp"
#include "nlb/contrastive_select.hpp"
#include "nlb/embedding.hpp"
#include "nlb/error.hpp"
#include "nlb/metrics.hpp"
#include "nlb/parallel.hpp"
#include "nlb/poison_set.hpp"
#include "nlb/random.hpp"
#include "nlb/synthetic.hpp"
#include "nlb/trigger.hpp"

namespace nlb::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Config {
  json raw;
  fs::path base_dir;

  fs::path path_of(const char* key) const {
    if (!raw.contains(key) || raw[key].is_null()) {
      throw InvalidArgument(std::string("config is missing \"") + key + "\"");
    }
    const fs::path p = raw[key].get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  }
  bool has(const char* key) const { return raw.contains(key) && !raw[key].is_null(); }
  const json& method() const {
    static const json empty = json::object();
    return raw.contains("method") ? raw["method"] : empty;
  }
};

Config load_config(const std::string& path) {
  if (path.empty()) throw InvalidArgument("--config is required");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  Config cfg;
  try {
    cfg.raw = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!cfg.raw.is_object()) throw ParseError(path + ": config must be a JSON object");
  cfg.base_dir = fs::path(path).parent_path();
  return cfg;
}

std::uint64_t resolve_seed(Config& cfg, const std::optional<std::uint64_t>& flag) {
  std::uint64_t seed = cfg.raw.value("seed", std::uint64_t{0});
  if (flag) seed = *flag;
  cfg.raw["seed"] = seed;
  return seed;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void emit(const json& report, std::ostream& out, const std::string& out_path) {
  const std::string text = report.dump(2) + "\n";
  out << text;
  if (!out_path.empty()) write_text(out_path, text);
}

json report_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& v : r.per_class) per_class.push_back(v ? json(*v) : json(nullptr));
  return {
      {"metric", to_string(r.metric)},
      {"value", r.value},
      {"per_class", per_class},
      {"argmax_class", r.argmax_class ? json(*r.argmax_class) : json(nullptr)},
      {"warnings", r.warnings},
  };
}

json poison_json(const PoisonSet& p) {
  auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
  return {
      {"method", std::string(to_string(p.method))},
      {"budget_m", p.budget_m},
      {"seed", opt(p.seed)},
      {"anchor", opt(p.anchor)},
      {"k", opt(p.k)},
      {"cluster_id", opt(p.cluster_id)},
      {"indices", p.indices},
  };
}

std::size_t resolve_budget(Config& cfg, std::size_t n) {
  json& method = cfg.raw["method"];
  const bool has_budget = method.contains("budget") && !method["budget"].is_null();
  const bool has_rate = method.contains("poison_rate") && !method["poison_rate"].is_null();
  if (has_budget == has_rate) {
    throw InvalidArgument("method needs exactly one of \"budget\" or \"poison_rate\"");
  }
  std::size_t budget = 0;
  if (has_budget) {
    budget = method["budget"].get<std::size_t>();
  } else {
    const double rate = method["poison_rate"].get<double>();
    if (!(rate > 0.0 && rate < 1.0)) throw InvalidArgument("poison_rate must be in (0, 1)");
    budget = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  }
  if (budget == 0) throw InvalidArgument("resolved poison budget is 0");
  if (budget > n) throw InvalidArgument("poison budget exceeds the number of samples");
  method["budget_m"] = budget;
  return budget;
}

SimilarityOptions similarity_options(const Config& cfg) {
  SimilarityOptions opts;
  opts.block_size = cfg.method().value("block_size", opts.block_size);
  if (opts.block_size == 0) throw InvalidArgument("block_size must be >= 1");
  return opts;
}

KMeansOptions kmeans_options(const Config& cfg) {
  KMeansOptions opts;
  opts.max_iter = cfg.method().value("max_iter", opts.max_iter);
  opts.tol = cfg.method().value("tol", opts.tol);
  opts.n_init = cfg.method().value("n_init", opts.n_init);
  return opts;
}

EmbeddingMatrix load_normalized(const Config& cfg) {
  const fs::path path = cfg.path_of("embeddings");
  EmbeddingFormat format = format_from_path(path);
  if (cfg.has("format")) {
    const auto f = cfg.raw["format"].get<std::string>();
    if (f == "csv") {
      format = EmbeddingFormat::kCsv;
    } else if (f == "nlbe" || f == "nlbe-binary") {
      format = EmbeddingFormat::kNlbe;
    } else {
      throw InvalidArgument("unknown embeddings format '" + f + "'");
    }
  }
  return normalize_rows(load_embeddings(path, format));
}

json cmd_select(Config& cfg, std::uint64_t seed) {
  const EmbeddingMatrix m = load_normalized(cfg);
  const std::size_t budget = resolve_budget(cfg, m.rows());
  const json& method_cfg = cfg.method();
  const std::string name = method_cfg.value("name", std::string());
  if (name.empty()) throw InvalidArgument("config method.name is required");
  const SelectionMethod method = parse_selection_method(name);
  const fs::path out_dir = cfg.path_of("output_dir");
  fs::create_directories(out_dir);

  std::optional<LabelVector> labels;
  if (cfg.has("labels")) {
    labels = load_labels(cfg.path_of("labels"));
    if (labels->values.size() != m.rows()) {
      throw InvalidArgument("labels file has " + std::to_string(labels->values.size()) +
                            " entries for " + std::to_string(m.rows()) + " samples");
    }
  }

  json extra = json::object();
  const SimilarityOptions sim = similarity_options(cfg);
  std::optional<ContrastiveScores> scores;
  PoisonSet p;
  switch (method) {
    case SelectionMethod::kRandom:
      p = select_random_poison(m.rows(), budget, derive_seed(seed, "random"));
      break;
    case SelectionMethod::kClustering: {
      const KMeansOptions km = kmeans_options(cfg);
      const std::uint64_t km_seed = derive_seed(seed, "kmeans");
      std::size_t k = 0;
      const json k_cfg = method_cfg.value("k", json());
      if (k_cfg.is_number_integer()) {
        k = k_cfg.get<std::size_t>();
      } else if (k_cfg.is_null() && labels) {
        k = labels->num_classes;
      } else if (k_cfg.is_null() || k_cfg == "auto") {
        const std::size_t k_min = method_cfg.value("k_min", std::size_t{2});
        const std::size_t k_max = method_cfg.value("k_max", std::min<std::size_t>(20, m.rows()));
        k = auto_k(m, k_min, k_max, km_seed, km);
        extra["auto_k"] = {{"k_min", k_min}, {"k_max", k_max}, {"best_k", k}};
      } else {
        throw InvalidArgument("method.k must be an integer or \"auto\"");
      }
      cfg.raw["method"]["k_resolved"] = k;
      const ClusterAssignment a = kmeans(m, k, km_seed, km);
      p = select_cluster_poison(a, budget, derive_seed(seed, "cluster_sample"));
      extra["kmeans"] = {{"k", a.k},
                         {"inertia", a.inertia},
                         {"iterations", a.iterations},
                         {"cluster_sizes", a.cluster_sizes()}};
      break;
    }
    case SelectionMethod::kContrastive:
    case SelectionMethod::kPositiveOnly:
    case SelectionMethod::kNegativeOnly: {
      const ScoreMode mode = method == SelectionMethod::kContrastive ? ScoreMode::kContrastive
                             : method == SelectionMethod::kPositiveOnly
                                 ? ScoreMode::kPositiveOnly
                                 : ScoreMode::kNegativeOnly;
      scores = contrastive_scores(m, budget, mode, sim);
      p = select_from_scores(m, *scores, sim);
      extra["anchor_score"] = scores->scores[scores->argmax_index];
      break;
    }
    case SelectionMethod::kInfoNce: {
      const double tau = method_cfg.value("tau", 1.0);
      cfg.raw["method"]["tau"] = tau;
      p = select_infonce(m, budget, tau, sim);
      break;
    }
    case SelectionMethod::kOracle:
      p = brute_force_tcs(m, budget);
      extra["tcs"] = tcs_value(m, p);
      break;
  }

  const fs::path set_path = out_dir / "poison_set.txt";
  save_poison_set(p, set_path);
  if (scores && method_cfg.value("dump_scores", false)) {
    std::string csv = "index,score\n";
    char buf[64];
    for (std::size_t i = 0; i < scores->scores.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, scores->scores[i]);
      csv += buf;
    }
    write_text(out_dir / "scores.csv", csv);
  }

  json summary = {
      {"command", "select"},
      {"config", cfg.raw},
      {"n", m.rows()},
      {"d", m.dim()},
      {"budget_m", budget},
      {"poison_set", poison_json(p)},
      {"poison_set_path", "poison_set.txt"},
      {"details", extra},
      {"ccr", labels ? report_json(ccr(*labels, p)) : json(nullptr)},
  };
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

TriggerConfig trigger_from_config(const Config& cfg, std::uint64_t seed, const ImageTensor& first) {
  const json t = cfg.raw.value("trigger", json::object());
  TriggerConfig tc;
  const std::string kind = t.value("kind", std::string("patch"));
  if (kind == "patch") {
    tc.kind = TriggerKind::kPatch;
  } else if (kind == "blend") {
    tc.kind = TriggerKind::kBlend;
  } else {
    throw InvalidArgument("unknown trigger kind '" + kind + "'");
  }
  const std::string placement = t.value("placement", std::string("fixed_corner"));
  if (placement == "fixed_corner") {
    tc.placement = Placement::kFixedCorner;
  } else if (placement == "random") {
    tc.placement = Placement::kRandom;
  } else {
    throw InvalidArgument("unknown trigger placement '" + placement + "'");
  }
  tc.scale_ratio = t.value("scale_ratio", tc.scale_ratio);
  tc.alpha = t.value("alpha", tc.alpha);
  tc.seed = derive_seed(seed, "trigger");
  if (t.contains("pattern") && !t["pattern"].is_null()) {
    fs::path p = t["pattern"].get<std::string>();
    if (!p.is_absolute()) p = cfg.base_dir / p;
    tc.pattern = load_image(p);
    tc.pattern_source = t["pattern"].get<std::string>();
  } else if (tc.kind == TriggerKind::kPatch) {
    tc.pattern = default_patch(first.c);
    tc.pattern_source = "builtin:white3x3";
  } else {
    tc.pattern = synthetic_pattern(first.h, first.w, first.c);
    tc.pattern_source = "builtin:synthetic_stripes";
  }
  tc.validate();
  return tc;
}

json cmd_inject(Config& cfg, std::uint64_t seed, const std::string& poison_path) {
  if (poison_path.empty()) throw InvalidArgument("--poison is required");
  const auto entries = load_dataset_manifest(cfg.path_of("dataset_manifest"));
  if (entries.empty()) throw InvalidArgument("dataset manifest is empty");
  const PoisonSet p = load_poison_set(poison_path);
  for (const std::size_t idx : p.indices) {
    if (idx >= entries.size()) {
      throw InvalidArgument("poison index " + std::to_string(idx) + " out of range for " +
                            std::to_string(entries.size()) + " images");
    }
  }
  const TriggerConfig tc = trigger_from_config(cfg, seed, load_image(entries.front().path));
  const fs::path out_dir = cfg.path_of("output_dir");
  const PoisonManifest manifest = poison_dataset(entries, p, tc, out_dir);
  return {
      {"command", "inject"},
      {"config", cfg.raw},
      {"n", entries.size()},
      {"poisoned_count", manifest.poisoned_count},
      {"trigger_kind", to_string(tc.kind)},
      {"manifest", "poison_manifest.json"},
  };
}

json cmd_eval(const std::string& mode, const std::string& labels_path,
              const std::string& predictions_path, const std::string& poison_path) {
  if (labels_path.empty()) throw InvalidArgument("--labels is required");
  const LabelVector y = load_labels(labels_path);
  if (mode == "ccr") {
    if (poison_path.empty()) throw InvalidArgument("ccr needs --poison");
    return report_json(ccr(y, load_poison_set(poison_path)));
  }
  if (predictions_path.empty()) throw InvalidArgument(mode + " needs --predictions");
  const LabelVector f = load_labels(predictions_path);
  if (mode == "accuracy") {
    return {{"metric", "accuracy"},
            {"value", accuracy(y, f)},
            {"per_class", json::array()},
            {"argmax_class", nullptr},
            {"warnings", json::array()}};
  }
  if (mode != "asr") throw InvalidArgument("unknown eval mode '" + mode + "'");
  const EvalReport attack = asr(y, f);
  json report = report_json(attack);
  if (!poison_path.empty()) {
    const EvalReport consistency = ccr(y, load_poison_set(poison_path));
    report["ccr_argmax_class"] =
        consistency.argmax_class ? json(*consistency.argmax_class) : json(nullptr);
    report["argmax_agreement"] = argmax_agrees(attack, consistency);
  }
  return report;
}

json cmd_oracle(Config& cfg) {
  const EmbeddingMatrix m = load_normalized(cfg);
  const std::size_t budget = resolve_budget(cfg, m.rows());
  const PoisonSet oracle = brute_force_tcs(m, budget);
  const PoisonSet heuristic = select_contrastive(m, budget, similarity_options(cfg));
  const double oracle_tcs = tcs_value(m, oracle);
  const double heuristic_tcs = tcs_value(m, heuristic);
  return {
      {"command", "oracle"},
      {"config", cfg.raw},
      {"n", m.rows()},
      {"budget_m", budget},
      {"oracle_tcs", oracle_tcs},
      {"heuristic_tcs", heuristic_tcs},
      {"ratio", oracle_tcs > 0.0 ? json(heuristic_tcs / oracle_tcs) : json(nullptr)},
      {"oracle_set", oracle.indices},
      {"heuristic_set", heuristic.indices},
      {"heuristic_anchor", *heuristic.anchor},
  };
}

json cmd_bench(std::size_t n, std::size_t d, std::size_t budget, std::size_t block,
               std::uint64_t seed) {
  MixtureSpec spec;
  spec.n = n;
  spec.d = d;
  spec.components = std::min<std::size_t>(100, d);
  spec.seed = seed;
  const EmbeddingMatrix m = normalize_rows(gaussian_mixture(spec).embeddings);

  SimilarityOptions opts;
  opts.block_size = block;
  const auto start = std::chrono::steady_clock::now();
  const ContrastiveScores scores = contrastive_scores(m, budget, ScoreMode::kContrastive, opts);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return {
      {"command", "bench"},
      {"n", n},
      {"d", d},
      {"budget_m", budget},
      {"block_size", block},
      {"threads", thread_count()},
      {"seconds", seconds},
      {"peak_rss_mb", static_cast<double>(usage.ru_maxrss) / 1024.0},
      {"argmax_index", scores.argmax_index},
      {"max_score", scores.scores[scores.argmax_index]},
  };
}

json error_json(const char* kind, const std::string& message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"No-label backdoor poison selection, trigger injection and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::string poison_path;
  std::string labels_path;
  std::string predictions_path;
  std::string mode;
  std::size_t bench_n = 100000;
  std::size_t bench_d = 128;
  std::size_t bench_m = 600;
  std::size_t bench_block = SimilarityOptions{}.block_size;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "JSON pipeline config");
    if (needs_config) opt->required();
    sub->add_option("--seed", seed, "Top-level seed (overrides config)");
    sub->add_option("--out", out_path, "Also write the JSON report here");
  };

  auto* select = app.add_subcommand("select", "Choose a poison set from embeddings");
  common(select, true);
  auto* inject = app.add_subcommand("inject", "Apply a trigger to the poison set images");
  common(inject, true);
  inject->add_option("--poison", poison_path, "Poison index file")->required();
  auto* eval = app.add_subcommand("eval", "Compute CCR, ASR or accuracy");
  common(eval, false);
  eval->add_option("--mode", mode, "ccr | asr | accuracy")->required();
  eval->add_option("--labels", labels_path, "True labels, one per line")->required();
  eval->add_option("--predictions", predictions_path, "Predicted labels, one per line");
  eval->add_option("--poison", poison_path, "Poison index file");
  auto* oracle = app.add_subcommand("oracle", "Compare the heuristic with exhaustive TCS search");
  common(oracle, true);
  auto* bench = app.add_subcommand("bench", "Time contrastive scoring on synthetic data");
  common(bench, false);
  bench->add_option("--n", bench_n, "Rows");
  bench->add_option("--d", bench_d, "Dimension");
  bench->add_option("--budget", bench_m, "Poison budget M");
  bench->add_option("--block-size", bench_block, "Anchor rows per block");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    err << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    emit(error_json("usage_error", e.what()), out, "");
    err << app.help();
    return kErrorExit;
  }

  try {
    json report;
    if (select->parsed()) {
      Config cfg = load_config(config_path);
      report = cmd_select(cfg, resolve_seed(cfg, seed));
    } else if (inject->parsed()) {
      Config cfg = load_config(config_path);
      report = cmd_inject(cfg, resolve_seed(cfg, seed), poison_path);
    } else if (eval->parsed()) {
      report = cmd_eval(mode, labels_path, predictions_path, poison_path);
    } else if (oracle->parsed()) {
      Config cfg = load_config(config_path);
      resolve_seed(cfg, seed);
      report = cmd_oracle(cfg);
    } else {
      report = cmd_bench(bench_n, bench_d, bench_m, bench_block, seed.value_or(0));
    }
    emit(report, out, out_path);
    return 0;
  } catch (const Error& e) {
    const json record = error_json(e.kind(), e.what());
    out << record.dump(2) << "\n";
    if (!out_path.empty()) {
      try {
        write_text(out_path, record.dump(2) + "\n");
      } catch (const Error&) {
      }
    }
  } catch (const std::exception& e) {
    out << error_json("error", e.what()).dump(2) << "\n";
  }
  return kErrorExit;
}

}  // namespace nlb::cli
