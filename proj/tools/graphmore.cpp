// graphmore command-line entry point.
//
// Exit codes: 0 success, 2 usage or input error, 3 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "graphmore/graphmore.hpp"

namespace fs = std::filesystem;
using namespace graphmore;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::optional<std::size_t> threads;
  bool deterministic = false;
  bool verbose = false;

  std::size_t resolved_threads() const {
    if (deterministic) return 1;
    if (threads) return std::max<std::size_t>(1, *threads);
    if (const char* env = std::getenv("GRAPHMORE_THREADS")) {
      try {
        return std::max<std::size_t>(1, std::stoul(env));
      } catch (const std::exception&) {
        throw InputError(std::string("GRAPHMORE_THREADS is not a number: ") + env);
      }
    }
    return 1;
  }
};

std::string real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
}

// --- generate ---------------------------------------------------------------

struct GenerateOptions {
  std::size_t nodes = 0;
  std::string mix;
  std::uint64_t seed = 0;
  std::size_t feature_dim = kDefaultFeatureDim;
  std::string out;
};

int cmd_generate(const GenerateOptions& o) {
  const auto spec = spec_from_mix(o.nodes, parse_mix(o.mix), o.seed, o.feature_dim);
  const Graph g = generate_heterogeneous(spec);
  const fs::path dir(o.out);
  ensure_dir(dir);

  std::ostringstream edges;
  for (auto [u, v] : g.edges()) edges << u << ' ' << v << '\n';
  write_text(dir / "edges.txt", edges.str());

  const Matrix& x = *g.features();
  std::ostringstream feats;
  feats << x.rows << ' ' << x.cols << '\n';
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) feats << (c ? " " : "") << real(x(r, c));
    feats << '\n';
  }
  write_text(dir / "features.txt", feats.str());

  std::ostringstream labels;
  for (std::size_t v = 0; v < g.n_nodes(); ++v) labels << v << ' ' << (*g.labels())[v] << '\n';
  write_text(dir / "labels.txt", labels.str());

  write_text(dir / "manifest.txt", "mix " + o.mix + "\n" + spec.manifest());
  std::cout << "wrote " << g.n_nodes() << " nodes, " << g.n_edges() << " edges to " << dir.string() << "\n";
  return 0;
}

// --- analyze-curvature -----------------------------------------------------

struct CurvatureOptions {
  std::string graph;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  std::size_t bins = 20;
  std::string out;
};

int cmd_analyze_curvature(const CurvatureOptions& o) {
  const Graph g = load_dataset(o.graph);
  const auto h = curvature_histogram(g, o.samples, o.seed, o.bins);
  if (h.empty) throw InputError(o.graph + ": no node has two neighbours, curvature is undefined");
  if (!o.out.empty()) {
    std::ostringstream csv;
    csv << "left,right,count\n";
    for (const auto& b : h.bins) csv << real(b.left) << ',' << real(b.right) << ',' << b.count << '\n';
    const fs::path p(o.out);
    if (p.has_parent_path()) ensure_dir(p.parent_path());
    write_text(p, csv.str());
  }
  std::cout << "triangles " << h.values.size() << (h.exhaustive ? " (exhaustive)" : " (sampled)") << "\n"
            << "mean " << real(h.mean) << "\n"
            << "fraction_negative " << real(h.fraction_negative) << "\n"
            << "fraction_nonnegative " << real(h.fraction_nonnegative) << "\n"
            << "fraction_positive " << real(h.fraction_positive) << "\n";
  return 0;
}

// --- train / evaluate --------------------------------------------------------

struct DataOptions {
  std::string graph;
  std::string features;
  std::string labels;

  Graph load() const {
    auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };
    return load_dataset(graph, opt(features), opt(labels));
  }
};

struct TrainOptions {
  DataOptions data;
  std::string task;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::string pairs;
};

PairMode resolve_pair_mode(const std::string& flag, std::size_t n) {
  if (flag.empty()) return default_pair_mode(n);
  return flag == "full" ? PairMode::full : PairMode::sampled;
}

void write_per_node(const fs::path& dir, const EvalReport& r) {
  std::ostringstream pn;
  pn << "node_id,distortion\n";
  for (std::size_t v = 0; v < r.per_node_distortion.size(); ++v) pn << v << ',' << format_real(r.per_node_distortion[v]) << '\n';
  write_text(dir / "per_node_distortion.csv", pn.str());
}

void print_summary(const EvalReport& r) {
  auto show = [](const char* k, const std::optional<double>& v) {
    if (v) std::cout << k << ' ' << real(*v) << '\n';
  };
  show("auc", r.auc);
  show("ap", r.ap);
  show("weighted_f1", r.weighted_f1);
  show("macro_f1", r.macro_f1);
  show("micro_f1", r.micro_f1);
  std::cout << "avg_distortion " << real(r.avg_distortion) << '\n';
}

int cmd_train(const TrainOptions& o, const GlobalOptions& global) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_config(o.config);
  if (!o.task.empty()) cfg.task = parse_task(o.task);
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (global.deterministic) cfg.deterministic = true;
  cfg.threads = global.resolved_threads();
  cfg.validate();
  if (cfg.task == Task::node_classification && o.data.labels.empty())
    throw InputError("--task nc requires --labels");

  const Graph g = o.data.load();
  const fs::path dir(o.out);
  ensure_dir(dir);
  write_text(dir / "config.echo", echo_config(cfg));

  Trainer trainer(g, cfg);
  std::ofstream log_csv(dir / "log.csv", std::ios::binary);
  if (!log_csv) throw InputError("cannot write " + (dir / "log.csv").string());
  log_csv << "epoch,task_loss,distortion_loss,val_metric\n";
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& row) {
    log_csv << row.epoch << ',' << format_real(row.task_loss) << ',' << format_real(row.distortion_loss) << ','
            << format_real(row.val_metric) << '\n';
    log_csv.flush();
    log().info("epoch {} task {:.6f} distortion {:.6f} val {:.6f}", row.epoch, row.task_loss, row.distortion_loss,
               row.val_metric);
  };
  try {
    trainer.run(hooks);
  } catch (const DivergenceError&) {
    save_checkpoint(trainer.model(), cfg, g.n_nodes(), dir / "checkpoint.json");
    throw;
  }
  save_checkpoint(trainer.model(), cfg, g.n_nodes(), dir / "checkpoint.json");
  const EvalReport report = trainer.evaluate(resolve_pair_mode(o.pairs, g.n_nodes()));
  emit_report(report, dir);
  std::cout << "best_epoch " << trainer.best_epoch() << '\n';
  print_summary(report);
  return 0;
}

struct EvaluateOptions {
  DataOptions data;
  std::string run;
  std::string pairs;
};

int cmd_evaluate(const EvaluateOptions& o, const GlobalOptions& global) {
  const fs::path dir(o.run);
  auto loaded = load_checkpoint(dir / "checkpoint.json");
  TrainConfig& cfg = loaded.config;
  cfg.threads = global.resolved_threads();
  if (global.deterministic) cfg.deterministic = true;
  if (cfg.task == Task::node_classification && o.data.labels.empty())
    throw InputError("evaluating a node classification run requires --labels");
  const Graph g = o.data.load();
  if (g.n_nodes() != loaded.n_nodes)
    throw InputError("graph has " + std::to_string(g.n_nodes()) + " nodes but the checkpoint was trained on " +
                     std::to_string(loaded.n_nodes));
  const PreparedData data = prepare_data(g, cfg);
  if (data.features.cols != loaded.model.d_in())
    throw InputError("feature dimension " + std::to_string(data.features.cols) + " does not match checkpoint d_in " +
                     std::to_string(loaded.model.d_in()));
  const EvalReport report = evaluate_model(loaded.model, data, cfg, resolve_pair_mode(o.pairs, g.n_nodes()));
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  write_per_node(dir, report);
  print_summary(report);
  return 0;
}

void add_data_options(CLI::App* sub, DataOptions& d) {
  sub->add_option("--graph", d.graph, "Edge list, one \"u v\" pair per line")->required()->check(CLI::ExistingFile);
  sub->add_option("--features", d.features, "Feature matrix with an \"N d\" header")->check(CLI::ExistingFile);
  sub->add_option("--labels", d.labels, "Node labels, one \"node_id class_id\" per line")->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture of Riemannian experts for graph embedding"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions global;
  app.add_option("--threads", global.threads, "Worker threads (default: $GRAPHMORE_THREADS or 1)")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", global.deterministic, "Single worker, ordered reductions");
  app.add_flag("-v,--verbose", global.verbose, "Log progress to stderr");

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a seeded synthetic graph with mixed substructures");
  g->add_option("--nodes", gen.nodes, "Approximate node count")->required()->check(CLI::PositiveNumber);
  g->add_option("--mix", gen.mix, "Shares, e.g. tree:0.5,cycle:0.4,inter:0.1")->required();
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--feature-dim", gen.feature_dim, "Feature columns")->check(CLI::Range(2, 4096));
  g->add_option("--out", gen.out, "Output directory")->required();

  CurvatureOptions curv;
  auto* c = app.add_subcommand("analyze-curvature", "Histogram of sectional curvature over sampled triangles");
  c->add_option("--graph", curv.graph, "Edge list")->required()->check(CLI::ExistingFile);
  c->add_option("--samples", curv.samples, "Triangle samples (exhaustive when fewer exist)");
  c->add_option("--seed", curv.seed, "Random seed");
  c->add_option("--bins", curv.bins, "Histogram bins")->check(CLI::PositiveNumber);
  c->add_option("--out", curv.out, "Histogram CSV path");

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Train a model and write a run directory");
  add_data_options(t, train.data);
  t->add_option("--task", train.task, "lp or nc (overrides the config)")->check(CLI::IsMember({"lp", "nc"}));
  t->add_option("--config", train.config, "key = value config file")->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_option("--seed", train.seed, "Seed (overrides the config)");
  t->add_option("--epochs", train.epochs, "Epoch cap (overrides the config)")->check(CLI::PositiveNumber);
  t->add_option("--pairs", train.pairs, "Distortion pairs for the final report: full or sampled")
      ->check(CLI::IsMember({"full", "sampled"}));

  EvaluateOptions eval;
  auto* e = app.add_subcommand("evaluate", "Recompute metrics from a run's checkpoint");
  e->add_option("--run", eval.run, "Run directory written by train")->required()->check(CLI::ExistingDirectory);
  add_data_options(e, eval.data);
  e->add_option("--pairs", eval.pairs, "full or sampled (default: full up to 2000 nodes)")
      ->check(CLI::IsMember({"full", "sampled"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }
  if (global.verbose) log().set_level(spdlog::level::info);

  try {
    if (*g) return cmd_generate(gen);
    if (*c) return cmd_analyze_curvature(curv);
    if (*t) return cmd_train(train, global);
    if (*e) return cmd_evaluate(eval, global);
  } catch (const DivergenceError& err) {
    std::cerr << "error: training diverged: " << err.what() << " (last finite checkpoint kept)\n";
    return kExitRuntime;
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const IngestionError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const ReportError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& err) {
    // ConfigError, SpecError and UsageError
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
