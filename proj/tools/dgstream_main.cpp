// dgstream command-line driver: train / gen / deps / eval / bench.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dgstream/dep_graph.hpp"
#include "dgstream/model.hpp"
#include "dgstream/stream_io.hpp"
#include "dgstream/synthetic.hpp"
#include "dgstream/trainer.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

struct GlobalOpts {
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool deterministic = true;
  std::string metrics_out;
};

struct TrainOpts {
  std::string stream_path;
  std::string mode = "slide";
  std::string model = "dyrep-lite";
  std::size_t window = 200;
  std::size_t stride = 40;
  std::size_t min_window = 100;
  std::size_t max_window = 300;
  double stride_frac = 0.2;
  std::size_t epochs = 20;
  std::size_t negatives = 5;
  double lr = 0.05;
  std::string optimizer = "sgd";
  std::size_t dim = 64;
  int hops = 1;
  std::string dep_mode = "paper";
  bool pipeline = false;
  bool no_eval = false;
  bool lenient = false;
  std::string params_in, params_out;
};

dgstream::TrainConfig to_config(const TrainOpts& t, const GlobalOpts& g) {
  dgstream::TrainConfig cfg;
  cfg.mode = dgstream::parse_mode(t.mode);
  cfg.window = t.window;
  cfg.stride = t.stride;
  cfg.min_window = t.min_window;
  cfg.max_window = t.max_window;
  cfg.stride_frac = t.stride_frac;
  cfg.epochs = t.epochs;
  cfg.negatives = t.negatives;
  cfg.lr = t.lr;
  if (t.optimizer == "sgd") cfg.optimizer = dgstream::OptMethod::SGD;
  else if (t.optimizer == "adam") cfg.optimizer = dgstream::OptMethod::Adam;
  else dgstream::raise(dgstream::Errc::InvalidArgument, "unknown optimizer: " + t.optimizer);
  cfg.dim = t.dim;
  cfg.hops = t.hops;
  if (t.dep_mode == "paper") cfg.dep_mode = dgstream::DepMode::Paper;
  else if (t.dep_mode == "symmetric") cfg.dep_mode = dgstream::DepMode::Symmetric;
  else dgstream::raise(dgstream::Errc::InvalidArgument, "unknown dep mode: " + t.dep_mode);
  cfg.pipeline = t.pipeline;
  cfg.evaluate = !t.no_eval;
  cfg.workers = g.workers;
  cfg.deterministic = g.deterministic;
  cfg.seed = g.seed;
  cfg.validate();
  return cfg;
}

json config_json(const std::string& command, const TrainOpts& t, const GlobalOpts& g) {
  return json{{"schema", 1},
              {"command", command},
              {"stream", t.stream_path},
              {"mode", t.mode},
              {"model", t.model},
              {"window", t.window},
              {"stride", t.stride},
              {"L", t.min_window},
              {"H", t.max_window},
              {"stride_frac", t.stride_frac},
              {"epochs", t.epochs},
              {"negatives", t.negatives},
              {"lr", t.lr},
              {"optimizer", t.optimizer},
              {"dim", t.dim},
              {"hops", t.hops},
              {"dep_mode", t.dep_mode},
              {"pipeline", t.pipeline},
              {"evaluate", !t.no_eval},
              {"workers", g.workers},
              {"deterministic", g.deterministic},
              {"seed", g.seed}};
}

void add_window_flags(CLI::App* cmd, TrainOpts& t) {
  cmd->add_option("--mode", t.mode, "Training mode: batch | slide | adaslide")
      ->check(CLI::IsMember({"batch", "slide", "adaslide"}))
      ->capture_default_str();
  cmd->add_option("--window,-s", t.window, "Fixed window / batch size")->capture_default_str();
  cmd->add_option("--stride,-d", t.stride, "Slide stride (events)")->capture_default_str();
  cmd->add_option("--L", t.min_window, "Adaptive minimum window size")->capture_default_str();
  cmd->add_option("--H", t.max_window, "Adaptive maximum window size")->capture_default_str();
  cmd->add_option("--stride-frac", t.stride_frac, "Adaptive stride as a fraction of window size")
      ->capture_default_str();
  cmd->add_option("--hops,-k", t.hops, "Subgraph hop count")->capture_default_str();
  cmd->add_option("--dep-mode", t.dep_mode, "Dependency test: paper | symmetric")
      ->check(CLI::IsMember({"paper", "symmetric"}))
      ->capture_default_str();
}

void add_model_flags(CLI::App* cmd, TrainOpts& t) {
  cmd->add_option("--model", t.model, "Model: dyrep-lite | diffusion-lite")
      ->check(CLI::IsMember({"dyrep-lite", "diffusion-lite"}))
      ->capture_default_str();
  cmd->add_option("--dim", t.dim, "Embedding dimensionality")->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "Training epochs per window")->capture_default_str();
  cmd->add_option("--negatives", t.negatives, "Negative samples per positive")
      ->capture_default_str();
  cmd->add_option("--lr", t.lr, "Learning rate")->capture_default_str();
  cmd->add_option("--optimizer", t.optimizer, "Optimizer: sgd | adam")
      ->check(CLI::IsMember({"sgd", "adam"}))
      ->capture_default_str();
}

struct MetricsOut {
  std::unique_ptr<std::ofstream> file;
  std::ostream* stream = &std::cout;
};

MetricsOut open_metrics(const GlobalOpts& g) {
  MetricsOut out;
  if (!g.metrics_out.empty()) {
    out.file = std::make_unique<std::ofstream>(g.metrics_out);
    if (!*out.file) {
      dgstream::raise(dgstream::Errc::IoFailure, "cannot open " + g.metrics_out);
    }
    out.stream = out.file.get();
  }
  return out;
}

void emit_config(const json& cfg, const MetricsOut& out) {
  std::cout << cfg.dump() << "\n";
  if (out.file) *out.file << cfg.dump() << "\n";
}

int cmd_train(const TrainOpts& t, const GlobalOpts& g) {
  dgstream::TrainConfig cfg = to_config(t, g);
  dgstream::GraphStream stream = dgstream::read_stream(t.stream_path, t.lenient);
  auto model = dgstream::make_model<float>(t.model, t.dim, g.seed);
  if (!t.params_in.empty()) model->load(t.params_in);
  MetricsOut out = open_metrics(g);
  emit_config(config_json("train", t, g), out);
  dgstream::MetricsSink sink(out.stream);
  dgstream::Trainer<float> trainer(stream, *model, cfg, sink);
  trainer.run();
  json summary = sink.summary();
  summary["degraded_negative_samples"] = trainer.degraded_negative_samples();
  *out.stream << summary.dump() << "\n";
  if (out.file) std::cout << summary.dump() << "\n";
  if (!t.params_out.empty()) model->save(t.params_out);
  return 0;
}

int cmd_eval(const TrainOpts& t, const GlobalOpts& g) {
  dgstream::TrainConfig cfg = to_config(t, g);
  cfg.epochs = 1;
  dgstream::GraphStream stream = dgstream::read_stream(t.stream_path, t.lenient);
  auto model = dgstream::make_model<float>(t.model, t.dim, g.seed);
  if (!t.params_in.empty()) model->load(t.params_in);
  MetricsOut out = open_metrics(g);
  emit_config(config_json("eval", t, g), out);
  dgstream::MetricsSink sink(nullptr);
  dgstream::Trainer<float> trainer(stream, *model, cfg, sink);
  double auc = trainer.evaluate_slice(0, stream.size(), 0, 0);
  json result{{"schema", 1}, {"events", stream.size()}, {"auc", auc}};
  *out.stream << result.dump() << "\n";
  if (out.file) std::cout << result.dump() << "\n";
  return 0;
}

int cmd_gen(const dgstream::SyntheticConfig& syn, const std::string& out_path,
            const GlobalOpts& g) {
  json cfg{{"schema", 1},          {"command", "gen"},
           {"out", out_path},      {"nodes", syn.num_nodes},
           {"events", syn.num_events}, {"cluster_min", syn.cluster_min},
           {"cluster_max", syn.cluster_max}, {"pool", syn.cluster_node_pool},
           {"edge_fraction", syn.edge_fraction}, {"seed", g.seed}};
  std::cout << cfg.dump() << "\n";
  dgstream::SyntheticStream s = dgstream::generate_synthetic_stream(syn);
  dgstream::write_stream(s.stream, out_path);
  json result{{"schema", 1},
              {"events", s.stream.size()},
              {"clusters", s.cluster_starts.size()},
              {"nodes", s.stream.initial.node_count}};
  std::cout << result.dump() << "\n";
  return 0;
}

int cmd_deps(const TrainOpts& t, const GlobalOpts& g, int radius, bool oracle) {
  dgstream::TrainConfig cfg = to_config(t, g);
  dgstream::GraphStream stream = dgstream::read_stream(t.stream_path, t.lenient);
  MetricsOut out = open_metrics(g);
  emit_config(config_json("deps", t, g), out);
  dgstream::DynGraph graph = dgstream::DynGraph::from_initial(stream.initial);

  std::size_t pos = 0;
  std::size_t index = 0;
  bool all_match = true;
  std::size_t checked = 0;
  for (;;) {
    dgstream::Window w;
    if (cfg.mode == dgstream::TrainMode::AdaSlide) {
      w = dgstream::next_adaptive_window(stream, pos, cfg.min_window, cfg.max_window);
      if (w.empty()) break;
      pos += dgstream::adaptive_stride(w.size(), cfg.stride_frac);
    } else {
      auto [fw, np] = dgstream::next_fixed_window(stream, pos, cfg.window, cfg.fixed_stride());
      if (fw.empty()) break;
      w = fw;
      pos = np;
    }
    auto analysis = dgstream::build_dep_graph(stream, w, graph, cfg.hops, radius, cfg.dep_mode);
    *out.stream << "# window " << index << ": begin=" << w.begin << " events=" << w.size()
                << " parallelism=" << analysis.graph.parallelism() << "\n";
    *out.stream << "chains: " << analysis.graph.chain_count << "\n";
    dgstream::write_dot(analysis.graph, *out.stream);
    if (oracle) {
      if (w.size() <= 64) {
        auto built = dgstream::transitive_closure(analysis.graph);
        auto naive = dgstream::transitive_closure_oracle(analysis.events, cfg.dep_mode);
        bool match = built == naive;
        all_match = all_match && match;
        ++checked;
        *out.stream << "oracle: " << (match ? "MATCH" : "MISMATCH") << "\n";
      } else {
        *out.stream << "oracle: SKIPPED (window > 64 events)\n";
      }
    }
    ++index;
  }
  if (oracle) {
    *out.stream << "oracle summary: " << (all_match && checked > 0 ? "MATCH" : "MISMATCH") << " ("
                << checked << " windows)\n";
    if (!(all_match && checked > 0)) return 2;
  }
  return 0;
}

int cmd_bench(const TrainOpts& t, const GlobalOpts& g, bool ablation) {
  dgstream::GraphStream stream = dgstream::read_stream(t.stream_path, t.lenient);
  MetricsOut out = open_metrics(g);
  emit_config(config_json("bench", t, g), out);

  auto run_once = [&](std::size_t workers, bool pipeline, bool pwd, bool pda, bool pes,
                      double* da_fraction, double* da_overlap) {
    dgstream::TrainConfig cfg = to_config(t, g);
    cfg.workers = workers;
    cfg.pipeline = pipeline;
    cfg.pipe_wd = pwd;
    cfg.pipe_da = pda;
    cfg.pipe_es = pes;
    cfg.evaluate = false;      // benchmark measures training throughput
    cfg.deterministic = false; // benchmarks run with free merge order
    auto model = dgstream::make_model<float>(t.model, t.dim, g.seed);
    dgstream::MetricsSink sink(nullptr);
    dgstream::Trainer<float> trainer(stream, *model, cfg, sink);
    auto begin = std::chrono::steady_clock::now();
    trainer.run();
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - begin)
                    .count();
    double total_stage = sink.stage_total_ms("wd") + sink.stage_total_ms("da") +
                         sink.stage_total_ms("es") + sink.stage_total_ms("pt");
    if (da_fraction) {
      *da_fraction = total_stage > 0 ? sink.stage_total_ms("da") / total_stage : 0.0;
    }
    if (da_overlap) *da_overlap = sink.da_overlap_fraction();
    return ms;
  };

  double da_fraction = 0.0;
  double seq_ms = run_once(1, false, false, false, false, &da_fraction, nullptr);
  double par_ms = run_once(g.workers, false, false, false, false, nullptr, nullptr);
  double da_overlap = 0.0;
  double pipe_ms = run_once(g.workers, true, true, true, true, nullptr, &da_overlap);

  json result{{"schema", 1},
              {"workers", g.workers},
              {"sequential_ms", seq_ms},
              {"parallel_ms", par_ms},
              {"pipeline_ms", pipe_ms},
              {"parallel_speedup", seq_ms / par_ms},
              {"pipeline_speedup", par_ms / pipe_ms},
              {"da_time_fraction", da_fraction},
              {"da_overlap_fraction", da_overlap}};
  if (ablation) {
    // Drop one stage from the pipeline at a time; the costliest stage to
    // lose is the one whose overlap buys the most.
    json ab;
    ab["full"] = pipe_ms;
    ab["no_wd"] = run_once(g.workers, true, false, true, true, nullptr, nullptr);
    ab["no_da"] = run_once(g.workers, true, true, false, true, nullptr, nullptr);
    ab["no_es"] = run_once(g.workers, true, true, true, false, nullptr, nullptr);
    result["ablation"] = ab;
  }
  *out.stream << result.dump() << "\n";
  if (out.file) std::cout << result.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-stream dynamic GNN training engine"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file; flags win on conflict");
  app.allow_config_extras(CLI::config_extras_mode::error);

  GlobalOpts g;
  TrainOpts t;
  app.add_option("--seed", g.seed, "Root RNG seed")->capture_default_str();
  app.add_option("--workers", g.workers, "Worker threads for parallel training")
      ->capture_default_str();
  app.add_flag("--deterministic,!--no-deterministic", g.deterministic,
               "Reduce gradients and commits in event order (bit-reproducible)")
      ->capture_default_str();
  app.add_option("--metrics-out", g.metrics_out, "Write JSON-lines metrics to this file");

  auto* train = app.add_subcommand("train", "Train a model over an event stream");
  train->fallthrough();
  train->add_option("--stream", t.stream_path, "Event stream file")->required();
  add_window_flags(train, t);
  add_model_flags(train, t);
  train->add_flag("--pipeline", t.pipeline, "Overlap WD/DA/ES/PT stages across windows");
  train->add_flag("--no-eval", t.no_eval, "Skip per-epoch AUC evaluation");
  train->add_flag("--lenient", t.lenient, "Demote stream validation failures to warnings");
  train->add_option("--params-in", t.params_in, "Load model parameters before training");
  train->add_option("--params-out", t.params_out, "Save model parameters after training");

  auto* gen = app.add_subcommand("gen", "Generate a synthetic planted-locality stream");
  gen->fallthrough();
  dgstream::SyntheticConfig syn;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output stream file")->required();
  gen->add_option("--nodes", syn.num_nodes, "Node count")->capture_default_str();
  gen->add_option("--events", syn.num_events, "Event count")->capture_default_str();
  gen->add_option("--cluster-min", syn.cluster_min, "Minimum cluster length")
      ->capture_default_str();
  gen->add_option("--cluster-max", syn.cluster_max, "Maximum cluster length")
      ->capture_default_str();
  gen->add_option("--pool", syn.cluster_node_pool, "Nodes per cluster pool")
      ->capture_default_str();
  gen->add_option("--edge-frac", syn.edge_fraction, "Fraction of association (add_edge) events")
      ->capture_default_str();

  auto* deps = app.add_subcommand("deps", "Print per-window event dependency graphs");
  deps->fallthrough();
  deps->add_option("--stream", t.stream_path, "Event stream file")->required();
  add_window_flags(deps, t);
  int radius = 0;
  bool oracle = false;
  deps->add_option("--radius", radius, "Update-set radius: 0 (event nodes) or 1 (neighbors)")
      ->check(CLI::Range(0, 1))
      ->capture_default_str();
  deps->add_flag("--oracle", oracle, "Cross-check closures against the naive pairwise oracle");
  deps->add_flag("--lenient", t.lenient, "Demote stream validation failures to warnings");

  auto* eval = app.add_subcommand("eval", "Forward-only evaluation of a model over a stream");
  eval->fallthrough();
  eval->add_option("--stream", t.stream_path, "Event stream file")->required();
  add_window_flags(eval, t);
  add_model_flags(eval, t);
  eval->add_option("--params-in,--params", t.params_in, "Model parameters to evaluate");
  eval->add_flag("--lenient", t.lenient, "Demote stream validation failures to warnings");

  auto* bench = app.add_subcommand("bench", "Measure parallel and pipeline speedups");
  bench->fallthrough();
  bench->add_option("--stream", t.stream_path, "Event stream file")->required();
  add_window_flags(bench, t);
  add_model_flags(bench, t);
  bool ablation = false;
  bench->add_flag("--ablation", ablation, "Also time the pipeline with each stage removed");
  bench->add_flag("--lenient", t.lenient, "Demote stream validation failures to warnings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (train->parsed()) return cmd_train(t, g);
    if (gen->parsed()) {
      syn.seed = g.seed;
      return cmd_gen(syn, gen_out, g);
    }
    if (deps->parsed()) return cmd_deps(t, g, radius, oracle);
    if (eval->parsed()) return cmd_eval(t, g);
    if (bench->parsed()) return cmd_bench(t, g, ablation);
  } catch (const dgstream::Error& e) {
    bool config_class = e.code() == dgstream::Errc::InvalidArgument ||
                        e.code() == dgstream::Errc::MalformedLine ||
                        e.code() == dgstream::Errc::UnknownKind ||
                        e.code() == dgstream::Errc::NegativeTimestamp ||
                        e.code() == dgstream::Errc::ValidationFailed;
    std::cerr << "error: " << e.what() << "\n";
    return config_class ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
