// Command-line driver: train, eval, explain, counterfactual, sweep, synth.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cnre/checkpoint.hpp"
#include "cnre/error.hpp"
#include "cnre/evaluation.hpp"
#include "cnre/explain.hpp"
#include "cnre/manifest.hpp"
#include "cnre/sweeps.hpp"
#include "cnre/training.hpp"

namespace fs = std::filesystem;
using namespace cnre;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Paths {
  std::string manifest;
  std::string checkpoint;
  std::string out;
};

fs::path out_dir(const Paths& p, const RunManifest& m) {
  const fs::path dir = p.out.empty() ? m.out : fs::path(p.out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream f(path, std::ios::binary | std::ios::app);
  if (!f) throw Error("cannot write " + path.string());
  f << line << '\n';
}

struct Loaded {
  RunManifest manifest;
  SplitDataset split;
};

Loaded load_run(const std::string& manifest_path) {
  Loaded l;
  l.manifest = load_manifest(manifest_path);
  l.split = leave_one_out_split(load_run_dataset(l.manifest), l.manifest.split_seed);
  return l;
}

Model load_model(const Paths& p, const Loaded& run) {
  const Checkpoint ckpt = load_checkpoint(p.checkpoint);
  return model_from_checkpoint(ckpt, run.split.train);
}

int cmd_train(const Paths& p) {
  const Loaded run = load_run(p.manifest);
  const fs::path dir = out_dir(p, run.manifest);
  std::ostringstream log;
  const TrainResult result = train(run.split.train, run.manifest.train, &log);
  std::cout << log.str();
  write_file(dir / "train.log", log.str());
  save_checkpoint(dir / "model.ckpt", result.checkpoint);
  write_file(dir / "manifest.json", to_json(run.manifest) + "\n");
  return 0;
}

int cmd_eval(const Paths& p, std::vector<std::size_t> ks, bool memorized) {
  const Loaded run = load_run(p.manifest);
  const Model model = load_model(p, run);
  if (ks.empty()) ks = run.manifest.ks;
  const MetricsReport report =
      memorized ? evaluate_memorized(model, ks) : evaluate(model, run.split.test, ks);
  const fs::path dir = out_dir(p, run.manifest);
  const std::string stem = memorized ? "metrics_memorized" : "metrics";
  std::cout << to_json_line(report) << '\n';
  write_file(dir / (stem + ".jsonl"), to_json_line(report) + "\n");
  write_file(dir / (stem + ".tsv"), to_tsv(report));
  return 0;
}

int cmd_explain(const Paths& p, const std::string& user, const std::string& item) {
  const Loaded run = load_run(p.manifest);
  const Model model = load_model(p, run);
  const std::string line = to_json_line(explain(model, user, item));
  std::cout << line << '\n';
  append_line(out_dir(p, run.manifest) / "explanations.jsonl", line);
  return 0;
}

int cmd_counterfactual(const Paths& p, const std::string& user, const std::string& item,
                       const std::string& drop, const std::string& add) {
  const Loaded run = load_run(p.manifest);
  const Model model = load_model(p, run);
  CounterfactualEdit edit;
  edit.kind = drop.empty() ? CounterfactualEdit::Kind::Add : CounterfactualEdit::Kind::Drop;
  edit.behavior = drop.empty() ? add : drop;
  const std::string line = to_json_line(counterfactual(model, user, item, edit));
  std::cout << line << '\n';
  append_line(out_dir(p, run.manifest) / "counterfactuals.jsonl", line);
  return 0;
}

int cmd_sweep(const Paths& p, const std::string& kind) {
  const Loaded run = load_run(p.manifest);
  const SweepSpec& s = run.manifest.sweep;
  std::vector<SweepRow> rows;
  if (kind == "layers") {
    if (s.layer_grid.empty()) throw ParseError("manifest.sweep.layer_grid is empty");
    rows = layer_sweep(run.split, run.manifest.train, s.layer_grid, run.manifest.ks);
  } else {
    if (s.drop_fractions.empty()) throw ParseError("manifest.sweep.drop_fractions is empty");
    rows = robustness_sweep(run.split, run.manifest.train, s.drop_fractions, s.user_fraction,
                            s.seed, run.manifest.ks);
  }
  const std::string table = sweep_tsv(rows);
  std::cout << table;
  write_file(out_dir(p, run.manifest) / ("sweep_" + kind + ".tsv"), table);
  return 0;
}

int cmd_synth(const std::string& out, const PlantedConfig& cfg) {
  const fs::path dir(out);
  fs::create_directories(dir);
  const InteractionDataset data = make_planted_dataset(cfg);
  for (std::size_t b = 0; b < data.num_behaviors(); ++b) {
    write_interactions(dir / (data.behaviors.names[b] + ".tsv"), data, b);
  }
  std::ostringstream m;
  m << "{\n  \"behaviors\": [";
  for (std::size_t b = 0; b < data.num_behaviors(); ++b) {
    const auto& name = data.behaviors.names[b];
    m << (b ? ", " : "") << "{\"name\": \"" << name << "\", \"path\": \"" << name << ".tsv\"}";
  }
  m << "],\n  \"order\": \"spec\",\n  \"model\": {\"dim\": 16, \"hyperedges\": 8},\n"
    << "  \"train\": {\"epochs\": 200, \"batch_size\": 128, \"lr\": 0.003},\n"
    << "  \"ks\": [1, 10],\n  \"out\": \"run\",\n"
    << "  \"sweep\": {\"layer_grid\": [[1, 1, 1], [1, 1, 3]], \"drop_fractions\": [0.0, 0.3, 0.5]}\n}\n";
  write_file(dir / "manifest.json", m.str());
  std::cout << (dir / "manifest.json").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-behavior recommender with neuro-symbolic reasoning paths"};
  app.require_subcommand(1);
  Paths paths;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a run manifest");
  train_cmd->add_option("-m,--manifest", paths.manifest, "Run manifest (JSON)")->required();
  train_cmd->add_option("-o,--out", paths.out, "Output directory (default: manifest's out)");

  std::vector<std::size_t> ks;
  bool memorized = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out split");
  eval_cmd->add_option("-m,--manifest", paths.manifest)->required();
  eval_cmd->add_option("-c,--checkpoint", paths.checkpoint)->required();
  eval_cmd->add_option("-k,--ks", ks, "Cutoffs (default: manifest's ks)")->delimiter(',');
  eval_cmd->add_flag("--memorized", memorized, "Rank training target interactions instead");
  eval_cmd->add_option("-o,--out", paths.out);

  std::string user, item, drop, add;
  auto* explain_cmd = app.add_subcommand("explain", "Trace the reasoning for one user/item pair");
  explain_cmd->add_option("-m,--manifest", paths.manifest)->required();
  explain_cmd->add_option("-c,--checkpoint", paths.checkpoint)->required();
  explain_cmd->add_option("-u,--user", user)->required();
  explain_cmd->add_option("-i,--item", item)->required();
  explain_cmd->add_option("-o,--out", paths.out);

  auto* cf_cmd = app.add_subcommand("counterfactual", "Re-run reasoning with one behavior flag flipped");
  cf_cmd->add_option("-m,--manifest", paths.manifest)->required();
  cf_cmd->add_option("-c,--checkpoint", paths.checkpoint)->required();
  cf_cmd->add_option("-u,--user", user)->required();
  cf_cmd->add_option("-i,--item", item)->required();
  auto* drop_opt = cf_cmd->add_option("--drop", drop, "Behavior to remove from the chain");
  auto* add_opt = cf_cmd->add_option("--add", add, "Behavior to add to the chain");
  drop_opt->excludes(add_opt);
  cf_cmd->add_option("-o,--out", paths.out);

  std::string kind = "layers";
  auto* sweep_cmd = app.add_subcommand("sweep", "Layer-count or robustness sweep");
  sweep_cmd->add_option("-m,--manifest", paths.manifest)->required();
  sweep_cmd->add_option("-k,--kind", kind)->check(CLI::IsMember({"layers", "robustness"}));
  sweep_cmd->add_option("-o,--out", paths.out);

  PlantedConfig planted;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted synthetic dataset and manifest");
  synth_cmd->add_option("-o,--out", synth_out)->required();
  synth_cmd->add_option("--users", planted.users);
  synth_cmd->add_option("--items", planted.items);
  synth_cmd->add_option("--seed", planted.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(paths);
    if (*eval_cmd) return cmd_eval(paths, ks, memorized);
    if (*explain_cmd) return cmd_explain(paths, user, item);
    if (*cf_cmd) {
      if (drop.empty() == add.empty()) throw InvalidArgument("give exactly one of --drop or --add");
      return cmd_counterfactual(paths, user, item, drop, add);
    }
    if (*sweep_cmd) return cmd_sweep(paths, kind);
    if (*synth_cmd) return cmd_synth(synth_out, planted);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
