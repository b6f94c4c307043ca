/* Copyright 2026 The relurepair Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relurepair/constraints.hpp"
#include "relurepair/dataset.hpp"
#include "relurepair/ensemble.hpp"
#include "relurepair/error.hpp"
#include "relurepair/localize.hpp"
#include "relurepair/patterns.hpp"
#include "relurepair/pipeline.hpp"
#include "relurepair/serialize.hpp"
#include "relurepair/solver.hpp"

namespace fs = std::filesystem;
using namespace relurepair;

namespace {

struct DataOptions {
  std::string idx_dir;
  std::string train_csv;
  std::string test_csv;
  bool raw_range = false;
  std::size_t train_size = 5000;
  std::size_t test_size = 1000;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", idx_dir, "Directory holding MNIST-style IDX files");
    cmd->add_option("--train-csv", train_csv, "Training/repair CSV (label,v1..vN)");
    cmd->add_option("--test-csv", test_csv, "Test CSV");
    cmd->add_flag("--raw-range", raw_range, "Accept CSV values outside [0,1]");
    cmd->add_option("--train-size", train_size, "Items kept from the IDX training split");
    cmd->add_option("--test-size", test_size, "Items kept from the IDX test split");
  }

  // eval may pass only a test CSV; every other verb needs training data.
  std::pair<Dataset, Dataset> load(std::size_t input_dim, bool need_train = true) const {
    if (!idx_dir.empty()) {
      const fs::path d(idx_dir);
      Dataset train = load_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte", "Train");
      Dataset test = load_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte", "Test");
      return {train.prefix(train_size, "Train"), test.prefix(test_size, "Test")};
    }
    if (train_csv.empty() && (need_train || test_csv.empty())) {
      throw std::invalid_argument(need_train ? "pass --data or --train-csv" : "pass --data, --train-csv or --test-csv");
    }
    Dataset train = train_csv.empty() ? Dataset{"Train", {}, {}, std::nullopt}
                                      : load_csv(train_csv, input_dim, raw_range, "Train");
    Dataset test = test_csv.empty() ? Dataset{"Test", {}, {}, std::nullopt}
                                    : load_csv(test_csv, input_dim, raw_range, "Test");
    return {std::move(train), std::move(test)};
  }
};

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
  return out;
}

RepairConfig load_config(const std::string& path) {
  RepairConfig config;
  if (!path.empty()) config = config_from_json(read_json(path));
  return config;
}

int cmd_train(const std::string& arch, const DataOptions& data, const TrainParams& params,
              const std::string& config_path, bool poisoned, const std::string& out) {
  const auto widths = parse_widths(arch);
  if (widths.size() < 2) throw std::invalid_argument("--arch needs at least two widths");
  auto [train, test] = data.load(widths.front());
  if (poisoned) train = poisoned_training_set(train, load_config(config_path));
  const Model model = train_fixture(widths, train, params);
  save_model(model, out);
  std::cout << "train accuracy " << evaluate(model, train);
  if (!test.empty()) std::cout << ", test accuracy " << evaluate(model, test);
  std::cout << "\nwrote " << out << "\n";
  return 0;
}

int cmd_mine(const std::string& model_path, const DataOptions& data, std::optional<std::size_t> layer_opt,
             std::size_t label, bool incorrect, MinerParams params, const std::string& out) {
  const Model model = load_model(model_path);
  const Dataset ds = data.load(model.input_dim()).first;
  const std::size_t layer = layer_opt ? *layer_opt : model.penultimate_dense().value_or(0);
  const auto predicted = predict_all(model, ds);
  std::vector<ActivationSignature> sigs;
  std::vector<char> mask;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (incorrect ? ds.labels[i] != label : predicted[i] != ds.labels[i]) continue;
    sigs.push_back(signature(forward(model, ds.inputs[i]), layer));
    mask.push_back(incorrect ? predicted[i] != label : ds.labels[i] == label);
  }
  std::unique_ptr<bool[]> flat(new bool[mask.size()]);
  for (std::size_t i = 0; i < mask.size(); ++i) flat[i] = mask[i] != 0;
  params.label = label;
  const std::span<const bool> view(flat.get(), mask.size());
  const auto patterns = incorrect ? mine_incorrect(sigs, view, params) : mine(sigs, view, params);
  write_json(patterns_to_json(patterns), out);
  std::cout << patterns.size() << " pattern(s) written to " << out << "\n";
  return 0;
}

int cmd_localize(const std::string& model_path, const DataOptions& data, const std::string& config_path,
                 std::size_t label, const std::string& patterns_path, const std::string& out) {
  const Model model = load_model(model_path);
  RepairConfig config = load_config(config_path);
  const Dataset ds = data.load(model.input_dim()).first;
  const std::size_t layer = config.resolved_layer(model);
  Partition part = partition(model, ds, label);
  std::vector<std::size_t> same_label;
  for (std::size_t i = 0; i < part.passing.size(); ++i) {
    if (part.passing.labels[i] == label) same_label.push_back(i);
  }
  const Dataset pass = part.passing.subset(same_label, "pass");
  std::vector<std::size_t> neurons;
  if (config.repair_kind == RepairKind::kLast) {
    neurons = {last_layer_target(model, label)};
  } else {
    if (patterns_path.empty()) throw std::invalid_argument("intermediate localization needs --patterns");
    const auto patterns = patterns_from_json(read_json(patterns_path));
    const ActivationPattern& pattern = top_pattern(patterns);
    std::set<std::size_t> suspicious;
    for (const auto& x : part.failing.inputs) {
      for (std::size_t n : suspicious_neurons(pattern, forward(model, x))) suspicious.insert(n);
    }
    neurons.assign(suspicious.begin(), suspicious.end());
  }
  const FaultSet fault = localize(model, layer, neurons, part.failing, pass, config.budget());
  write_json(fault_to_json(fault), out);
  std::cout << fault.edges.size() << " edge(s) selected, written to " << out << "\n";
  return 0;
}

void write_run(const fs::path& dir, const Model& model, const RepairRun& run, bool smt_check) {
  fs::create_directories(dir);
  save_model(model, dir / "model.json");
  for (const auto& a : run.artifacts) {
    const std::string stem = "label_" + std::to_string(a.label);
    if (!a.patterns.empty()) write_json(patterns_to_json(a.patterns), dir / "patterns" / (stem + ".json"));
    if (a.fault) write_json(fault_to_json(*a.fault), dir / "faults" / (stem + ".json"));
    if (a.system) {
      write_text(export_smtlib(*a.system), dir / "constraints" / (stem + ".smt2"));
      write_json(system_to_json(*a.system), dir / "constraints" / (stem + ".json"));
      if (smt_check) {
        const SmtCheck check = solve_via_smt_check(*a.system);
        const char* names[] = {"sat", "unsat", "unknown", "unavailable"};
        const std::string verdict = names[static_cast<int>(check.status)];
        const std::string ours = a.expert ? "sat" : "unsat";
        std::cerr << "label " << a.label << ": external solver " << verdict << ", simplex " << ours << "\n";
        write_text(verdict + "\n" + check.detail + "\n", dir / "constraints" / (stem + ".smt-check.txt"));
      }
    }
    if (a.expert) write_json(expert_to_json(*a.expert), dir / "experts" / (stem + ".json"));
  }
  write_json(report_to_json(run.report), dir / "report.json");
  write_text(render_text(run.report), dir / "report.txt");
}

int cmd_repair(const std::string& model_path, const DataOptions& data, const RepairConfig& config,
               const std::string& run_dir, bool smt_check) {
  const Model model = load_model(model_path);
  auto [train, test] = data.load(model.input_dim());
  const ScenarioData scenario = prepare_scenario(config, model, train, test);
  const RepairRun run = run_repair(config, model, scenario);
  for (const auto& e : run.report.experts) {
    if (e.status != "feasible") {
      std::cerr << "label " << e.label << ": " << e.status << " at " << e.stage << " (" << e.reason << ")\n";
    }
  }
  write_run(run_dir, model, run, smt_check);
  std::cout << render_text(run.report);
  return 0;
}

Json manifest(const std::string& model_path, const Ensemble& ensemble) {
  Json experts = Json::array();
  for (const auto& e : ensemble.experts()) experts.push_back(expert_to_json(e));
  return {{"base_model", model_path},
          {"strategy", to_string(ensemble.strategy())},
          {"f1_filter", ensemble.filtered()},
          {"experts", std::move(experts)}};
}

std::vector<Expert> load_experts(const std::vector<std::string>& paths) {
  std::vector<Expert> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out.push_back(expert_from_json(read_json(f)));
    } else {
      out.push_back(expert_from_json(read_json(p)));
    }
  }
  return out;
}

int cmd_combine(const std::string& model_path, const std::vector<std::string>& expert_paths,
                const std::string& strategy, bool filter, const DataOptions& data, const std::string& out) {
  const Model model = load_model(model_path);
  std::vector<Expert> experts = load_experts(expert_paths);
  if (filter) experts = f1_filter(model, experts, data.load(model.input_dim()).first);
  const Ensemble ensemble(model, experts, strategy_from_string(strategy), filter);
  write_json(manifest(model_path, ensemble), out);
  std::cout << ensemble.experts().size() << " expert(s) combined with " << strategy << ", written to " << out
            << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& manifest_path, const DataOptions& data) {
  std::optional<Ensemble> ensemble;
  std::string base_path = model_path;
  Json m;
  if (!manifest_path.empty()) {
    m = read_json(manifest_path);
    if (base_path.empty()) base_path = m.at("base_model").get<std::string>();
  }
  if (base_path.empty()) throw std::invalid_argument("pass --model or --ensemble");
  const Model model = load_model(base_path);
  if (!m.is_null()) {
    std::vector<Expert> experts;
    for (const auto& e : m.at("experts")) experts.push_back(expert_from_json(e));
    ensemble.emplace(model, experts, strategy_from_string(m.at("strategy").get<std::string>()),
                     m.value("f1_filter", false));
  }
  auto [train, test] = data.load(model.input_dim(), false);
  for (const Dataset* ds : {&train, &test}) {
    if (ds->empty()) continue;
    std::cout << ds->name << ": base " << evaluate(model, *ds);
    if (ensemble) {
      std::cout << ", ensemble "
                << evaluate([&](std::span<const double> x) { return ensemble->classify(x); }, *ds);
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_export_smt(const std::string& model_path, const DataOptions& data, RepairConfig config, std::size_t label,
                   const std::string& out) {
  const Model model = load_model(model_path);
  auto [train, test] = data.load(model.input_dim());
  config.labels = {label};
  const RepairRun run = run_repair(config, model, prepare_scenario(config, model, train, test));
  const auto& a = run.artifacts.front();
  if (!a.system) {
    const auto& rec = run.report.experts.front();
    throw Error("no constraint system for label " + std::to_string(label) + ": " + rec.status + " at " +
                rec.stage + " (" + rec.reason + ")");
  }
  write_text(export_smtlib(*a.system), out);
  std::cout << a.system->constraints.size() << " constraint(s) over " << a.system->variables.size()
            << " variable(s) written to " << out << "\n";
  return 0;
}

// Flags that override fields of the JSON config.
struct ConfigOverrides {
  std::string path;
  std::string scenario, kind, strategy;
  std::optional<std::size_t> layer, top_k, fail_count, pass_count, extra;
  std::optional<double> top_percent, margin, delta_bound, epsilon;
  std::optional<std::uint64_t> seed;
  bool f1 = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "JSON repair config");
    cmd->add_option("--scenario", scenario, "accuracy | poison | adversarial");
    cmd->add_option("--repair-kind", kind, "intermediate | last");
    cmd->add_option("--strategy", strategy, "naive | confidence | voting | merged");
    cmd->add_option("--layer", layer, "Dense layer index to repair");
    cmd->add_option("--top-k", top_k, "Absolute number of edges to make symbolic");
    cmd->add_option("--top-percent", top_percent, "Percentage of edges to make symbolic");
    cmd->add_option("--fail-count", fail_count, "Failing inputs per label");
    cmd->add_option("--pass-count", pass_count, "Passing inputs per label");
    cmd->add_option("--extra-pass", extra, "Extra normal passing inputs per label");
    cmd->add_option("--margin", margin, "Strict-inequality margin");
    cmd->add_option("--delta-bound", delta_bound, "Per-weight delta bound");
    cmd->add_option("--epsilon", epsilon, "FGSM epsilon");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_flag("--f1-filter", f1, "Keep only experts whose F1 beats the base model");
  }

  RepairConfig resolve() const {
    RepairConfig c = load_config(path);
    if (!scenario.empty()) c.scenario = scenario_from_string(scenario);
    if (!kind.empty()) c.repair_kind = repair_kind_from_string(kind);
    if (!strategy.empty()) c.strategy = strategy_from_string(strategy);
    if (layer) c.layer_index = layer;
    if (top_k) c.top_k = top_k;
    if (top_percent) c.top_percent = *top_percent;
    if (fail_count) c.fail_count = *fail_count;
    if (pass_count) c.pass_count = *pass_count;
    if (extra) c.extra_normal_pass_count = *extra;
    if (margin) c.margin = *margin;
    if (delta_bound) c.delta_bound = *delta_bound;
    if (epsilon) c.epsilon = *epsilon;
    if (seed) c.rng_seed = *seed;
    if (f1) c.f1_filter = true;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relurepair: repair ReLU classifiers by fault localization and constraint solving"};
  app.require_subcommand(1);

  DataOptions data;
  ConfigOverrides overrides;
  std::string model_path, out, arch = "784,32,10", patterns_path, manifest_path, strategy = "confidence";
  std::string run_dir = "run";
  std::size_t label = 0;
  std::optional<std::size_t> layer;
  bool incorrect = false, poisoned = false, filter = false, smt_check = false;
  TrainParams train_params;
  MinerParams miner;
  std::vector<std::string> expert_paths;

  auto* train = app.add_subcommand("train", "Train a fixture MLP");
  data.attach(train);
  train->add_option("--arch", arch, "Comma-separated layer widths");
  train->add_option("--epochs", train_params.epochs);
  train->add_option("--lr", train_params.learning_rate);
  train->add_option("--batch", train_params.batch_size);
  train->add_option("--seed", train_params.seed);
  train->add_option("--floor", train_params.floor_accuracy, "Minimum training accuracy");
  train->add_flag("--poisoned", poisoned, "Train on the trigger-poisoned training set");
  train->add_option("--config", overrides.path, "Config supplying trigger and poison_prefix");
  train->add_option("-o,--out", out, "Output model JSON")->required();

  auto* mine_cmd = app.add_subcommand("mine", "Mine activation patterns for a label");
  data.attach(mine_cmd);
  mine_cmd->add_option("--model", model_path)->required();
  mine_cmd->add_option("--layer", layer);
  mine_cmd->add_option("--label", label)->required();
  mine_cmd->add_flag("--incorrect", incorrect, "Mine incorrect-label patterns");
  mine_cmd->add_option("--max-depth", miner.max_depth);
  mine_cmd->add_option("--min-purity", miner.min_purity);
  mine_cmd->add_option("--min-support", miner.min_support);
  mine_cmd->add_flag("--close", miner.close_over_members, "Extend leaves with unanimous member literals");
  mine_cmd->add_option("-o,--out", out)->required();

  auto* loc = app.add_subcommand("localize", "Score and select suspicious edges for a label");
  data.attach(loc);
  loc->add_option("--model", model_path)->required();
  loc->add_option("--config", overrides.path);
  loc->add_option("--label", label)->required();
  loc->add_option("--patterns", patterns_path, "Pattern JSON from `mine` (intermediate repair)");
  loc->add_option("-o,--out", out)->required();

  auto* repair = app.add_subcommand("repair", "Run the full repair pipeline");
  data.attach(repair);
  overrides.attach(repair);
  repair->add_option("--model", model_path)->required();
  repair->add_option("--run-dir", run_dir);
  repair->add_flag("--smt-check", smt_check, "Cross-check each system with the external SMT solver");

  auto* combine = app.add_subcommand("combine", "Combine expert files into an ensemble manifest");
  data.attach(combine);
  combine->add_option("--model", model_path)->required();
  combine->add_option("--experts", expert_paths, "Expert JSON files or directories")->required();
  combine->add_option("--strategy", strategy);
  combine->add_flag("--f1-filter", filter);
  combine->add_option("-o,--out", out)->required();

  auto* eval = app.add_subcommand("eval", "Report accuracy of a model or ensemble");
  data.attach(eval);
  eval->add_option("--model", model_path);
  eval->add_option("--ensemble", manifest_path, "Manifest written by `combine`");

  auto* smt = app.add_subcommand("export-smt", "Write one label's constraint system as SMT-LIB2");
  data.attach(smt);
  overrides.attach(smt);
  smt->add_option("--model", model_path)->required();
  smt->add_option("--label", label)->required();
  smt->add_option("-o,--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(arch, data, train_params, overrides.path, poisoned, out);
    if (mine_cmd->parsed()) return cmd_mine(model_path, data, layer, label, incorrect, miner, out);
    if (loc->parsed()) return cmd_localize(model_path, data, overrides.path, label, patterns_path, out);
    if (repair->parsed()) return cmd_repair(model_path, data, overrides.resolve(), run_dir, smt_check);
    if (combine->parsed()) return cmd_combine(model_path, expert_paths, strategy, filter, data, out);
    if (eval->parsed()) return cmd_eval(model_path, manifest_path, data);
    if (smt->parsed()) return cmd_export_smt(model_path, data, overrides.resolve(), label, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
