#include "gangforge/experiment.hpp"

#include "gangforge/baselines.hpp"
#include "gangforge/checkpoint.hpp"
#include "gangforge/errors.hpp"
#include "gangforge/evaluation.hpp"
#include "gangforge/parallel.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace gangforge {

using nlohmann::json;
namespace fs = std::filesystem;

// Config parsing -------------------------------------------------------------------

json to_json(const SynthConfig& c) {
  return {{"num_nodes", c.num_nodes},
          {"fraud_fraction", c.fraud_fraction},
          {"num_gangs", c.num_gangs},
          {"gang_size_min", c.gang_size_min},
          {"gang_size_max", c.gang_size_max},
          {"intra_gang_edge_prob", c.intra_gang_edge_prob},
          {"camouflage_edge_prob", c.camouflage_edge_prob},
          {"background_edge_prob", c.background_edge_prob},
          {"attr_dim", c.attr_dim},
          {"attribute_kind", to_string(c.attribute_kind)},
          {"class_separation", c.class_separation},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("dataset.synth must be an object");
  SynthConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "num_nodes") c.num_nodes = value.get<std::size_t>();
      else if (key == "fraud_fraction") c.fraud_fraction = value.get<double>();
      else if (key == "num_gangs") c.num_gangs = value.get<std::size_t>();
      else if (key == "gang_size_min") c.gang_size_min = value.get<std::size_t>();
      else if (key == "gang_size_max") c.gang_size_max = value.get<std::size_t>();
      else if (key == "intra_gang_edge_prob") c.intra_gang_edge_prob = value.get<double>();
      else if (key == "camouflage_edge_prob") c.camouflage_edge_prob = value.get<double>();
      else if (key == "background_edge_prob") c.background_edge_prob = value.get<double>();
      else if (key == "attr_dim") c.attr_dim = value.get<std::size_t>();
      else if (key == "attribute_kind") c.attribute_kind = parse_attribute_kind(value.get<std::string>());
      else if (key == "class_separation") c.class_separation = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("dataset.synth: unknown field '" + key + "'");
    } catch (const json::exception&) {
      throw ConfigError("dataset.synth." + key + ": wrong type");
    } catch (const InputError& e) {
      throw ConfigError("dataset.synth." + key + ": " + e.what());
    }
  }
  validate(c);
  return c;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

std::vector<std::string> split_path(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find("__", start);
    parts.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 2;
  }
  return parts;
}

}  // namespace

void apply_env_overrides(json& document, char** environ_block) {
  if (!environ_block) return;
  static constexpr std::string_view kPrefix = "GANGFORGE_";
  std::vector<std::pair<std::string, std::string>> overrides;
  for (char** e = environ_block; *e; ++e) {
    std::string_view entry(*e);
    if (!entry.starts_with(kPrefix)) continue;
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    overrides.emplace_back(std::string(entry.substr(kPrefix.size(), eq - kPrefix.size())), std::string(entry.substr(eq + 1)));
  }
  std::sort(overrides.begin(), overrides.end());
  for (const auto& [name, raw] : overrides) {
    json* node = &document;
    const auto parts = split_path(name);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i].empty()) throw ConfigError("malformed override GANGFORGE_" + name);
      if (!node->is_object()) throw ConfigError("override GANGFORGE_" + name + " descends into a non-object field");
      std::string key = lower(parts[i]);
      for (const auto& [existing, unused] : node->items()) {
        if (lower(existing) == key) key = existing;
      }
      node = &(*node)[key];
    }
    json value = json::parse(raw, nullptr, false);
    *node = value.is_discarded() ? json(raw) : value;
  }
}

ExperimentConfig experiment_config_from_json(const json& d) {
  if (!d.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> required{"dataset", "rho", "xi", "p", "detector", "victim", "attack", "output_dir", "seeds"};
  for (const auto& key : required) {
    if (!d.contains(key)) throw ConfigError("missing required field '" + key + "'");
  }
  for (const auto& [key, value] : d.items()) {
    if (std::find(required.begin(), required.end(), key) == required.end() && key != "ablation") {
      throw ConfigError("unknown field '" + key + "'");
    }
  }
  ExperimentConfig c;
  const json& ds = d["dataset"];
  if (!ds.is_object() || ds.size() != 1 || (!ds.contains("path") && !ds.contains("synth"))) {
    throw ConfigError("dataset must be {\"path\": ...} or {\"synth\": {...}}");
  }
  if (ds.contains("path")) {
    if (!ds["path"].is_string()) throw ConfigError("dataset.path must be a string");
    c.dataset_path = ds["path"].get<std::string>();
  } else {
    c.synth = synth_config_from_json(ds["synth"]);
  }
  auto number = [&](const char* key) {
    if (!d[key].is_number()) throw ConfigError(std::string(key) + " must be a number");
    return d[key].get<double>();
  };
  c.rho = number("rho");
  c.xi = number("xi");
  c.p = number("p");
  if (!(c.rho > 0.0 && c.rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]");
  if (!(c.xi > 0.0)) throw ConfigError("xi must be positive");
  if (!(c.p > 0.0 && c.p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  c.detector = detector_config_from_json(d["detector"]);
  c.victim = detector_config_from_json(d["victim"]);
  if (c.detector.seed == c.victim.seed) throw ConfigError("detector.seed and victim.seed must differ");
  c.attack = attack_config_from_json(d["attack"]);
  if (d.contains("ablation")) c.ablation = ablation_config_from_json(d["ablation"], false);
  if (!d["output_dir"].is_string() || d["output_dir"].get<std::string>().empty()) throw ConfigError("output_dir must be a non-empty string");
  c.output_dir = d["output_dir"].get<std::string>();
  if (!d["seeds"].is_array() || d["seeds"].empty()) throw ConfigError("seeds must be a non-empty list of integers");
  for (const json& s : d["seeds"]) {
    if (!s.is_number_unsigned()) throw ConfigError("seeds must be non-negative integers");
    c.seeds.push_back(s.get<std::uint64_t>());
  }
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path, char** environ_block) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.filename().string(), 0, "cannot read config file");
  std::stringstream text;
  text << in.rdbuf();
  json doc;
  try {
    doc = json::parse(text.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.filename().string() + ": malformed JSON: " + e.what());
  }
  apply_env_overrides(doc, environ_block);
  return experiment_config_from_json(doc);
}

Command parse_command(std::string_view text) {
  if (text == "gen-synth") return Command::gen_synth;
  if (text == "train-detector") return Command::train_detector;
  if (text == "train-attack") return Command::train_attack;
  if (text == "attack") return Command::attack;
  if (text == "evaluate") return Command::evaluate;
  if (text == "ablate") return Command::ablate;
  throw ConfigError("unknown command '" + std::string(text) + "'");
}

std::string_view to_string(Command command) {
  switch (command) {
    case Command::gen_synth: return "gen-synth";
    case Command::train_detector: return "train-detector";
    case Command::train_attack: return "train-attack";
    case Command::attack: return "attack";
    case Command::evaluate: return "evaluate";
    case Command::ablate: return "ablate";
  }
  return "?";
}

// Pipeline stages -------------------------------------------------------------------------

namespace {

struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path require(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw MissingArtifact("missing artifact " + path.string() + " (produced by '" + producer + "')");
  }
  return path;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::uint64_t seed_at(const ExperimentConfig& c, std::size_t index) {
  if (index >= c.seeds.size()) {
    throw ConfigError("--seed-index " + std::to_string(index) + " out of range for " + std::to_string(c.seeds.size()) + " seeds");
  }
  return c.seeds[index];
}

std::uint64_t baseline_seed(std::uint64_t seed, std::size_t set_id) { return seed * 1000003ULL + set_id; }

const char* kSurrogate = "detector_surrogate.ckpt";
const char* kVictim = "detector_victim.ckpt";
const char* kAttack = "attack.ckpt";

std::map<std::size_t, InjectionPlan> run_plans(const AttackModel& model, const DatasetBundle& bundle,
                                               const std::vector<std::size_t>& ids, int jobs) {
  const AttackContext ctx = model.make_context(bundle.graph, bundle.target_sets);
  std::vector<InjectionPlan> plans(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t k) { plans[k] = run_attack(model, ctx, bundle.target_sets[ids[k]]); });
  std::map<std::size_t, InjectionPlan> out;
  for (std::size_t k = 0; k < ids.size(); ++k) out.emplace(ids[k], std::move(plans[k]));
  return out;
}

std::map<std::size_t, InjectionPlan> random_plans(const DatasetBundle& bundle, const std::vector<std::size_t>& ids, std::uint64_t seed,
                                                  int hops) {
  std::map<std::size_t, InjectionPlan> out;
  for (std::size_t id : ids) out.emplace(id, random_injection(bundle.graph, bundle.target_sets[id], baseline_seed(seed, id), hops));
  return out;
}

AttackModel trained_attack(const ExperimentConfig& c, const DetectorModel& surrogate, const std::string& surrogate_hash,
                           const DatasetBundle& bundle, std::uint64_t seed, const AblationConfig& ablation,
                           TrainingHistory* history) {
  AttackConfig ac = c.attack;
  ac.seed = seed;
  AttackModel model(ac, ablation, surrogate);
  model.surrogate_path = kSurrogate;
  model.surrogate_sha256 = surrogate_hash;
  TrainingHistory h = train_attack(model, bundle);
  if (history) *history = std::move(h);
  return model;
}

void gen_synth(const ExperimentConfig& c, std::ostream& out) {
  DatasetBundle bundle = c.synth ? generate_synthetic_fraud_graph(*c.synth, c.p, c.budget()) : load_dataset(*c.dataset_path, c.budget());
  const fs::path dir = c.output_dir / "dataset";
  save_dataset(bundle, dir);
  for (std::size_t i = 0; i < bundle.target_sets.size(); ++i) {
    const TargetSet& s = bundle.target_sets[i];
    out << "set " << i << " split=" << to_string(s.split) << " m=" << s.size() << " B=" << s.closed_neighborhood_size
        << " delta=" << s.node_budget << " eta=" << s.edge_budget << '\n';
  }
  out << "wrote " << dir.string() << " (" << bundle.graph.num_nodes() << " nodes, " << bundle.graph.num_edges() << " edges)\n";
}

void train_detectors(const ExperimentConfig& c, const DatasetBundle& bundle, std::ostream& out) {
  std::ostringstream log;
  log << "model,epoch,train_loss,val_macro_f1\n";
  for (const auto& [name, config, file] : {std::tuple{"surrogate", c.detector, kSurrogate}, std::tuple{"victim", c.victim, kVictim}}) {
    const DetectorModel model = train_detector(bundle, config);
    save_detector(model, c.output_dir / file);
    double best = 0.0;
    for (const auto& r : model.training_log) {
      best = std::max(best, r.val_macro_f1);
      log << name << ',' << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.val_macro_f1) << '\n';
    }
    out << name << ": best validation macro-F1 " << fmt(best) << " -> " << (c.output_dir / file).string() << '\n';
  }
  write_text(c.output_dir / "detector_log.csv", log.str());
}

void train_attack_stage(const ExperimentConfig& c, const DatasetBundle& bundle, const RunOptions& o, std::ostream& out) {
  const fs::path sur_path = require(c.output_dir / kSurrogate, "train-detector");
  const DetectorModel surrogate = load_detector(sur_path);
  TrainingHistory history;
  const AttackModel model = trained_attack(c, surrogate, sha256_file(sur_path), bundle, seed_at(c, o.seed_index), AblationConfig{}, &history);
  save_attack(model, c.output_dir / kAttack, &history);
  std::ostringstream csv;
  csv << "epoch,tau,epsilon,train_loss,val_loss\n";
  for (const auto& r : history.epochs) {
    csv << r.epoch << ',' << fmt(r.tau) << ',' << fmt(r.epsilon) << ',' << fmt(r.train_loss) << ',' << fmt(r.val_loss) << '\n';
  }
  write_text(c.output_dir / "attack_loss.csv", csv.str());
  out << "trained " << history.epochs.size() << " epochs, best epoch " << history.best_epoch << " -> " << (c.output_dir / kAttack).string()
      << '\n';
}

void attack_stage(const ExperimentConfig& c, const DatasetBundle& bundle, const RunOptions& o, std::ostream& out) {
  const fs::path atk = require(c.output_dir / kAttack, "train-attack");
  const fs::path sur = require(c.output_dir / kSurrogate, "train-detector");
  const AttackModel model = load_attack(atk, sur);
  const auto ids = bundle.sets_in(Split::test);
  const auto plans = run_plans(model, bundle, ids, o.jobs);
  const fs::path dir = c.output_dir / "plans";
  fs::create_directories(dir);
  for (const auto& [id, plan] : plans) {
    validate_plan(bundle.graph, plan, bundle.target_sets[id]);
    save_injection(plan, dir / (std::to_string(id) + ".injection.json"));
    out << "set " << id << ": " << plan.num_attack_nodes << " attack nodes, " << plan.edges.size() << " edges (eta "
        << bundle.target_sets[id].edge_budget << ")\n";
  }
}

void evaluate_stage(const ExperimentConfig& c, const DatasetBundle& bundle, const RunOptions& o, std::ostream& out, std::ostream& err) {
  const DetectorModel victim = load_detector(require(c.output_dir / kVictim, "train-detector"));
  const auto ids = bundle.sets_in(Split::test);
  std::map<std::size_t, InjectionPlan> plans;
  const fs::path dir = require(c.output_dir / "plans", "attack");
  for (std::size_t id : ids) {
    const fs::path file = dir / (std::to_string(id) + ".injection.json");
    if (!fs::exists(file)) {
      err << "warning: no plan for set " << id << " (" << file.string() << "), reporting it clean-only\n";
      continue;
    }
    InjectionPlan plan = load_injection(file);
    validate_plan(bundle.graph, plan, bundle.target_sets[id]);
    plans.emplace(id, std::move(plan));
  }
  const AttackReport report = evaluate_attack(victim, bundle, plans, ids, o.jobs);
  const AttackReport baseline =
      evaluate_attack(victim, bundle, random_plans(bundle, ids, seed_at(c, o.seed_index), c.attack.K), ids, o.jobs);

  json doc = to_json(report);
  doc["random_baseline"] = {{"weighted_clean", baseline.weighted_clean}, {"weighted_attacked", baseline.weighted_attacked}};
  write_text(c.output_dir / "report.json", doc.dump(2) + "\n");
  write_text(c.output_dir / "report.csv", to_csv(report));
  for (const SetResult& r : report.per_set) {
    out << "set " << r.set_id << ": m=" << r.size << " clean=" << fmt(r.clean) << " attacked=" << fmt(r.attacked)
        << (r.missing_plan ? " (no plan)" : "") << '\n';
  }
  out << "weighted misclassification: clean " << fmt(report.weighted_clean) << ", attacked " << fmt(report.weighted_attacked)
      << ", random baseline " << fmt(baseline.weighted_attacked) << '\n';
}

void ablate_stage(const ExperimentConfig& c, const DatasetBundle& bundle, const RunOptions& o, std::ostream& out) {
  const fs::path sur_path = require(c.output_dir / kSurrogate, "train-detector");
  const DetectorModel surrogate = load_detector(sur_path);
  const DetectorModel victim = load_detector(require(c.output_dir / kVictim, "train-detector"));
  const std::string hash = sha256_file(sur_path);
  const auto ids = bundle.sets_in(Split::test);

  std::vector<std::pair<std::string, std::optional<AblationConfig>>> rows{{"full", AblationConfig{}}};
  for (const auto& flag : enabled_flags(c.ablation)) rows.emplace_back(flag, single_ablation(flag));
  rows.emplace_back("random_injection", std::nullopt);

  std::ostringstream csv;
  csv << "row,seed,weighted_clean,weighted_attacked,non_target_mean_abs_delta\n";
  std::map<std::string, std::vector<double>> attacked;
  for (const auto& [name, ablation] : rows) {
    double clean = 0.0, delta = 0.0;
    for (std::uint64_t seed : c.seeds) {
      std::map<std::size_t, InjectionPlan> plans;
      if (ablation) {
        const AttackModel model = trained_attack(c, surrogate, hash, bundle, seed, *ablation, nullptr);
        plans = run_plans(model, bundle, ids, o.jobs);
      } else {
        plans = random_plans(bundle, ids, seed, c.attack.K);
      }
      const AttackReport report = evaluate_attack(victim, bundle, plans, ids, o.jobs);
      attacked[name].push_back(report.weighted_attacked);
      clean += report.weighted_clean;
      delta += report.non_target_mean_abs_delta;
      csv << name << ',' << seed << ',' << fmt(report.weighted_clean) << ',' << fmt(report.weighted_attacked) << ','
          << fmt(report.non_target_mean_abs_delta) << '\n';
      out << name << " seed " << seed << ": attacked " << fmt(report.weighted_attacked) << '\n';
    }
    const double n = static_cast<double>(c.seeds.size());
    double mean = 0.0;
    for (double v : attacked[name]) mean += v;
    csv << name << ",mean," << fmt(clean / n) << ',' << fmt(mean / n) << ',' << fmt(delta / n) << '\n';
  }
  write_text(c.output_dir / "ablation_table.csv", csv.str());
}

}  // namespace

DatasetBundle load_bundle(const ExperimentConfig& c) {
  if (c.dataset_path) return load_dataset(*c.dataset_path, c.budget());
  return load_dataset(require(c.output_dir / "dataset", "gen-synth"), c.budget());
}

int execute(Command command, const ExperimentConfig& config, const RunOptions& options, std::ostream& out, std::ostream& err) {
  try {
    if (options.jobs < 1) throw ConfigError("--jobs must be >= 1");
    fs::create_directories(config.output_dir);
    if (command == Command::gen_synth) {
      gen_synth(config, out);
      return 0;
    }
    const DatasetBundle bundle = load_bundle(config);
    switch (command) {
      case Command::train_detector: train_detectors(config, bundle, out); break;
      case Command::train_attack: train_attack_stage(config, bundle, options, out); break;
      case Command::attack: attack_stage(config, bundle, options, out); break;
      case Command::evaluate: evaluate_stage(config, bundle, options, out, err); break;
      case Command::ablate: ablate_stage(config, bundle, options, out); break;
      case Command::gen_synth: break;
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const MissingArtifact& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const LoadError& e) {
    err << "load error: " << e.what() << '\n';
    return 3;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace gangforge
