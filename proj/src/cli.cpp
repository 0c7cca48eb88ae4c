#include "vedge/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vedge/a3c.hpp"
#include "vedge/baselines.hpp"
#include "vedge/evaluation.hpp"
#include "vedge/scenario.hpp"

namespace vedge::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kTrainSchema = "#vedge-train v1";
constexpr const char* kTraceSchema = "#vedge-trace v1";
constexpr const char* kMetricsSchema = "vedge-metrics/1";

// Bad flags, refused overwrites and the like.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check_writable(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) {
    throw UsageError(path.string() + " exists; pass --force to overwrite");
  }
}

// Writes next to the target and renames, so a failure leaves nothing behind.
void write_atomic(const fs::path& path, const std::string& content, bool force) {
  check_writable(path, force);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("write failed for " + path.string());
    }
  }
  fs::rename(tmp, path);
}

std::shared_ptr<const Scenario> open_scenario(const std::string& path) {
  return std::make_shared<const Scenario>(load_scenario(path));
}

ordered_json metrics_json(const std::string& name, const eval::Metrics& m) {
  ordered_json j;
  j["policy"] = name;
  j["episodes"] = m.episodes;
  j["mean_service_delay_s"] = m.mean_service_delay;
  j["mean_task_delay_s"] = m.mean_task_delay;
  j["objective"] = m.objective;
  j["slot_counts"] = m.slot_counts;
  return j;
}

struct GenArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  bool force = false;
};

int cmd_gen(const GenArgs& a) {
  ScenarioConfig config = load_config(a.config);
  if (a.seed_set) config.seed = a.seed;
  validate_config(config);
  Scenario scenario = make_scenario(config);
  scenario.sample = generate_service(config, config.seed);
  std::ostringstream os;
  write_scenario(os, scenario);
  write_atomic(a.out, os.str(), a.force);
  std::cout << "wrote " << a.out << " (" << scenario.nodes.size() << " nodes, "
            << (scenario.sample ? scenario.sample->tasks.size() : 0) << " tasks)\n";
  return kExitOk;
}

struct TrainArgs {
  std::string scenario;
  std::string out;
  std::string csv;
  std::string init;
  std::optional<int> workers;
  std::optional<double> gamma;
  std::optional<double> delta;
  std::optional<long> episodes;
  std::optional<double> lr;
  std::optional<double> lr_critic;
  std::optional<int> n_step;
  std::optional<double> reward_scale;
  double clip = 0.0;
  std::string optimizer = "sgd";
  std::uint64_t seed = 1;
  bool single_thread = false;
  bool force = false;
};

int cmd_train(const TrainArgs& a) {
  auto scenario = open_scenario(a.scenario);
  a3c::Hyperparams h = a3c::from_preset(scenario->config.agent);
  h.seed = a.seed;
  if (a.workers) h.workers = *a.workers;
  if (a.single_thread) h.workers = 1;
  if (a.gamma) h.gamma = *a.gamma;
  if (a.delta) h.entropy_coef = *a.delta;
  if (a.episodes) h.episodes = *a.episodes;
  if (a.lr) h.lr_actor = h.lr_critic = *a.lr;
  if (a.lr_critic) h.lr_critic = *a.lr_critic;
  if (a.n_step) h.n_step = *a.n_step;
  if (a.reward_scale) h.reward_scale = *a.reward_scale;
  h.max_grad_norm = a.clip;
  if (a.optimizer == "sgd") {
    h.optimizer = a3c::Optimizer::Sgd;
  } else if (a.optimizer == "rmsprop") {
    h.optimizer = a3c::Optimizer::RmsProp;
  } else {
    throw UsageError("unknown optimizer '" + a.optimizer + "'");
  }
  try {
    h.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  check_writable(a.out, a.force);
  if (!a.csv.empty()) check_writable(a.csv, a.force);

  std::optional<nn::Checkpoint> init;
  if (!a.init.empty()) init = nn::load_checkpoint(fs::path(a.init));
  const auto report = a3c::train(scenario, h, init);

  std::ostringstream ckpt;
  nn::save_checkpoint(ckpt, report.final_params);
  write_atomic(a.out, ckpt.str(), a.force);
  if (!a.csv.empty()) {
    std::ostringstream csv;
    csv << kTrainSchema << '\n';
    a3c::write_train_csv(csv, report);
    write_atomic(a.csv, csv.str(), a.force);
  }
  double tail = 0.0;
  const std::size_t n = std::min<std::size_t>(report.episodes.size(), 100);
  for (std::size_t i = report.episodes.size() - n; i < report.episodes.size(); ++i) {
    tail += report.episodes[i].service_delay;
  }
  std::cout << "trained " << report.episodes.size() << " episodes with " << h.workers
            << " worker(s) in " << std::fixed << std::setprecision(1) << report.wall_seconds
            << " s";
  if (n > 0) {
    std::cout << "; mean service delay over last " << n << ": " << std::setprecision(4)
              << tail / static_cast<double>(n) << " s";
  }
  std::cout << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string scenario;
  long episodes = 100;
  std::uint64_t seed = 1;
  std::optional<double> gamma;
  bool as_printed = false;
  std::string json;
  std::string trace;
  bool force = false;
};

void emit_json(const ordered_json& j, const std::string& path, bool force) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_atomic(path, text, force);
  }
}

int cmd_eval(const EvalArgs& a) {
  auto scenario = open_scenario(a.scenario);
  const auto model = nn::load_checkpoint(fs::path(a.checkpoint));
  a3c::check_compatible(model, env::Environment(scenario));
  const double gamma = a.gamma.value_or(scenario->config.agent.gamma);
  if (!a.json.empty() && a.json != "-") check_writable(a.json, a.force);

  std::ostringstream trace;
  std::function<void(std::size_t, const env::EpisodeTrace&)> on_episode;
  if (!a.trace.empty()) {
    check_writable(a.trace, a.force);
    trace << kTraceSchema << '\n';
    env::write_trace_header(trace);
    on_episode = [&trace](std::size_t i, const env::EpisodeTrace& t) {
      env::write_trace_rows(trace, i, t);
    };
  }
  auto actor = std::make_shared<const nn::NetParams>(model.actor);
  const auto m = eval::evaluate_policy(a3c::greedy_policy(actor), scenario, a.episodes, a.seed,
                                       gamma, a.as_printed, on_episode);
  if (!a.trace.empty()) write_atomic(a.trace, trace.str(), a.force);

  ordered_json j;
  j["schema"] = kMetricsSchema;
  j["seed"] = a.seed;
  j["gamma"] = gamma;
  j["results"] = ordered_json::array({metrics_json("kd", m)});
  emit_json(j, a.json, a.force);
  return kExitOk;
}

struct CompareArgs {
  std::string checkpoint;
  std::string scenario;
  std::vector<std::string> baselines{"greedy", "local", "random"};
  long episodes = 100;
  std::uint64_t seed = 1;
  std::optional<double> gamma;
  bool as_printed = false;
  std::string json;
  bool force = false;
};

int cmd_compare(const CompareArgs& a) {
  auto scenario = open_scenario(a.scenario);
  const double gamma = a.gamma.value_or(scenario->config.agent.gamma);
  std::vector<std::pair<std::string, eval::Policy>> policies;
  if (!a.checkpoint.empty()) {
    const auto model = nn::load_checkpoint(fs::path(a.checkpoint));
    a3c::check_compatible(model, env::Environment(scenario));
    policies.emplace_back("kd", a3c::greedy_policy(std::make_shared<const nn::NetParams>(model.actor)));
  }
  for (const auto& name : a.baselines) {
    if (name.empty()) continue;
    try {
      policies.emplace_back(name, baselines::by_name(name));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (policies.empty()) throw UsageError("nothing to compare");
  if (!a.json.empty() && a.json != "-") check_writable(a.json, a.force);

  ordered_json results = ordered_json::array();
  const bool table = a.json != "-";
  std::ostringstream sink;
  std::ostream& out = table ? std::cout : sink;
  out << std::left << std::setw(10) << "policy" << std::right << std::setw(18)
            << "service_delay_s" << std::setw(16) << "task_delay_s" << std::setw(14) << "J"
            << '\n';
  for (const auto& [name, policy] : policies) {
    const auto m = eval::evaluate_policy(policy, scenario, a.episodes, a.seed, gamma, a.as_printed);
    out << std::left << std::setw(10) << name << std::right << std::setprecision(6)
              << std::setw(18) << m.mean_service_delay << std::setw(16) << m.mean_task_delay
              << std::setw(14) << m.objective << '\n';
    results.push_back(metrics_json(name, m));
  }
  if (!a.json.empty()) {
    ordered_json j;
    j["schema"] = kMetricsSchema;
    j["seed"] = a.seed;
    j["gamma"] = gamma;
    j["results"] = results;
    emit_json(j, a.json, a.force);
  }
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Vehicular edge offloading simulator and A3C trainer"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Materialize a scenario file from a config");
  g->add_option("--config", gen.config, "Config file")->required();
  g->add_option("--seed", gen.seed, "Override the config seed")
      ->each([&gen](const std::string&) { gen.seed_set = true; });
  g->add_option("--out", gen.out, "Scenario file to write")->required();
  g->add_flag("--force", gen.force, "Overwrite existing output");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train an actor-critic model");
  t->add_option("--scenario", tr.scenario, "Scenario or config file")->required();
  t->add_option("--out", tr.out, "Checkpoint to write")->required();
  t->add_option("--csv", tr.csv, "Training curve CSV");
  t->add_option("--init", tr.init, "Start from this checkpoint");
  t->add_option("--workers", tr.workers, "Worker threads");
  t->add_option("--gamma", tr.gamma, "Discount factor");
  t->add_option("--delta", tr.delta, "Entropy coefficient");
  t->add_option("--episodes", tr.episodes, "Training episodes");
  t->add_option("--lr", tr.lr, "Learning rate (actor and critic)");
  t->add_option("--lr-critic", tr.lr_critic, "Critic learning rate");
  t->add_option("--n-step", tr.n_step, "Return depth, 0 for full episodes");
  t->add_option("--reward-scale", tr.reward_scale, "Reward multiplier, 0 for automatic");
  t->add_option("--clip", tr.clip, "Gradient norm limit, 0 to disable");
  t->add_option("--optimizer", tr.optimizer, "sgd or rmsprop");
  t->add_option("--seed", tr.seed, "Training seed");
  t->add_flag("--single-thread", tr.single_thread, "Force one worker");
  t->add_flag("--force", tr.force, "Overwrite existing outputs");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--scenario", ev.scenario, "Scenario or config file")->required();
  e->add_option("--episodes", ev.episodes, "Evaluation episodes");
  e->add_option("--seed", ev.seed, "Evaluation seed");
  e->add_option("--gamma", ev.gamma, "Discount for J");
  e->add_flag("--discount-as-printed", ev.as_printed, "Use gamma^(M-1) for every term of J");
  e->add_option("--json", ev.json, "Metrics JSON path (stdout by default)");
  e->add_option("--trace", ev.trace, "Per-step trace CSV");
  e->add_flag("--force", ev.force, "Overwrite existing outputs");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Compare a checkpoint with baselines on paired seeds");
  c->add_option("--checkpoint", cmp.checkpoint, "Checkpoint file");
  c->add_option("--scenario", cmp.scenario, "Scenario or config file")->required();
  c->add_option("--baselines", cmp.baselines, "Comma-separated baseline names")->delimiter(',');
  c->add_option("--episodes", cmp.episodes, "Evaluation episodes");
  c->add_option("--seed", cmp.seed, "Evaluation seed");
  c->add_option("--gamma", cmp.gamma, "Discount for J");
  c->add_flag("--discount-as-printed", cmp.as_printed, "Use gamma^(M-1) for every term of J");
  c->add_option("--json", cmp.json, "Metrics JSON path");
  c->add_flag("--force", cmp.force, "Overwrite existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev);
    if (c->parsed()) return cmd_compare(cmp);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace vedge::cli
