#ifndef VEDGE_A3C_HPP_
#define VEDGE_A3C_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "vedge/env.hpp"
#include "vedge/evaluation.hpp"
#include "vedge/nn.hpp"

namespace vedge::a3c {

enum class Optimizer { Sgd, RmsProp };

struct Hyperparams {
  double gamma = 0.99;
  double entropy_coef = 0.01;  // delta
  double lr_actor = 3e-2;
  double lr_critic = 3e-2;
  int n_step = 0;  // return depth; 0 = whole episode
  int workers = 1;
  long episodes = 1000;
  std::uint64_t seed = 1;
  std::vector<int> hidden{64, 64, 64};
  // Rewards are multiplied by this before learning. 0 picks
  // 0.1 / (mean greedy service delay) from a short probe.
  double reward_scale = 0.0;
  double max_grad_norm = 0.0;  // 0 = no clipping
  Optimizer optimizer = Optimizer::Sgd;
  double rms_decay = 0.99;
  double rms_epsilon = 1e-8;

  void validate() const;
};

Hyperparams from_preset(const AgentPreset& preset);

// sum_{i<k} gamma^i r_{t+i} + gamma^k * bootstrap, with k = rewards.size().
double k_step_return(std::span<const double> rewards, double bootstrap, double gamma);

double advantage(double estimated_return, double value);

// Running R = r_t + gamma * R from the last step back to the first, seeded
// with `bootstrap`. Element t is the return credited to step t.
std::vector<double> backward_returns(std::span<const double> rewards, double gamma,
                                     double bootstrap = 0.0);

// Shared actor and critic. Readers get consistent copies; applies are
// serialized whole updates.
class GlobalStore {
 public:
  struct Snapshot {
    nn::NetParams actor;
    nn::NetParams critic;
    std::uint64_t version = 0;
  };

  GlobalStore(nn::NetParams actor, nn::NetParams critic, const Hyperparams& hyper);

  Snapshot snapshot() const;
  // `d_actor` is the ascent direction of the actor objective, `d_critic`
  // the gradient of the critic loss. Returns the new version.
  std::uint64_t apply(const nn::Gradients& d_actor, const nn::Gradients& d_critic);
  std::uint64_t version() const;
  std::uint64_t updates() const { return version(); }

 private:
  void step(nn::NetParams& net, nn::Gradients grad, std::vector<double>& sq, double lr);

  mutable std::mutex mutex_;
  nn::NetParams actor_;
  nn::NetParams critic_;
  std::uint64_t version_ = 0;
  Optimizer optimizer_;
  double max_grad_norm_;
  double lr_actor_;
  double lr_critic_;
  double rms_decay_;
  double rms_epsilon_;
  std::vector<double> actor_sq_;
  std::vector<double> critic_sq_;
};

enum class ActionMode { Sample, Greedy };

struct EpisodeResult {
  env::EpisodeTrace trace;
  std::vector<std::size_t> actions;
  std::vector<double> returns;     // scaled, per step
  std::vector<double> advantages;  // scaled, per step
  nn::Gradients d_actor;
  nn::Gradients d_critic;
  double episode_return = 0.0;  // unscaled sum of rewards
  double mean_entropy = 0.0;
  double value_loss = 0.0;  // mean squared advantage
};

// One forward pass over the service, then the backward return loop with
// gradient accumulation over every step. `environment` must be reset.
EpisodeResult run_episode(env::Environment& environment, const nn::NetParams& actor,
                          const nn::NetParams& critic, const Hyperparams& hyper, Rng& rng,
                          ActionMode mode = ActionMode::Sample, double reward_scale = 1.0);

struct EpisodeStats {
  long episode = 0;
  int worker = 0;
  double episode_return = 0.0;
  double service_delay = 0.0;
  double mean_entropy = 0.0;
  double value_loss = 0.0;
  std::uint64_t store_version = 0;
};

struct TrainReport {
  std::vector<EpisodeStats> episodes;  // ordered by episode index
  double wall_seconds = 0.0;
  double reward_scale = 1.0;
  nn::Checkpoint final_params;
};

// Fresh actor/critic sized for the scenario's action space.
nn::Checkpoint init_networks(const env::Environment& environment, const Hyperparams& hyper);

// Reward scale from a greedy probe of the scenario.
double probe_reward_scale(std::shared_ptr<const Scenario> scenario, std::uint64_t seed);

// Training episode `index` runs on environment seed train_seed(seed, index).
std::uint64_t train_seed(std::uint64_t seed, std::uint64_t index);

// Runs `hyper.workers` worker threads (inline when workers == 1) against a
// shared store until `hyper.episodes` episodes have been played.
TrainReport train(std::shared_ptr<const Scenario> scenario, const Hyperparams& hyper,
                  const std::optional<nn::Checkpoint>& init = std::nullopt);

// Continues training a pretrained model on the given scenario.
TrainReport online_learn(const nn::Checkpoint& pretrained, std::shared_ptr<const Scenario> scenario,
                         const Hyperparams& hyper);

// Throws std::invalid_argument when the model does not fit the scenario.
void check_compatible(const nn::Checkpoint& model, const env::Environment& environment);

// Deterministic policy: argmax of the actor output, lowest index on ties.
eval::Policy greedy_policy(std::shared_ptr<const nn::NetParams> actor);

eval::Metrics evaluate(const nn::Checkpoint& model, std::shared_ptr<const Scenario> scenario,
                       long episodes, std::uint64_t seed, double gamma,
                       bool discount_as_printed = false);

// Columns: episode, worker, return, service_delay_s, mean_entropy,
// value_loss, store_version.
void write_train_csv(std::ostream& os, const TrainReport& report);

}  // namespace vedge::a3c

#endif  // VEDGE_A3C_HPP_
