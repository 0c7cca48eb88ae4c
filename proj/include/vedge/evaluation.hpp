#ifndef VEDGE_EVALUATION_HPP_
#define VEDGE_EVALUATION_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vedge/env.hpp"

namespace vedge::eval {

// Chooses a slot for the environment's current task.
using Policy = std::function<std::size_t(const env::Environment&, Rng&)>;

struct Metrics {
  long episodes = 0;
  double mean_service_delay = 0.0;  // D_s
  double mean_task_delay = 0.0;     // D_s / M, averaged over episodes
  double objective = 0.0;           // J, discounted mean reward
  std::vector<double> service_delays;  // per episode, for paired comparisons
  std::vector<long> slot_counts;       // how often each slot was chosen
  long steps = 0;
};

// Environment seed of evaluation episode `index`; shared by every policy so
// comparisons are paired.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index);

// J per episode is (1/M) sum_t gamma^(t-1) r_t; `discount_as_printed` uses
// gamma^(M-1) for every term instead.
Metrics evaluate_policy(const Policy& policy, std::shared_ptr<const Scenario> scenario,
                        long episodes, std::uint64_t seed, double gamma,
                        bool discount_as_printed = false,
                        const std::function<void(std::size_t, const env::EpisodeTrace&)>& on_episode = {});

double discounted_objective(const env::EpisodeTrace& trace, double gamma, bool as_printed);

}  // namespace vedge::eval

#endif  // VEDGE_EVALUATION_HPP_
