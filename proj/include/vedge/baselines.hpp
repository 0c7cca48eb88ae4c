#ifndef VEDGE_BASELINES_HPP_
#define VEDGE_BASELINES_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vedge/env.hpp"
#include "vedge/evaluation.hpp"

namespace vedge::baselines {

// Lowest-index slot with the smallest delay.
std::size_t argmin_slot(std::span<const double> delays);

// Myopic choice: the slot minimizing the current task's adjusted delay.
env::Action greedy_decide(const env::Environment& environment);
env::Action local_only();
env::Action random_policy(std::size_t action_count, Rng& rng);

eval::Policy greedy();
eval::Policy local();
eval::Policy uniform_random();

// Looks up "greedy", "local" or "random".
eval::Policy by_name(const std::string& name);

struct Plan {
  std::vector<std::size_t> slots;
  double service_delay = 0.0;
};

// Exhaustive search over every slot sequence for the episode `seed`, by
// replaying the environment. Exponential in the task count; intended as a
// test oracle for small services.
Plan exhaustive_optimum(std::shared_ptr<const Scenario> scenario, std::uint64_t seed,
                        std::size_t max_tasks = 6);

// Service delay of a fixed slot sequence on episode `seed`.
double replay(std::shared_ptr<const Scenario> scenario, std::uint64_t seed,
              std::span<const std::size_t> slots);

}  // namespace vedge::baselines

#endif  // VEDGE_BASELINES_HPP_
