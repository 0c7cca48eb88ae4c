#include "vedge/baselines.hpp"

#include <limits>
#include <stdexcept>

namespace vedge::baselines {

std::size_t argmin_slot(std::span<const double> delays) {
  if (delays.empty()) throw std::invalid_argument("no slots to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < delays.size(); ++i) {
    if (delays[i] < delays[best]) best = i;
  }
  return best;
}

env::Action greedy_decide(const env::Environment& environment) {
  return {argmin_slot(environment.slot_delays())};
}

env::Action local_only() { return {0}; }

env::Action random_policy(std::size_t action_count, Rng& rng) {
  if (action_count == 0) throw std::invalid_argument("empty action space");
  std::uniform_int_distribution<std::size_t> pick(0, action_count - 1);
  return {pick(rng)};
}

eval::Policy greedy() {
  return [](const env::Environment& e, Rng&) { return greedy_decide(e).slot; };
}

eval::Policy local() {
  return [](const env::Environment&, Rng&) { return local_only().slot; };
}

eval::Policy uniform_random() {
  return [](const env::Environment& e, Rng& rng) { return random_policy(e.action_count(), rng).slot; };
}

eval::Policy by_name(const std::string& name) {
  if (name == "greedy") return greedy();
  if (name == "local") return local();
  if (name == "random") return uniform_random();
  throw std::invalid_argument("unknown baseline '" + name + "'");
}

namespace {

void search(const env::Environment& at, std::vector<std::size_t>& path, Plan& best) {
  for (std::size_t s = 0; s < at.action_count(); ++s) {
    env::Environment next = at;
    next.step({s});
    path.push_back(s);
    if (next.terminal()) {
      if (next.trace().service_delay < best.service_delay) {
        best.service_delay = next.trace().service_delay;
        best.slots = path;
      }
    } else {
      search(next, path, best);
    }
    path.pop_back();
  }
}

}  // namespace

Plan exhaustive_optimum(std::shared_ptr<const Scenario> scenario, std::uint64_t seed,
                        std::size_t max_tasks) {
  env::Environment root(std::move(scenario));
  root.reset(seed);
  if (root.task_count() > max_tasks) {
    throw std::invalid_argument("exhaustive search limited to " + std::to_string(max_tasks) +
                                " tasks");
  }
  Plan best;
  best.service_delay = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> path;
  search(root, path, best);
  return best;
}

double replay(std::shared_ptr<const Scenario> scenario, std::uint64_t seed,
              std::span<const std::size_t> slots) {
  env::Environment e(std::move(scenario));
  e.reset(seed);
  for (auto s : slots) e.step({s});
  if (!e.terminal()) throw std::invalid_argument("slot sequence shorter than the service");
  return e.trace().service_delay;
}

}  // namespace vedge::baselines
