#include "vedge/evaluation.hpp"

#include <cmath>

namespace vedge::eval {

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t index) {
  return derive_seed(derive_seed(seed, 0xE7A1), index);
}

double discounted_objective(const env::EpisodeTrace& trace, double gamma, bool as_printed) {
  const auto m = trace.steps.size();
  if (m == 0) return 0.0;
  double j = 0.0;
  const double constant = std::pow(gamma, static_cast<double>(m - 1));
  double discount = 1.0;
  for (const auto& s : trace.steps) {
    j += (as_printed ? constant : discount) * s.reward;
    discount *= gamma;
  }
  return j / static_cast<double>(m);
}

Metrics evaluate_policy(const Policy& policy, std::shared_ptr<const Scenario> scenario,
                        long episodes, std::uint64_t seed, double gamma, bool discount_as_printed,
                        const std::function<void(std::size_t, const env::EpisodeTrace&)>& on_episode) {
  env::Environment environment(std::move(scenario));
  Rng rng(derive_seed(seed, 0xD1CE));
  Metrics m;
  m.slot_counts.assign(environment.action_count(), 0);
  for (long e = 0; e < episodes; ++e) {
    environment.reset(episode_seed(seed, static_cast<std::uint64_t>(e)));
    while (!environment.terminal()) {
      const auto slot = policy(environment, rng);
      environment.step({slot});
      ++m.slot_counts.at(slot);
      ++m.steps;
    }
    const auto& trace = environment.trace();
    m.service_delays.push_back(trace.service_delay);
    m.mean_service_delay += trace.service_delay;
    m.mean_task_delay += trace.service_delay / static_cast<double>(trace.steps.size());
    m.objective += discounted_objective(trace, gamma, discount_as_printed);
    if (on_episode) on_episode(static_cast<std::size_t>(e), trace);
  }
  m.episodes = episodes;
  if (episodes > 0) {
    const double n = static_cast<double>(episodes);
    m.mean_service_delay /= n;
    m.mean_task_delay /= n;
    m.objective /= n;
  }
  return m;
}

}  // namespace vedge::eval
