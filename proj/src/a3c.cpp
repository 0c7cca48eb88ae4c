#include "vedge/a3c.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "vedge/baselines.hpp"

namespace vedge::a3c {

void Hyperparams::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (!(entropy_coef >= 0.0)) throw std::invalid_argument("entropy coefficient must be >= 0");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
  if (n_step < 0) throw std::invalid_argument("n_step must be >= 0");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (episodes < 0) throw std::invalid_argument("episodes must be >= 0");
  if (hidden.empty()) throw std::invalid_argument("at least one hidden layer is required");
  if (!(reward_scale >= 0.0)) throw std::invalid_argument("reward_scale must be >= 0");
  if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("max_grad_norm must be >= 0");
  if (!(rms_decay > 0.0 && rms_decay < 1.0) || !(rms_epsilon > 0.0)) {
    throw std::invalid_argument("invalid RMS optimizer settings");
  }
}

Hyperparams from_preset(const AgentPreset& preset) {
  Hyperparams h;
  h.hidden = preset.hidden;
  h.workers = preset.workers;
  h.entropy_coef = preset.entropy_coef;
  h.gamma = preset.gamma;
  h.lr_actor = preset.lr_actor;
  h.lr_critic = preset.lr_critic;
  h.episodes = preset.episodes;
  h.n_step = preset.n_step;
  return h;
}

double k_step_return(std::span<const double> rewards, double bootstrap, double gamma) {
  if (rewards.empty()) throw std::invalid_argument("k-step return needs at least one reward");
  double g = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) g = rewards[i] + gamma * g;
  return g;
}

double advantage(double estimated_return, double value) { return estimated_return - value; }

std::vector<double> backward_returns(std::span<const double> rewards, double gamma,
                                     double bootstrap) {
  std::vector<double> out(rewards.size());
  double r = bootstrap;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    r = rewards[t] + gamma * r;
    out[t] = r;
  }
  return out;
}

GlobalStore::GlobalStore(nn::NetParams actor, nn::NetParams critic, const Hyperparams& hyper)
    : actor_(std::move(actor)),
      critic_(std::move(critic)),
      optimizer_(hyper.optimizer),
      max_grad_norm_(hyper.max_grad_norm),
      lr_actor_(hyper.lr_actor),
      lr_critic_(hyper.lr_critic),
      rms_decay_(hyper.rms_decay),
      rms_epsilon_(hyper.rms_epsilon) {
  if (optimizer_ == Optimizer::RmsProp) {
    actor_sq_.assign(actor_.parameter_count(), 0.0);
    critic_sq_.assign(critic_.parameter_count(), 0.0);
  }
}

GlobalStore::Snapshot GlobalStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return {actor_, critic_, version_};
}

std::uint64_t GlobalStore::version() const {
  std::lock_guard lock(mutex_);
  return version_;
}

void GlobalStore::step(nn::NetParams& net, nn::Gradients grad, std::vector<double>& sq, double lr) {
  if (max_grad_norm_ > 0.0) {
    const double norm = std::sqrt(grad.squared_norm());
    if (norm > max_grad_norm_) grad *= max_grad_norm_ / norm;
  }
  if (optimizer_ == Optimizer::Sgd) {
    nn::apply_sgd_inplace(net, grad, lr);
    return;
  }
  auto g = nn::flatten(grad.layers);
  auto w = nn::flatten(net.layers);
  for (std::size_t i = 0; i < g.size(); ++i) {
    sq[i] = rms_decay_ * sq[i] + (1.0 - rms_decay_) * g[i] * g[i];
    w[i] -= lr * g[i] / std::sqrt(sq[i] + rms_epsilon_);
  }
  nn::unflatten(w, net.layers);
}

std::uint64_t GlobalStore::apply(const nn::Gradients& d_actor, const nn::Gradients& d_critic) {
  std::lock_guard lock(mutex_);
  if (!d_actor.congruent(actor_) || !d_critic.congruent(critic_)) {
    throw nn::ShapeError("gradient shape does not match the global networks");
  }
  // Ascent on the actor objective is descent on its negation.
  nn::Gradients descent = d_actor;
  descent *= -1.0;
  // Work on copies so a failure leaves the store untouched.
  nn::NetParams actor = actor_;
  nn::NetParams critic = critic_;
  auto actor_sq = actor_sq_;
  auto critic_sq = critic_sq_;
  step(actor, std::move(descent), actor_sq, lr_actor_);
  step(critic, d_critic, critic_sq, lr_critic_);
  actor_ = std::move(actor);
  critic_ = std::move(critic);
  actor_sq_ = std::move(actor_sq);
  critic_sq_ = std::move(critic_sq);
  return ++version_;
}

namespace {

std::size_t sample_action(const Eigen::VectorXd& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (x < acc) return static_cast<std::size_t>(i);
  }
  return static_cast<std::size_t>(probs.size() - 1);
}

std::size_t argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<std::size_t>(best);
}

}  // namespace

EpisodeResult run_episode(env::Environment& environment, const nn::NetParams& actor,
                          const nn::NetParams& critic, const Hyperparams& hyper, Rng& rng,
                          ActionMode mode, double reward_scale) {
  if (!environment.started()) throw env::LifecycleError("environment must be reset first");
  EpisodeResult res;
  std::vector<std::vector<double>> xs;
  std::vector<double> rewards;
  double entropy_sum = 0.0;
  while (!environment.terminal()) {
    xs.push_back(env::encode_state(environment.state(), environment.norms()));
    const auto probs = nn::forward_actor(actor, xs.back());
    entropy_sum += nn::policy_entropy(probs);
    const auto a = mode == ActionMode::Sample ? sample_action(probs, rng) : argmax(probs);
    const auto out = environment.step({a});
    res.actions.push_back(a);
    rewards.push_back(out.reward * reward_scale);
    res.episode_return += out.reward;
  }
  res.trace = environment.trace();
  const std::size_t m = rewards.size();
  res.mean_entropy = m ? entropy_sum / static_cast<double>(m) : 0.0;

  std::vector<double> values(m);
  for (std::size_t t = 0; t < m; ++t) values[t] = nn::forward_critic(critic, xs[t]);

  const std::size_t depth = hyper.n_step > 0 ? static_cast<std::size_t>(hyper.n_step) : m;
  if (depth >= m) {
    res.returns = backward_returns(rewards, hyper.gamma, 0.0);
  } else {
    res.returns.resize(m);
    for (std::size_t t = 0; t < m; ++t) {
      const std::size_t end = std::min(m, t + depth);
      const double bootstrap = end < m ? values[end] : 0.0;
      res.returns[t] = k_step_return(std::span<const double>(rewards).subspan(t, end - t),
                                     bootstrap, hyper.gamma);
    }
  }

  res.d_actor = nn::Gradients::zeros_like(actor);
  res.d_critic = nn::Gradients::zeros_like(critic);
  res.advantages.resize(m);
  double loss = 0.0;
  for (std::size_t t = m; t-- > 0;) {
    const double a = advantage(res.returns[t], values[t]);
    res.advantages[t] = a;
    loss += a * a;
    res.d_critic += nn::backward_critic(critic, xs[t], res.returns[t]);
    res.d_actor += nn::backward_actor(actor, xs[t], res.actions[t], a, hyper.entropy_coef);
  }
  res.value_loss = m ? loss / static_cast<double>(m) : 0.0;
  return res;
}

nn::Checkpoint init_networks(const env::Environment& environment, const Hyperparams& hyper) {
  const int inputs = static_cast<int>(env::encoded_size(environment.action_count()));
  std::vector<int> actor_sizes{inputs};
  actor_sizes.insert(actor_sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  std::vector<int> critic_sizes = actor_sizes;
  actor_sizes.push_back(static_cast<int>(environment.action_count()));
  critic_sizes.push_back(1);
  return {nn::init_params(actor_sizes, nn::Head::Softmax, derive_seed(hyper.seed, 0xAC7)),
          nn::init_params(critic_sizes, nn::Head::Identity, derive_seed(hyper.seed, 0xC217))};
}

double probe_reward_scale(std::shared_ptr<const Scenario> scenario, std::uint64_t seed) {
  env::Environment environment(std::move(scenario));
  double total = 0.0;
  constexpr int kProbes = 8;
  for (std::uint64_t k = 0; k < kProbes; ++k) {
    environment.reset(derive_seed(seed, 0x5CA1E + k));
    while (!environment.terminal()) environment.step(baselines::greedy_decide(environment));
    total += environment.trace().service_delay;
  }
  const double mean = total / kProbes;
  return mean > 0.0 ? 0.1 / mean : 1.0;
}

std::uint64_t train_seed(std::uint64_t seed, std::uint64_t index) {
  return derive_seed(derive_seed(seed, 0x7EA1), index);
}

void check_compatible(const nn::Checkpoint& model, const env::Environment& environment) {
  const auto inputs = env::encoded_size(environment.action_count());
  if (model.actor.input_size() != inputs || model.critic.input_size() != inputs) {
    throw std::invalid_argument("model expects " + std::to_string(model.actor.input_size()) +
                                " state features, scenario produces " + std::to_string(inputs));
  }
  if (model.actor.output_size() != environment.action_count()) {
    throw std::invalid_argument("model has " + std::to_string(model.actor.output_size()) +
                                " actions, scenario has " +
                                std::to_string(environment.action_count()));
  }
  if (model.critic.output_size() != 1 || model.actor.head != nn::Head::Softmax) {
    throw std::invalid_argument("checkpoint does not hold an actor/critic pair");
  }
}

TrainReport train(std::shared_ptr<const Scenario> scenario, const Hyperparams& hyper,
                  const std::optional<nn::Checkpoint>& init) {
  hyper.validate();
  const auto started = std::chrono::steady_clock::now();
  env::Environment probe_env(scenario);
  const nn::Checkpoint start = init ? *init : init_networks(probe_env, hyper);
  check_compatible(start, probe_env);

  TrainReport report;
  report.reward_scale =
      hyper.reward_scale > 0.0 ? hyper.reward_scale : probe_reward_scale(scenario, hyper.seed);
  GlobalStore store(start.actor, start.critic, hyper);
  report.episodes.resize(static_cast<std::size_t>(hyper.episodes));

  std::atomic<long> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&](int id) {
    try {
      env::Environment environment(scenario);
      Rng rng(derive_seed(hyper.seed, 1000 + static_cast<std::uint64_t>(id)));
      for (long e = next++; e < hyper.episodes; e = next++) {
        const auto snap = store.snapshot();
        environment.reset(train_seed(hyper.seed, static_cast<std::uint64_t>(e)));
        auto res = run_episode(environment, snap.actor, snap.critic, hyper, rng,
                               ActionMode::Sample, report.reward_scale);
        const auto version = store.apply(res.d_actor, res.d_critic);
        report.episodes[static_cast<std::size_t>(e)] = {
            e, id, res.episode_return, res.trace.service_delay, res.mean_entropy,
            res.value_loss, version};
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      next = hyper.episodes;
    }
  };
  if (hyper.workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < hyper.workers; ++w) threads.emplace_back(worker, w);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  const auto snap = store.snapshot();
  report.final_params = {snap.actor, snap.critic};
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

TrainReport online_learn(const nn::Checkpoint& pretrained, std::shared_ptr<const Scenario> scenario,
                         const Hyperparams& hyper) {
  env::Environment environment(scenario);
  check_compatible(pretrained, environment);
  return train(std::move(scenario), hyper, pretrained);
}

eval::Policy greedy_policy(std::shared_ptr<const nn::NetParams> actor) {
  return [actor = std::move(actor)](const env::Environment& e, Rng&) {
    const auto x = env::encode_state(e.state(), e.norms());
    return argmax(nn::forward_actor(*actor, x));
  };
}

eval::Metrics evaluate(const nn::Checkpoint& model, std::shared_ptr<const Scenario> scenario,
                       long episodes, std::uint64_t seed, double gamma, bool discount_as_printed) {
  check_compatible(model, env::Environment(scenario));
  auto actor = std::make_shared<const nn::NetParams>(model.actor);
  return eval::evaluate_policy(greedy_policy(actor), std::move(scenario), episodes, seed, gamma,
                               discount_as_printed);
}

void write_train_csv(std::ostream& os, const TrainReport& report) {
  os << "episode,worker,return,service_delay_s,mean_entropy,value_loss,store_version\n";
  for (const auto& s : report.episodes) {
    os << s.episode << ',' << s.worker << ',' << format_number(s.episode_return) << ','
       << format_number(s.service_delay) << ',' << format_number(s.mean_entropy) << ','
       << format_number(s.value_loss) << ',' << s.store_version << '\n';
  }
}

}  // namespace vedge::a3c
