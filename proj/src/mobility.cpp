#include "vedge/mobility.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace vedge::mobility {

double expected_handoffs(double exec_rate, double residence_rate) {
  if (!(exec_rate > 0.0)) throw DomainError("execution rate must be positive");
  if (residence_rate < 0.0) throw DomainError("residence rate must be non-negative");
  return residence_rate / exec_rate;
}

double expected_handoffs_from_means(double mean_exec_time, double mean_residence_time) {
  if (!(mean_exec_time > 0.0)) return 0.0;
  if (!(mean_residence_time > 0.0)) throw DomainError("mean residence time must be positive");
  const double eta = std::isinf(mean_residence_time) ? 0.0 : 1.0 / mean_residence_time;
  return expected_handoffs(1.0 / mean_exec_time, eta);
}

std::size_t state_count(double z_min, double z_max, double unit) {
  return static_cast<std::size_t>(std::floor((z_max - z_min) / unit)) + 2;
}

HeadwayChain::HeadwayChain(HeadwayChainParams params) : params_(std::move(params)) {
  const auto& c = params_;
  if (!(c.z_min < c.z_max)) throw DomainError("z_min must be below z_max");
  if (!(c.unit > 0.0)) throw DomainError("headway unit must be positive");
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(c.p) || !in_unit(c.q) || !in_unit(c.beta)) {
    throw DomainError("p, q and beta must lie in [0, 1]");
  }
  if (!(c.time_step > 0.0)) throw DomainError("time_step must be positive");
  size_ = state_count(c.z_min, c.z_max, c.unit);
  if (c.comm_range_state >= size_) {
    throw DomainError("comm_range_state " + std::to_string(c.comm_range_state) +
                      " outside chain of " + std::to_string(size_) + " states");
  }
  if (params_.initial_dist.empty()) {
    params_.initial_dist.assign(size_, 0.0);
    params_.initial_dist[0] = 1.0;
  }
  if (params_.initial_dist.size() != size_) {
    throw DomainError("initial distribution has " + std::to_string(params_.initial_dist.size()) +
                      " entries, chain has " + std::to_string(size_) + " states");
  }
  double sum = 0.0;
  for (double v : params_.initial_dist) {
    if (!(v >= 0.0)) throw DomainError("initial distribution has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("initial distribution does not sum to 1");
  for (std::size_t j = 0; j < size_; ++j) {
    const auto t = transition_probs(*this, j);
    if (t.up + t.down > 1.0 + 1e-15) {
      throw DomainError("p_j + q_j exceeds 1 at state " + std::to_string(j));
    }
  }
}

double HeadwayChain::headway(std::size_t j) const {
  return std::min(params_.z_min + static_cast<double>(j) * params_.unit, params_.z_max);
}

Transition transition_probs(const HeadwayChain& chain, std::size_t j) {
  if (j >= chain.size()) throw DomainError("state index out of range");
  const auto& c = chain.params();
  const double factor = 1.0 - c.beta * (1.0 - chain.headway(j) / c.z_max);
  const double up = c.p * factor;
  const double down = c.q * factor;
  return {up, down, 1.0 - up - down};
}

double TransitionMatrix::operator()(std::size_t row, std::size_t col) const {
  if (row == col) return diag_[row];
  if (col == row + 1) return up_[row];
  if (row == col + 1) return down_[row];
  return 0.0;
}

Eigen::MatrixXd TransitionMatrix::dense() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - 1); j < std::min(n, i + 2); ++j) {
      m(i, j) = (*this)(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return m;
}

std::vector<double> TransitionMatrix::propagate(const std::vector<double>& dist) const {
  const std::size_t n = size();
  if (dist.size() != n) throw DomainError("distribution size does not match the chain");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double mass = dist[i];
    if (mass == 0.0) continue;
    out[i] += mass * diag_[i];
    if (i + 1 < n) out[i + 1] += mass * up_[i];
    if (i > 0) out[i - 1] += mass * down_[i];
  }
  return out;
}

TransitionMatrix build_transition_matrix(const HeadwayChain& chain) {
  const std::size_t n = chain.size();
  TransitionMatrix m;
  m.diag_.assign(n, 0.0);
  m.up_.assign(n, 0.0);
  m.down_.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto t = transition_probs(chain, j);
    double stay = t.stay;
    if (j == 0) {
      stay += t.down;
    } else {
      m.down_[j] = t.down;
    }
    if (j + 1 == n) {
      stay += t.up;
    } else {
      m.up_[j] = t.up;
    }
    m.diag_[j] = stay;
  }
  return m;
}

HeadwayDistribution evolve(const HeadwayDistribution& dist, const TransitionMatrix& q, long steps) {
  if (steps < 0) throw DomainError("step count must be non-negative");
  HeadwayDistribution out = dist;
  for (long s = 0; s < steps; ++s) out.probs = q.propagate(out.probs);
  out.step = dist.step + steps;
  return out;
}

long usability_steps(const HeadwayChain& chain, double task_exec_mean) {
  if (!(task_exec_mean > 0.0)) throw DomainError("task duration must be positive");
  const double steps = std::round(task_exec_mean / chain.params().time_step);
  return std::max(1L, static_cast<long>(steps));
}

namespace {

double mass_in_range(const HeadwayChain& chain, const std::vector<double>& probs) {
  const auto last = chain.params().comm_range_state;
  double r = 0.0;
  for (std::size_t j = 0; j <= last; ++j) r += probs[j];
  return std::clamp(r, 0.0, 1.0);
}

}  // namespace

double node_usability(const HeadwayChain& chain, double task_exec_mean) {
  const long steps = usability_steps(chain, task_exec_mean);
  const auto q = build_transition_matrix(chain);
  const auto dist = evolve({chain.initial_dist(), 0}, q, steps);
  return mass_in_range(chain, dist.probs);
}

UsabilityTable::UsabilityTable(const HeadwayChain& chain)
    : chain_(chain), q_(build_transition_matrix(chain)) {
  current_ = chain_.initial_dist();
  usability_.push_back(mass_in_range(chain_, current_));
}

double UsabilityTable::at_steps(long steps) {
  if (steps < 0) throw DomainError("step count must be non-negative");
  while (static_cast<long>(usability_.size()) <= steps) {
    current_ = q_.propagate(current_);
    usability_.push_back(mass_in_range(chain_, current_));
  }
  return usability_[static_cast<std::size_t>(steps)];
}

double UsabilityTable::for_duration(double task_exec_mean) {
  return at_steps(usability_steps(chain_, task_exec_mean));
}

}  // namespace vedge::mobility
