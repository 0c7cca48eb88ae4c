#ifndef VEDGE_MOBILITY_HPP_
#define VEDGE_MOBILITY_HPP_

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace vedge::mobility {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Mean number of access-area changes while a task runs: the ratio of the
// residence rate to the execution rate (mean execution time divided by mean
// residence time). Holds for any residence-time distribution.
double expected_handoffs(double exec_rate, double residence_rate);

// Convenience overload taking mean times in seconds; an infinite residence
// time means the vehicle never leaves coverage.
double expected_handoffs_from_means(double mean_exec_time, double mean_residence_time);

struct HeadwayChainParams {
  double z_min = 10.0;  // m
  double z_max = 50.0;  // m
  double unit = 10.0;   // m per state
  double p = 0.0;       // headway growth probability
  double q = 0.0;       // headway shrink probability
  double beta = 0.0;    // state dependence, 0 = homogeneous
  std::size_t comm_range_state = 0;
  double time_step = 1.0;  // s
  // Empty means a point mass at state 0.
  std::vector<double> initial_dist;

  bool operator==(const HeadwayChainParams&) const = default;
};

struct Transition {
  double up;    // p_j
  double down;  // q_j
  double stay;  // l_j
};

// Discrete distance-headway birth-death chain. States are indexed
// 0..size()-1; the last one is the overflow state beyond z_max.
class HeadwayChain {
 public:
  explicit HeadwayChain(HeadwayChainParams params);

  std::size_t size() const noexcept { return size_; }
  const HeadwayChainParams& params() const noexcept { return params_; }
  const std::vector<double>& initial_dist() const noexcept { return params_.initial_dist; }

  // Headway at the lower edge of state j, capped at z_max for the overflow
  // state.
  double headway(std::size_t j) const;

 private:
  HeadwayChainParams params_;
  std::size_t size_;
};

std::size_t state_count(double z_min, double z_max, double unit);

Transition transition_probs(const HeadwayChain& chain, std::size_t j);

// Row-stochastic tridiagonal one-step matrix. Boundary rows reflect: the
// down move out of state 0 and the up move out of the top state are folded
// into the stay probability.
class TransitionMatrix {
 public:
  std::size_t size() const noexcept { return diag_.size(); }
  double operator()(std::size_t row, std::size_t col) const;
  Eigen::MatrixXd dense() const;

  // One left multiplication: returns dist * Q.
  std::vector<double> propagate(const std::vector<double>& dist) const;

 private:
  friend TransitionMatrix build_transition_matrix(const HeadwayChain& chain);
  std::vector<double> diag_;
  std::vector<double> up_;    // (j, j+1)
  std::vector<double> down_;  // (j, j-1), down_[0] unused
};

TransitionMatrix build_transition_matrix(const HeadwayChain& chain);

struct HeadwayDistribution {
  std::vector<double> probs;
  long step = 0;
};

HeadwayDistribution evolve(const HeadwayDistribution& dist, const TransitionMatrix& q, long steps);

// Number of chain steps covering a task of the given mean duration:
// round(mean / time_step), at least 1.
long usability_steps(const HeadwayChain& chain, double task_exec_mean);

// Probability the link is still within radio range after the task's steps.
double node_usability(const HeadwayChain& chain, double task_exec_mean);

// Memoizes usability per step count for a fixed chain.
class UsabilityTable {
 public:
  explicit UsabilityTable(const HeadwayChain& chain);
  double at_steps(long steps);
  double for_duration(double task_exec_mean);
  const HeadwayChain& chain() const noexcept { return chain_; }

 private:
  HeadwayChain chain_;
  TransitionMatrix q_;
  std::vector<double> current_;  // pi(0) Q^k for k = usability_.size() - 1
  std::vector<double> usability_;
};

}  // namespace vedge::mobility

#endif  // VEDGE_MOBILITY_HPP_
