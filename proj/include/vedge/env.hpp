#ifndef VEDGE_ENV_HPP_
#define VEDGE_ENV_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "vedge/scenario.hpp"

namespace vedge::env {

// Placement that cannot carry its data (zero bandwidth on a used link).
class InfeasiblePlacement : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mobility inputs missing for the node kind, or other misuse of the delay
// functions.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Environment used out of order (step before reset or after terminal).
class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Data arriving from one predecessor.
struct Inbound {
  double data = 0.0;  // bits
  const EdgeNode* from = nullptr;
};

// Bits/s between two nodes; infinite when they coincide.
double link_rate(const EdgeNode& from, const EdgeNode& to);

// Execution, interactive and dependency-transfer time of a task on `node`.
// The interactive term vanishes for local execution. Transfers from several
// predecessors run concurrently, so the slowest one counts.
double raw_task_delay(const TaskProfile& task, const EdgeNode& node, double cpu_freq,
                      double access_rate, std::span<const Inbound> inbound);

// Slowest transfer of the inbound data to `target`.
double transfer_delay(std::span<const Inbound> inbound, const EdgeNode& target);

struct MobilityInputs {
  std::optional<double> handoffs;         // BS/AP
  std::optional<double> usability;        // VN
  std::optional<double> local_recompute;  // VN: re-execution time on the vehicle, s
};

double adjusted_task_delay(double raw_delay, const EdgeNode& node, const MobilityInputs& mobility,
                           VnPenalty penalty = VnPenalty::AsPrinted);

struct ServiceDelay {
  double total = 0.0;
  std::vector<bool> longest;  // F(i) per task, dag order
};

// Sum of per-task delays where each parallel group contributes only its
// slowest member (lowest index on ties).
ServiceDelay service_delay(std::span<const double> delays, const ServiceDag& dag);

// One action-space entry. Pseudo slots pad missing nodes of a kind.
struct Slot {
  NodeKind kind = NodeKind::Local;
  std::optional<int> node_id;  // empty for pseudo slots
  bool pseudo() const { return !node_id.has_value(); }
};

// Slot order: local, BS, AP, VN; each kind sorted by nominal frequency
// (descending, stable) and truncated or padded to its quota.
std::vector<Slot> candidate_set(std::span<const EdgeNode> accessible, const Quotas& quotas);

struct SlotFeatures {
  NodeKind kind = NodeKind::Local;
  bool pseudo = false;
  double cpu_freq = 0.0;
  double access_rate = 0.0;
  double handoffs = 0.0;
  double usability = 0.0;
};

struct EnvState {
  double compute_demand = 0.0;
  double interactive_data = 0.0;
  double dep_data = 0.0;
  std::vector<SlotFeatures> slots;
  double speed = 0.0;
  std::size_t step_index = 0;  // 1-based
};

struct Action {
  std::size_t slot = 0;
};

struct StepOutcome {
  double reward = 0.0;
  double raw_delay = 0.0;
  double adjusted_delay = 0.0;
  bool terminal = false;
  int node_id = -1;  // -1 for pseudo slots
  NodeKind node_kind = NodeKind::Local;
};

struct StepRecord {
  std::size_t step = 0;
  int task_id = 0;
  std::size_t slot = 0;
  int node_id = -1;
  NodeKind node_kind = NodeKind::Local;
  double raw_delay = 0.0;
  double adjusted_delay = 0.0;
  double reward = 0.0;
  bool longest = true;
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  double service_delay = 0.0;
};

// Divisors applied to state features before they reach a network.
struct FeatureNorms {
  double compute = 1.0;
  double interactive = 1.0;
  double dep = 1.0;
  double freq = 1.0;
  double rate = 1.0;
  double handoffs = 1.0;
  double usability = 1.0;
  double speed = 1.0;
};

constexpr std::size_t kTaskFeatures = 3;
constexpr std::size_t kSlotFeatures = 7;

std::size_t encoded_size(std::size_t slots);

// Layout: [compute, interactive, dep | per slot: BS, AP, VN one-hot, freq,
// rate, handoffs, usability | speed].
std::vector<double> encode_state(const EnvState& state, const FeatureNorms& norms);

// Offloading MDP over one service per episode. Not thread safe; use one
// instance per worker.
class Environment {
 public:
  explicit Environment(std::shared_ptr<const Scenario> scenario);

  // Starts an episode on a service generated from `seed`.
  const EnvState& reset(std::uint64_t seed);
  // Starts an episode on a given service; `seed` drives frequency jitter.
  const EnvState& reset(ServiceDag service, std::uint64_t seed);

  StepOutcome step(Action action);

  // Adjusted delay each slot would incur for the current task.
  const std::vector<double>& slot_delays() const;
  const std::vector<double>& slot_raw_delays() const;

  const EnvState& state() const;
  bool started() const noexcept { return started_; }
  bool terminal() const noexcept { return started_ && cursor_ >= order_.size(); }
  const EpisodeTrace& trace() const noexcept { return trace_; }
  const ServiceDag& service() const noexcept { return service_; }
  const Scenario& scenario() const noexcept { return *scenario_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  std::size_t action_count() const noexcept { return slots_.size(); }
  std::size_t task_count() const noexcept { return order_.size(); }
  const FeatureNorms& norms() const noexcept { return norms_; }
  std::size_t clamp_events() const noexcept { return clamps_; }
  double access_rate(int node_id) const;

 private:
  void prepare_step();

  std::shared_ptr<const Scenario> scenario_;
  std::vector<Slot> slots_;
  std::map<int, double> access_rates_;
  std::map<int, mobility::UsabilityTable> usability_;
  FeatureNorms norms_;

  ServiceDag service_;
  std::vector<std::size_t> order_;  // topological order of task indices
  std::size_t cursor_ = 0;
  bool started_ = false;
  Rng jitter_rng_;
  std::map<int, int> placement_;  // task id -> node id used for transfers
  std::vector<double> task_delays_;
  std::map<int, std::vector<std::size_t>> group_members_;
  EnvState state_;
  std::vector<double> slot_delays_;
  std::vector<double> slot_raw_;
  EpisodeTrace trace_;
  std::size_t clamps_ = 0;
};

FeatureNorms default_norms(const Scenario& scenario);

// Columns: episode, step, action_slot, node_id, node_kind, raw_delay_s,
// adjusted_delay_s, reward, service_delay_s.
void write_trace_header(std::ostream& os);
void write_trace_rows(std::ostream& os, std::size_t episode, const EpisodeTrace& trace);

}  // namespace vedge::env

#endif  // VEDGE_ENV_HPP_
