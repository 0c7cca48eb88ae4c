#ifndef VEDGE_SCENARIO_HPP_
#define VEDGE_SCENARIO_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "vedge/channel.hpp"
#include "vedge/config.hpp"
#include "vedge/mobility.hpp"

namespace vedge {

using Rng = std::mt19937_64;

// Independent stream seed derived from a base seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

enum class NodeKind { Local, Bs, Ap, Vn, Pseudo };

const char* to_string(NodeKind kind);

struct TaskProfile {
  int id = 0;
  double compute_demand = 0.0;    // cycles
  double interactive_data = 0.0;  // bits exchanged with the vehicle
  double dep_data_in = 0.0;       // bits over all incoming edges
  std::optional<int> parallel_group;

  bool operator==(const TaskProfile&) const = default;
};

struct DagEdge {
  int from = 0;
  int to = 0;
  double data = 0.0;  // bits

  bool operator==(const DagEdge&) const = default;
};

enum class RegionKind { Sequence, Parallel, Selective, Loop };

const char* to_string(RegionKind kind);

// Contiguous run of tasks produced by one layout token.
struct Region {
  RegionKind kind = RegionKind::Sequence;
  std::size_t first_task = 0;
  std::size_t task_count = 0;

  bool operator==(const Region&) const = default;
};

// Tasks are stored in a topological order.
struct ServiceDag {
  std::vector<TaskProfile> tasks;
  std::vector<DagEdge> edges;
  std::vector<Region> regions;
  std::size_t clamp_events = 0;  // jittered samples clamped at zero

  std::size_t index_of(int task_id) const;
  std::vector<const DagEdge*> incoming(int task_id) const;

  bool operator==(const ServiceDag&) const = default;
};

struct DagViolation {
  enum class Kind { DuplicateId, DanglingEdge, Cycle, Orphan, GroupMismatch, NegativeValue };
  Kind kind;
  std::string message;
};

// Reports structural problems; an empty result means the DAG is well formed.
std::vector<DagViolation> validate_dag(const ServiceDag& dag);

struct EdgeNode {
  int id = 0;
  std::string name;
  NodeKind kind = NodeKind::Local;
  double cpu_freq = 1.0;  // cycles/s, nominal
  std::optional<channel::BsChannel> bs_channel;
  std::optional<channel::ApChannel> ap_channel;  // AP and VN access links
  double residence_rate = 0.0;                   // 1/s, BS and AP
  double handoff_delay = 0.0;                    // s, BS and AP
  std::optional<mobility::HeadwayChainParams> headway;  // VN only
  std::map<int, double> backhaul;                       // peer id -> bits/s

  bool operator==(const EdgeNode&) const = default;
};

// Checks that exactly the fields matching `kind` are populated.
void validate_node(const EdgeNode& node);

struct DemandComponent {
  int count = 0;
  double value = 0.0;  // cycles

  bool operator==(const DemandComponent&) const = default;
};

struct ServiceConfig {
  // Comma separated tokens: s<n> sequence, p<n> parallel group,
  // l<k>x<n> loop of an n-task body unrolled k times,
  // c<prob>:<a>/<b> selective branch of a tasks (probability prob) or b.
  std::string layout = "s10";
  std::vector<DemandComponent> demand_mix{{4, 5000.0}, {3, 2000.0}, {3, 9000.0}};
  std::vector<double> demands;  // explicit per-task values, overrides the mix
  double demand_std = 500.0;
  double interactive_mean = 5e7;
  double interactive_std = 1e7;
  std::vector<double> interactive;  // explicit per-task values
  double dep_mean = 2e9;
  double dep_std = 5e8;
  std::vector<double> dep;  // explicit per-edge values

  bool operator==(const ServiceConfig&) const = default;
};

struct ChainConfig {
  double z_min = 10.0;
  double z_max = 205.0;
  double unit = 5.0;
  double p = 0.3;
  double q = 0.3;
  double beta = 0.5;
  std::size_t comm_range_state = 30;
  double time_step = 1.0;
  std::size_t initial_state = 15;
  std::vector<double> initial_dist;  // overrides initial_state when set
  double p_spread = 0.0;             // per-vehicle uniform spread of p

  bool operator==(const ChainConfig&) const = default;
};

struct NodesConfig {
  double local_freq = 100.0;
  double freq_std = 5.0;
  double pseudo_freq = 1e-3;
  std::vector<double> bs_freq{560.0, 676.0};
  std::vector<double> ap_freq{526.0, 430.0};
  std::vector<double> vn_freq{124.0, 120.0, 177.0, 144.0, 165.0, 130.0};

  channel::BsChannel bs_channel{1e7, 0.5, 1e-6, 1e-9, {{0.2, 1e-7}, {0.2, 1e-7}}};
  double bs_residence_time = 60.0;  // s, inf = never leaves coverage
  double bs_handoff_delay = 2.0;

  channel::ApChannel ap_channel{31, 5, 0.1, 1e-3, 1e-3, 1e8, 5};
  double ap_residence_time = 20.0;
  double ap_handoff_delay = 1.0;

  channel::ApChannel vn_channel{15, 3, 0.05, 1e-3, 1e-3, 1e8, 3};
  ChainConfig vn_chain;

  bool operator==(const NodesConfig&) const = default;
};

// Backhaul capacities in bits/s between node kinds. "vehicle" covers both
// the local vehicle and neighbouring vehicles.
struct BandwidthConfig {
  double bs_bs = 1e8;
  double bs_ap = 1e8;
  double ap_ap = 1e8;
  double ap_vehicle = 1e8;
  double bs_vehicle = 5e7;
  double vehicle_vehicle = 3e8;

  double between(NodeKind a, NodeKind b) const;
  bool operator==(const BandwidthConfig&) const = default;
};

struct Quotas {
  int bs = 2;
  int ap = 2;
  int vn = 6;

  // Candidate slots including local execution.
  std::size_t action_count() const { return static_cast<std::size_t>(1 + bs + ap + vn); }
  bool operator==(const Quotas&) const = default;
};

enum class VnPenalty { AsPrinted, FailureProb };

struct EnvOptions {
  double speed = 20.0;  // m/s
  bool speed_coupling = false;
  double reference_speed = 20.0;
  VnPenalty vn_penalty = VnPenalty::AsPrinted;
  bool bs_rate_as_printed = false;
  double pseudo_factor = 10.0;

  bool operator==(const EnvOptions&) const = default;
};

// Learning preset stored with a scenario; the a3c module turns it into
// Hyperparams.
struct AgentPreset {
  std::vector<int> hidden{64, 64, 64};
  int workers = 4;
  double entropy_coef = 0.01;
  double gamma = 0.99;
  double lr_actor = 3e-2;
  double lr_critic = 3e-2;
  long episodes = 80000;
  int n_step = 0;  // 0 = full episode

  bool operator==(const AgentPreset&) const = default;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  ServiceConfig service;
  NodesConfig nodes;
  BandwidthConfig bandwidth;
  Quotas quotas;
  EnvOptions env;
  AgentPreset agent;

  bool operator==(const ScenarioConfig&) const = default;
};

// Throws ConfigError describing the first problem found.
void validate_config(const ScenarioConfig& config);

ScenarioConfig parse_config(const ConfigDocument& doc);
ScenarioConfig load_config(const std::filesystem::path& path);
void write_config(ConfigWriter& out, const ScenarioConfig& config);

ServiceDag generate_service(const ScenarioConfig& config, std::uint64_t seed);
std::vector<EdgeNode> generate_nodes(const ScenarioConfig& config, std::uint64_t seed);

// One execution's CPU frequency: nominal plus normal jitter, clamped to a
// small positive floor. Increments `clamps` when the floor is hit.
double sample_frequency(const EdgeNode& node, double std_dev, Rng& rng,
                        std::size_t* clamps = nullptr);

// A configuration together with its materialized node catalog.
struct Scenario {
  ScenarioConfig config;
  std::vector<EdgeNode> nodes;  // nodes[0] is the local vehicle
  std::optional<ServiceDag> sample;

  const EdgeNode& node(int id) const;
  const EdgeNode& local() const { return nodes.front(); }
};

Scenario make_scenario(const ScenarioConfig& config);

// Scenario files are config documents with extra [catalog.<id>] and
// [sample...] sections. A plain config file loads as well; its catalog is
// generated from the configured seed.
void write_scenario(std::ostream& os, const Scenario& scenario);
Scenario parse_scenario(const ConfigDocument& doc);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace vedge

#endif  // VEDGE_SCENARIO_HPP_
