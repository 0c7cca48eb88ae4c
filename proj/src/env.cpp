#include "vedge/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

namespace vedge::env {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double link_rate(const EdgeNode& from, const EdgeNode& to) {
  if (from.id == to.id) return kInf;
  auto it = to.backhaul.find(from.id);
  if (it == to.backhaul.end()) {
    auto back = from.backhaul.find(to.id);
    return back == from.backhaul.end() ? 0.0 : back->second;
  }
  return it->second;
}

double transfer_delay(std::span<const Inbound> inbound, const EdgeNode& target) {
  double worst = 0.0;
  for (const auto& in : inbound) {
    if (in.data == 0.0) continue;
    if (!in.from) throw ContractError("inbound data without a source node");
    const double rate = link_rate(*in.from, target);
    if (std::isinf(rate)) continue;
    if (!(rate > 0.0)) {
      throw InfeasiblePlacement("no link from node " + std::to_string(in.from->id) + " to node " +
                                std::to_string(target.id));
    }
    worst = std::max(worst, in.data / rate);
  }
  return worst;
}

double raw_task_delay(const TaskProfile& task, const EdgeNode& node, double cpu_freq,
                      double access_rate, std::span<const Inbound> inbound) {
  if (!(cpu_freq > 0.0)) throw ContractError("cpu frequency must be positive");
  double delay = task.compute_demand / cpu_freq;
  if (node.kind != NodeKind::Local && task.interactive_data > 0.0) {
    if (!(access_rate > 0.0)) {
      throw InfeasiblePlacement("node " + std::to_string(node.id) + " has no access bandwidth");
    }
    delay += task.interactive_data / access_rate;
  }
  delay += transfer_delay(inbound, node);
  return delay;
}

double adjusted_task_delay(double raw_delay, const EdgeNode& node, const MobilityInputs& mobility,
                           VnPenalty penalty) {
  if (!std::isfinite(raw_delay)) throw ContractError("raw delay must be finite");
  switch (node.kind) {
    case NodeKind::Local:
      return raw_delay;
    case NodeKind::Bs:
    case NodeKind::Ap:
      if (!mobility.handoffs) throw ContractError("BS/AP placement needs the expected handoffs");
      return raw_delay + node.handoff_delay * *mobility.handoffs;
    case NodeKind::Vn: {
      if (!mobility.usability || !mobility.local_recompute) {
        throw ContractError("VN placement needs usability and the local re-execution time");
      }
      const double r = *mobility.usability;
      const double weight = penalty == VnPenalty::AsPrinted ? r : 1.0 - r;
      return raw_delay + weight * *mobility.local_recompute;
    }
    case NodeKind::Pseudo:
      break;
  }
  throw ContractError("pseudo nodes have no delay model");
}

ServiceDelay service_delay(std::span<const double> delays, const ServiceDag& dag) {
  if (delays.size() != dag.tasks.size()) {
    throw ContractError("expected " + std::to_string(dag.tasks.size()) + " task delays, got " +
                        std::to_string(delays.size()));
  }
  ServiceDelay out;
  out.longest.assign(delays.size(), true);
  std::map<int, std::size_t> best;  // group -> index of slowest member
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (!std::isfinite(delays[i])) throw ContractError("missing delay for a task");
    const auto& g = dag.tasks[i].parallel_group;
    if (!g) continue;
    auto [it, inserted] = best.emplace(*g, i);
    if (!inserted && delays[i] > delays[it->second]) it->second = i;
  }
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const auto& g = dag.tasks[i].parallel_group;
    if (g) out.longest[i] = best.at(*g) == i;
    if (out.longest[i]) out.total += delays[i];
  }
  return out;
}

std::vector<Slot> candidate_set(std::span<const EdgeNode> accessible, const Quotas& quotas) {
  std::vector<Slot> slots{{NodeKind::Local, 0}};
  for (const auto& n : accessible) {
    if (n.kind == NodeKind::Local) slots.front().node_id = n.id;
  }
  auto fill = [&](NodeKind kind, int quota) {
    std::vector<const EdgeNode*> of_kind;
    for (const auto& n : accessible) {
      if (n.kind == kind) of_kind.push_back(&n);
    }
    std::stable_sort(of_kind.begin(), of_kind.end(), [](const EdgeNode* a, const EdgeNode* b) {
      return a->cpu_freq > b->cpu_freq;
    });
    for (int i = 0; i < quota; ++i) {
      if (static_cast<std::size_t>(i) < of_kind.size()) {
        slots.push_back({kind, of_kind[static_cast<std::size_t>(i)]->id});
      } else {
        slots.push_back({kind, std::nullopt});
      }
    }
  };
  fill(NodeKind::Bs, quotas.bs);
  fill(NodeKind::Ap, quotas.ap);
  fill(NodeKind::Vn, quotas.vn);
  return slots;
}

std::size_t encoded_size(std::size_t slots) { return kTaskFeatures + slots * kSlotFeatures + 1; }

std::vector<double> encode_state(const EnvState& s, const FeatureNorms& n) {
  for (double v : {n.compute, n.interactive, n.dep, n.freq, n.rate, n.handoffs, n.usability,
                   n.speed}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ContractError("feature norms must be positive");
  }
  std::vector<double> x;
  x.reserve(encoded_size(s.slots.size()));
  x.push_back(s.compute_demand / n.compute);
  x.push_back(s.interactive_data / n.interactive);
  x.push_back(s.dep_data / n.dep);
  for (const auto& f : s.slots) {
    x.push_back(f.kind == NodeKind::Bs ? 1.0 : 0.0);
    x.push_back(f.kind == NodeKind::Ap ? 1.0 : 0.0);
    x.push_back(f.kind == NodeKind::Vn ? 1.0 : 0.0);
    x.push_back(f.cpu_freq / n.freq);
    x.push_back(f.access_rate / n.rate);
    x.push_back(f.handoffs / n.handoffs);
    x.push_back(f.usability / n.usability);
  }
  x.push_back(s.speed / n.speed);
  for (double v : x) {
    if (!std::isfinite(v)) throw ContractError("state feature is not finite");
  }
  return x;
}

FeatureNorms default_norms(const Scenario& scenario) {
  const auto& c = scenario.config;
  FeatureNorms n;
  auto max_of = [](double init, const std::vector<double>& v) {
    for (double d : v) init = std::max(init, d);
    return init;
  };
  double compute = max_of(0.0, c.service.demands);
  for (const auto& m : c.service.demand_mix) compute = std::max(compute, m.value);
  n.compute = compute > 0.0 ? compute : 1.0;
  n.interactive = std::max(1.0, max_of(c.service.interactive_mean, c.service.interactive));
  n.dep = std::max(1.0, max_of(c.service.dep_mean, c.service.dep));
  double freq = 0.0;
  for (const auto& node : scenario.nodes) freq = std::max(freq, node.cpu_freq);
  n.freq = freq > 0.0 ? freq : 1.0;
  n.speed = std::max(1.0, c.env.reference_speed);
  return n;
}

Environment::Environment(std::shared_ptr<const Scenario> scenario)
    : scenario_(std::move(scenario)) {
  if (!scenario_ || scenario_->nodes.empty()) throw ContractError("scenario has no nodes");
  const auto& cfg = scenario_->config;
  slots_ = candidate_set(scenario_->nodes, cfg.quotas);
  norms_ = default_norms(*scenario_);
  double max_rate = 0.0;
  for (const auto& node : scenario_->nodes) {
    validate_node(node);
    double rate = 0.0;
    if (node.bs_channel) rate = channel::bs_uplink_rate(*node.bs_channel, cfg.env.bs_rate_as_printed);
    if (node.ap_channel) rate = channel::ap_rate(*node.ap_channel);
    if (node.kind != NodeKind::Local && !(rate > 0.0)) {
      throw InfeasiblePlacement("node " + std::to_string(node.id) + " has zero access rate");
    }
    access_rates_[node.id] = rate;
    max_rate = std::max(max_rate, rate);
    if (node.headway) usability_.emplace(node.id, mobility::HeadwayChain(*node.headway));
  }
  norms_.rate = max_rate > 0.0 ? max_rate : 1.0;
}

double Environment::access_rate(int node_id) const { return access_rates_.at(node_id); }

const EnvState& Environment::reset(std::uint64_t seed) {
  return reset(generate_service(scenario_->config, derive_seed(seed, 100)), seed);
}

const EnvState& Environment::reset(ServiceDag service, std::uint64_t seed) {
  auto violations = validate_dag(service);
  if (!violations.empty()) throw ContractError("invalid service: " + violations.front().message);
  if (service.tasks.empty()) throw ContractError("service has no tasks");
  service_ = std::move(service);

  // Kahn's algorithm, lowest index first.
  const std::size_t n = service_.tasks.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& e : service_.edges) {
    const auto from = service_.index_of(e.from);
    const auto to = service_.index_of(e.to);
    succ[from].push_back(to);
    ++indegree[to];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  order_.clear();
  while (!ready.empty()) {
    const auto i = ready.top();
    ready.pop();
    order_.push_back(i);
    for (auto s : succ[i]) {
      if (--indegree[s] == 0) ready.push(s);
    }
  }

  group_members_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (const auto& g = service_.tasks[i].parallel_group) group_members_[*g].push_back(i);
  }
  jitter_rng_.seed(derive_seed(seed, 101));
  placement_.clear();
  task_delays_.assign(n, std::numeric_limits<double>::quiet_NaN());
  trace_ = {};
  cursor_ = 0;
  clamps_ = service_.clamp_events;
  started_ = true;
  prepare_step();
  return state_;
}

void Environment::prepare_step() {
  const auto& cfg = scenario_->config;
  const auto& task = service_.tasks[order_[cursor_]];
  std::vector<Inbound> inbound;
  for (const auto* e : service_.incoming(task.id)) {
    inbound.push_back({e->data, &scenario_->node(placement_.at(e->from))});
  }
  const auto& local = scenario_->local();
  const double local_recompute =
      task.compute_demand / local.cpu_freq + transfer_delay(inbound, local);
  const double speed_factor =
      cfg.env.speed_coupling ? cfg.env.speed / cfg.env.reference_speed : 1.0;

  state_ = {};
  state_.compute_demand = task.compute_demand;
  state_.interactive_data = task.interactive_data;
  state_.dep_data = task.dep_data_in;
  state_.speed = cfg.env.speed;
  state_.step_index = cursor_ + 1;
  state_.slots.assign(slots_.size(), {});
  slot_delays_.assign(slots_.size(), 0.0);
  slot_raw_.assign(slots_.size(), 0.0);

  double worst = 0.0;
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    const auto& slot = slots_[s];
    auto& f = state_.slots[s];
    f.kind = slot.kind;
    f.pseudo = slot.pseudo();
    if (slot.pseudo()) continue;
    const auto& node = scenario_->node(*slot.node_id);
    const double freq = node.kind == NodeKind::Local
                            ? node.cpu_freq
                            : sample_frequency(node, cfg.nodes.freq_std, jitter_rng_, &clamps_);
    const double rate = access_rates_.at(node.id);
    const double raw = raw_task_delay(task, node, freq, rate, inbound);
    MobilityInputs mob;
    f.cpu_freq = freq;
    f.access_rate = rate;
    f.usability = 1.0;
    if (node.kind == NodeKind::Bs || node.kind == NodeKind::Ap) {
      const double eta = node.residence_rate * speed_factor;
      mob.handoffs = raw > 0.0 ? mobility::expected_handoffs(1.0 / raw, eta) : 0.0;
      f.handoffs = *mob.handoffs;
    } else if (node.kind == NodeKind::Vn) {
      mob.usability = raw > 0.0 ? usability_.at(node.id).for_duration(raw) : 1.0;
      mob.local_recompute = local_recompute;
      f.usability = *mob.usability;
    }
    slot_raw_[s] = raw;
    slot_delays_[s] = adjusted_task_delay(raw, node, mob, cfg.env.vn_penalty);
    worst = std::max(worst, slot_delays_[s]);
  }
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    if (slots_[s].pseudo()) {
      slot_raw_[s] = slot_delays_[s] = cfg.env.pseudo_factor * worst;
    }
  }
}

const std::vector<double>& Environment::slot_delays() const {
  if (!started_ || terminal()) throw LifecycleError("no current task");
  return slot_delays_;
}

const std::vector<double>& Environment::slot_raw_delays() const {
  if (!started_ || terminal()) throw LifecycleError("no current task");
  return slot_raw_;
}

const EnvState& Environment::state() const {
  if (!started_) throw LifecycleError("environment not reset");
  return state_;
}

StepOutcome Environment::step(Action action) {
  if (!started_) throw LifecycleError("step before reset");
  if (terminal()) throw LifecycleError("step after the episode ended");
  if (action.slot >= slots_.size()) {
    throw std::out_of_range("action slot " + std::to_string(action.slot) + " outside [0, " +
                            std::to_string(slots_.size()) + ")");
  }
  const auto& slot = slots_[action.slot];
  const std::size_t idx = order_[cursor_];
  const auto& task = service_.tasks[idx];

  StepOutcome out;
  out.raw_delay = slot_raw_[action.slot];
  out.adjusted_delay = slot_delays_[action.slot];
  out.node_id = slot.pseudo() ? -1 : *slot.node_id;
  out.node_kind = slot.pseudo() ? NodeKind::Pseudo : scenario_->node(*slot.node_id).kind;
  // A pseudo pick falls back to the vehicle for later transfers.
  placement_[task.id] = slot.pseudo() ? scenario_->local().id : *slot.node_id;
  task_delays_[idx] = out.adjusted_delay;

  out.reward = -out.adjusted_delay;
  if (task.parallel_group) {
    // Siblings are rewarded once the whole group is placed: the slowest
    // member's delay is paid on the step that completes the group.
    const auto& members = group_members_.at(*task.parallel_group);
    const bool complete = std::all_of(members.begin(), members.end(),
                                      [&](std::size_t m) { return !std::isnan(task_delays_[m]); });
    double slowest = 0.0;
    for (auto m : members) {
      if (!std::isnan(task_delays_[m])) slowest = std::max(slowest, task_delays_[m]);
    }
    out.reward = complete ? -slowest : 0.0;
  }

  StepRecord rec;
  rec.step = cursor_ + 1;
  rec.task_id = task.id;
  rec.slot = action.slot;
  rec.node_id = out.node_id;
  rec.node_kind = out.node_kind;
  rec.raw_delay = out.raw_delay;
  rec.adjusted_delay = out.adjusted_delay;
  rec.reward = out.reward;
  trace_.steps.push_back(rec);

  ++cursor_;
  out.terminal = terminal();
  if (out.terminal) {
    const auto sd = service_delay(task_delays_, service_);
    trace_.service_delay = sd.total;
    for (auto& r : trace_.steps) r.longest = sd.longest[service_.index_of(r.task_id)];
  } else {
    prepare_step();
  }
  return out;
}

void write_trace_header(std::ostream& os) {
  os << "episode,step,action_slot,node_id,node_kind,raw_delay_s,adjusted_delay_s,reward,"
        "service_delay_s\n";
}

void write_trace_rows(std::ostream& os, std::size_t episode, const EpisodeTrace& trace) {
  for (const auto& r : trace.steps) {
    os << episode << ',' << r.step << ',' << r.slot << ',' << r.node_id << ','
       << to_string(r.node_kind) << ',' << format_number(r.raw_delay) << ','
       << format_number(r.adjusted_delay) << ',' << format_number(r.reward) << ','
       << format_number(trace.service_delay) << '\n';
  }
}

}  // namespace vedge::env
