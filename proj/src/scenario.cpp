#include "vedge/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace vedge {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Local: return "LOCAL";
    case NodeKind::Bs: return "BS";
    case NodeKind::Ap: return "AP";
    case NodeKind::Vn: return "VN";
    case NodeKind::Pseudo: return "PSEUDO";
  }
  return "?";
}

const char* to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::Sequence: return "sequence";
    case RegionKind::Parallel: return "parallel";
    case RegionKind::Selective: return "selective";
    case RegionKind::Loop: return "loop";
  }
  return "?";
}

namespace {

NodeKind parse_kind(const std::string& s, int line) {
  for (auto k : {NodeKind::Local, NodeKind::Bs, NodeKind::Ap, NodeKind::Vn, NodeKind::Pseudo}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown node kind '" + s + "'", line);
}

RegionKind parse_region_kind(const std::string& s) {
  for (auto k : {RegionKind::Sequence, RegionKind::Parallel, RegionKind::Selective,
                 RegionKind::Loop}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown region kind '" + s + "'");
}

struct LayoutToken {
  RegionKind kind = RegionKind::Sequence;
  int count = 1;        // tasks (sequence, parallel) or loop body size
  int iterations = 1;   // loop repetitions
  double prob = 1.0;    // selective: probability of the first branch
  int alt_count = 0;    // selective: size of the second branch
};

int parse_count(std::string_view s, const std::string& token) {
  if (s.empty()) return 1;
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 1) {
    throw ConfigError("bad count in layout token '" + token + "'");
  }
  return v;
}

std::vector<LayoutToken> parse_layout(const std::string& layout) {
  std::vector<LayoutToken> out;
  std::string_view rest = layout;
  while (!rest.empty()) {
    auto comma = rest.find(',');
    std::string token(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    token.erase(std::remove_if(token.begin(), token.end(), ::isspace), token.end());
    if (token.empty()) throw ConfigError("empty layout token in '" + layout + "'");
    LayoutToken t;
    std::string_view body = std::string_view(token).substr(1);
    switch (token.front()) {
      case 's':
        t.kind = RegionKind::Sequence;
        t.count = parse_count(body, token);
        break;
      case 'p':
        t.kind = RegionKind::Parallel;
        t.count = parse_count(body, token);
        if (t.count < 2) throw ConfigError("parallel group needs at least 2 tasks: '" + token + "'");
        break;
      case 'l': {
        t.kind = RegionKind::Loop;
        auto x = body.find('x');
        if (x == std::string_view::npos) throw ConfigError("loop token must be l<k>x<n>: '" + token + "'");
        t.iterations = parse_count(body.substr(0, x), token);
        t.count = parse_count(body.substr(x + 1), token);
        break;
      }
      case 'c': {
        t.kind = RegionKind::Selective;
        auto colon = body.find(':');
        auto slash = body.find('/');
        if (colon == std::string_view::npos || slash == std::string_view::npos || slash < colon) {
          throw ConfigError("selective token must be c<prob>:<a>/<b>: '" + token + "'");
        }
        t.prob = parse_number(body.substr(0, colon), 0);
        if (!(t.prob >= 0.0 && t.prob <= 1.0)) {
          throw ConfigError("selective probability outside [0, 1]: '" + token + "'");
        }
        t.count = parse_count(body.substr(colon + 1, slash - colon - 1), token);
        t.alt_count = parse_count(body.substr(slash + 1), token);
        break;
      }
      default:
        throw ConfigError("unknown layout token '" + token + "'");
    }
    out.push_back(t);
  }
  if (out.empty()) throw ConfigError("[service] layout has no tasks");
  return out;
}

// Task and edge counts when the layout has no random branch.
std::optional<std::pair<std::size_t, std::size_t>> fixed_shape(
    const std::vector<LayoutToken>& tokens) {
  std::size_t tasks = 0, edges = 0, tail = 0;
  for (const auto& t : tokens) {
    if (t.kind == RegionKind::Selective) return std::nullopt;
    auto connect = [&](std::size_t n) {
      edges += tail * n;
    };
    if (t.kind == RegionKind::Parallel) {
      connect(t.count);
      tasks += t.count;
      tail = t.count;
    } else {
      const std::size_t n = static_cast<std::size_t>(t.count) * t.iterations;
      connect(1);
      edges += n - 1;
      tasks += n;
      tail = 1;
    }
  }
  return std::make_pair(tasks, edges);
}

double jitter(double mean, double std_dev, Rng& rng, std::size_t& clamps) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double v = mean + std_dev * normal(rng);
  if (v < 0.0) {
    ++clamps;
    return 0.0;
  }
  return v;
}

}  // namespace

std::size_t ServiceDag::index_of(int task_id) const {
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].id == task_id) return i;
  }
  throw std::out_of_range("no task with id " + std::to_string(task_id));
}

std::vector<const DagEdge*> ServiceDag::incoming(int task_id) const {
  std::vector<const DagEdge*> out;
  for (const auto& e : edges) {
    if (e.to == task_id) out.push_back(&e);
  }
  return out;
}

std::vector<DagViolation> validate_dag(const ServiceDag& dag) {
  using K = DagViolation::Kind;
  std::vector<DagViolation> out;
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < dag.tasks.size(); ++i) {
    const auto& t = dag.tasks[i];
    if (!index.emplace(t.id, i).second) {
      out.push_back({K::DuplicateId, "duplicate task id " + std::to_string(t.id)});
    }
    if (t.compute_demand < 0.0 || t.interactive_data < 0.0 || t.dep_data_in < 0.0) {
      out.push_back({K::NegativeValue, "task " + std::to_string(t.id) + " has a negative demand"});
    }
  }
  std::map<int, std::set<int>> preds, succs;
  bool dangling = false;
  for (const auto& e : dag.edges) {
    if (!index.count(e.from) || !index.count(e.to)) {
      out.push_back({K::DanglingEdge, "edge " + std::to_string(e.from) + "->" +
                                          std::to_string(e.to) + " references an unknown task"});
      dangling = true;
      continue;
    }
    if (e.data < 0.0) {
      out.push_back({K::NegativeValue, "edge " + std::to_string(e.from) + "->" +
                                           std::to_string(e.to) + " carries negative data"});
    }
    preds[e.to].insert(e.from);
    succs[e.from].insert(e.to);
  }

  // Kahn's algorithm; leftover tasks sit on a cycle.
  std::map<int, std::size_t> indegree;
  for (const auto& t : dag.tasks) indegree[t.id] = preds[t.id].size();
  std::vector<int> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    int id = ready.back();
    ready.pop_back();
    ++visited;
    for (int s : succs[id]) {
      if (--indegree[s] == 0) ready.push_back(s);
    }
  }
  if (!dangling && visited != indegree.size()) {
    out.push_back({K::Cycle, "precedence relation contains a cycle"});
  }

  // Roots must all belong to the first task's region: a service has a
  // single entry point (possibly a parallel group).
  if (!dag.tasks.empty()) {
    const auto& first = dag.tasks.front();
    for (const auto& t : dag.tasks) {
      if (t.id == first.id || !preds[t.id].empty()) continue;
      const bool same_group = t.parallel_group && t.parallel_group == first.parallel_group;
      if (!same_group) {
        out.push_back({K::Orphan, "task " + std::to_string(t.id) + " has no predecessor"});
      }
    }
  }

  std::map<int, std::vector<int>> groups;
  for (const auto& t : dag.tasks) {
    if (t.parallel_group) groups[*t.parallel_group].push_back(t.id);
  }
  for (const auto& [g, members] : groups) {
    for (std::size_t i = 1; i < members.size(); ++i) {
      if (preds[members[i]] != preds[members[0]] || succs[members[i]] != succs[members[0]]) {
        out.push_back({K::GroupMismatch, "parallel group " + std::to_string(g) + ": tasks " +
                                             std::to_string(members[0]) + " and " +
                                             std::to_string(members[i]) +
                                             " have different neighbours"});
      }
    }
  }
  return out;
}

double BandwidthConfig::between(NodeKind a, NodeKind b) const {
  auto vehicle = [](NodeKind k) { return k == NodeKind::Local || k == NodeKind::Vn; };
  if (a == NodeKind::Pseudo || b == NodeKind::Pseudo) return 0.0;
  if (a == NodeKind::Bs && b == NodeKind::Bs) return bs_bs;
  if (a == NodeKind::Ap && b == NodeKind::Ap) return ap_ap;
  if ((a == NodeKind::Bs && b == NodeKind::Ap) || (a == NodeKind::Ap && b == NodeKind::Bs)) {
    return bs_ap;
  }
  if (vehicle(a) && vehicle(b)) return vehicle_vehicle;
  if (a == NodeKind::Bs || b == NodeKind::Bs) return bs_vehicle;
  return ap_vehicle;
}

void validate_node(const EdgeNode& node) {
  auto fail = [&](const std::string& what) {
    throw ConfigError("node " + std::to_string(node.id) + " (" + to_string(node.kind) + "): " + what);
  };
  if (!(node.cpu_freq > 0.0) || !std::isfinite(node.cpu_freq)) fail("cpu_freq must be positive");
  const bool bs = node.kind == NodeKind::Bs;
  const bool ap = node.kind == NodeKind::Ap;
  const bool vn = node.kind == NodeKind::Vn;
  if (node.bs_channel.has_value() != bs) fail("BS channel present iff kind is BS");
  if (node.ap_channel.has_value() != (ap || vn)) fail("WLAN channel present iff kind is AP or VN");
  if (node.headway.has_value() != vn) fail("headway chain present iff kind is VN");
  if (!(bs || ap) && (node.residence_rate != 0.0 || node.handoff_delay != 0.0)) {
    fail("handoff parameters only apply to BS and AP nodes");
  }
  if (node.residence_rate < 0.0 || node.handoff_delay < 0.0) fail("negative handoff parameters");
  try {
    if (node.bs_channel) channel::validate(*node.bs_channel);
    if (node.ap_channel) channel::validate(*node.ap_channel);
    if (node.headway) mobility::HeadwayChain chain(*node.headway);
  } catch (const std::domain_error& e) {
    fail(e.what());
  }
  for (const auto& [peer, bw] : node.backhaul) {
    if (!(bw > 0.0)) fail("backhaul to node " + std::to_string(peer) + " must be positive");
  }
}

namespace {

mobility::HeadwayChainParams chain_params(const ChainConfig& c, double p) {
  mobility::HeadwayChainParams params;
  params.z_min = c.z_min;
  params.z_max = c.z_max;
  params.unit = c.unit;
  params.p = p;
  params.q = c.q;
  params.beta = c.beta;
  params.comm_range_state = c.comm_range_state;
  params.time_step = c.time_step;
  const auto n = mobility::state_count(c.z_min, c.z_max, c.unit);
  if (!c.initial_dist.empty()) {
    params.initial_dist = c.initial_dist;
  } else {
    params.initial_dist.assign(n, 0.0);
    if (c.initial_state < n) params.initial_dist[c.initial_state] = 1.0;
  }
  return params;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void validate_config(const ScenarioConfig& config) {
  const auto& s = config.service;
  const auto tokens = parse_layout(s.layout);
  require(s.demand_std >= 0.0, "[service] demand_std must be non-negative");
  require(s.interactive_std >= 0.0, "[service] interactive_std must be non-negative");
  require(s.dep_std >= 0.0, "[service] dep_std must be non-negative");
  require(s.interactive_mean >= 0.0 && s.dep_mean >= 0.0,
          "[service] data means must be non-negative");
  require(std::isfinite(s.interactive_mean) && std::isfinite(s.dep_mean) &&
              std::isfinite(s.demand_std) && std::isfinite(s.interactive_std) &&
              std::isfinite(s.dep_std),
          "[service] distribution parameters must be finite");
  if (s.demands.empty()) {
    require(!s.demand_mix.empty(), "[service] needs demand_mix or demands");
    for (const auto& c : s.demand_mix) {
      require(c.count > 0 && c.value >= 0.0 && std::isfinite(c.value),
              "[service] demand_mix entries must be positive counts of non-negative demands");
    }
  }
  for (double v : s.demands) require(v >= 0.0, "[service] demands must be non-negative");
  for (double v : s.interactive) require(v >= 0.0, "[service] interactive must be non-negative");
  for (double v : s.dep) require(v >= 0.0, "[service] dep must be non-negative");
  if (auto shape = fixed_shape(tokens)) {
    require(s.demands.empty() || s.demands.size() == shape->first,
            "[service] demands must list one value per task");
    require(s.interactive.empty() || s.interactive.size() == shape->first,
            "[service] interactive must list one value per task");
    require(s.dep.empty() || s.dep.size() == shape->second,
            "[service] dep must list one value per edge");
  }

  const auto& n = config.nodes;
  require(n.local_freq > 0.0, "[nodes] local_freq must be positive");
  require(n.freq_std >= 0.0 && std::isfinite(n.freq_std), "[nodes] freq_std must be non-negative");
  require(n.pseudo_freq > 0.0, "[nodes] pseudo_freq must be positive");
  for (const auto* list : {&n.bs_freq, &n.ap_freq, &n.vn_freq}) {
    for (double f : *list) require(f > 0.0 && std::isfinite(f), "[nodes] frequencies must be positive");
  }
  try {
    channel::validate(n.bs_channel);
    channel::validate(n.ap_channel);
    channel::validate(n.vn_channel);
    require(n.vn_chain.p_spread >= 0.0, "[nodes.vn] p_spread must be non-negative");
    mobility::HeadwayChain chain(chain_params(n.vn_chain, n.vn_chain.p));
    if (n.vn_chain.initial_dist.empty()) {
      require(n.vn_chain.initial_state < chain.size(), "[nodes.vn] initial_state outside the chain");
    }
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("[nodes] ") + e.what());
  }
  require(n.bs_residence_time > 0.0 && n.ap_residence_time > 0.0,
          "residence_time must be positive (inf allowed)");
  require(n.bs_handoff_delay >= 0.0 && n.ap_handoff_delay >= 0.0,
          "handoff_delay must be non-negative");

  const auto& b = config.bandwidth;
  for (double v : {b.bs_bs, b.bs_ap, b.ap_ap, b.ap_vehicle, b.bs_vehicle, b.vehicle_vehicle}) {
    require(v > 0.0, "[bandwidth] values must be positive");
  }
  const auto& q = config.quotas;
  require(q.bs >= 0 && q.ap >= 0 && q.vn >= 0, "[quotas] must be non-negative");

  const auto& e = config.env;
  require(e.speed >= 0.0 && e.reference_speed > 0.0, "[scenario] speeds must be positive");
  require(e.pseudo_factor >= 1.0, "[scenario] pseudo_factor must be >= 1");

  const auto& a = config.agent;
  require(!a.hidden.empty(), "[agent] hidden must list at least one layer");
  for (int h : a.hidden) require(h >= 1, "[agent] hidden sizes must be >= 1");
  require(a.workers >= 1, "[agent] workers must be >= 1");
  require(a.entropy_coef >= 0.0, "[agent] entropy_coef must be non-negative");
  require(a.gamma >= 0.0 && a.gamma <= 1.0, "[agent] gamma must lie in [0, 1]");
  require(a.lr_actor > 0.0 && a.lr_critic > 0.0, "[agent] learning rates must be positive");
  require(a.episodes >= 0, "[agent] episodes must be non-negative");
  require(a.n_step >= 0, "[agent] n_step must be non-negative");
}

ServiceDag generate_service(const ScenarioConfig& config, std::uint64_t seed) {
  validate_config(config);
  const auto& sc = config.service;
  const auto tokens = parse_layout(sc.layout);
  Rng layout_rng(derive_seed(seed, 1));
  Rng demand_rng(derive_seed(seed, 2));
  Rng interactive_rng(derive_seed(seed, 3));
  Rng dep_rng(derive_seed(seed, 4));

  ServiceDag dag;
  std::vector<int> tail;
  int next_group = 0;
  auto add_task = [&](std::optional<int> group) {
    TaskProfile t;
    t.id = static_cast<int>(dag.tasks.size()) + 1;
    t.parallel_group = group;
    dag.tasks.push_back(t);
    return t.id;
  };
  auto chain_run = [&](int n) {
    for (int i = 0; i < n; ++i) {
      const int id = add_task(std::nullopt);
      for (int p : tail) dag.edges.push_back({p, id, 0.0});
      tail = {id};
    }
  };
  for (const auto& tok : tokens) {
    const std::size_t first = dag.tasks.size();
    switch (tok.kind) {
      case RegionKind::Sequence:
        chain_run(tok.count);
        break;
      case RegionKind::Loop:
        chain_run(tok.count * tok.iterations);
        break;
      case RegionKind::Selective: {
        std::bernoulli_distribution pick(tok.prob);
        chain_run(pick(layout_rng) ? tok.count : tok.alt_count);
        break;
      }
      case RegionKind::Parallel: {
        const int group = next_group++;
        std::vector<int> members;
        for (int i = 0; i < tok.count; ++i) {
          const int id = add_task(group);
          for (int p : tail) dag.edges.push_back({p, id, 0.0});
          members.push_back(id);
        }
        tail = members;
        break;
      }
    }
    dag.regions.push_back({tok.kind, first, dag.tasks.size() - first});
  }

  const std::size_t n = dag.tasks.size();
  std::vector<double> base;
  if (!sc.demands.empty()) {
    if (sc.demands.size() != n) throw ConfigError("[service] demands must list one value per task");
    base = sc.demands;
  } else {
    std::size_t total = 0;
    for (const auto& c : sc.demand_mix) total += static_cast<std::size_t>(c.count);
    if (total == n) {
      for (const auto& c : sc.demand_mix) base.insert(base.end(), c.count, c.value);
      std::shuffle(base.begin(), base.end(), demand_rng);
    } else {
      std::vector<double> weights;
      for (const auto& c : sc.demand_mix) weights.push_back(c.count);
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      for (std::size_t i = 0; i < n; ++i) base.push_back(sc.demand_mix[pick(demand_rng)].value);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    dag.tasks[i].compute_demand = jitter(base[i], sc.demand_std, demand_rng, dag.clamp_events);
  }
  if (!sc.interactive.empty() && sc.interactive.size() != n) {
    throw ConfigError("[service] interactive must list one value per task");
  }
  for (std::size_t i = 0; i < n; ++i) {
    dag.tasks[i].interactive_data =
        sc.interactive.empty()
            ? jitter(sc.interactive_mean, sc.interactive_std, interactive_rng, dag.clamp_events)
            : sc.interactive[i];
  }
  if (!sc.dep.empty() && sc.dep.size() != dag.edges.size()) {
    throw ConfigError("[service] dep must list one value per edge");
  }
  for (std::size_t i = 0; i < dag.edges.size(); ++i) {
    auto& e = dag.edges[i];
    e.data = sc.dep.empty() ? jitter(sc.dep_mean, sc.dep_std, dep_rng, dag.clamp_events) : sc.dep[i];
    dag.tasks[static_cast<std::size_t>(e.to - 1)].dep_data_in += e.data;
  }
  return dag;
}

std::vector<EdgeNode> generate_nodes(const ScenarioConfig& config, std::uint64_t seed) {
  validate_config(config);
  const auto& nc = config.nodes;
  Rng rng(derive_seed(seed, 11));
  std::vector<EdgeNode> nodes;
  auto eta = [](double residence_time) {
    return std::isinf(residence_time) ? 0.0 : 1.0 / residence_time;
  };

  EdgeNode local;
  local.id = 0;
  local.name = "local";
  local.kind = NodeKind::Local;
  local.cpu_freq = nc.local_freq;
  nodes.push_back(local);

  int id = 1;
  for (std::size_t i = 0; i < nc.bs_freq.size(); ++i) {
    EdgeNode n;
    n.id = id++;
    n.name = "bs" + std::to_string(i + 1);
    n.kind = NodeKind::Bs;
    n.cpu_freq = nc.bs_freq[i];
    n.bs_channel = nc.bs_channel;
    n.residence_rate = eta(nc.bs_residence_time);
    n.handoff_delay = nc.bs_handoff_delay;
    nodes.push_back(n);
  }
  for (std::size_t i = 0; i < nc.ap_freq.size(); ++i) {
    EdgeNode n;
    n.id = id++;
    n.name = "ap" + std::to_string(i + 1);
    n.kind = NodeKind::Ap;
    n.cpu_freq = nc.ap_freq[i];
    n.ap_channel = nc.ap_channel;
    n.residence_rate = eta(nc.ap_residence_time);
    n.handoff_delay = nc.ap_handoff_delay;
    nodes.push_back(n);
  }
  const auto& cc = nc.vn_chain;
  for (std::size_t i = 0; i < nc.vn_freq.size(); ++i) {
    EdgeNode n;
    n.id = id++;
    n.name = "vn" + std::to_string(i + 1);
    n.kind = NodeKind::Vn;
    n.cpu_freq = nc.vn_freq[i];
    n.ap_channel = nc.vn_channel;
    double p = cc.p;
    if (cc.p_spread > 0.0) {
      std::uniform_real_distribution<double> spread(-cc.p_spread, cc.p_spread);
      p = std::clamp(cc.p + spread(rng), 0.0, 1.0 - cc.q);
    }
    n.headway = chain_params(cc, p);
    nodes.push_back(n);
  }

  for (auto& a : nodes) {
    for (const auto& b : nodes) {
      if (a.id != b.id) a.backhaul[b.id] = config.bandwidth.between(a.kind, b.kind);
    }
  }
  for (const auto& n : nodes) validate_node(n);
  return nodes;
}

double sample_frequency(const EdgeNode& node, double std_dev, Rng& rng, std::size_t* clamps) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double f = node.cpu_freq + std_dev * normal(rng);
  const double floor = 1e-9 * node.cpu_freq;
  if (f < floor) {
    if (clamps) ++*clamps;
    return floor;
  }
  return f;
}

const EdgeNode& Scenario::node(int id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return n;
  }
  throw std::out_of_range("no node with id " + std::to_string(id));
}

Scenario make_scenario(const ScenarioConfig& config) {
  Scenario s;
  s.config = config;
  s.nodes = generate_nodes(config, config.seed);
  return s;
}

// ---------------------------------------------------------------------------
// Config text format

namespace {

std::vector<DemandComponent> parse_mix(const ConfigSection& sec, std::string_view key) {
  std::vector<DemandComponent> out;
  const auto* e = sec.find(key);
  for (const auto& tok : sec.tokens(key)) {
    auto x = tok.find('x');
    if (x == std::string::npos) throw ConfigError("demand_mix entries must be <count>x<value>", e->line);
    DemandComponent c;
    c.count = static_cast<int>(parse_number(tok.substr(0, x), e->line));
    c.value = parse_number(tok.substr(x + 1), e->line);
    out.push_back(c);
  }
  return out;
}

std::string format_mix(const std::vector<DemandComponent>& mix) {
  std::string out;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(mix[i].count) + "x" + format_number(mix[i].value);
  }
  return out;
}

std::vector<channel::Interferer> parse_interferers(const ConfigSection& sec) {
  std::vector<channel::Interferer> out;
  const auto* e = sec.find("interferers");
  for (const auto& tok : sec.tokens("interferers")) {
    auto colon = tok.find(':');
    if (colon == std::string::npos) throw ConfigError("interferers must be <power>:<gain>", e->line);
    out.push_back({parse_number(tok.substr(0, colon), e->line),
                   parse_number(tok.substr(colon + 1), e->line)});
  }
  return out;
}

std::string format_interferers(const std::vector<channel::Interferer>& list) {
  std::string out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (i) out += ", ";
    out += format_number(list[i].tx_power) + ":" + format_number(list[i].gain);
  }
  return out;
}

int as_int(const ConfigSection& sec, std::string_view key, int fallback) {
  return static_cast<int>(sec.integer(key, fallback));
}

std::size_t as_size(const ConfigSection& sec, std::string_view key, std::size_t fallback) {
  const long v = sec.integer(key, static_cast<long>(fallback));
  if (v < 0) throw ConfigError(std::string(key) + " must be non-negative", sec.find(key)->line);
  return static_cast<std::size_t>(v);
}

void read_wlan(const ConfigSection& sec, channel::ApChannel& ch) {
  ch.w_min = as_int(sec, "w_min", ch.w_min);
  ch.max_backoff = as_int(sec, "max_backoff", ch.max_backoff);
  ch.collision_prob = sec.number("collision_prob", ch.collision_prob);
  ch.busy_success = sec.number("busy_success", ch.busy_success);
  ch.busy_collision = sec.number("busy_collision", ch.busy_collision);
  ch.payload = sec.number("payload", ch.payload);
  ch.contenders = as_int(sec, "contenders", ch.contenders);
}

void write_wlan(ConfigWriter& w, const channel::ApChannel& ch) {
  w.put("w_min", ch.w_min)
      .put("max_backoff", ch.max_backoff)
      .put("collision_prob", ch.collision_prob)
      .put("busy_success", ch.busy_success)
      .put("busy_collision", ch.busy_collision)
      .put("payload", ch.payload)
      .put("contenders", ch.contenders);
}

void read_chain(const ConfigSection& sec, mobility::HeadwayChainParams& c) {
  c.z_min = sec.number("z_min", c.z_min);
  c.z_max = sec.number("z_max", c.z_max);
  c.unit = sec.number("unit", c.unit);
  c.p = sec.number("p", c.p);
  c.q = sec.number("q", c.q);
  c.beta = sec.number("beta", c.beta);
  c.comm_range_state = as_size(sec, "comm_range_state", c.comm_range_state);
  c.time_step = sec.number("time_step", c.time_step);
  if (sec.has("initial_dist")) c.initial_dist = sec.numbers("initial_dist");
}

void write_chain(ConfigWriter& w, const mobility::HeadwayChainParams& c) {
  w.put("z_min", c.z_min)
      .put("z_max", c.z_max)
      .put("unit", c.unit)
      .put("p", c.p)
      .put("q", c.q)
      .put("beta", c.beta)
      .put("comm_range_state", static_cast<double>(c.comm_range_state))
      .put("time_step", c.time_step)
      .put("initial_dist", c.initial_dist);
}

std::vector<int> to_ints(const std::vector<double>& v) {
  std::vector<int> out;
  for (double d : v) out.push_back(static_cast<int>(d));
  return out;
}

std::vector<double> to_doubles(const std::vector<int>& v) {
  return {v.begin(), v.end()};
}

bool is_config_section(const std::string& name) {
  static const std::set<std::string> known{"",          "scenario",  "service",  "nodes",
                                           "nodes.bs",  "nodes.ap",  "nodes.vn", "bandwidth",
                                           "quotas",    "agent"};
  return known.count(name) > 0;
}

}  // namespace

ScenarioConfig parse_config(const ConfigDocument& doc) {
  ScenarioConfig c;
  for (const auto& sec : doc.sections()) {
    if (!is_config_section(sec.name()) && sec.name().rfind("catalog.", 0) != 0 &&
        sec.name().rfind("sample", 0) != 0) {
      throw ConfigError("unknown section [" + sec.name() + "]", sec.line());
    }
  }
  const auto& top = doc.section_or_empty("");
  if (!top.entries().empty()) {
    throw ConfigError("key '" + top.entries().front().key + "' outside any section",
                      top.entries().front().line);
  }

  const auto& sc = doc.section_or_empty("scenario");
  sc.expect_only({"format", "seed", "speed", "speed_coupling", "reference_speed", "vn_penalty",
                  "bs_rate_as_printed", "pseudo_factor"});
  if (sc.has("seed")) {
    const long seed = sc.integer("seed", 0);
    if (seed < 0) throw ConfigError("seed must be non-negative", sc.find("seed")->line);
    c.seed = static_cast<std::uint64_t>(seed);
  }
  c.env.speed = sc.number("speed", c.env.speed);
  c.env.speed_coupling = sc.boolean("speed_coupling", c.env.speed_coupling);
  c.env.reference_speed = sc.number("reference_speed", c.env.reference_speed);
  c.env.bs_rate_as_printed = sc.boolean("bs_rate_as_printed", c.env.bs_rate_as_printed);
  c.env.pseudo_factor = sc.number("pseudo_factor", c.env.pseudo_factor);
  if (const auto* e = sc.find("vn_penalty")) {
    if (e->value == "as_printed") {
      c.env.vn_penalty = VnPenalty::AsPrinted;
    } else if (e->value == "failure_prob") {
      c.env.vn_penalty = VnPenalty::FailureProb;
    } else {
      throw ConfigError("vn_penalty must be as_printed or failure_prob", e->line);
    }
  }

  const auto& sv = doc.section_or_empty("service");
  sv.expect_only({"layout", "demand_mix", "demands", "demand_std", "interactive_mean",
                  "interactive_std", "interactive", "dep_mean", "dep_std", "dep"});
  auto& s = c.service;
  s.layout = sv.text("layout", s.layout);
  if (sv.has("demand_mix")) s.demand_mix = parse_mix(sv, "demand_mix");
  if (sv.has("demands")) s.demands = sv.numbers("demands");
  s.demand_std = sv.number("demand_std", s.demand_std);
  s.interactive_mean = sv.number("interactive_mean", s.interactive_mean);
  s.interactive_std = sv.number("interactive_std", s.interactive_std);
  if (sv.has("interactive")) s.interactive = sv.numbers("interactive");
  s.dep_mean = sv.number("dep_mean", s.dep_mean);
  s.dep_std = sv.number("dep_std", s.dep_std);
  if (sv.has("dep")) s.dep = sv.numbers("dep");

  const auto& nd = doc.section_or_empty("nodes");
  nd.expect_only({"local_freq", "freq_std", "pseudo_freq", "bs_freq", "ap_freq", "vn_freq"});
  auto& n = c.nodes;
  n.local_freq = nd.number("local_freq", n.local_freq);
  n.freq_std = nd.number("freq_std", n.freq_std);
  n.pseudo_freq = nd.number("pseudo_freq", n.pseudo_freq);
  if (nd.has("bs_freq")) n.bs_freq = nd.numbers("bs_freq");
  if (nd.has("ap_freq")) n.ap_freq = nd.numbers("ap_freq");
  if (nd.has("vn_freq")) n.vn_freq = nd.numbers("vn_freq");

  const auto& bs = doc.section_or_empty("nodes.bs");
  bs.expect_only({"bandwidth_hz", "tx_power", "gain", "noise_power", "interferers",
                  "residence_time", "handoff_delay"});
  n.bs_channel.bandwidth_hz = bs.number("bandwidth_hz", n.bs_channel.bandwidth_hz);
  n.bs_channel.tx_power = bs.number("tx_power", n.bs_channel.tx_power);
  n.bs_channel.gain = bs.number("gain", n.bs_channel.gain);
  n.bs_channel.noise_power = bs.number("noise_power", n.bs_channel.noise_power);
  if (bs.has("interferers")) n.bs_channel.interferers = parse_interferers(bs);
  n.bs_residence_time = bs.number("residence_time", n.bs_residence_time);
  n.bs_handoff_delay = bs.number("handoff_delay", n.bs_handoff_delay);

  const auto& ap = doc.section_or_empty("nodes.ap");
  ap.expect_only({"w_min", "max_backoff", "collision_prob", "busy_success", "busy_collision",
                  "payload", "contenders", "residence_time", "handoff_delay"});
  read_wlan(ap, n.ap_channel);
  n.ap_residence_time = ap.number("residence_time", n.ap_residence_time);
  n.ap_handoff_delay = ap.number("handoff_delay", n.ap_handoff_delay);

  const auto& vn = doc.section_or_empty("nodes.vn");
  vn.expect_only({"w_min", "max_backoff", "collision_prob", "busy_success", "busy_collision",
                  "payload", "contenders", "z_min", "z_max", "unit", "p", "q", "beta",
                  "comm_range_state", "time_step", "initial_state", "initial_dist", "p_spread"});
  read_wlan(vn, n.vn_channel);
  auto& ch = n.vn_chain;
  ch.z_min = vn.number("z_min", ch.z_min);
  ch.z_max = vn.number("z_max", ch.z_max);
  ch.unit = vn.number("unit", ch.unit);
  ch.p = vn.number("p", ch.p);
  ch.q = vn.number("q", ch.q);
  ch.beta = vn.number("beta", ch.beta);
  ch.comm_range_state = as_size(vn, "comm_range_state", ch.comm_range_state);
  ch.time_step = vn.number("time_step", ch.time_step);
  ch.initial_state = as_size(vn, "initial_state", ch.initial_state);
  if (vn.has("initial_dist")) ch.initial_dist = vn.numbers("initial_dist");
  ch.p_spread = vn.number("p_spread", ch.p_spread);

  const auto& bw = doc.section_or_empty("bandwidth");
  bw.expect_only({"bs_bs", "bs_ap", "ap_ap", "ap_vehicle", "bs_vehicle", "vehicle_vehicle"});
  auto& b = c.bandwidth;
  b.bs_bs = bw.number("bs_bs", b.bs_bs);
  b.bs_ap = bw.number("bs_ap", b.bs_ap);
  b.ap_ap = bw.number("ap_ap", b.ap_ap);
  b.ap_vehicle = bw.number("ap_vehicle", b.ap_vehicle);
  b.bs_vehicle = bw.number("bs_vehicle", b.bs_vehicle);
  b.vehicle_vehicle = bw.number("vehicle_vehicle", b.vehicle_vehicle);

  const auto& qt = doc.section_or_empty("quotas");
  qt.expect_only({"bs", "ap", "vn"});
  c.quotas.bs = as_int(qt, "bs", c.quotas.bs);
  c.quotas.ap = as_int(qt, "ap", c.quotas.ap);
  c.quotas.vn = as_int(qt, "vn", c.quotas.vn);

  const auto& ag = doc.section_or_empty("agent");
  ag.expect_only({"hidden", "workers", "entropy_coef", "gamma", "lr_actor", "lr_critic",
                  "episodes", "n_step"});
  auto& a = c.agent;
  if (ag.has("hidden")) a.hidden = to_ints(ag.numbers("hidden"));
  a.workers = as_int(ag, "workers", a.workers);
  a.entropy_coef = ag.number("entropy_coef", a.entropy_coef);
  a.gamma = ag.number("gamma", a.gamma);
  a.lr_actor = ag.number("lr_actor", a.lr_actor);
  a.lr_critic = ag.number("lr_critic", a.lr_critic);
  a.episodes = ag.integer("episodes", a.episodes);
  a.n_step = as_int(ag, "n_step", a.n_step);

  validate_config(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  return parse_config(ConfigDocument::load(path));
}

void write_config(ConfigWriter& w, const ScenarioConfig& c) {
  w.section("scenario")
      .put("format", 1.0)
      .put("seed", std::to_string(c.seed))
      .put("speed", c.env.speed)
      .put_bool("speed_coupling", c.env.speed_coupling)
      .put("reference_speed", c.env.reference_speed)
      .put("vn_penalty", c.env.vn_penalty == VnPenalty::AsPrinted ? "as_printed" : "failure_prob")
      .put_bool("bs_rate_as_printed", c.env.bs_rate_as_printed)
      .put("pseudo_factor", c.env.pseudo_factor);

  const auto& s = c.service;
  w.section("service").put("layout", s.layout);
  if (!s.demand_mix.empty()) w.put("demand_mix", format_mix(s.demand_mix));
  if (!s.demands.empty()) w.put("demands", s.demands);
  w.put("demand_std", s.demand_std)
      .put("interactive_mean", s.interactive_mean)
      .put("interactive_std", s.interactive_std);
  if (!s.interactive.empty()) w.put("interactive", s.interactive);
  w.put("dep_mean", s.dep_mean).put("dep_std", s.dep_std);
  if (!s.dep.empty()) w.put("dep", s.dep);

  const auto& n = c.nodes;
  w.section("nodes")
      .put("local_freq", n.local_freq)
      .put("freq_std", n.freq_std)
      .put("pseudo_freq", n.pseudo_freq)
      .put("bs_freq", n.bs_freq)
      .put("ap_freq", n.ap_freq)
      .put("vn_freq", n.vn_freq);
  w.section("nodes.bs")
      .put("bandwidth_hz", n.bs_channel.bandwidth_hz)
      .put("tx_power", n.bs_channel.tx_power)
      .put("gain", n.bs_channel.gain)
      .put("noise_power", n.bs_channel.noise_power)
      .put("interferers", format_interferers(n.bs_channel.interferers))
      .put("residence_time", n.bs_residence_time)
      .put("handoff_delay", n.bs_handoff_delay);
  w.section("nodes.ap");
  write_wlan(w, n.ap_channel);
  w.put("residence_time", n.ap_residence_time).put("handoff_delay", n.ap_handoff_delay);
  w.section("nodes.vn");
  write_wlan(w, n.vn_channel);
  const auto& ch = n.vn_chain;
  w.put("z_min", ch.z_min)
      .put("z_max", ch.z_max)
      .put("unit", ch.unit)
      .put("p", ch.p)
      .put("q", ch.q)
      .put("beta", ch.beta)
      .put("comm_range_state", static_cast<double>(ch.comm_range_state))
      .put("time_step", ch.time_step)
      .put("initial_state", static_cast<double>(ch.initial_state));
  if (!ch.initial_dist.empty()) w.put("initial_dist", ch.initial_dist);
  w.put("p_spread", ch.p_spread);

  const auto& b = c.bandwidth;
  w.section("bandwidth")
      .put("bs_bs", b.bs_bs)
      .put("bs_ap", b.bs_ap)
      .put("ap_ap", b.ap_ap)
      .put("ap_vehicle", b.ap_vehicle)
      .put("bs_vehicle", b.bs_vehicle)
      .put("vehicle_vehicle", b.vehicle_vehicle);
  w.section("quotas")
      .put("bs", c.quotas.bs)
      .put("ap", c.quotas.ap)
      .put("vn", c.quotas.vn);
  const auto& a = c.agent;
  w.section("agent")
      .put("hidden", to_doubles(a.hidden))
      .put("workers", a.workers)
      .put("entropy_coef", a.entropy_coef)
      .put("gamma", a.gamma)
      .put("lr_actor", a.lr_actor)
      .put("lr_critic", a.lr_critic)
      .put("episodes", std::to_string(a.episodes))
      .put("n_step", a.n_step);
}

void write_scenario(std::ostream& os, const Scenario& scenario) {
  ConfigWriter w(os);
  w.comment("vedge scenario v1");
  write_config(w, scenario.config);
  for (const auto& node : scenario.nodes) {
    w.section("catalog." + std::to_string(node.id))
        .put("name", node.name)
        .put("kind", to_string(node.kind))
        .put("cpu_freq", node.cpu_freq);
    if (node.bs_channel) {
      const auto& ch = *node.bs_channel;
      w.put("bandwidth_hz", ch.bandwidth_hz)
          .put("tx_power", ch.tx_power)
          .put("gain", ch.gain)
          .put("noise_power", ch.noise_power)
          .put("interferers", format_interferers(ch.interferers));
    }
    if (node.ap_channel) write_wlan(w, *node.ap_channel);
    if (node.kind == NodeKind::Bs || node.kind == NodeKind::Ap) {
      w.put("residence_rate", node.residence_rate).put("handoff_delay", node.handoff_delay);
    }
    if (node.headway) write_chain(w, *node.headway);
    std::string backhaul;
    for (const auto& [peer, bw] : node.backhaul) {
      if (!backhaul.empty()) backhaul += ", ";
      backhaul += std::to_string(peer) + ":" + format_number(bw);
    }
    w.put("backhaul", backhaul);
  }
  if (scenario.sample) {
    const auto& dag = *scenario.sample;
    std::string edges, regions;
    for (const auto& e : dag.edges) {
      if (!edges.empty()) edges += ", ";
      edges += std::to_string(e.from) + ">" + std::to_string(e.to) + ":" + format_number(e.data);
    }
    for (const auto& r : dag.regions) {
      if (!regions.empty()) regions += ", ";
      regions += std::string(to_string(r.kind)) + ":" + std::to_string(r.first_task) + ":" +
                 std::to_string(r.task_count);
    }
    w.section("sample")
        .put("edges", edges)
        .put("regions", regions)
        .put("clamp_events", static_cast<double>(dag.clamp_events));
    for (const auto& t : dag.tasks) {
      w.section("sample.task." + std::to_string(t.id))
          .put("compute_demand", t.compute_demand)
          .put("interactive_data", t.interactive_data)
          .put("dep_data_in", t.dep_data_in);
      if (t.parallel_group) w.put("parallel_group", *t.parallel_group);
    }
  }
}

namespace {

EdgeNode parse_catalog_node(const ConfigSection& sec) {
  EdgeNode n;
  const std::string id_text = sec.name().substr(std::string("catalog.").size());
  n.id = static_cast<int>(parse_number(id_text, sec.line()));
  n.name = sec.text("name", "");
  const auto* kind = sec.find("kind");
  if (!kind) throw ConfigError("catalog node without kind", sec.line());
  n.kind = parse_kind(kind->value, kind->line);
  n.cpu_freq = sec.number("cpu_freq");
  if (n.kind == NodeKind::Bs) {
    channel::BsChannel ch;
    ch.bandwidth_hz = sec.number("bandwidth_hz");
    ch.tx_power = sec.number("tx_power");
    ch.gain = sec.number("gain");
    ch.noise_power = sec.number("noise_power");
    ch.interferers = parse_interferers(sec);
    n.bs_channel = ch;
  }
  if (n.kind == NodeKind::Ap || n.kind == NodeKind::Vn) {
    channel::ApChannel ch;
    read_wlan(sec, ch);
    n.ap_channel = ch;
  }
  if (n.kind == NodeKind::Bs || n.kind == NodeKind::Ap) {
    n.residence_rate = sec.number("residence_rate");
    n.handoff_delay = sec.number("handoff_delay");
  }
  if (n.kind == NodeKind::Vn) {
    mobility::HeadwayChainParams c;
    read_chain(sec, c);
    n.headway = c;
  }
  const auto* bh = sec.find("backhaul");
  for (const auto& tok : sec.tokens("backhaul")) {
    auto colon = tok.find(':');
    if (colon == std::string::npos) throw ConfigError("backhaul entries must be <id>:<bits/s>", bh->line);
    n.backhaul[static_cast<int>(parse_number(tok.substr(0, colon), bh->line))] =
        parse_number(tok.substr(colon + 1), bh->line);
  }
  try {
    validate_node(n);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), sec.line());
  }
  return n;
}

ServiceDag parse_sample(const ConfigDocument& doc, const ConfigSection& sec) {
  ServiceDag dag;
  const auto* ed = sec.find("edges");
  for (const auto& tok : sec.tokens("edges")) {
    auto gt = tok.find('>');
    auto colon = tok.find(':');
    if (gt == std::string::npos || colon == std::string::npos) {
      throw ConfigError("edges must be <from>> <to>:<bits>", ed->line);
    }
    dag.edges.push_back({static_cast<int>(parse_number(tok.substr(0, gt), ed->line)),
                         static_cast<int>(parse_number(tok.substr(gt + 1, colon - gt - 1), ed->line)),
                         parse_number(tok.substr(colon + 1), ed->line)});
  }
  for (const auto& tok : sec.tokens("regions")) {
    auto a = tok.find(':');
    auto b = tok.rfind(':');
    dag.regions.push_back({parse_region_kind(tok.substr(0, a)),
                           static_cast<std::size_t>(parse_number(tok.substr(a + 1, b - a - 1), 0)),
                           static_cast<std::size_t>(parse_number(tok.substr(b + 1), 0))});
  }
  dag.clamp_events = static_cast<std::size_t>(sec.number("clamp_events", 0.0));
  for (const auto& s : doc.sections()) {
    if (s.name().rfind("sample.task.", 0) != 0) continue;
    TaskProfile t;
    t.id = static_cast<int>(parse_number(s.name().substr(12), s.line()));
    t.compute_demand = s.number("compute_demand");
    t.interactive_data = s.number("interactive_data");
    t.dep_data_in = s.number("dep_data_in");
    if (s.has("parallel_group")) t.parallel_group = static_cast<int>(s.integer("parallel_group", 0));
    dag.tasks.push_back(t);
  }
  auto violations = validate_dag(dag);
  if (!violations.empty()) throw ConfigError("sample service: " + violations.front().message, sec.line());
  return dag;
}

}  // namespace

Scenario parse_scenario(const ConfigDocument& doc) {
  Scenario s;
  s.config = parse_config(doc);
  for (const auto& sec : doc.sections()) {
    if (sec.name().rfind("catalog.", 0) == 0) s.nodes.push_back(parse_catalog_node(sec));
  }
  if (s.nodes.empty()) {
    s.nodes = generate_nodes(s.config, s.config.seed);
  } else if (s.nodes.front().kind != NodeKind::Local || s.nodes.front().id != 0) {
    throw ConfigError("catalog must start with the local vehicle as node 0");
  }
  if (const auto* sample = doc.section("sample")) s.sample = parse_sample(doc, *sample);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(ConfigDocument::load(path));
}

}  // namespace vedge
