#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "vedge/env.hpp"

using namespace vedge;
using namespace vedge::env;

namespace {

EdgeNode make_node(int id, NodeKind kind, double freq) {
  EdgeNode n;
  n.id = id;
  n.kind = kind;
  n.cpu_freq = freq;
  return n;
}

TaskProfile task(double f, double du, double dep = 0.0) {
  return TaskProfile{1, f, du, dep, std::nullopt};
}

ServiceDag serial(std::vector<double> demands, double interactive, double dep) {
  ServiceDag dag;
  for (std::size_t i = 0; i < demands.size(); ++i) {
    dag.tasks.push_back({static_cast<int>(i) + 1, demands[i], interactive, i ? dep : 0.0, std::nullopt});
    if (i) dag.edges.push_back({static_cast<int>(i), static_cast<int>(i) + 1, dep});
  }
  dag.regions.push_back({RegionKind::Sequence, 0, demands.size()});
  return dag;
}

std::shared_ptr<const Scenario> reference(bool jitter = true) {
  ScenarioConfig c;
  if (!jitter) c.nodes.freq_std = 0.0;
  return std::make_shared<const Scenario>(make_scenario(c));
}

}  // namespace

TEST_CASE("raw delay examples") {
  auto bs = make_node(1, NodeKind::Bs, 10);
  auto pred = make_node(2, NodeKind::Ap, 10);
  bs.backhaul[2] = 15;
  pred.backhaul[1] = 15;
  const std::vector<Inbound> in{{30, &pred}};
  CHECK(raw_task_delay(task(100, 50, 30), bs, 10, 25, in) == 14.0);
  CHECK(raw_task_delay(task(100, 0, 0), bs, 10, 25, {}) == 10.0);
  const std::vector<Inbound> same{{30, &bs}};
  CHECK(raw_task_delay(task(100, 50, 30), bs, 10, 25, same) == 12.0);

  auto local = make_node(0, NodeKind::Local, 10);
  local.backhaul[2] = 15;
  pred.backhaul[0] = 15;
  CHECK(raw_task_delay(task(100, 50, 30), local, 10, 0, in) == 12.0);
}

TEST_CASE("transfers from several predecessors overlap") {
  auto target = make_node(0, NodeKind::Bs, 1);
  auto a = make_node(1, NodeKind::Ap, 1);
  auto b = make_node(2, NodeKind::Ap, 1);
  target.backhaul = {{1, 10.0}, {2, 2.0}};
  const std::vector<Inbound> in{{100, &a}, {10, &b}};
  CHECK(transfer_delay(in, target) == 10.0);
  CHECK(link_rate(target, target) == std::numeric_limits<double>::infinity());
}

TEST_CASE("infeasible placements") {
  auto bs = make_node(1, NodeKind::Bs, 10);
  CHECK_THROWS_AS(raw_task_delay(task(1, 5), bs, 10, 0.0, {}), InfeasiblePlacement);
  CHECK_NOTHROW(raw_task_delay(task(1, 0), bs, 10, 0.0, {}));
  auto other = make_node(2, NodeKind::Ap, 1);
  const std::vector<Inbound> in{{5, &other}};
  CHECK_THROWS_AS(raw_task_delay(task(1, 0, 5), bs, 10, 1.0, in), InfeasiblePlacement);
  CHECK_THROWS_AS(raw_task_delay(task(1, 0), bs, 0.0, 1.0, {}), ContractError);
}

TEST_CASE("adjusted delay examples") {
  auto bs = make_node(1, NodeKind::Bs, 10);
  bs.handoff_delay = 1.0;
  CHECK(adjusted_task_delay(14, bs, {2.0, {}, {}}) == 16.0);
  const auto vn = make_node(2, NodeKind::Vn, 10);
  CHECK(adjusted_task_delay(14, vn, {{}, 0.5, 30.0}) == 29.0);
  CHECK(adjusted_task_delay(14, vn, {{}, 0.8, 30.0}) == doctest::Approx(38.0));
  CHECK(adjusted_task_delay(14, vn, {{}, 0.8, 30.0}, VnPenalty::FailureProb) == doctest::Approx(20.0));
  CHECK(adjusted_task_delay(14, make_node(0, NodeKind::Local, 1), {}) == 14.0);
  CHECK_THROWS_AS(adjusted_task_delay(14, bs, {}), ContractError);
  CHECK_THROWS_AS(adjusted_task_delay(14, vn, {{}, 0.5, {}}), ContractError);
}

TEST_CASE("delays match a straight-line evaluator") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto pos = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const NodeKind kinds[] = {NodeKind::Local, NodeKind::Bs, NodeKind::Ap, NodeKind::Vn};
  for (int i = 0; i < 1000; ++i) {
    const NodeKind kind = kinds[rng() % 4];
    auto node = make_node(0, kind, pos(1, 1000));
    node.handoff_delay = pos(0, 3);
    auto local = make_node(9, NodeKind::Local, pos(1, 200));
    std::vector<EdgeNode> preds;
    const int npred = static_cast<int>(rng() % 3);
    for (int k = 0; k < npred; ++k) {
      auto p = make_node(k + 1, NodeKind::Ap, 1);
      const double link = pos(1e3, 1e9), to_local = pos(1e3, 1e9);
      p.backhaul[0] = link;
      p.backhaul[9] = to_local;
      preds.push_back(p);
    }
    const bool colocated = npred > 0 && u(rng) < 0.2;
    std::vector<double> data;
    std::vector<Inbound> in;
    for (int k = 0; k < npred; ++k) {
      data.push_back(pos(0, 1e9));
      in.push_back({data.back(), colocated && k == 0 ? &node : &preds[static_cast<std::size_t>(k)]});
    }
    const double f = pos(0, 1e4), du = pos(0, 1e8), b = pos(1e5, 1e9), fc = pos(1, 1000);
    TaskProfile t{1, f, du, 0.0, std::nullopt};

    // Eq. (1) by hand.
    double expected = f / fc + (kind == NodeKind::Local ? 0.0 : du / b);
    double slowest = 0.0, slowest_local = 0.0;
    for (int k = 0; k < npred; ++k) {
      const auto& p = preds[static_cast<std::size_t>(k)];
      const bool same = colocated && k == 0;
      slowest = std::max(slowest, same ? 0.0 : data[static_cast<std::size_t>(k)] / p.backhaul.at(0));
      slowest_local = std::max(slowest_local,
                               data[static_cast<std::size_t>(k)] / (same ? 1e300 : p.backhaul.at(9)));
    }
    if (colocated) {
      node.backhaul[9] = 1e300;
    }
    expected += slowest;
    const double raw = raw_task_delay(t, node, fc, b, in);
    CHECK(std::abs(raw - expected) <= 1e-12 * expected);

    // Eq. (12) by hand.
    const double eta = pos(0, 0.1), r = u(rng);
    const double recompute = f / local.cpu_freq + slowest_local;
    const double lib_recompute = f / local.cpu_freq + transfer_delay(in, local);
    double adj_expected = raw;
    MobilityInputs mob;
    if (kind == NodeKind::Bs || kind == NodeKind::Ap) {
      adj_expected = raw + node.handoff_delay * (eta * raw);
      mob.handoffs = eta * raw;
    } else if (kind == NodeKind::Vn) {
      adj_expected = raw + r * recompute;
      mob.usability = r;
      mob.local_recompute = lib_recompute;
    }
    const double adj = adjusted_task_delay(raw, node, mob);
    CHECK(std::abs(adj - adj_expected) <= 1e-12 * adj_expected);
    CHECK(adj >= raw);
  }
}

TEST_CASE("service delay examples") {
  CHECK(service_delay(std::vector<double>{3, 5, 2}, serial({1, 1, 1}, 0, 0)).total == 10.0);
  CHECK(service_delay(std::vector<double>{4}, serial({1}, 0, 0)).total == 4.0);

  ServiceDag dag = serial({1, 1, 1, 1}, 0, 0);
  dag.edges = {{1, 2, 0}, {1, 3, 0}, {2, 4, 0}, {3, 4, 0}};
  dag.tasks[1].parallel_group = 0;
  dag.tasks[2].parallel_group = 0;
  const auto sd = service_delay(std::vector<double>{3, 5, 7, 2}, dag);
  CHECK(sd.total == 12.0);
  CHECK(sd.longest == std::vector<bool>{true, false, true, true});
  const auto tie = service_delay(std::vector<double>{3, 7, 7, 2}, dag);
  CHECK(tie.longest == std::vector<bool>{true, true, false, true});
  CHECK_THROWS_AS(service_delay(std::vector<double>{1, 2}, dag), ContractError);
}

TEST_CASE("candidate set ordering and padding") {
  std::vector<EdgeNode> nodes{make_node(0, NodeKind::Local, 10), make_node(1, NodeKind::Bs, 5),
                              make_node(2, NodeKind::Bs, 9), make_node(3, NodeKind::Bs, 7),
                              make_node(4, NodeKind::Ap, 3), make_node(5, NodeKind::Vn, 1)};
  const auto slots = candidate_set(nodes, Quotas{2, 2, 1});
  REQUIRE(slots.size() == 6);
  CHECK(slots[0].kind == NodeKind::Local);
  CHECK(*slots[1].node_id == 2);
  CHECK(*slots[2].node_id == 3);
  CHECK(*slots[3].node_id == 4);
  CHECK(slots[4].pseudo());
  CHECK(slots[4].kind == NodeKind::Ap);
  CHECK(*slots[5].node_id == 5);

  const auto ref = candidate_set(reference()->nodes, Quotas{});
  REQUIRE(ref.size() == 11);
  const auto& sc = *reference();
  CHECK(sc.node(*ref[1].node_id).cpu_freq == 676);
  CHECK(sc.node(*ref[2].node_id).cpu_freq == 560);
  CHECK(sc.node(*ref[3].node_id).cpu_freq == 526);
  CHECK(sc.node(*ref[5].node_id).cpu_freq == 177);
  CHECK(sc.node(*ref[10].node_id).cpu_freq == 120);
}

TEST_CASE("state encoding") {
  CHECK(encoded_size(11) == 81);
  EnvState s;
  s.slots.assign(11, {});
  const auto zero = encode_state(s, FeatureNorms{});
  CHECK(zero.size() == 81);
  CHECK(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }));

  s.compute_demand = 8;
  s.interactive_data = 4;
  s.slots[1] = {NodeKind::Bs, false, 6, 2, 1, 1};
  s.speed = 10;
  FeatureNorms n;
  const auto x = encode_state(s, n);
  FeatureNorms half{2, 2, 2, 2, 2, 2, 2, 2};
  const auto y = encode_state(s, half);
  CHECK(x[0] == 8);
  CHECK(y[0] == 4);
  CHECK(x[3 + 7] == 1.0);  // BS one-hot of slot 1
  CHECK(y[3 + 7] == 1.0);  // one-hot is not scaled
  CHECK(y[3 + 7 + 3] == 3.0);
  CHECK(y.back() == 5.0);

  s.speed = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(encode_state(s, n), ContractError);
  CHECK_THROWS_AS(encode_state(EnvState{}, FeatureNorms{0, 1, 1, 1, 1, 1, 1, 1}), ContractError);
}

TEST_CASE("episode lifecycle") {
  Environment env(reference());
  CHECK_THROWS_AS(env.step({0}), LifecycleError);
  CHECK_THROWS_AS(env.state(), LifecycleError);
  env.reset(serial({1000}, 1e6, 0), 3);
  CHECK(env.task_count() == 1);
  CHECK(env.action_count() == 11);
  CHECK_THROWS_AS(env.step({11}), std::out_of_range);
  const auto out = env.step({0});
  CHECK(out.terminal);
  CHECK(env.terminal());
  CHECK_THROWS_AS(env.step({0}), LifecycleError);
  CHECK(env.trace().service_delay == -out.reward);
}

TEST_CASE("rewards, traces and replay determinism") {
  auto sc = reference();
  std::mt19937_64 rng(9);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Environment a(sc), b(sc);
    a.reset(seed);
    b.reset(seed);
    double sum = 0.0;
    while (!a.terminal()) {
      CHECK(encode_state(a.state(), a.norms()).size() == 81);
      const auto delays = a.slot_delays();
      const std::size_t act = rng() % a.action_count();
      const auto best = std::min_element(delays.begin(), delays.end()) - delays.begin();
      const auto oa = a.step({act});
      const auto ob = b.step({act});
      CHECK(oa.reward == -oa.adjusted_delay);
      CHECK(oa.reward == ob.reward);
      CHECK(oa.adjusted_delay == delays[act]);
      CHECK(oa.adjusted_delay >= oa.raw_delay);
      CHECK(delays[static_cast<std::size_t>(best)] <= oa.adjusted_delay);
      sum -= oa.reward;
    }
    CHECK(a.trace().service_delay == doctest::Approx(sum).epsilon(1e-12));
    std::vector<double> per_task;
    for (const auto& r : a.trace().steps) per_task.push_back(r.adjusted_delay);
    CHECK(service_delay(per_task, a.service()).total == a.trace().service_delay);
    CHECK(a.trace().steps.size() == b.trace().steps.size());
  }
}

TEST_CASE("slot delays follow the delay model on a jitter-free reference") {
  auto sc = reference(false);
  Environment env(sc);
  std::mt19937_64 rng(4);
  const auto& local = sc->local();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    env.reset(seed);
    std::map<int, int> placed;
    while (!env.terminal()) {
      const auto& t = env.service().tasks[env.state().step_index - 1];
      double worst = 0.0;
      std::vector<double> expect(env.action_count(), 0.0);
      for (std::size_t s = 0; s < env.action_count(); ++s) {
        const auto& slot = env.slots()[s];
        const auto& node = sc->node(*slot.node_id);
        double rate = 0.0;
        if (node.bs_channel) rate = channel::bs_uplink_rate(*node.bs_channel);
        if (node.ap_channel) rate = channel::ap_rate(*node.ap_channel);
        double dep = 0.0, dep_local = 0.0;
        for (const auto* e : env.service().incoming(t.id)) {
          const auto& from = sc->node(placed.at(e->from));
          if (from.id != node.id) dep = std::max(dep, e->data / node.backhaul.at(from.id));
          if (from.id != local.id) dep_local = std::max(dep_local, e->data / local.backhaul.at(from.id));
        }
        const double raw = t.compute_demand / node.cpu_freq +
                           (node.kind == NodeKind::Local ? 0.0 : t.interactive_data / rate) + dep;
        double adj = raw;
        if (node.kind == NodeKind::Bs || node.kind == NodeKind::Ap) {
          adj += node.handoff_delay * node.residence_rate * raw;
        } else if (node.kind == NodeKind::Vn) {
          const double r = mobility::node_usability(mobility::HeadwayChain(*node.headway), raw);
          adj += r * (t.compute_demand / local.cpu_freq + dep_local);
        }
        expect[s] = adj;
        worst = std::max(worst, adj);
        CHECK(env.slot_delays()[s] == doctest::Approx(adj).epsilon(1e-12));
      }
      const std::size_t act = rng() % env.action_count();
      placed[t.id] = *env.slots()[act].node_id;
      env.step({act});
    }
  }
}

TEST_CASE("pseudo slots carry a sentinel delay") {
  ScenarioConfig c;
  c.nodes.ap_freq = {526};
  c.nodes.vn_freq = {124, 120};
  auto sc = std::make_shared<const Scenario>(make_scenario(c));
  Environment env(sc);
  env.reset(1);
  REQUIRE(env.action_count() == 11);
  CHECK(env.slots()[4].pseudo());
  while (!env.terminal()) {
    const auto& d = env.slot_delays();
    double worst = 0.0;
    for (std::size_t s = 0; s < d.size(); ++s) {
      if (!env.slots()[s].pseudo()) worst = std::max(worst, d[s]);
    }
    for (std::size_t s = 0; s < d.size(); ++s) {
      if (env.slots()[s].pseudo()) CHECK(d[s] == 10.0 * worst);
    }
    CHECK(env.state().slots[4].pseudo);
    CHECK(env.state().slots[4].kind == NodeKind::Ap);
    const auto out = env.step({4});
    CHECK(out.node_kind == NodeKind::Pseudo);
    CHECK(out.node_id == -1);
  }
}

TEST_CASE("parallel siblings are rewarded when the group completes") {
  ServiceDag dag = serial({1000, 1000, 3000, 1000}, 1e6, 1e6);
  dag.edges = {{1, 2, 1e6}, {1, 3, 1e6}, {2, 4, 1e6}, {3, 4, 1e6}};
  dag.tasks[1].parallel_group = 0;
  dag.tasks[2].parallel_group = 0;
  dag.tasks[3].dep_data_in = 2e6;
  Environment env(reference());
  env.reset(dag, 2);
  env.step({1});
  const auto first = env.step({0});
  CHECK(first.reward == 0.0);
  const auto second = env.step({0});
  CHECK(second.reward == -std::max(first.adjusted_delay, second.adjusted_delay));
  const auto last = env.step({1});
  const auto& tr = env.trace();
  double sum = 0.0;
  for (const auto& r : tr.steps) sum -= r.reward;
  CHECK(tr.service_delay == doctest::Approx(sum).epsilon(1e-12));
  CHECK(tr.steps[1].longest == false);
  CHECK(tr.steps[2].longest == true);
  CHECK(last.terminal);
}

TEST_CASE("trace CSV") {
  Environment env(reference());
  env.reset(3);
  while (!env.terminal()) env.step({0});
  std::ostringstream os;
  write_trace_header(os);
  write_trace_rows(os, 7, env.trace());
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line ==
        "episode,step,action_slot,node_id,node_kind,raw_delay_s,adjusted_delay_s,reward,service_delay_s");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(line.rfind("7,", 0) == 0);
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
  }
  CHECK(rows == 10);
}

TEST_CASE("speed coupling scales handoffs") {
  ScenarioConfig c;
  c.nodes.freq_std = 0.0;
  auto base = std::make_shared<const Scenario>(make_scenario(c));
  c.env.speed_coupling = true;
  c.env.speed = 40.0;
  auto fast = std::make_shared<const Scenario>(make_scenario(c));
  Environment a(base), b(fast);
  a.reset(5);
  b.reset(5);
  CHECK(b.state().slots[1].handoffs == doctest::Approx(2.0 * a.state().slots[1].handoffs));
  CHECK(b.state().slots[0].handoffs == 0.0);
  CHECK(b.state().speed == 40.0);
}
