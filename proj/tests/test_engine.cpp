#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "wsnr/engine.hpp"
#include "wsnr/metrics.hpp"

using namespace wsnr;

namespace {

SimConfig free_energy(SimConfig c = {}) {
  c.energy = EnergyModel{0, 0, 0, 0, 0, 0};
  return c;
}

std::size_t count(const Trace& t, RecordKind k) {
  return static_cast<std::size_t>(
      std::count_if(t.records.begin(), t.records.end(), [k](const Record& r) { return r.kind == k; }));
}

// Zone 0 holds the recoverer (id 0) and f1 (id 1); z (id 2) sits alone in
// zone 1 and holds replicas of f1 and f2 (id 3, zone 2). f1 and f2 work
// from the start and both fail after their first replication.
Trace co_contributor_failure(RecoveryMode mode) {
  SimConfig c = free_energy();
  c.rows = 1;
  c.cols = 3;
  c.n_sensors = 4;
  c.r_comm = 1.2;
  c.p_fail = 1.0;
  c.fixed_sleep = 1.5;
  c.bootstrap_working = {1, 3};
  c.recovery_mode = mode;
  c.t_max = 2.0;
  const Topology topo(1, 3, c.r_sense, c.r_comm, {{0.4, 0.5}, {0.5, 0.5}, {1.5, 0.5}, {2.5, 0.5}});
  return run(c, topo);
}

}  // namespace

TEST(Engine, NoFailureSourcesMeansNoFailures) {
  SimConfig c = free_energy();
  c.n_sensors = 200;
  c.p_fail = 0.0;
  c.t_max = 100.0;
  const Trace t = run(c);
  EXPECT_EQ(count(t, RecordKind::Failure), 0u);
  EXPECT_EQ(recovery_counts(t).failures, 0u);
  EXPECT_DOUBLE_EQ(t.summary.t_end, 100.0);
}

TEST(Engine, DeterministicDigest) {
  SimConfig c;
  c.n_sensors = 300;
  c.p_fail = 0.04;
  c.seed = 17;
  const Trace a = run(c);
  const Trace b = run(c);
  EXPECT_EQ(trace_digest(a), trace_digest(b));
  EXPECT_EQ(a, b);
  c.seed = 18;
  EXPECT_NE(trace_digest(run(c)), trace_digest(a));
}

// Two co-zone nodes: 0 works, 1 sleeps with a constant period Δ; both die
// together at t^R. Node 1 probes once per Δ and node 0 replies each time.
TEST(Engine, TwoNodeChainMessageCount) {
  SimConfig c = free_energy();
  c.rows = 1;
  c.cols = 1;
  c.n_sensors = 2;
  c.fixed_sleep = 1.0;
  c.node_lifetime = 10.2;
  c.bootstrap_working = {0};
  const Topology topo(1, 1, c.r_sense, c.r_comm, {{0.3, 0.5}, {0.7, 0.5}});
  const Trace t = run(c, topo);
  const auto msgs = message_counts(t);
  const auto probes = msgs[static_cast<std::size_t>(MsgKind::ProbeRequest)];
  const auto replies = msgs[static_cast<std::size_t>(MsgKind::ProbeReply)];
  const double tR = 10.2, delta = 1.0;
  EXPECT_EQ(probes, static_cast<std::uint64_t>(std::floor(tR / delta)));
  EXPECT_EQ(replies, probes);
  EXPECT_LE(std::abs(double(probes + replies) - 2.0 * tR / delta), 1.0);
  const RunSummary s = summarize(t);
  EXPECT_TRUE(s.bound_ok);
  EXPECT_NEAR(s.message_bound, 2.0 * 1.0 * tR / delta, 1e-9);
}

TEST(Engine, CertainFailureAtFirstSenseCycle) {
  SimConfig c = free_energy();
  c.rows = 1;
  c.cols = 1;
  c.n_sensors = 1;
  c.p_fail = 1.0;
  c.bootstrap_working = {0};
  const Topology topo(1, 1, c.r_sense, c.r_comm, {{0.5, 0.5}});
  const Trace t = run(c, topo);
  ASSERT_EQ(count(t, RecordKind::Failure), 1u);
  const auto it = std::find_if(t.records.begin(), t.records.end(),
                               [](const Record& r) { return r.kind == RecordKind::Failure; });
  EXPECT_DOUBLE_EQ(it->time, c.sense_period);
  EXPECT_EQ(it->cause, FailureCause::Random);
}

TEST(Engine, ZeroFailureProbabilityNeverFires) {
  SimConfig c = free_energy();
  c.n_sensors = 100;
  c.t_max = 200.0;
  const Trace t = run(c);
  for (const Record& r : t.records) EXPECT_NE(r.kind, RecordKind::Failure);
}

// A lone worker survives a geometric number of sense cycles; pooling the
// Bernoulli trials over many seeds recovers the per-cycle probability.
TEST(Engine, EmpiricalFailureRate) {
  SimConfig c = free_energy();
  c.rows = 1;
  c.cols = 1;
  c.n_sensors = 1;
  c.p_fail = 0.04;
  c.bootstrap_working = {0};
  c.t_max = 1e6;
  const Topology topo(1, 1, c.r_sense, c.r_comm, {{0.5, 0.5}});
  double trials = 0, failures = 0;
  for (std::uint64_t seed = 0; trials < 1e5; ++seed) {
    c.seed = seed;
    const Trace t = run(c, topo);
    for (const Record& r : t.records) {
      if (r.kind != RecordKind::Failure) continue;
      trials += std::round(r.time / c.sense_period);
      failures += 1;
    }
  }
  EXPECT_NEAR(failures / trials, 0.04, 0.002);
}

TEST(Engine, FourTimesWakeRate) {
  SimConfig c = free_energy();
  c.rows = 1;
  c.cols = 1;
  c.n_sensors = 2;
  c.wake_multiplier = 4;
  c.lambda_base = 0.1;
  c.bootstrap_working = {0};
  c.t_max = 2.6e5;
  const Topology topo(1, 1, c.r_sense, c.r_comm, {{0.3, 0.5}, {0.7, 0.5}});
  const Trace t = run(c, topo);
  double sum = 0;
  std::size_t draws = 0;
  bool first = true;
  for (const Record& r : t.records) {
    if (r.kind != RecordKind::Sleep || r.node != 1) continue;
    if (first) {  // bootstrap wake-up
      first = false;
      continue;
    }
    sum += r.value;
    ++draws;
  }
  ASSERT_GE(draws, 100000u);
  EXPECT_NEAR(sum / double(draws), 1.0 / (4 * 0.1), 0.025);
}

TEST(Engine, CausalityAndFailStop) {
  SimConfig c;
  c.n_sensors = 400;
  c.p_fail = 0.06;
  c.seed = 5;
  const Trace t = run(c);
  std::vector<NodeState> state(t.header.n, NodeState::Sleeping);
  double prev = 0.0;
  for (const Record& r : t.records) {
    EXPECT_GE(r.time, prev);
    prev = r.time;
    if (r.kind == RecordKind::State) {
      EXPECT_EQ(state[r.node], r.from);
      state[r.node] = r.to;
    }
    if (r.kind == RecordKind::Failure) state[r.node] = NodeState::Failed;
    if (r.kind == RecordKind::Rule || r.kind == RecordKind::Wake || r.kind == RecordKind::Sleep) {
      EXPECT_NE(state[r.node], NodeState::Failed) << "activity on a failed node at t=" << r.time;
    }
  }
}

TEST(Engine, CoContributorFailureBreaksXorOnly) {
  const Trace x = co_contributor_failure(RecoveryMode::XorParity);
  const RecoveryCounts rx = recovery_counts(x);
  EXPECT_EQ(rx.attempts, 1u);
  EXPECT_EQ(rx.failures, 1u);

  const Trace s = co_contributor_failure(RecoveryMode::MultiRegister);
  const RecoveryCounts rs = recovery_counts(s);
  EXPECT_EQ(rs.attempts, 1u);
  EXPECT_EQ(rs.failures, 0u);
  EXPECT_DOUBLE_EQ(recovery_failure_rate(s), 0.0);
}

TEST(Engine, EnergyExhaustionKillsNodes) {
  SimConfig c;
  c.n_sensors = 200;
  const Trace t = run(c);
  std::size_t energy_deaths = 0;
  for (const Record& r : t.records) {
    if (r.kind == RecordKind::Failure && r.cause == FailureCause::Energy) ++energy_deaths;
  }
  EXPECT_EQ(energy_deaths, 200u);
  EXPECT_LT(t.summary.t_end, c.t_max);
  EXPECT_TRUE(check_energy(t).ok());
}

TEST(Engine, RejectsInvalidConfig) {
  SimConfig c;
  c.p_fail = 1.5;
  EXPECT_THROW(run(c), ConfigError);
  c = SimConfig{};
  c.lambda_base = 0;
  EXPECT_THROW(run(c), ConfigError);
}
