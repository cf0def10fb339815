// Acceptance gate: one PASS/FAIL line per criterion. Exit status is 0 only
// when every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "wsnr/wsnr.hpp"

using namespace wsnr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr std::uint32_t kSeeds = 20;

// ---------------------------------------------------------------- 1
void segment_moves() {
  const auto t0 = Clock::now();
  std::size_t segments = 0, violations = 0, max_ratio_num = 0, max_ratio_den = 1;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng pick = Rng::stream(seed, 7);
    SimConfig c;
    c.rows = 5;
    c.cols = 5;
    c.n_sensors = 10 + static_cast<std::uint32_t>(pick.below(41));  // 10..50
    c.p_fail = 0.02 * static_cast<double>(pick.below(5));
    c.wake_multiplier = pick.bernoulli(0.5) ? 4 : 1;
    c.recovery_mode = pick.bernoulli(0.5) ? RecoveryMode::XorParity : RecoveryMode::MultiRegister;
    c.seed = seed;
    const Trace t = run(c);
    for (const Segment& s : verify_convergence(t)) {
      ++segments;
      if (!s.ok) ++violations;
      if (s.moves * max_ratio_den > max_ratio_num * s.bound) {
        max_ratio_num = s.moves;
        max_ratio_den = s.bound;
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, violations == 0 && secs < 120.0,
         fmt("100 topologies, %zu segments, %zu over 2n, worst moves/2n = %zu/%zu, %.1fs", segments, violations,
             max_ratio_num, max_ratio_den, secs));
}

// ---------------------------------------------------------------- 2
void survivability() {
  const auto t0 = Clock::now();
  std::size_t partial_ok = 0, total_lost = 0, patterns = 0;
  Rng rng = Rng::stream(2, 0);
  std::uint64_t topo_seed = 0;
  while (patterns < 1000) {
    const Topology topo = build_grid({10, 10, 400, std::sqrt(0.5), 1.5, topo_seed++});
    for (int k = 0; k < 50 && patterns < 1000; ++k) {
      const NodeId owner = static_cast<NodeId>(rng.below(topo.size()));
      const ReplicaPlacement p = place_replicas(topo, owner);
      if (p.unprotected()) continue;
      const DataWord word{rng.bits()};
      std::vector<ReplicaStore> stores(p.holders.size(), ReplicaStore(RecoveryMode::MultiRegister));
      for (auto& s : stores) {
        s.absorb(owner, std::nullopt, DataWord{rng.bits()});  // stale write first
        s.absorb(owner, std::nullopt, word);
      }
      const std::size_t copies = p.total_copies();  // d_i + 1
      std::vector<std::size_t> order(copies);
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span<std::size_t>(order));

      auto recover = [&](const std::vector<bool>& dead) -> std::optional<DataWord> {
        if (!dead[0]) return word;  // copy-holder 0 is the owner
        for (std::size_t h = 1; h < copies; ++h) {
          if (!dead[h]) {
            if (auto w = recover_multi(stores[h - 1], owner)) return w;
          }
        }
        return std::nullopt;
      };
      const std::size_t kills = rng.below(copies);  // 0..d_i
      std::vector<bool> dead(copies, false);
      for (std::size_t j = 0; j < kills; ++j) dead[order[j]] = true;
      if (recover(dead) == word) ++partial_ok;
      if (!recover(std::vector<bool>(copies, true))) ++total_lost;
      ++patterns;
    }
  }
  const double secs = seconds_since(t0);
  report(2, partial_ok == patterns && total_lost == patterns && secs < 60.0,
         fmt("%zu patterns: %zu/%zu recovered with <= d_i lost, %zu/%zu unrecoverable with all lost, %.1fs", patterns,
             partial_ok, patterns, total_lost, patterns, secs));
}

// ---------------------------------------------------------------- sweeps
struct Sweeps {
  SweepReport fig1x, fig4x;
  double secs = 0;
};

Sweeps run_sweeps() {
  const auto t0 = Clock::now();
  Sweeps s;
  SweepSpec a = preset("fig-1x");
  a.repeats = kSeeds;
  s.fig1x = run_sweep(a);
  SweepSpec b = preset("fig-4x");
  b.repeats = kSeeds;
  b.seed_base = 10000;
  s.fig4x = run_sweep(b);
  s.secs = seconds_since(t0);
  std::printf("sweeps: fig-1x %zu runs, fig-4x %zu runs, %.1fs\n", s.fig1x.results.size(), s.fig4x.results.size(),
              s.secs);
  return s;
}

template <typename F>
void each_run(const Sweeps& s, F&& f) {
  for (const auto& r : s.fig1x.results) f(r);
  for (const auto& r : s.fig4x.results) f(r);
}

// ---------------------------------------------------------------- 3
void message_bound_check(const Sweeps& s) {
  std::size_t runs = 0, over = 0;
  double tightest = 0;
  each_run(s, [&](const RunResult& r) {
    ++runs;
    if (!(static_cast<double>(r.summary.probe_reply_observed) <= r.summary.message_bound)) ++over;
    if (r.summary.message_bound > 0) {
      tightest = std::max(tightest, double(r.summary.probe_reply_observed) / r.summary.message_bound);
    }
  });

  SimConfig c;
  c.rows = c.cols = 1;
  c.n_sensors = 2;
  c.energy = EnergyModel{0, 0, 0, 0, 0, 0};
  c.fixed_sleep = 1.0;
  c.node_lifetime = 10.2;
  c.bootstrap_working = {0};
  const Topology chain(1, 1, c.r_sense, c.r_comm, {{0.3, 0.5}, {0.7, 0.5}});
  const RunSummary ch = summarize(run(c, chain));
  const double gap = ch.message_bound - static_cast<double>(ch.probe_reply_observed);
  const bool chain_ok = gap >= 0.0 && gap <= 1.0;
  report(3, over == 0 && chain_ok,
         fmt("%zu/%zu sweep runs within n*m*max(t/D) (max observed/bound %.4f); 2-node chain %llu vs bound %.2f", runs - over,
             runs, tightest, static_cast<unsigned long long>(ch.probe_reply_observed), ch.message_bound));
}

// ---------------------------------------------------------------- 4
void sigma(const Sweeps& s) {
  std::size_t runs = 0, bad = 0, checks = 0, viol = 0, max_rec = 0;
  each_run(s, [&](const RunResult& r) {
    ++runs;
    checks += r.summary.sigma.quiescent_checks;
    viol += r.summary.sigma.violations;
    max_rec = std::max(max_rec, r.summary.sigma.max_recoverers);
    if (!r.summary.sigma.ok()) ++bad;
  });
  report(4, bad == 0,
         fmt("%zu runs, %zu quiescent zone checks, %zu without exactly one worker, max recoverers per failure %zu", runs,
             checks, viol, max_rec));
}

// mean of f over runs matching pred
template <typename Pred, typename F>
double mean_of(const SweepReport& rep, Pred&& pred, F&& f) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& r : rep.results) {
    if (!pred(r.row)) continue;
    sum += f(r.row);
    ++n;
  }
  return n ? sum / double(n) : std::nan("");
}

// ---------------------------------------------------------------- 5
void xor_fragility(const Sweeps& s) {
  auto rate = [&](std::uint32_t n, RecoveryMode m) {
    return mean_of(
        s.fig4x, [&](const RunRow& r) { return r.n_sensors == n && r.p_fail == 0.08 && r.recovery_mode == m; },
        [](const RunRow& r) { return r.recovery_failure_rate; });
  };
  const double gap2 = rate(200, RecoveryMode::XorParity) - rate(200, RecoveryMode::MultiRegister);
  const double gap16 = rate(1600, RecoveryMode::XorParity) - rate(1600, RecoveryMode::MultiRegister);
  report(5, gap2 >= 0.10 && gap16 <= gap2 / 2,
         fmt("p=8%%, 4x, %u seeds: XOR-SUM gap %.1f pp at density 2, %.1f pp at density 16 (limit %.1f)", kSeeds,
             100 * gap2, 100 * gap16, 50 * gap2));
}

// ---------------------------------------------------------------- 6
void coverage(const Sweeps& s) {
  const SweepSpec spec = preset("fig-1x");
  double lo = 1, hi = 0;
  std::size_t outside = 0;
  std::map<std::uint32_t, double> per_n;
  for (std::uint32_t n : spec.n_sensors) {
    for (double p : spec.p_fail) {
      const double c = mean_of(
          s.fig1x, [&](const RunRow& r) { return r.n_sensors == n && r.p_fail == p; },
          [](const RunRow& r) { return r.coverage_rate; });
      lo = std::min(lo, c);
      hi = std::max(hi, c);
      if (!(c >= 0.35 && c <= 0.65)) ++outside;
    }
    per_n[n] = mean_of(
        s.fig1x, [&](const RunRow& r) { return r.n_sensors == n; }, [](const RunRow& r) { return r.coverage_rate; });
  }
  report(6, outside == 0 && per_n[1600] >= per_n[200],
         fmt("1x, %u seeds: cell means in [%.3f, %.3f], %zu of 40 outside [0.35, 0.65]; density 2 %.3f, density 16 %.3f",
             kSeeds, lo, hi, outside, per_n[200], per_n[1600]));
}

// ---------------------------------------------------------------- 7
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (double(i) + double(j)) / 2.0 + 1.0;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / double(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / double(b.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

void lifetime_trend(const Sweeps& s) {
  const SweepSpec spec = preset("fig-1x");
  std::vector<double> ns, life;
  for (std::uint32_t n : spec.n_sensors) {
    ns.push_back(n);
    life.push_back(mean_of(
        s.fig1x, [&](const RunRow& r) { return r.n_sensors == n; }, [](const RunRow& r) { return r.lifetime; }));
  }
  const double rho = pearson(ranks(ns), ranks(life));

  // Equal density: SUM runs pooled over the p_fail values both sweeps share.
  const std::vector<double> shared_p = {0.0, 0.08};
  auto lifetime_at = [&](const SweepReport& rep, std::uint32_t n, std::optional<double> p) {
    return mean_of(
        rep,
        [&](const RunRow& r) {
          const bool in_p = p ? r.p_fail == *p : std::ranges::find(shared_p, r.p_fail) != shared_p.end();
          return r.n_sensors == n && in_p && r.recovery_mode == RecoveryMode::MultiRegister;
        },
        [](const RunRow& r) { return r.lifetime; });
  };
  std::size_t shorter = 0, cells_shorter = 0, cells = 0;
  std::string worst;
  for (std::uint32_t n : spec.n_sensors) {
    const double l1 = lifetime_at(s.fig1x, n, std::nullopt), l4 = lifetime_at(s.fig4x, n, std::nullopt);
    if (l4 < l1) {
      ++shorter;
    } else {
      worst += fmt(" [n=%u: 4x %.2f >= 1x %.2f]", n, l4, l1);
    }
    for (double p : shared_p) {
      ++cells;
      if (lifetime_at(s.fig4x, n, p) < lifetime_at(s.fig1x, n, p)) ++cells_shorter;
    }
  }
  report(7, rho >= 0.9 && shorter == spec.n_sensors.size(),
         fmt("Spearman(n, mean lifetime) = %.3f; 4x < 1x lifetime at %zu/%zu densities%s (per (density, p_fail) "
             "cell: %zu/%zu)",
             rho, shorter, spec.n_sensors.size(), worst.c_str(), cells_shorter, cells));
}

// ---------------------------------------------------------------- 8
void determinism() {
  std::size_t same = 0;
  for (std::uint64_t k = 0; k < 10; ++k) {
    SweepSpec s;
    s.base.seed = 0;
    s.n_sensors = {static_cast<std::uint32_t>(100 + 150 * k)};
    s.p_fail = {0.02 * double(k % 5)};
    s.wake_multiplier = {k % 2 ? 4u : 1u};
    s.recovery_mode = {k % 3 ? RecoveryMode::MultiRegister : RecoveryMode::XorParity};
    s.seed_base = 500 + k;
    const SweepReport a = run_sweep(s), b = run_sweep(s);
    const Trace ta = run(expand(s)[0]), tb = run(expand(s)[0]);
    if (a.results[0].digest == b.results[0].digest && csv_row(a.results[0].row) == csv_row(b.results[0].row) &&
        trace_digest(ta) == trace_digest(tb) && trace_digest(ta) == a.results[0].digest) {
      ++same;
    }
  }
  report(8, same == 10, fmt("%zu/10 configs replay to the same trace digest and CSV row", same));
}

// ---------------------------------------------------------------- 9
RuleAction guard_oracle(const SensorNode& n, const std::vector<ViewEntry>& v, double lmax) {
  bool W = false, F = false, Ws = false, Ps = false;
  NodeId low_failed = ~NodeId{0};
  for (const auto& e : v) {
    W |= e.state == NodeState::Working;
    Ws |= e.state == NodeState::Working && e.id < n.id;
    Ps |= e.state == NodeState::Probing && e.id < n.id;
    if (e.state == NodeState::Failed) {
      F = true;
      low_failed = std::min(low_failed, e.id);
    }
  }
  const bool probing = n.state == NodeState::Probing;
  const bool g1 = probing && (Ps || W);
  const bool g2 = probing && ((!W && !Ps) || F);
  const bool g3 = n.state == NodeState::Working && Ws;
  if (g2) return {Rule::R2, NodeState::Working, {}, F ? std::optional<NodeId>(low_failed) : std::nullopt};
  if (g1) {
    RuleAction a{Rule::R1, NodeState::Sleeping, {}, {}};
    if (Ps && n.d_alive > 0) a.new_lambda = std::min(n.lambda * double(n.d_init) / double(n.d_alive), lmax);
    return a;
  }
  if (g3) return {Rule::R3, NodeState::Sleeping, {}, {}};
  return {Rule::None, n.state, {}, {}};
}

void oracles() {
  Rng rng = Rng::stream(909, 0);
  std::size_t rule_mismatch = 0;
  for (int t = 0; t < 10000; ++t) {
    SensorNode n;
    n.id = static_cast<NodeId>(rng.below(16));
    n.state = static_cast<NodeState>(rng.below(4));
    n.lambda = 0.01 + rng.uniform();
    n.d_init = rng.below(12);
    n.d_alive = n.d_init ? rng.below(n.d_init + 1) : 0;
    std::vector<ViewEntry> v;
    const auto len = rng.below(8);
    for (std::uint64_t k = 0; k < len; ++k) {
      NodeId id = static_cast<NodeId>(rng.below(16));
      if (id == n.id) id = 16;
      v.push_back({id, static_cast<NodeState>(rng.below(4))});
    }
    if (!(step(n, v, 3.0) == guard_oracle(n, v, 3.0))) ++rule_mismatch;
  }

  std::size_t xor_mismatch = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    ReplicaStore store(RecoveryMode::XorParity);
    std::map<NodeId, DataWord> latest;
    const int updates = 1 + static_cast<int>(rng.below(40));
    for (int u = 0; u < updates; ++u) {
      const NodeId c = static_cast<NodeId>(rng.below(10));
      const DataWord w{rng.bits()};
      auto it = latest.find(c);
      store.absorb(c, it == latest.end() ? std::nullopt : std::optional<DataWord>(it->second), w);
      latest[c] = w;
    }
    const NodeId target = std::next(latest.begin(), static_cast<long>(rng.below(latest.size())))->first;
    std::map<NodeId, DataWord> fresh = latest;
    fresh.erase(target);
    // brute force: XOR of every contributor's latest word, minus the others
    std::uint64_t brute = 0;
    for (const auto& [c, w] : latest) brute ^= w.bits;
    for (const auto& [c, w] : fresh) brute ^= w.bits;
    const auto got = recover_xor(store, target, fresh);
    if (!got || got->bits != brute || brute != latest[target].bits) ++xor_mismatch;
  }
  report(9, rule_mismatch == 0 && xor_mismatch == 0,
         fmt("dispatcher vs guard enumeration: %zu/10000 mismatches; recover_xor vs brute force: %zu/1000 mismatches",
             rule_mismatch, xor_mismatch));
}

}  // namespace

int main() {
  segment_moves();
  survivability();
  const Sweeps s = run_sweeps();
  message_bound_check(s);
  sigma(s);
  xor_fragility(s);
  coverage(s);
  lifetime_trend(s);
  determinism();
  oracles();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
