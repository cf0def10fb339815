#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsnr/trace.hpp"

namespace wsnr {

// Time until the first initially populated zone has lost every sensor;
// t_end when no zone dies.
inline double lifetime(const Trace& t) {
  std::vector<std::size_t> alive(t.header.k, 0);
  for (ZoneId z : t.header.zone_of) ++alive[z];
  for (const Record& r : t.records) {
    if (r.kind != RecordKind::Failure) continue;
    if (--alive[t.header.zone_of[r.node]] == 0) return r.time;
  }
  return t.summary.t_end;
}

/// Fraction of zone-time, over [0, lifetime], during which a zone holds
/// at least one Working sensor. Intervals are integrated exactly.
inline double coverage_rate(const Trace& t, double horizon) {
  if (!(horizon > 0.0) || t.header.k == 0) {
    throw std::domain_error("coverage undefined for a zero-length trace");
  }
  std::vector<std::uint32_t> working(t.header.k, 0);
  std::vector<double> since(t.header.k, 0.0);
  double covered = 0.0;
  for (const Record& r : t.records) {
    if (r.kind != RecordKind::State) continue;
    if (r.time > horizon) break;
    const ZoneId z = t.header.zone_of[r.node];
    if (r.to == NodeState::Working && working[z]++ == 0) since[z] = r.time;
    if (r.from == NodeState::Working && --working[z] == 0) covered += r.time - since[z];
  }
  for (ZoneId z = 0; z < t.header.k; ++z) {
    if (working[z] > 0) covered += horizon - since[z];
  }
  return covered / (static_cast<double>(t.header.k) * horizon);
}

/// Covered fraction of each populated zone's own operating span, from 0
/// until its last sensor dies (t_end if it never does), pooled over zones.
/// Equals coverage_rate(t, t_end) when every populated zone survives.
inline double coverage_rate(const Trace& t) {
  const std::size_t k = t.header.k;
  std::vector<std::size_t> alive(k, 0);
  for (ZoneId z : t.header.zone_of) ++alive[z];
  std::vector<double> end(k, t.summary.t_end);
  std::vector<std::uint32_t> working(k, 0);
  std::vector<double> since(k, 0.0);
  double covered = 0.0;
  for (const Record& r : t.records) {
    const ZoneId z = t.header.zone_of[r.node];
    if (r.kind == RecordKind::Failure && --alive[z] == 0) end[z] = r.time;
    if (r.kind != RecordKind::State) continue;
    if (r.to == NodeState::Working && working[z]++ == 0) since[z] = r.time;
    if (r.from == NodeState::Working && --working[z] == 0) covered += r.time - since[z];
  }
  double span = 0.0;
  std::vector<bool> populated(k, false);
  for (ZoneId z : t.header.zone_of) populated[z] = true;
  for (ZoneId z = 0; z < k; ++z) {
    if (working[z] > 0) covered += end[z] - since[z];
    if (populated[z]) span += end[z];
  }
  if (!(span > 0.0)) throw std::domain_error("coverage undefined for a zero-length trace");
  return covered / span;
}

struct RecoveryCounts {
  std::size_t attempts = 0;
  std::size_t failures = 0;

  double rate() const noexcept {
    return attempts == 0 ? 0.0 : static_cast<double>(failures) / static_cast<double>(attempts);
  }
};

inline RecoveryCounts recovery_counts(const Trace& t) {
  RecoveryCounts c;
  for (const Record& r : t.records) {
    if (r.kind != RecordKind::Recovery) continue;
    ++c.attempts;
    if (!r.ok) ++c.failures;
  }
  return c;
}

inline double recovery_failure_rate(const Trace& t) { return recovery_counts(t).rate(); }

inline std::array<std::uint64_t, kMsgKinds> message_counts(const Trace& t) {
  std::array<std::uint64_t, kMsgKinds> c{};
  for (const Record& r : t.records) {
    if (r.kind == RecordKind::Msg) c[static_cast<std::size_t>(r.msg)] += r.count;
  }
  return c;
}

struct WakeupCounts {
  std::uint64_t total = 0;
  std::size_t sleeping_nodes = 0;  // nodes that were ever Sleeping

  double per_sleeping_node() const noexcept {
    return sleeping_nodes == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(sleeping_nodes);
  }
};

inline WakeupCounts wakeup_counts(const Trace& t) {
  WakeupCounts w;
  std::vector<bool> slept(t.header.n, true);
  for (NodeId id : t.header.config.bootstrap_working) {
    if (id < t.header.n) slept[id] = false;
  }
  for (const Record& r : t.records) {
    if (r.kind == RecordKind::Wake) ++w.total;
    if (r.kind == RecordKind::State && r.to == NodeState::Sleeping) slept[r.node] = true;
  }
  w.sleeping_nodes = static_cast<std::size_t>(std::count(slept.begin(), slept.end(), true));
  return w;
}

// r2 and r3 change a node's resting state. r1 only returns a probing node
// to the Sleeping state it woke from, so it is not a convergence move.
inline bool is_move(const Record& r) {
  return r.kind == RecordKind::Rule && (r.rule == Rule::R2 || r.rule == Rule::R3);
}

struct Segment {
  double begin = 0.0;
  double end = 0.0;
  std::size_t moves = 0;
  std::size_t bound = 0;
  bool ok = true;
};

/// Splits the trace at failure records and counts moves in each
/// inter-failure segment against the 2n bound.
inline std::vector<Segment> verify_convergence(const Trace& t, std::size_t n) {
  std::vector<Segment> out;
  Segment cur{0.0, 0.0, 0, 2 * n, true};
  for (const Record& r : t.records) {
    if (r.kind == RecordKind::Failure) {
      cur.end = r.time;
      cur.ok = cur.moves <= cur.bound;
      out.push_back(cur);
      cur = Segment{r.time, r.time, 0, 2 * n, true};
    } else if (is_move(r)) {
      ++cur.moves;
    }
  }
  cur.end = t.summary.t_end;
  cur.ok = cur.moves <= cur.bound;
  out.push_back(cur);
  return out;
}

inline std::vector<Segment> verify_convergence(const Trace& t) {
  return verify_convergence(t, t.header.n);
}

struct BoundInputs {
  std::vector<double> lifetimes;   // observed per node
  std::vector<double> min_sleeps;  // smallest drawn sleep; 0 if none drawn
};

inline BoundInputs bound_inputs(const Trace& t) {
  BoundInputs b;
  b.lifetimes.assign(t.header.n, t.summary.t_end);
  b.min_sleeps.assign(t.header.n, 0.0);
  for (const Record& r : t.records) {
    if (r.kind == RecordKind::Failure) b.lifetimes[r.node] = r.time;
    if (r.kind == RecordKind::Sleep) {
      double& m = b.min_sleeps[r.node];
      m = m == 0.0 ? r.value : std::min(m, r.value);
    }
  }
  return b;
}

struct MessageBound {
  double bound = 0.0;
  std::size_t excluded = 0;  // nodes with no positive sleep draw
};

// n·m·max_i(lifetime_i / min_sleep_i)
inline MessageBound message_bound(std::size_t n, std::size_t m, std::span<const double> lifetimes,
                                  std::span<const double> min_sleeps) {
  MessageBound out;
  double worst = 0.0;
  for (std::size_t i = 0; i < lifetimes.size() && i < min_sleeps.size(); ++i) {
    if (!(min_sleeps[i] > 0.0)) {
      ++out.excluded;
      continue;
    }
    worst = std::max(worst, lifetimes[i] / min_sleeps[i]);
  }
  out.bound = static_cast<double>(n) * static_cast<double>(m) * worst;
  return out;
}

struct SigmaReport {
  std::size_t quiescent_checks = 0;
  std::size_t violations = 0;
  std::size_t max_recoverers = 0;
  double first_violation = -1.0;

  bool ok() const noexcept { return violations == 0 && max_recoverers <= 1; }
};

/// Legitimate-state audit. A zone is quiescent when it has an alive
/// sensor, has been covered at least once, no member is probing, every
/// failed member has been claimed by an r2 recoverer, and no Working
/// transition or r2/r3 happened within the last sense period (duplicate
/// workers resolve at the next sense cycle). Each quiescent zone must
/// hold exactly one Working sensor, and each failed node has at most one
/// recoverer.
inline SigmaReport check_sigma(const Trace& t) {
  SigmaReport rep;
  const std::size_t k = t.header.k;
  const double settle = t.header.config.sense_period * (1.0 + 1e-9) + 1e-9;
  std::vector<std::size_t> working(k, 0), probing(k, 0), alive(k, 0), pending(k, 0);
  std::vector<bool> covered_once(k, false);
  std::vector<double> last_change(k, 0.0);
  std::vector<bool> failed_pending(t.header.n, false);
  std::vector<std::size_t> recoverers(t.header.n, 0);
  for (ZoneId z : t.header.zone_of) ++alive[z];

  auto check = [&](ZoneId z, double now) {
    if (alive[z] == 0 || !covered_once[z] || probing[z] != 0 || pending[z] != 0) return;
    if (now - last_change[z] <= settle) return;
    ++rep.quiescent_checks;
    if (working[z] != 1) {
      if (rep.violations++ == 0) rep.first_violation = now;
    }
  };

  for (const Record& r : t.records) {
    const ZoneId z = t.header.zone_of[r.node];
    switch (r.kind) {
      case RecordKind::State:
        check(z, r.time);
        if (r.to == NodeState::Probing) ++probing[z];
        if (r.from == NodeState::Probing) --probing[z];
        if (r.to == NodeState::Working) {
          ++working[z];
          covered_once[z] = true;
        }
        if (r.from == NodeState::Working) --working[z];
        if (r.to == NodeState::Working || r.from == NodeState::Working) last_change[z] = r.time;
        break;
      case RecordKind::Failure:
        check(z, r.time);
        --alive[z];
        ++pending[z];
        failed_pending[r.node] = true;
        last_change[z] = r.time;
        break;
      case RecordKind::Rule:
        if (is_move(r)) last_change[z] = r.time;
        if (r.rule == Rule::R2 && r.ok) {
          const ZoneId fz = t.header.zone_of[r.other];
          rep.max_recoverers = std::max(rep.max_recoverers, ++recoverers[r.other]);
          if (failed_pending[r.other]) {
            failed_pending[r.other] = false;
            --pending[fz];
          }
          last_change[fz] = r.time;
        }
        break;
      default:
        break;
    }
  }
  for (ZoneId z = 0; z < k; ++z) check(z, t.summary.t_end);
  return rep;
}

struct AuditReport {
  std::size_t locked_worker_moves = 0;   // rule on an r2 worker without a zone disturbance
  std::size_t excess_moves = 0;   // > 2 moves by a node between disturbances
  std::size_t lost_with_live_holder = 0;   // MultiRegister recovery failed with a live holder
  std::size_t exclusion_violations = 0;

  bool ok() const noexcept {
    return locked_worker_moves == 0 && excess_moves == 0 && lost_with_live_holder == 0 &&
           exclusion_violations == 0;
  }
};

/// Per-node stability audits. A zone disturbance is a failure in the zone or
/// an r2 firing there; both can put a second worker in the zone.
inline AuditReport check_node_audits(const Trace& t) {
  AuditReport rep;
  const std::size_t n = t.header.n;

  for (NodeId i = 0; i < n; ++i) {
    std::vector<NodeId> hs = t.header.holders[i];
    std::sort(hs.begin(), hs.end());
    if (std::adjacent_find(hs.begin(), hs.end()) != hs.end()) ++rep.exclusion_violations;
    for (NodeId h : hs) {
      if (h == i || h >= n || t.header.zone_of[h] == t.header.zone_of[i]) ++rep.exclusion_violations;
    }
  }

  std::vector<std::uint64_t> zone_epoch(t.header.k, 0);
  std::vector<std::optional<std::uint64_t>> locked_at(n);
  std::vector<std::uint64_t> move_epoch(n, 0);
  std::vector<std::size_t> moves(n, 0);
  const bool multi = t.header.config.recovery_mode == RecoveryMode::MultiRegister;

  for (const Record& r : t.records) {
    const ZoneId z = t.header.zone_of[r.node];
    if (r.kind == RecordKind::Failure) {
      ++zone_epoch[z];
    } else if (r.kind == RecordKind::Recovery) {
      if (multi && r.holders_alive > 0 && !r.ok) ++rep.lost_with_live_holder;
    } else if (r.kind == RecordKind::Rule) {
      if (locked_at[r.node] && *locked_at[r.node] == zone_epoch[z]) ++rep.locked_worker_moves;
      locked_at[r.node].reset();
      if (r.rule == Rule::R2) locked_at[r.node] = zone_epoch[z];
      if (is_move(r)) {
        if (move_epoch[r.node] != zone_epoch[z]) {
          move_epoch[r.node] = zone_epoch[z];
          moves[r.node] = 0;
        }
        if (++moves[r.node] > 2) ++rep.excess_moves;
      }
      if (r.rule == Rule::R2) ++zone_epoch[z];
    }
  }
  return rep;
}

struct EnergyReport {
  std::size_t conservation_violations = 0;
  std::size_t tx_violations = 0;

  bool ok() const noexcept { return conservation_violations == 0 && tx_violations == 0; }
};

// e_init - e_final equals the summed debits, and transmit debits match
// the recorded messages, node by node.
inline EnergyReport check_energy(const Trace& t) {
  EnergyReport rep;
  std::vector<std::uint64_t> sent(t.header.n, 0);
  for (const Record& r : t.records) {
    if (r.kind == RecordKind::Msg) sent[r.node] += r.count;
  }
  const std::int64_t c_tx = to_micro(t.header.config.energy.c_tx);
  for (std::size_t i = 0; i < t.summary.nodes.size(); ++i) {
    const NodeSummary& s = t.summary.nodes[i];
    const std::int64_t total = std::accumulate(s.spent.begin(), s.spent.end(), std::int64_t{0});
    if (s.e_init - s.e_final != total) ++rep.conservation_violations;
    if (s.spent[static_cast<std::size_t>(EnergyUse::Tx)] != c_tx * static_cast<std::int64_t>(sent[i])) {
      ++rep.tx_violations;
    }
  }
  return rep;
}

struct RunSummary {
  double lifetime = 0.0;
  std::size_t recovery_attempts = 0;
  std::size_t recovery_failures = 0;
  double recovery_failure_rate = 0.0;
  double coverage_rate = 0.0;
  std::array<std::uint64_t, kMsgKinds> messages{};
  std::uint64_t wakeups_total = 0;
  double wakeups_per_sleeping_node = 0.0;
  std::vector<Segment> converged_segments;
  std::size_t moves_max_segment = 0;
  bool convergence_ok = true;
  double message_bound = 0.0;
  std::uint64_t probe_reply_observed = 0;
  bool bound_ok = true;
  SigmaReport sigma;
  AuditReport audits;
  EnergyReport energy;

  bool verifiers_ok() const noexcept {
    return convergence_ok && bound_ok && sigma.ok() && audits.ok() && energy.ok();
  }
};

inline RunSummary summarize(const Trace& t) {
  RunSummary s;
  s.lifetime = lifetime(t);
  const RecoveryCounts rc = recovery_counts(t);
  s.recovery_attempts = rc.attempts;
  s.recovery_failures = rc.failures;
  s.recovery_failure_rate = rc.rate();
  s.coverage_rate = t.summary.t_end > 0.0 ? coverage_rate(t) : 0.0;
  s.messages = message_counts(t);
  const WakeupCounts w = wakeup_counts(t);
  s.wakeups_total = w.total;
  s.wakeups_per_sleeping_node = w.per_sleeping_node();
  s.converged_segments = verify_convergence(t);
  for (const Segment& seg : s.converged_segments) {
    s.moves_max_segment = std::max(s.moves_max_segment, seg.moves);
    s.convergence_ok = s.convergence_ok && seg.ok;
  }
  const BoundInputs bi = bound_inputs(t);
  s.message_bound = message_bound(t.header.n, t.header.m, bi.lifetimes, bi.min_sleeps).bound;
  s.probe_reply_observed = s.messages[static_cast<std::size_t>(MsgKind::ProbeRequest)] +
                           s.messages[static_cast<std::size_t>(MsgKind::ProbeReply)];
  s.bound_ok = static_cast<double>(s.probe_reply_observed) <= s.message_bound;
  s.sigma = check_sigma(t);
  s.audits = check_node_audits(t);
  s.energy = check_energy(t);
  return s;
}

}  // namespace wsnr
