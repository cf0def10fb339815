#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "wsnr/config.hpp"
#include "wsnr/protocol.hpp"
#include "wsnr/recovery.hpp"
#include "wsnr/rng.hpp"
#include "wsnr/topology.hpp"
#include "wsnr/trace.hpp"

namespace wsnr {

enum class EventKind : std::uint8_t { WakeUp, ReplyWindowClose, SenseCycle, InjectFailure };

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::WakeUp;
  NodeId node = 0;
  std::uint64_t epoch = 0;  // stale when the node's epoch has moved on
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const noexcept {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

/// Single-threaded discrete-event run of the sleep/probe/work protocol.
///
/// A wake-up puts a node in Probing and sends a probe request to each
/// co-zone communication neighbour. Replies are collected for
/// `reply_window`; at window close every alive peer has answered with its
/// state, unanswered peers whose failure has not yet been handled appear
/// as Failed, and exactly one of r1/r2 fires. Working nodes run a sense
/// cycle every `sense_period`: r3 arbitration against co-zone Working
/// peers, a fresh data word replicated to every holder, then a Bernoulli
/// failure draw. All randomness comes from one generator consumed in
/// event order.
class Simulation {
 public:
  Simulation(SimConfig config, const Topology& topo)
      : cfg_{std::move(config)}, topo_{topo}, rng_{Rng::stream(cfg_.seed, 1)} {
    validate(cfg_);
    if (topo_.size() != cfg_.n_sensors) throw ConfigError("topology size differs from n_sensors");
    const std::size_t n = topo_.size();
    nodes_.resize(n);
    holders_.resize(n);
    peers_.resize(n);
    stores_.assign(n, ReplicaStore(cfg_.recovery_mode));
    epoch_.assign(n, 0);
    handled_.assign(n, false);
    replicated_.assign(n, false);
    active_since_.assign(n, 0.0);
    spent_.assign(n, {});
    e_init_ = to_micro(cfg_.energy.e_init);
    alive_ = n;

    for (NodeId i = 0; i < n; ++i) {
      holders_[i] = place_replicas(topo_, i).holders;
      const ZoneId z = topo_.zone_of(i);
      for (NodeId j : topo_.nbrs(i)) {
        if (topo_.zone_of(j) == z) peers_[i].push_back(j);
      }
      SensorNode& s = nodes_[i];
      s.id = i;
      s.state = NodeState::Sleeping;
      s.lambda = cfg_.lambda_base;
      s.d_init = holders_[i].size();
      s.d_alive = s.d_init;
      s.energy = e_init_;
    }

    trace_.header.config = cfg_;
    trace_.header.n = n;
    trace_.header.k = topo_.zone_count();
    trace_.header.m = topo_.edge_count();
    trace_.header.zone_of.assign(topo_.zone_assignment().begin(), topo_.zone_assignment().end());
    trace_.header.holders = holders_;
  }

  Trace run() && {
    bootstrap();
    while (!queue_.empty() && alive_ > 0) {
      Event ev = queue_.top();
      if (ev.time > cfg_.t_max) break;
      queue_.pop();
      now_ = ev.time;
      if (nodes_[ev.node].state == NodeState::Failed) continue;
      if (ev.kind != EventKind::InjectFailure && ev.epoch != epoch_[ev.node]) continue;
      switch (ev.kind) {
        case EventKind::WakeUp: on_wake(ev.node); break;
        case EventKind::ReplyWindowClose: on_window_close(ev.node); break;
        case EventKind::SenseCycle: on_sense(ev.node); break;
        case EventKind::InjectFailure: fail(ev.node, FailureCause::Lifetime); break;
      }
    }
    const double t_end = alive_ == 0 ? now_ : cfg_.t_max;
    now_ = t_end;
    for (SensorNode& s : nodes_) {
      if (s.state == NodeState::Working) settle_active(s.id);
    }
    trace_.summary.t_end = t_end;
    trace_.summary.nodes.reserve(nodes_.size());
    for (const SensorNode& s : nodes_) {
      trace_.summary.nodes.push_back({e_init_, s.energy, spent_[s.id], s.state});
    }
    return std::move(trace_);
  }

 private:
  void bootstrap() {
    // Data originates from sensing; nothing is replicated until a node works.
    for (SensorNode& s : nodes_) s.own_data = DataWord{rng_.bits()};
    std::vector<bool> boot(nodes_.size(), false);
    for (NodeId id : cfg_.bootstrap_working) boot[id] = true;
    for (SensorNode& s : nodes_) {
      if (s.state == NodeState::Failed) continue;
      if (boot[s.id]) {
        set_state(s.id, NodeState::Working);
        schedule(cfg_.sense_period, EventKind::SenseCycle, s.id);
      } else {
        schedule_first_wake(s.id);
      }
    }
    if (cfg_.node_lifetime) {
      for (SensorNode& s : nodes_) {
        if (s.state != NodeState::Failed) {
          queue_.push({*cfg_.node_lifetime, seq_++, EventKind::InjectFailure, s.id, epoch_[s.id]});
        }
      }
    }
  }

  bool alive(NodeId i) const { return nodes_[i].state != NodeState::Failed; }

  void push(Record r) {
    r.time = now_;
    trace_.records.push_back(r);
  }

  void schedule(double delay, EventKind kind, NodeId node) {
    queue_.push({now_ + delay, seq_++, kind, node, epoch_[node]});
  }

  void set_state(NodeId i, NodeState to) {
    SensorNode& s = nodes_[i];
    if (s.state == to) return;
    Record r;
    r.kind = RecordKind::State;
    r.node = i;
    r.from = s.state;
    r.to = to;
    if (s.state == NodeState::Working) settle_active(i);
    if (to == NodeState::Working) active_since_[i] = now_;
    s.state = to;
    ++epoch_[i];
    push(r);
  }

  void schedule_wake(NodeId i) {
    SensorNode& s = nodes_[i];
    const double rate = cfg_.wake_multiplier * s.lambda;
    const double dur = cfg_.fixed_sleep ? *cfg_.fixed_sleep
                                        : sample_sleep_duration(rate, rng_.uniform_open_closed());
    Record r;
    r.kind = RecordKind::Sleep;
    r.node = i;
    r.value = dur;
    push(r);
    schedule(dur, EventKind::WakeUp, i);
  }

  void schedule_first_wake(NodeId i) {
    const double dur = cfg_.fixed_sleep ? *cfg_.fixed_sleep
                                        : cfg_.bootstrap_window * rng_.uniform_open_closed();
    Record r;
    r.kind = RecordKind::Sleep;
    r.node = i;
    r.value = dur;
    push(r);
    schedule(dur, EventKind::WakeUp, i);
  }

  // Returns false when the debit exhausted the node.
  bool debit(NodeId i, std::int64_t amount, EnergyUse use) {
    if (amount == 0) return alive(i);
    SensorNode& s = nodes_[i];
    s.energy -= amount;
    spent_[i][static_cast<std::size_t>(use)] += amount;
    if (s.energy <= 0 && s.state != NodeState::Failed) {
      fail(i, FailureCause::Energy);
      return false;
    }
    return alive(i);
  }

  // Returns the amount debited.
  std::int64_t settle_active(NodeId i) {
    const std::int64_t amount = to_micro(cfg_.energy.c_active * (now_ - active_since_[i]));
    active_since_[i] = now_;
    nodes_[i].energy -= amount;
    spent_[i][static_cast<std::size_t>(EnergyUse::Active)] += amount;
    return amount;
  }

  void send(NodeId src, MsgKind kind, std::uint32_t count) {
    if (count == 0) return;
    Record r;
    r.kind = RecordKind::Msg;
    r.node = src;
    r.msg = kind;
    r.count = count;
    push(r);
  }

  // Point-to-point message; counted in `sent` when the sender was alive.
  // Returns whether dst received it (messages to failed nodes drop).
  bool transmit(NodeId src, NodeId dst, std::uint32_t& sent) {
    if (!alive(src)) return false;
    ++sent;
    debit(src, to_micro(cfg_.energy.c_tx), EnergyUse::Tx);
    if (!alive(dst)) return false;
    debit(dst, to_micro(cfg_.energy.c_rx), EnergyUse::Rx);
    return true;
  }

  void fail(NodeId i, FailureCause cause) {
    if (!alive(i)) return;
    set_state(i, NodeState::Failed);
    --alive_;
    Record r;
    r.kind = RecordKind::Failure;
    r.node = i;
    r.cause = cause;
    push(r);
  }

  void on_wake(NodeId i) {
    set_state(i, NodeState::Probing);
    Record w;
    w.kind = RecordKind::Wake;
    w.node = i;
    push(w);
    if (!debit(i, to_micro(cfg_.energy.c_wake), EnergyUse::Wake)) return;
    std::uint32_t sent = 0;
    for (NodeId j : peers_[i]) transmit(i, j, sent);
    send(i, MsgKind::ProbeRequest, sent);
    if (!alive(i)) return;
    schedule(cfg_.reply_window, EventKind::ReplyWindowClose, i);
  }

  std::size_t alive_holders(NodeId i) const {
    return static_cast<std::size_t>(
        std::count_if(holders_[i].begin(), holders_[i].end(), [&](NodeId h) { return alive(h); }));
  }

  void on_window_close(NodeId i) {
    if (nodes_[i].state != NodeState::Probing) return;
    view_.clear();
    for (NodeId j : peers_[i]) {
      if (alive(j)) {
        view_.push_back({j, nodes_[j].state});
      } else if (!handled_[j]) {
        view_.push_back({j, NodeState::Failed});
      }
    }
    for (NodeId j : peers_[i]) {
      if (alive(j)) {
        std::uint32_t sent = 0;
        transmit(j, i, sent);
        send(j, MsgKind::ProbeReply, sent);
      }
    }
    if (!alive(i)) return;

    SensorNode& s = nodes_[i];
    s.d_alive = alive_holders(i);
    const RuleAction a = step(s, view_, cfg_.lambda_max());
    fire(i, a);
  }

  void fire(NodeId i, const RuleAction& a) {
    if (a.rule_fired == Rule::None) return;
    SensorNode& s = nodes_[i];
    Record r;
    r.kind = RecordKind::Rule;
    r.node = i;
    r.rule = a.rule_fired;
    if (a.new_lambda) {
      r.lambda_update = true;
      r.value = *a.new_lambda;
      s.lambda = *a.new_lambda;
    }
    if (a.recovery_request) {
      r.ok = true;
      r.other = *a.recovery_request;
    }
    push(r);
    set_state(i, a.next_state);
    if (a.next_state == NodeState::Sleeping) {
      schedule_wake(i);
      return;
    }
    if (a.recovery_request) recover(i, *a.recovery_request);
    if (alive(i) && s.state == NodeState::Working) schedule(cfg_.sense_period, EventKind::SenseCycle, i);
  }

  void on_sense(NodeId i) {
    const std::int64_t drained = settle_active(i);
    SensorNode& s = nodes_[i];
    if (drained > 0 && s.energy <= 0) {
      fail(i, FailureCause::Energy);
      return;
    }
    view_.clear();
    for (NodeId j : peers_[i]) {
      if (alive(j)) view_.push_back({j, nodes_[j].state});
    }
    const RuleAction a = step(s, view_, cfg_.lambda_max());
    if (a.rule_fired != Rule::None) {
      fire(i, a);
      return;
    }
    if (!debit(i, to_micro(cfg_.energy.c_sense), EnergyUse::Sense)) return;
    const DataWord next{rng_.bits()};
    const DataWord old = s.own_data;
    s.own_data = next;
    replicate(i, old, next);
    if (!alive(i)) return;
    if (rng_.bernoulli(cfg_.p_fail)) {
      fail(i, FailureCause::Random);
      return;
    }
    schedule(cfg_.sense_period, EventKind::SenseCycle, i);
  }

  void replicate(NodeId i, std::optional<DataWord> old, DataWord next) {
    replicated_[i] = true;
    std::uint32_t sent = 0;
    for (NodeId h : holders_[i]) {
      if (!transmit(i, h, sent)) continue;
      ReplicaStore& st = stores_[h];
      const bool known = st.contains(i);
      st.absorb(i, known ? old : std::nullopt, next);
    }
    send(i, MsgKind::Replica, sent);
  }

  // Asks holder z for every other contributor's current word; the
  // messages are charged whether or not all of them answer.
  std::vector<std::pair<NodeId, DataWord>> gather_fresh(NodeId z, NodeId except) {
    std::vector<std::pair<NodeId, DataWord>> words;
    std::uint32_t asked = 0;
    const std::vector<NodeId> contributors = stores_[z].contributors();
    for (NodeId c : contributors) {
      if (c == except) continue;
      if (!alive(z)) break;
      if (!transmit(z, c, asked)) continue;
      const DataWord w = nodes_[c].own_data;
      std::uint32_t answered = 0;
      if (transmit(c, z, answered)) words.emplace_back(c, w);
      send(c, MsgKind::FreshDataReply, answered);
    }
    send(z, MsgKind::FreshDataRequest, asked);
    return words;
  }

  void recover(NodeId r, NodeId failed) {
    handled_[failed] = true;
    // A node that never sensed left no data behind.
    if (!replicated_[failed]) return;
    std::vector<NodeId> live;
    for (NodeId h : holders_[failed]) {
      if (alive(h) && stores_[h].contains(failed)) live.push_back(h);
    }
    // Holders are asked in random order until one yields the word.
    std::vector<NodeId> order = live;
    rng_.shuffle(std::span<NodeId>(order));
    std::optional<DataWord> word;
    for (NodeId z : order) {
      if (!alive(r)) break;
      if (!alive(z)) continue;
      std::uint32_t req = 0;
      transmit(r, z, req);
      send(r, MsgKind::FreshDataRequest, req);
      if (cfg_.recovery_mode == RecoveryMode::MultiRegister) {
        word = recover_multi(stores_[z], failed);
      } else if (stores_[z].contains(failed)) {
        const auto words = gather_fresh(z, failed);
        word = recover_xor(stores_[z], failed, [&](NodeId c) -> std::optional<DataWord> {
          auto it = std::find_if(words.begin(), words.end(), [c](const auto& p) { return p.first == c; });
          if (it == words.end()) return std::nullopt;
          return it->second;
        });
      }
      if (alive(z)) {
        std::uint32_t rep = 0;
        transmit(z, r, rep);
        send(z, MsgKind::FreshDataReply, rep);
      }
      if (word) break;
    }

    Record rec;
    rec.kind = RecordKind::Recovery;
    rec.node = r;
    rec.other = failed;
    rec.ok = word.has_value();
    rec.holders_total = static_cast<std::uint32_t>(holders_[failed].size());
    rec.holders_alive = static_cast<std::uint32_t>(live.size());
    push(rec);

    if (cfg_.recovery_mode == RecoveryMode::XorParity) {
      // Holders drop the failed contributor: by cancelling its word when
      // known, otherwise by refolding their register from alive ones.
      std::uint32_t notices = 0;
      for (NodeId h : live) {
        if (!transmit(r, h, notices) || !stores_[h].contains(failed)) continue;
        if (word) {
          stores_[h].eliminate(failed, *word);
        } else {
          stores_[h].rebuild(gather_fresh(h, failed));
        }
      }
      send(r, MsgKind::Replica, notices);
    }

    if (word && alive(r)) {
      SensorNode& s = nodes_[r];
      const DataWord old = s.own_data;
      s.own_data = *word;
      replicate(r, old, *word);
    }
  }

  SimConfig cfg_;
  const Topology& topo_;
  Rng rng_;
  std::vector<SensorNode> nodes_;
  std::vector<std::vector<NodeId>> holders_;
  std::vector<std::vector<NodeId>> peers_;
  std::vector<ReplicaStore> stores_;
  std::vector<std::uint64_t> epoch_;
  std::vector<bool> handled_;
  std::vector<bool> replicated_;
  std::vector<double> active_since_;
  std::vector<std::array<std::int64_t, kEnergyUses>> spent_;
  std::vector<ViewEntry> view_;
  std::int64_t e_init_ = 0;
  std::size_t alive_ = 0;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventLater> queue_;
  Trace trace_;
};

inline Trace run(const SimConfig& config, const Topology& topo) {
  return Simulation(config, topo).run();
}

inline Trace run(const SimConfig& config) {
  validate(config);
  const Topology topo = build_grid(config.grid());
  return run(config, topo);
}

}  // namespace wsnr
