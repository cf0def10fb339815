#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>

#include "wsnr/recovery.hpp"
#include "wsnr/topology.hpp"

namespace wsnr {

enum class NodeState : std::uint8_t { Sleeping, Probing, Working, Failed };

enum class Rule : std::uint8_t { None, R1, R2, R3 };

inline constexpr std::string_view to_string(NodeState s) {
  switch (s) {
    case NodeState::Sleeping: return "Sleeping";
    case NodeState::Probing: return "Probing";
    case NodeState::Working: return "Working";
    case NodeState::Failed: return "Failed";
  }
  return "?";
}

inline constexpr std::string_view to_string(Rule r) {
  switch (r) {
    case Rule::None: return "none";
    case Rule::R1: return "r1";
    case Rule::R2: return "r2";
    case Rule::R3: return "r3";
  }
  return "?";
}

struct SensorNode {
  NodeId id = 0;
  NodeState state = NodeState::Sleeping;
  double lambda = 1.0;
  std::size_t d_init = 0;
  std::size_t d_alive = 0;
  DataWord own_data;
  std::int64_t energy = 0;  // micro-units
};

// One co-zone neighbour as reported in a probe window.
struct ViewEntry {
  NodeId id = 0;
  NodeState state = NodeState::Sleeping;
};

// Snapshot of co-zone neighbours; never contains the evaluating node.
using LocalView = std::span<const ViewEntry>;

struct Predicates {
  bool working = false;         // W
  bool working_lower = false;   // W*
  bool failed = false;          // F
  bool probing_lower = false;   // P*

  friend bool operator==(const Predicates&, const Predicates&) = default;
};

struct RuleAction {
  Rule rule_fired = Rule::None;
  NodeState next_state = NodeState::Sleeping;
  std::optional<double> new_lambda;
  std::optional<NodeId> recovery_request;

  friend bool operator==(const RuleAction&, const RuleAction&) = default;
};

inline Predicates predicates(LocalView view, NodeId self) {
  Predicates p;
  for (const ViewEntry& e : view) {
    switch (e.state) {
      case NodeState::Working:
        p.working = true;
        if (self > e.id) p.working_lower = true;
        break;
      case NodeState::Probing:
        if (self > e.id) p.probing_lower = true;
        break;
      case NodeState::Failed:
        p.failed = true;
        break;
      case NodeState::Sleeping:
        break;
    }
  }
  return p;
}

// λ·d_i/d*_i, capped at lambda_max; unchanged when no neighbour is alive.
inline double updated_lambda(double lambda, std::size_t d_init, std::size_t d_alive,
                             double lambda_max) {
  if (d_alive == 0 || d_init == 0) return lambda;
  return std::min(lambda * static_cast<double>(d_init) / static_cast<double>(d_alive), lambda_max);
}

inline RuleAction no_move(const SensorNode& node) { return {Rule::None, node.state, {}, {}}; }

inline bool r1_enabled(const SensorNode& node, const Predicates& p) {
  return node.state == NodeState::Probing && (p.probing_lower || p.working);
}

inline bool r2_enabled(const SensorNode& node, const Predicates& p) {
  return node.state == NodeState::Probing && ((!p.working && !p.probing_lower) || p.failed);
}

inline bool r3_enabled(const SensorNode& node, const Predicates& p) {
  return node.state == NodeState::Working && p.working_lower;
}

inline RuleAction rule_r1(const SensorNode& node, LocalView view,
                          double lambda_max = std::numeric_limits<double>::infinity()) {
  const Predicates p = predicates(view, node.id);
  if (!r1_enabled(node, p)) return no_move(node);
  RuleAction a{Rule::R1, NodeState::Sleeping, {}, {}};
  if (p.probing_lower && node.d_alive > 0) {
    a.new_lambda = updated_lambda(node.lambda, node.d_init, node.d_alive, lambda_max);
  }
  return a;
}

inline RuleAction rule_r2(const SensorNode& node, LocalView view) {
  const Predicates p = predicates(view, node.id);
  if (!r2_enabled(node, p)) return no_move(node);
  RuleAction a{Rule::R2, NodeState::Working, {}, {}};
  if (p.failed) {
    NodeId lowest = std::numeric_limits<NodeId>::max();
    for (const ViewEntry& e : view) {
      if (e.state == NodeState::Failed) lowest = std::min(lowest, e.id);
    }
    a.recovery_request = lowest;
  }
  return a;
}

inline RuleAction rule_r3(const SensorNode& node, LocalView view) {
  const Predicates p = predicates(view, node.id);
  if (!r3_enabled(node, p)) return no_move(node);
  return {Rule::R3, NodeState::Sleeping, {}, {}};
}

/// Dispatches to the single enabled rule. r1 and r2 overlap only when F
/// holds together with W or P*; r2 takes precedence so that a detected
/// failure is always recovered.
inline RuleAction step(const SensorNode& node, LocalView view,
                       double lambda_max = std::numeric_limits<double>::infinity()) {
  switch (node.state) {
    case NodeState::Probing: {
      RuleAction a = rule_r2(node, view);
      return a.rule_fired != Rule::None ? a : rule_r1(node, view, lambda_max);
    }
    case NodeState::Working:
      return rule_r3(node, view);
    case NodeState::Sleeping:
    case NodeState::Failed:
      break;
  }
  return no_move(node);
}

// Inverse-transform draw from f(t) = λ e^{-λt}.
inline double sample_sleep_duration(double lambda, double u) {
  if (!(lambda > 0.0)) throw std::invalid_argument("probing rate must be positive");
  if (!(u > 0.0) || u > 1.0) throw std::invalid_argument("uniform draw must lie in (0, 1]");
  return -std::log(u) / lambda;
}

}  // namespace wsnr
