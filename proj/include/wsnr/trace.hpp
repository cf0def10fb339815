#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wsnr/config.hpp"
#include "wsnr/protocol.hpp"

namespace wsnr {

enum class MsgKind : std::uint8_t { ProbeRequest, ProbeReply, Replica, FreshDataRequest, FreshDataReply };
inline constexpr std::size_t kMsgKinds = 5;

enum class FailureCause : std::uint8_t { Random, Energy, Lifetime };

enum class EnergyUse : std::uint8_t { Tx, Rx, Wake, Sense, Active };
inline constexpr std::size_t kEnergyUses = 5;

enum class RecordKind : std::uint8_t { Wake, Sleep, Rule, State, Msg, Recovery, Failure };

inline constexpr std::string_view to_string(MsgKind k) {
  constexpr std::array<std::string_view, kMsgKinds> names{
      "probe_request", "probe_reply", "replica", "fresh_request", "fresh_reply"};
  return names[static_cast<std::size_t>(k)];
}

inline constexpr std::string_view to_string(FailureCause c) {
  constexpr std::array<std::string_view, 3> names{"random", "energy", "lifetime"};
  return names[static_cast<std::size_t>(c)];
}

inline constexpr std::string_view to_string(RecordKind k) {
  constexpr std::array<std::string_view, 7> names{"wake", "sleep", "rule", "state",
                                                  "msg", "recovery", "failure"};
  return names[static_cast<std::size_t>(k)];
}

/// One trace entry. Which payload fields are meaningful depends on kind:
///   Wake      node starts a probe window
///   Sleep     node sleeps for `value` time units
///   Rule      rule fired by node; lambda_update with new rate in `value`;
///             for r2 with a failed neighbour, ok and the target in `other`
///   State     from -> to
///   Msg       node sent `count` messages of `msg`
///   Recovery  node tried to recover `other`; ok, holders_total/alive
///   Failure   node failed for `cause`
struct Record {
  double time = 0.0;
  RecordKind kind = RecordKind::Wake;
  NodeId node = 0;
  NodeId other = 0;
  NodeState from = NodeState::Sleeping;
  NodeState to = NodeState::Sleeping;
  Rule rule = Rule::None;
  MsgKind msg = MsgKind::ProbeRequest;
  FailureCause cause = FailureCause::Random;
  bool lambda_update = false;
  bool ok = false;
  std::uint32_t count = 0;
  std::uint32_t holders_total = 0;
  std::uint32_t holders_alive = 0;
  double value = 0.0;

  friend bool operator==(const Record&, const Record&) = default;
};

struct TraceHeader {
  SimConfig config;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t m = 0;
  std::vector<ZoneId> zone_of;
  std::vector<std::vector<NodeId>> holders;

  friend bool operator==(const TraceHeader& a, const TraceHeader& b) {
    return a.n == b.n && a.k == b.k && a.m == b.m && a.zone_of == b.zone_of &&
           a.holders == b.holders && to_json(a.config) == to_json(b.config);
  }
};

struct NodeSummary {
  std::int64_t e_init = 0;
  std::int64_t e_final = 0;
  std::array<std::int64_t, kEnergyUses> spent{};
  NodeState final_state = NodeState::Sleeping;

  friend bool operator==(const NodeSummary&, const NodeSummary&) = default;
};

struct TraceSummary {
  double t_end = 0.0;
  std::vector<NodeSummary> nodes;

  friend bool operator==(const TraceSummary&, const TraceSummary&) = default;
};

struct Trace {
  TraceHeader header;
  std::vector<Record> records;
  TraceSummary summary;

  friend bool operator==(const Trace&, const Trace&) = default;
};

// FNV-1a over every field of the trace; equal digests for replayed runs.
inline std::uint64_t trace_digest(const Trace& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  auto mixd = [&](double d) { mix(std::bit_cast<std::uint64_t>(d)); };
  mix(t.header.n);
  mix(t.header.k);
  mix(t.header.m);
  for (ZoneId z : t.header.zone_of) mix(z);
  for (const auto& hs : t.header.holders) {
    mix(hs.size());
    for (NodeId id : hs) mix(id);
  }
  for (char c : to_json(t.header.config).dump()) mix(static_cast<unsigned char>(c));
  for (const Record& r : t.records) {
    mixd(r.time);
    mix(static_cast<std::uint64_t>(r.kind) | (std::uint64_t{r.node} << 8) | (std::uint64_t{r.other} << 40));
    mix(static_cast<std::uint64_t>(r.from) | (static_cast<std::uint64_t>(r.to) << 8) |
        (static_cast<std::uint64_t>(r.rule) << 16) | (static_cast<std::uint64_t>(r.msg) << 24) |
        (static_cast<std::uint64_t>(r.cause) << 32) | (std::uint64_t{r.lambda_update} << 40) |
        (std::uint64_t{r.ok} << 48));
    mix(r.count | (std::uint64_t{r.holders_total} << 32));
    mix(r.holders_alive);
    mixd(r.value);
  }
  mixd(t.summary.t_end);
  for (const NodeSummary& n : t.summary.nodes) {
    mix(static_cast<std::uint64_t>(n.e_init));
    mix(static_cast<std::uint64_t>(n.e_final));
    for (auto s : n.spent) mix(static_cast<std::uint64_t>(s));
    mix(static_cast<std::uint64_t>(n.final_state));
  }
  return h;
}

// ---------------------------------------------------------------------
// Line-delimited JSON: header, one object per record, summary.

namespace detail {

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view s, const std::array<Enum, N>& values) {
  for (Enum e : values) {
    if (to_string(e) == s) return e;
  }
  throw std::runtime_error("unknown enum value '" + std::string(s) + "'");
}

inline constexpr std::array<NodeState, 4> kStates{NodeState::Sleeping, NodeState::Probing,
                                                  NodeState::Working, NodeState::Failed};
inline constexpr std::array<Rule, 4> kRules{Rule::None, Rule::R1, Rule::R2, Rule::R3};
inline constexpr std::array<MsgKind, kMsgKinds> kMsgs{MsgKind::ProbeRequest, MsgKind::ProbeReply,
                                                      MsgKind::Replica, MsgKind::FreshDataRequest,
                                                      MsgKind::FreshDataReply};
inline constexpr std::array<FailureCause, 3> kCauses{FailureCause::Random, FailureCause::Energy,
                                                     FailureCause::Lifetime};
inline constexpr std::array<RecordKind, 7> kKinds{RecordKind::Wake, RecordKind::Sleep,
                                                  RecordKind::Rule, RecordKind::State,
                                                  RecordKind::Msg, RecordKind::Recovery,
                                                  RecordKind::Failure};
}  // namespace detail

inline nlohmann::ordered_json to_json(const Record& r) {
  nlohmann::ordered_json j;
  j["t"] = r.time;
  j["type"] = to_string(r.kind);
  j["node"] = r.node;
  switch (r.kind) {
    case RecordKind::Wake: break;
    case RecordKind::Sleep: j["duration"] = r.value; break;
    case RecordKind::Rule:
      j["rule"] = to_string(r.rule);
      if (r.lambda_update) j["lambda"] = r.value;
      if (r.ok) j["recovers"] = r.other;
      break;
    case RecordKind::State:
      j["from"] = to_string(r.from);
      j["to"] = to_string(r.to);
      break;
    case RecordKind::Msg:
      j["kind"] = to_string(r.msg);
      j["count"] = r.count;
      break;
    case RecordKind::Recovery:
      j["failed"] = r.other;
      j["ok"] = r.ok;
      j["holders"] = r.holders_total;
      j["holders_alive"] = r.holders_alive;
      break;
    case RecordKind::Failure: j["cause"] = to_string(r.cause); break;
  }
  return j;
}

inline Record record_from_json(const nlohmann::json& j) {
  using namespace detail;
  Record r;
  r.time = j.at("t").get<double>();
  r.kind = enum_from(j.at("type").get<std::string>(), kKinds);
  r.node = j.at("node").get<NodeId>();
  switch (r.kind) {
    case RecordKind::Wake: break;
    case RecordKind::Sleep: r.value = j.at("duration").get<double>(); break;
    case RecordKind::Rule:
      r.rule = enum_from(j.at("rule").get<std::string>(), kRules);
      if (j.contains("lambda")) {
        r.lambda_update = true;
        r.value = j.at("lambda").get<double>();
      }
      if (j.contains("recovers")) {
        r.ok = true;
        r.other = j.at("recovers").get<NodeId>();
      }
      break;
    case RecordKind::State:
      r.from = enum_from(j.at("from").get<std::string>(), kStates);
      r.to = enum_from(j.at("to").get<std::string>(), kStates);
      break;
    case RecordKind::Msg:
      r.msg = enum_from(j.at("kind").get<std::string>(), kMsgs);
      r.count = j.at("count").get<std::uint32_t>();
      break;
    case RecordKind::Recovery:
      r.other = j.at("failed").get<NodeId>();
      r.ok = j.at("ok").get<bool>();
      r.holders_total = j.at("holders").get<std::uint32_t>();
      r.holders_alive = j.at("holders_alive").get<std::uint32_t>();
      break;
    case RecordKind::Failure: r.cause = enum_from(j.at("cause").get<std::string>(), kCauses); break;
  }
  return r;
}

inline void write_jsonl(std::ostream& os, const Trace& t) {
  nlohmann::ordered_json h;
  h["type"] = "header";
  h["n"] = t.header.n;
  h["k"] = t.header.k;
  h["m"] = t.header.m;
  h["config"] = to_json(t.header.config);
  h["zone_of"] = t.header.zone_of;
  h["holders"] = t.header.holders;
  os << h.dump() << '\n';
  for (const Record& r : t.records) os << to_json(r).dump() << '\n';
  nlohmann::ordered_json s;
  s["type"] = "summary";
  s["t_end"] = t.summary.t_end;
  auto& nodes = s["nodes"] = nlohmann::ordered_json::array();
  for (const NodeSummary& n : t.summary.nodes) {
    nodes.push_back({{"e_init", n.e_init},
                     {"e_final", n.e_final},
                     {"spent", n.spent},
                     {"state", to_string(n.final_state)}});
  }
  os << s.dump() << '\n';
}

class TraceParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Trace read_jsonl(std::istream& is) {
  Trace t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  bool have_summary = false;
  try {
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (have_summary) throw TraceParseError("record after summary");
      const nlohmann::json j = nlohmann::json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (have_header) throw TraceParseError("duplicate header");
        have_header = true;
        t.header.n = j.at("n").get<std::size_t>();
        t.header.k = j.at("k").get<std::size_t>();
        t.header.m = j.at("m").get<std::size_t>();
        t.header.config = apply_json(SimConfig{}, j.at("config"));
        t.header.zone_of = j.at("zone_of").get<std::vector<ZoneId>>();
        t.header.holders = j.at("holders").get<std::vector<std::vector<NodeId>>>();
        if (t.header.zone_of.size() != t.header.n || t.header.holders.size() != t.header.n) {
          throw TraceParseError("header sizes disagree with n");
        }
      } else if (type == "summary") {
        have_summary = true;
        t.summary.t_end = j.at("t_end").get<double>();
        for (const auto& n : j.at("nodes")) {
          NodeSummary ns;
          ns.e_init = n.at("e_init").get<std::int64_t>();
          ns.e_final = n.at("e_final").get<std::int64_t>();
          ns.spent = n.at("spent").get<std::array<std::int64_t, kEnergyUses>>();
          ns.final_state = detail::enum_from(n.at("state").get<std::string>(), detail::kStates);
          t.summary.nodes.push_back(ns);
        }
      } else {
        if (!have_header) throw TraceParseError("record before header");
        Record r = record_from_json(j);
        if (r.node >= t.header.n) throw TraceParseError("node id out of range");
        t.records.push_back(r);
      }
    }
  } catch (const TraceParseError& e) {
    throw TraceParseError("line " + std::to_string(lineno) + ": " + e.what());
  } catch (const std::exception& e) {
    throw TraceParseError("line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!have_header) throw TraceParseError("missing header");
  if (!have_summary) throw TraceParseError("missing summary");
  return t;
}

}  // namespace wsnr
