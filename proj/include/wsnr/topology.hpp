#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsnr/rng.hpp"

namespace wsnr {

using NodeId = std::uint32_t;
using ZoneId = std::uint32_t;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Target {
  ZoneId id = 0;
  Point pos;

  friend bool operator==(const Target&, const Target&) = default;
};

struct Sensor {
  NodeId id = 0;
  Point pos;

  friend bool operator==(const Sensor&, const Sensor&) = default;
};

struct GridSpec {
  std::uint32_t rows = 10;
  std::uint32_t cols = 10;
  std::uint32_t n_sensors = 200;
  double r_sense = std::sqrt(0.5);  // half the cell diagonal
  double r_comm = 1.5;
  std::uint64_t seed = 0;
};

/// Monitored area of rows x cols unit cells, one target at each cell
/// centre. Coverage sets (gamma) hold the sensors within sensing range of
/// each target; the zone of a sensor is the cell containing it, and
/// co-zone sensors are the Γ_u(i) used by the protocol predicates.
/// Immutable once built.
class Topology {
 public:
  Topology(std::uint32_t rows, std::uint32_t cols, double r_sense, double r_comm,
           std::vector<Point> positions)
      : rows_{rows}, cols_{cols}, r_sense_{r_sense}, r_comm_{r_comm} {
    if (rows == 0 || cols == 0) throw ConfigError("grid must have at least one cell");
    if (positions.empty()) throw ConfigError("topology needs at least one sensor");
    if (!(r_sense > 0.0) || !(r_comm > 0.0)) throw ConfigError("radii must be positive");

    targets_.reserve(std::size_t{rows} * cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        targets_.push_back({static_cast<ZoneId>(targets_.size()), {c + 0.5, r + 0.5}});
      }
    }
    sensors_.reserve(positions.size());
    for (const Point& p : positions) {
      if (p.x < 0.0 || p.y < 0.0 || p.x > cols || p.y > rows) {
        throw ConfigError("sensor outside the monitored area");
      }
      sensors_.push_back({static_cast<NodeId>(sensors_.size()), p});
    }
    derive();
  }

  std::uint32_t rows() const noexcept { return rows_; }
  std::uint32_t cols() const noexcept { return cols_; }
  double r_sense() const noexcept { return r_sense_; }
  double r_comm() const noexcept { return r_comm_; }
  std::size_t size() const noexcept { return sensors_.size(); }
  std::size_t zone_count() const noexcept { return targets_.size(); }

  std::span<const Target> targets() const noexcept { return targets_; }
  std::span<const Sensor> sensors() const noexcept { return sensors_; }

  // Sensors within r_sense of target u, ascending.
  std::span<const NodeId> gamma(ZoneId u) const { return gamma_.at(u); }
  // Communication neighbours of i, ascending, never containing i.
  std::span<const NodeId> nbrs(NodeId i) const { return nbrs_.at(i); }
  ZoneId zone_of(NodeId i) const { return zone_of_.at(i); }
  std::span<const ZoneId> zone_assignment() const noexcept { return zone_of_; }
  std::span<const NodeId> zone_members(ZoneId u) const { return members_.at(u); }

  // Undirected communication edge count m.
  std::size_t edge_count() const noexcept {
    std::size_t twice = 0;
    for (const auto& n : nbrs_) twice += n.size();
    return twice / 2;
  }

  // N_i without co-zone sensors: the replica holders of i.
  std::vector<NodeId> eligible_neighbors(NodeId i) const {
    std::vector<NodeId> out;
    const ZoneId z = zone_of(i);
    for (NodeId j : nbrs(i)) {
      if (zone_of_[j] != z) out.push_back(j);
    }
    return out;
  }

  ZoneId zone_at(Point p) const {
    const auto col = std::min<std::uint32_t>(cols_ - 1, static_cast<std::uint32_t>(std::max(0.0, p.x)));
    const auto row = std::min<std::uint32_t>(rows_ - 1, static_cast<std::uint32_t>(std::max(0.0, p.y)));
    return row * cols_ + col;
  }

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.r_sense_ == b.r_sense_ &&
           a.r_comm_ == b.r_comm_ && a.sensors_ == b.sensors_;
  }

 private:
  void derive() {
    const std::size_t n = sensors_.size();
    zone_of_.resize(n);
    members_.assign(targets_.size(), {});
    gamma_.assign(targets_.size(), {});
    nbrs_.assign(n, {});
    for (const Sensor& s : sensors_) {
      zone_of_[s.id] = zone_at(s.pos);
      members_[zone_of_[s.id]].push_back(s.id);
    }
    for (const Target& t : targets_) {
      for (const Sensor& s : sensors_) {
        if (distance(t.pos, s.pos) <= r_sense_) gamma_[t.id].push_back(s.id);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (distance(sensors_[i].pos, sensors_[j].pos) <= r_comm_) {
          nbrs_[i].push_back(static_cast<NodeId>(j));
          nbrs_[j].push_back(static_cast<NodeId>(i));
        }
      }
    }
    for (auto& v : nbrs_) std::sort(v.begin(), v.end());
  }

  std::uint32_t rows_;
  std::uint32_t cols_;
  double r_sense_;
  double r_comm_;
  std::vector<Target> targets_;
  std::vector<Sensor> sensors_;
  std::vector<std::vector<NodeId>> gamma_;
  std::vector<std::vector<NodeId>> nbrs_;
  std::vector<ZoneId> zone_of_;
  std::vector<std::vector<NodeId>> members_;
};

/// One target per cell centre and n_sensors placed uniformly at random,
/// deterministic in the seed.
inline Topology build_grid(const GridSpec& spec) {
  if (spec.rows == 0 || spec.cols == 0) throw ConfigError("zero-area grid");
  if (spec.n_sensors == 0) throw ConfigError("n_sensors must be >= 1");
  Rng rng = Rng::stream(spec.seed, 0);
  std::vector<Point> pos(spec.n_sensors);
  for (Point& p : pos) {
    p.x = rng.uniform() * spec.cols;
    p.y = rng.uniform() * spec.rows;
  }
  return Topology(spec.rows, spec.cols, spec.r_sense, spec.r_comm, std::move(pos));
}

// d_i = |N_i \ Γ_u(i) \ {i}| for every sensor, given its zone assignment.
inline std::vector<std::size_t> degrees(const Topology& topo, std::span<const ZoneId> zone_of) {
  std::vector<std::size_t> d(topo.size(), 0);
  for (NodeId i = 0; i < topo.size(); ++i) {
    for (NodeId j : topo.nbrs(i)) {
      if (j != i && zone_of[j] != zone_of[i]) ++d[i];
    }
  }
  return d;
}

inline nlohmann::ordered_json to_json(const Topology& topo) {
  nlohmann::ordered_json j;
  j["rows"] = topo.rows();
  j["cols"] = topo.cols();
  j["r_sense"] = topo.r_sense();
  j["r_comm"] = topo.r_comm();
  auto& sensors = j["sensors"] = nlohmann::ordered_json::array();
  for (const Sensor& s : topo.sensors()) {
    sensors.push_back({{"id", s.id}, {"x", s.pos.x}, {"y", s.pos.y}});
  }
  auto& targets = j["targets"] = nlohmann::ordered_json::array();
  for (const Target& t : topo.targets()) {
    targets.push_back({{"id", t.id}, {"x", t.pos.x}, {"y", t.pos.y}});
  }
  return j;
}

// Targets are implied by the grid; coverage and neighbour sets are
// recomputed from positions.
inline Topology topology_from_json(const nlohmann::json& j) {
  try {
    std::vector<nlohmann::json> sensors = j.at("sensors");
    std::sort(sensors.begin(), sensors.end(),
              [](const auto& a, const auto& b) { return a.at("id").template get<NodeId>() < b.at("id").template get<NodeId>(); });
    std::vector<Point> pos;
    pos.reserve(sensors.size());
    for (std::size_t k = 0; k < sensors.size(); ++k) {
      if (sensors[k].at("id").get<NodeId>() != k) throw ConfigError("sensor ids must be dense and unique");
      pos.push_back({sensors[k].at("x").get<double>(), sensors[k].at("y").get<double>()});
    }
    return Topology(j.at("rows").get<std::uint32_t>(), j.at("cols").get<std::uint32_t>(),
                    j.at("r_sense").get<double>(), j.at("r_comm").get<double>(), std::move(pos));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed topology: ") + e.what());
  }
}

}  // namespace wsnr
