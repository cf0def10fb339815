#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wsnr/topology.hpp"

namespace wsnr {

struct DataWord {
  std::uint64_t bits = 0;

  constexpr DataWord operator^(DataWord o) const noexcept { return {bits ^ o.bits}; }
  constexpr DataWord& operator^=(DataWord o) noexcept {
    bits ^= o.bits;
    return *this;
  }
  friend constexpr bool operator==(DataWord, DataWord) = default;
};

enum class RecoveryMode : std::uint8_t { MultiRegister, XorParity };

class ParityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Replicas a node holds for its neighbours. MultiRegister keeps one
/// register per contributor; XorParity folds every contributor into a
/// single register and tracks who is folded in.
class ReplicaStore {
 public:
  explicit ReplicaStore(RecoveryMode mode = RecoveryMode::MultiRegister) : mode_{mode} {}

  RecoveryMode mode() const noexcept { return mode_; }
  DataWord parity() const noexcept { return parity_; }
  const std::vector<NodeId>& contributors() const noexcept { return contributors_; }
  bool contains(NodeId id) const {
    return std::binary_search(contributors_.begin(), contributors_.end(), id);
  }

  std::optional<DataWord> reg(NodeId id) const {
    auto it = find(id);
    if (it == contributors_.end() || *it != id) return std::nullopt;
    return registers_[static_cast<std::size_t>(it - contributors_.begin())];
  }

  // In XorParity mode a contributor already folded in must supply its
  // previous word so it can be cancelled.
  void absorb(NodeId from, std::optional<DataWord> old, DataWord next) {
    auto it = find(from);
    const bool present = it != contributors_.end() && *it == from;
    const auto pos = static_cast<std::size_t>(it - contributors_.begin());
    if (mode_ == RecoveryMode::MultiRegister) {
      if (present) {
        registers_[pos] = next;
      } else {
        contributors_.insert(it, from);
        registers_.insert(registers_.begin() + static_cast<std::ptrdiff_t>(pos), next);
      }
      return;
    }
    if (present && !old) throw ParityError("xor update without the previous word");
    parity_ ^= old.value_or(DataWord{}) ^ next;
    if (!present) contributors_.insert(it, from);
  }

  // Removes a contributor whose last word is known.
  void eliminate(NodeId from, DataWord last) {
    auto it = find(from);
    if (it == contributors_.end() || *it != from) return;
    const auto pos = static_cast<std::size_t>(it - contributors_.begin());
    contributors_.erase(it);
    if (mode_ == RecoveryMode::MultiRegister) {
      registers_.erase(registers_.begin() + static_cast<std::ptrdiff_t>(pos));
    } else {
      parity_ ^= last;
    }
  }

  // Replaces the parity register with a fold of the given words.
  void rebuild(const std::vector<std::pair<NodeId, DataWord>>& words) {
    if (mode_ != RecoveryMode::XorParity) throw ParityError("rebuild applies to parity stores");
    contributors_.clear();
    parity_ = {};
    for (const auto& [id, w] : words) {
      contributors_.push_back(id);
      parity_ ^= w;
    }
    std::sort(contributors_.begin(), contributors_.end());
    contributors_.erase(std::unique(contributors_.begin(), contributors_.end()), contributors_.end());
  }

 private:
  std::vector<NodeId>::const_iterator find(NodeId id) const {
    return std::lower_bound(contributors_.begin(), contributors_.end(), id);
  }
  std::vector<NodeId>::iterator find(NodeId id) {
    return std::lower_bound(contributors_.begin(), contributors_.end(), id);
  }

  RecoveryMode mode_;
  DataWord parity_{};
  std::vector<NodeId> contributors_;  // sorted
  std::vector<DataWord> registers_;   // parallel to contributors_ (MultiRegister)
};

struct ReplicaPlacement {
  NodeId owner = 0;
  std::vector<NodeId> holders;  // sorted, distinct

  bool unprotected() const noexcept { return holders.empty(); }
  // Owner's own copy included.
  std::size_t total_copies() const noexcept { return holders.size() + 1; }
};

// Replicates to every eligible neighbour: N_owner without co-zone sensors.
inline ReplicaPlacement place_replicas(NodeId owner, std::vector<NodeId> candidates) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::erase(candidates, owner);
  return {owner, std::move(candidates)};
}

inline ReplicaPlacement place_replicas(const Topology& topo, NodeId owner) {
  return place_replicas(owner, topo.eligible_neighbors(owner));
}

// Direct readback of the failed node's register.
inline std::optional<DataWord> recover_multi(const ReplicaStore& store, NodeId failed) {
  if (store.mode() != RecoveryMode::MultiRegister) return std::nullopt;
  return store.reg(failed);
}

/// Isolates the failed contributor's word by folding out every other
/// contributor. `fresh(id)` yields the current word of contributor id, or
/// nullopt when it cannot answer; one missing contributor fails the
/// recovery.
template <typename FreshLookup>
  requires std::is_invocable_r_v<std::optional<DataWord>, FreshLookup, NodeId>
std::optional<DataWord> recover_xor(const ReplicaStore& store, NodeId failed, FreshLookup&& fresh) {
  if (store.mode() != RecoveryMode::XorParity || !store.contains(failed)) return std::nullopt;
  DataWord acc = store.parity();
  for (NodeId c : store.contributors()) {
    if (c == failed) continue;
    std::optional<DataWord> w = fresh(c);
    if (!w) return std::nullopt;
    acc ^= *w;
  }
  return acc;
}

inline std::optional<DataWord> recover_xor(const ReplicaStore& store, NodeId failed,
                                           const std::map<NodeId, DataWord>& fresh) {
  return recover_xor(store, failed, [&](NodeId c) -> std::optional<DataWord> {
    auto it = fresh.find(c);
    if (it == fresh.end()) return std::nullopt;
    return it->second;
  });
}

// t^R = -(1/λ) ln R
inline double reliable_lifetime(double lambda_fail, double reliability) {
  if (!(lambda_fail > 0.0)) throw std::invalid_argument("failure rate must be positive");
  if (!(reliability > 0.0) || reliability > 1.0) {
    throw std::invalid_argument("reliability must lie in (0, 1]");
  }
  return -std::log(reliability) / lambda_fail;
}

}  // namespace wsnr
