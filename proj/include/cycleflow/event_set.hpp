#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "cycleflow/error.hpp"
#include "cycleflow/scalar.hpp"

namespace cycleflow {

/// A subset of the point set {0, ..., m-1}.
class EventSet {
public:
  EventSet() = default;
  explicit EventSet(Index universe) : bits_(static_cast<std::size_t>(universe), false) {}

  static EventSet of(Index universe, std::initializer_list<Index> members) {
    EventSet s(universe);
    for (Index i : members) s.insert(i);
    return s;
  }

  template <class Range>
  static EventSet from_range(Index universe, const Range& members) {
    EventSet s(universe);
    for (auto i : members) s.insert(static_cast<Index>(i));
    return s;
  }

  static EventSet all(Index universe) {
    EventSet s(universe);
    s.bits_.assign(s.bits_.size(), true);
    return s;
  }

  /// Bit i of mask selects point i; requires universe <= 64.
  static EventSet from_mask(Index universe, std::uint64_t mask) {
    if (universe > 64) throw Error(ErrorCode::structural, "from_mask: universe exceeds 64 points");
    EventSet s(universe);
    for (Index i = 0; i < universe; ++i) s.bits_[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    if (universe < 64 && (mask >> universe) != 0)
      throw Error(ErrorCode::structural, "from_mask: mask has bits outside the universe");
    return s;
  }

  Index universe() const { return static_cast<Index>(bits_.size()); }

  bool contains(Index i) const {
    return i >= 0 && i < universe() && bits_[static_cast<std::size_t>(i)];
  }

  void insert(Index i) {
    check(i);
    bits_[static_cast<std::size_t>(i)] = true;
  }

  void erase(Index i) {
    check(i);
    bits_[static_cast<std::size_t>(i)] = false;
  }

  Index count() const {
    Index n = 0;
    for (bool b : bits_) n += b ? 1 : 0;
    return n;
  }

  bool empty() const { return count() == 0; }

  std::vector<Index> members() const {
    std::vector<Index> out;
    for (Index i = 0; i < universe(); ++i)
      if (bits_[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
  }

  EventSet complement() const {
    EventSet s = *this;
    s.bits_.flip();
    return s;
  }

  friend EventSet operator&(const EventSet& a, const EventSet& b) {
    a.check_same(b);
    EventSet s(a.universe());
    for (std::size_t i = 0; i < a.bits_.size(); ++i) s.bits_[i] = a.bits_[i] && b.bits_[i];
    return s;
  }

  friend EventSet operator|(const EventSet& a, const EventSet& b) {
    a.check_same(b);
    EventSet s(a.universe());
    for (std::size_t i = 0; i < a.bits_.size(); ++i) s.bits_[i] = a.bits_[i] || b.bits_[i];
    return s;
  }

  friend bool operator==(const EventSet& a, const EventSet& b) { return a.bits_ == b.bits_; }

  std::string to_string() const {
    std::string out = "{";
    bool first = true;
    for (Index i : members()) {
      if (!first) out += ",";
      out += std::to_string(i);
      first = false;
    }
    return out + "}";
  }

private:
  void check(Index i) const {
    if (i < 0 || i >= universe())
      throw Error(ErrorCode::structural,
                  "point index " + std::to_string(i) + " outside universe of size " +
                      std::to_string(universe()));
  }
  void check_same(const EventSet& other) const {
    if (other.universe() != universe())
      throw Error(ErrorCode::structural, "event sets over different universes");
  }

  std::vector<bool> bits_;
};

}  // namespace cycleflow
