#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcreplay {

/// Dense thread identifier. Thread 1 is the main thread; spawned threads
/// are numbered 2..n in spawn order.
using ThreadId = std::int32_t;
using Stamp = std::uint64_t;

class ClockError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Ordering { Before, After, Equal, Concurrent };

const char *to_string(Ordering o);

/**
 * Fixed-width vector clock. Index i (1-based) holds the timestamp of thread i.
 *
 * Two orders are exposed. compare() is the happens-before order used for
 * event queries (pointwise <= with at least one strict <). strictly_greater()
 * is the all-components order used only by the epoch guards of contention
 * tracking.
 */
class VectorClock {
 public:
  VectorClock() = default;
  VectorClock(std::initializer_list<Stamp> stamps) : stamps_(stamps) {}
  explicit VectorClock(std::vector<Stamp> stamps) : stamps_(std::move(stamps)) {}

  static VectorClock zero(std::size_t n);
  /// zero(n) with position i set to 1.
  static VectorClock unit(ThreadId i, std::size_t n);

  std::size_t width() const { return stamps_.size(); }
  std::span<const Stamp> stamps() const { return stamps_; }

  /// 1-based access.
  Stamp operator[](ThreadId i) const;

  VectorClock inc(ThreadId i) const;
  VectorClock join(const VectorClock &other) const;
  Ordering compare(const VectorClock &other) const;

  /// Pointwise <=.
  bool leq(const VectorClock &other) const;
  /// Every component strictly greater than the corresponding one in other.
  bool strictly_greater(const VectorClock &other) const;
  bool concurrent_with(const VectorClock &other) const {
    return compare(other) == Ordering::Concurrent;
  }

  Stamp sum() const;
  std::string str() const;

  friend bool operator==(const VectorClock &, const VectorClock &) = default;
  friend auto operator<=>(const VectorClock &, const VectorClock &) = default;

 private:
  void check_index(ThreadId i) const;
  void check_width(const VectorClock &other) const;

  std::vector<Stamp> stamps_;
};

inline VectorClock inc(ThreadId i, const VectorClock &cs) { return cs.inc(i); }
inline VectorClock join(const VectorClock &a, const VectorClock &b) { return a.join(b); }
inline Ordering compare(const VectorClock &a, const VectorClock &b) { return a.compare(b); }

std::ostream &operator<<(std::ostream &os, const VectorClock &cs);

}  // namespace vcreplay
