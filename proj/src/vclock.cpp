#include "vcreplay/vclock.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <sstream>

namespace vcreplay {

const char *to_string(Ordering o) {
  switch (o) {
    case Ordering::Before: return "before";
    case Ordering::After: return "after";
    case Ordering::Equal: return "equal";
    case Ordering::Concurrent: return "concurrent";
  }
  return "?";
}

VectorClock VectorClock::zero(std::size_t n) {
  if (n == 0) throw ClockError("vector clock width must be at least 1");
  return VectorClock(std::vector<Stamp>(n, 0));
}

VectorClock VectorClock::unit(ThreadId i, std::size_t n) { return zero(n).inc(i); }

void VectorClock::check_index(ThreadId i) const {
  if (i < 1 || static_cast<std::size_t>(i) > stamps_.size())
    throw ClockError("thread index " + std::to_string(i) + " out of range for clock of width " +
                     std::to_string(stamps_.size()));
}

void VectorClock::check_width(const VectorClock &other) const {
  if (other.stamps_.size() != stamps_.size())
    throw ClockError("vector clock width mismatch: " + std::to_string(stamps_.size()) + " vs " +
                     std::to_string(other.stamps_.size()));
}

Stamp VectorClock::operator[](ThreadId i) const {
  check_index(i);
  return stamps_[static_cast<std::size_t>(i - 1)];
}

VectorClock VectorClock::inc(ThreadId i) const {
  check_index(i);
  VectorClock r = *this;
  ++r.stamps_[static_cast<std::size_t>(i - 1)];
  return r;
}

VectorClock VectorClock::join(const VectorClock &other) const {
  check_width(other);
  VectorClock r = *this;
  for (std::size_t k = 0; k < stamps_.size(); ++k) r.stamps_[k] = std::max(r.stamps_[k], other.stamps_[k]);
  return r;
}

Ordering VectorClock::compare(const VectorClock &other) const {
  check_width(other);
  bool less = false, greater = false;
  for (std::size_t k = 0; k < stamps_.size(); ++k) {
    if (stamps_[k] < other.stamps_[k]) less = true;
    if (stamps_[k] > other.stamps_[k]) greater = true;
  }
  if (less && greater) return Ordering::Concurrent;
  if (less) return Ordering::Before;
  if (greater) return Ordering::After;
  return Ordering::Equal;
}

bool VectorClock::leq(const VectorClock &other) const {
  check_width(other);
  for (std::size_t k = 0; k < stamps_.size(); ++k)
    if (stamps_[k] > other.stamps_[k]) return false;
  return true;
}

bool VectorClock::strictly_greater(const VectorClock &other) const {
  check_width(other);
  for (std::size_t k = 0; k < stamps_.size(); ++k)
    if (stamps_[k] <= other.stamps_[k]) return false;
  return true;
}

Stamp VectorClock::sum() const { return std::accumulate(stamps_.begin(), stamps_.end(), Stamp{0}); }

std::string VectorClock::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

std::ostream &operator<<(std::ostream &os, const VectorClock &cs) {
  os << '[';
  for (std::size_t k = 0; k < cs.stamps().size(); ++k) {
    if (k) os << ',';
    os << cs.stamps()[k];
  }
  return os << ']';
}

}  // namespace vcreplay
