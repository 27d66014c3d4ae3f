#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcreplay/exec.hpp"
#include "vcreplay/trace.hpp"
#include "vcreplay/vclock.hpp"

namespace vcreplay {

/// The trace handed to replay does not satisfy validate().
class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EventKind { Send, Receive, Close, Default, Init };
enum class EventStatus { Committed, NotSelected, Dangling };

const char *to_string(EventKind k);
const char *to_string(EventStatus s);

/// Sender identity (tid, pc). The closed sentinel is {-1, -1}.
struct SendId {
  ThreadId tid = 0;
  ProgramCounter pc = 0;
  bool closed() const { return tid == kClosedTid && pc == kClosedPc; }
  friend auto operator<=>(const SendId &, const SendId &) = default;
};

/// Where an annotated event comes from: the position of its pre event (or of
/// the close/chan_make event) in the thread's trace, the recorded pc when
/// known (committed sends), and the guard index within the pre list.
struct Origin {
  std::size_t pos = 0;
  std::optional<ProgramCounter> pc;
  std::optional<std::size_t> case_index;
  friend bool operator==(const Origin &, const Origin &) = default;
};

/**
 * A communication event annotated with vector clocks. Committed sends,
 * receives and defaults carry pre and post; closes and channel inits carry
 * post only; not-selected and dangling events carry pre only.
 */
struct AnnotatedEvent {
  ThreadId thread = 0;
  EventKind kind = EventKind::Send;
  ChannelId channel;  // empty for Default
  std::optional<VectorClock> pre;
  std::optional<VectorClock> post;
  EventStatus status = EventStatus::Committed;
  Origin origin;
  std::optional<SendId> link;  // committed receives: the sender identity consumed

  bool committed() const { return status == EventStatus::Committed; }
  friend bool operator==(const AnnotatedEvent &, const AnnotatedEvent &) = default;
};

std::string to_string(const AnnotatedEvent &e);

/// Identity of an event independent of replay order.
struct OriginKey {
  ThreadId thread = 0;
  std::size_t pos = 0;
  std::size_t case_index = 0;
  EventKind kind = EventKind::Send;
  friend auto operator<=>(const OriginKey &, const OriginKey &) = default;
};

OriginKey origin_key(const AnnotatedEvent &e);

struct ClockPair {
  std::optional<VectorClock> pre;
  std::optional<VectorClock> post;
  friend bool operator==(const ClockPair &, const ClockPair &) = default;
  friend auto operator<=>(const ClockPair &, const ClockPair &) = default;
};

/// Per-origin clock assignment of one replay.
using Assignment = std::map<OriginKey, ClockPair>;

Assignment assignment_of(const std::vector<AnnotatedEvent> &events);

/// One slot of a buffered channel: occupied by a send, or empty (⊥) with a clock.
struct Slot {
  std::optional<SendId> occupant;
  VectorClock clock;
  friend bool operator==(const Slot &, const Slot &) = default;
};

struct BufferState {
  ChannelId channel;
  std::size_t capacity = 0;
  std::deque<Slot> slots;  // always `capacity` entries; occupied slots first

  std::size_t occupied() const;
  bool full() const { return occupied() == capacity; }
  bool empty() const { return occupied() == 0; }
  friend bool operator==(const BufferState &, const BufferState &) = default;
};

enum class TerminalClass { Exhaustive, Stuck, CompletelyStuck };

const char *to_string(TerminalClass t);

/// A replay rule firing.
struct Step {
  enum class Rule { SignalWait, Sync, Send, Receive, ReceiveClosed, Close, Default, Make };
  Rule rule = Rule::Make;
  ThreadId thread = 0;   // acting thread; the signaler / sender for two-thread rules
  ThreadId partner = 0;  // waiter / receiver for two-thread rules
  friend bool operator==(const Step &, const Step &) = default;
};

std::string to_string(const Step &s);

struct TraceIndex;

/**
 * Replay configuration ⟨buffers | threads⟩ together with the events emitted
 * so far. Copyable so search procedures can branch.
 */
class ReplayState {
 public:
  /// Throws ReplayError if validate(ts) reports violations. `ts` must outlive the state.
  explicit ReplayState(const TraceSet &ts);

  /// Enabled rule firings, one per thread at most, in ascending thread order.
  /// With `strategy`, buffered sends that would overtake a send whose receive
  /// comes earlier in the same receiver thread are withheld.
  std::vector<Step> enabled(bool strategy = false) const;
  /// The enabled step of thread t, if any (same filtering as enabled()).
  std::optional<Step> enabled_for(ThreadId t, bool strategy = false) const;
  void apply(const Step &s);

  bool terminal() const { return enabled().empty(); }
  /// Classifies a terminal state.
  TerminalClass classify() const;

  const TraceSet &trace() const { return *ts_; }
  const std::vector<AnnotatedEvent> &events() const { return events_; }
  const std::vector<Step> &steps() const { return steps_; }
  const VectorClock &clock(ThreadId t) const { return clocks_[index(t)]; }
  std::size_t cursor(ThreadId t) const { return cursors_[index(t)]; }
  const std::map<ChannelId, BufferState> &buffers() const { return buffers_; }

  /// Key over cursors and buffer occupants (clocks excluded).
  std::string shape_key() const;
  /// Key over cursors, buffers, thread clocks, and the annotations emitted so far.
  std::string full_key() const;

 private:
  std::size_t index(ThreadId t) const;
  const LocalEvent *at(ThreadId t, std::size_t offset = 0) const;
  bool a1_blocked(const SendId &s, const ChannelId &ch) const;
  void emit_select(ThreadId t, std::size_t pre_pos, std::size_t chosen, const VectorClock &pre,
                   const VectorClock &post, std::optional<SendId> link, std::optional<ProgramCounter> pc);

  const TraceSet *ts_;
  std::shared_ptr<const TraceIndex> idx_;
  std::vector<VectorClock> clocks_;
  std::vector<std::size_t> cursors_;
  std::map<ChannelId, BufferState> buffers_;
  std::vector<char> close_done_;                 // per channel declaration index
  std::vector<std::size_t> a1_next_;             // per receive queue (see TraceIndex)
  std::vector<char> sent_;                       // per buffered send (see TraceIndex)
  std::vector<AnnotatedEvent> events_;
  std::vector<Step> steps_;
  std::uint64_t annotation_hash_ = 0;
};

enum class ReplayMode { Strategy, Naive, Backtrack };

const char *to_string(ReplayMode m);

struct ReplayOptions {
  ReplayMode mode = ReplayMode::Strategy;
  /// Naive mode without a priority list: seed of the uniform random rule choice.
  std::uint64_t seed = 0;
  /// Prefer rule firings of these threads, in this order; other threads follow
  /// in ascending order. Applies to Naive and Strategy modes.
  std::vector<ThreadId> priority;
  /// Backtrack mode: maximum number of search nodes.
  std::size_t backtrack_limit = 100000;
  /// Backtrack mode: only branch over sends admitted by the strategy filter.
  bool backtrack_with_strategy = true;
};

struct ReplayResult {
  std::vector<AnnotatedEvent> events;    // emitted by the replay rules, in firing order
  std::vector<AnnotatedEvent> dangling;  // annotate_dangling(final state)
  TerminalClass terminal = TerminalClass::Exhaustive;
  std::vector<Step> steps;
  std::map<ChannelId, BufferState> buffers;  // final buffer contents
  std::vector<VectorClock> final_clocks;     // index t-1 holds thread t's clock
  bool limit_exceeded = false;               // backtracking gave up; partial result
  std::size_t nodes = 0;                     // backtracking search nodes visited

  /// events followed by dangling: the full E consumed by the analyses.
  std::vector<AnnotatedEvent> all_events() const;
};

ReplayResult replay(const TraceSet &ts, const ReplayOptions &opts = {});

/// Residual leading pre events of a terminal state, one Dangling event per guard.
std::vector<AnnotatedEvent> annotate_dangling(const ReplayState &state);

struct Enumeration {
  std::vector<Assignment> assignments;                     // distinct, in discovery order
  std::vector<std::vector<AnnotatedEvent>> event_lists;   // the full E of each assignment
  bool truncated = false;
  std::size_t nodes = 0;
};

/// Enumerates the distinct per-origin annotations of all exhaustive replays.
/// Stops after `limit` assignments or `max_nodes` search nodes (truncated).
Enumeration enumerate_annotations(const TraceSet &ts, std::size_t limit = 1000, std::size_t max_nodes = 1000000);

/**
 * Converts the rule firings of a replay into executor choices that re-create
 * the same communication links. The firing that completes the main thread
 * is moved last, because the executor stops as soon as the main thread ends.
 * Throws ReplayError when the move would change a communication link (for
 * example on a FIFO buffer); executable_replay() finds a suitable order.
 */
std::vector<exec::Choice> implied_schedule(const TraceSet &ts, const std::vector<Step> &steps);

/// Searches for an exhaustive replay whose last rule firing completes the
/// main thread, so that its implied schedule runs on the executor unchanged.
/// Returns nullopt if none is found within `max_nodes` search nodes.
std::optional<ReplayResult> executable_replay(const TraceSet &ts, std::size_t max_nodes = 100000);

/// {"thread":..,"kind":..,"ch":..,"pre":[..],"post":[..]|null,"committed":..,"status":..,"origin":{..}}
std::string event_json(const AnnotatedEvent &e);
/// {"terminal":..,"events":[..]} plus backtracking info.
std::string replay_json(const ReplayResult &r);

}  // namespace vcreplay
