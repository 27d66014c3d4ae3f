#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vcreplay/replay.hpp"
#include "vcreplay/trace.hpp"

namespace vcreplay {

/// A committed send and the committed receive that consumed it.
struct MatchPair {
  AnnotatedEvent send;
  AnnotatedEvent receive;
  ChannelId channel;
  bool buffered = false;
};

/// A committed receive whose sender identity has no committed send in E.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pairs every committed receive (except receive-from-closed) with its send by (tid, pc).
std::vector<MatchPair> match_pairs(const std::vector<AnnotatedEvent> &events, const TraceSet &ts);

/// Reference to an event inside E.
struct EventRef {
  ThreadId thread = 0;
  EventKind kind = EventKind::Send;
  std::size_t pos = 0;
  std::optional<std::size_t> case_index;
  EventStatus status = EventStatus::Committed;
  std::optional<VectorClock> pre;
  std::optional<VectorClock> post;
};

EventRef ref_of(const AnnotatedEvent &e);

/// One itemized result. `scenario` is "ac", "asc", "mp", "sc", "dr", or a
/// "-note" variant for informational items that do not contribute to a count.
struct Finding {
  std::string scenario;
  ChannelId channel;
  EventRef subject;
  std::optional<EventRef> other;
  std::string note;
};

/// Per-channel, per-direction contention statistics.
struct ContentionStats {
  ChannelId channel;
  EventKind direction = EventKind::Send;
  std::size_t max_concurrent = 0;  // largest epoch list (excluding init epochs)
  std::size_t count = 0;           // steps whose epoch list had two or more entries
  friend bool operator==(const ContentionStats &, const ContentionStats &) = default;
};

struct Report {
  std::size_t ac = 0;
  std::size_t mp = 0;
  std::size_t asc = 0;
  std::size_t sc = 0;
  bool dr = false;
  std::vector<Finding> findings;
  std::vector<ContentionStats> contention;

  /// Number of findings tagged with exactly this scenario.
  std::size_t count(const std::string &scenario) const;
  void merge(const Report &other);
};

/// Alternative communications: for each pair, counterpart events on the same
/// channel (any status) whose pre clocks are concurrent with the member's pre clock.
Report alternative_communications(const std::vector<AnnotatedEvent> &events, const std::vector<MatchPair> &pairs);

/// Alternatives for not-selected select cases.
Report alternative_select_cases(const std::vector<AnnotatedEvent> &events);

/// Canonical stream order used by the epoch analyses: a linear extension of
/// happens-before (pre-clock sum; post clock for init and close events).
std::vector<AnnotatedEvent> stream_order(const std::vector<AnnotatedEvent> &events);

/// Send/receive epoch rewriting per channel; every step that leaves two or
/// more concurrent epochs is one finding.
Report message_contention(const std::vector<AnnotatedEvent> &events);

/// The same quantity recomputed from full clocks without epochs; used to
/// cross-check message_contention.
std::vector<ContentionStats> message_contention_full(const std::vector<AnnotatedEvent> &events);

/// Sends whose pre clock succeeds or is concurrent to a close of the same channel.
Report send_on_closed(const std::vector<AnnotatedEvent> &events);

/// Epoch-streamed check: true iff send_on_closed would report a hazard.
bool send_on_closed_epoch(const std::vector<AnnotatedEvent> &events);

/// Potential partners of dangling events. dr is set when the main thread ends
/// blocked or the replay is stuck.
Report deadlock_recovery(const std::vector<AnnotatedEvent> &events, TerminalClass terminal);

struct AnalysisSelection {
  bool ac = true, mp = true, asc = true, sc = true, dr = true;
};

Report analyze(const std::vector<AnnotatedEvent> &events, const TraceSet &ts, TerminalClass terminal,
               const AnalysisSelection &sel = {});

/// {"ac":..,"mp":..,"asc":..,"sc":..,"dr":..,"findings":[..]}
std::string report_json(const Report &r);
std::string report_text(const Report &r, const AnalysisSelection &sel = {});

}  // namespace vcreplay
