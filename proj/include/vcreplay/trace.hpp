#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vcreplay/vclock.hpp"

namespace vcreplay {

using ChannelId = std::string;
using ProgramCounter = std::int64_t;

/// Sender identity recorded by a receive that was served by a closed channel.
inline constexpr ThreadId kClosedTid = -1;
inline constexpr ProgramCounter kClosedPc = -1;

enum class OpKind { Send, Receive, Default };

/// One guard of a select as listed by its pre event.
struct PrimOp {
  OpKind kind = OpKind::Default;
  ChannelId channel;  // empty for Default

  static PrimOp send(ChannelId ch) { return {OpKind::Send, std::move(ch)}; }
  static PrimOp receive(ChannelId ch) { return {OpKind::Receive, std::move(ch)}; }
  static PrimOp default_case() { return {OpKind::Default, {}}; }

  friend bool operator==(const PrimOp &, const PrimOp &) = default;
};

std::string to_string(const PrimOp &op);

namespace ev {
struct Signal {
  std::int64_t n = 0;
  friend bool operator==(const Signal &, const Signal &) = default;
};
struct Wait {
  std::int64_t n = 0;
  friend bool operator==(const Wait &, const Wait &) = default;
};
struct Pre {
  std::vector<PrimOp> ops;
  friend bool operator==(const Pre &, const Pre &) = default;
};
struct PostSend {
  ThreadId tid = 0;
  ProgramCounter pc = 0;
  ChannelId channel;
  friend bool operator==(const PostSend &, const PostSend &) = default;
};
struct PostReceive {
  ThreadId tid = 0;
  ProgramCounter pc = 0;
  ChannelId channel;
  bool from_closed() const { return tid == kClosedTid && pc == kClosedPc; }
  friend bool operator==(const PostReceive &, const PostReceive &) = default;
};
struct PostClose {
  ChannelId channel;
  friend bool operator==(const PostClose &, const PostClose &) = default;
};
struct PostDefault {
  friend bool operator==(const PostDefault &, const PostDefault &) = default;
};
struct ChanMake {
  ChannelId channel;
  std::size_t capacity = 0;
  friend bool operator==(const ChanMake &, const ChanMake &) = default;
};
}  // namespace ev

using LocalEvent = std::variant<ev::Signal, ev::Wait, ev::Pre, ev::PostSend, ev::PostReceive,
                                ev::PostClose, ev::PostDefault, ev::ChanMake>;
using LocalTrace = std::vector<LocalEvent>;

std::string to_string(const LocalEvent &e);

/// True for PostSend, PostReceive and PostDefault: the events that commit a pre.
bool is_select_post(const LocalEvent &e);

struct ChannelDecl {
  ChannelId id;
  std::size_t capacity = 0;
  friend bool operator==(const ChannelDecl &, const ChannelDecl &) = default;
};

/// Thread-local traces of one program run plus the channel declarations.
struct TraceSet {
  std::size_t threads = 1;
  std::vector<ChannelDecl> channels;
  std::map<ThreadId, LocalTrace> traces;

  /// Empty trace for threads that recorded nothing.
  const LocalTrace &trace(ThreadId t) const;
  std::optional<std::size_t> capacity(const ChannelId &ch) const;
  bool buffered(const ChannelId &ch) const { return capacity(ch).value_or(0) > 0; }
  std::size_t event_count() const;

  friend bool operator==(const TraceSet &, const TraceSet &) = default;
};

enum class ViolationKind {
  BadThreadCount,
  ThreadOutOfRange,
  DuplicateChannel,
  UndeclaredChannel,
  ChanMakeMismatch,
  DuplicateSignal,
  DuplicateWait,
  UnmatchedSignal,
  UnmatchedWait,
  EmptyPre,
  PostWithoutPre,
  PostNotInPre,
  PreWithoutPost,
  BadSentinel,
  SendIdentityMismatch,
  DuplicateSendIdentity,
  UnmatchedReceive,
  DuplicateReceive,
  UnmatchedSend,
};

const char *to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  ThreadId thread = 0;
  std::size_t index = 0;
  std::string reason;
};

/// Checks the structural guarantees of the tracing scheme. An empty result
/// means the trace set can be replayed.
std::vector<Violation> validate(const TraceSet &ts);

std::string describe(const std::vector<Violation> &violations);

}  // namespace vcreplay
