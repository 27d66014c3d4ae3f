#pragma once
// Hand-written traces of the worked examples, plus small builders.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vcreplay/trace.hpp"

namespace fixtures {

using namespace vcreplay;

inline LocalEvent signal(std::int64_t n) { return ev::Signal{n}; }
inline LocalEvent wait(std::int64_t n) { return ev::Wait{n}; }
inline LocalEvent make(const ChannelId &ch, std::size_t cap) { return ev::ChanMake{ch, cap}; }
inline LocalEvent pre_snd(const ChannelId &ch) { return ev::Pre{{PrimOp::send(ch)}}; }
inline LocalEvent pre_rcv(const ChannelId &ch) { return ev::Pre{{PrimOp::receive(ch)}}; }
inline LocalEvent pre(std::vector<PrimOp> ops) { return ev::Pre{std::move(ops)}; }
inline LocalEvent post_snd(ThreadId tid, ProgramCounter pc, const ChannelId &ch) { return ev::PostSend{tid, pc, ch}; }
inline LocalEvent post_rcv(ThreadId tid, ProgramCounter pc, const ChannelId &ch) {
  return ev::PostReceive{tid, pc, ch};
}
inline LocalEvent post_rcv_closed(const ChannelId &ch) { return ev::PostReceive{kClosedTid, kClosedPc, ch}; }
inline LocalEvent post_close(const ChannelId &ch) { return ev::PostClose{ch}; }
inline LocalEvent post_default() { return ev::PostDefault{}; }

inline TraceSet traces(std::vector<ChannelDecl> chans, std::vector<LocalTrace> per_thread) {
  TraceSet ts;
  ts.threads = per_thread.size();
  ts.channels = std::move(chans);
  for (std::size_t i = 0; i < per_thread.size(); ++i) ts.traces[static_cast<ThreadId>(i + 1)] = std::move(per_thread[i]);
  return ts;
}

/// Five threads over unbuffered x, y: 2 syncs with 3, 4 with 5, then 3 with 4.
inline TraceSet sync_chain() {
  return traces({{"x", 0}, {"y", 0}},
                {{signal(2), signal(3), signal(4), signal(5)},
                 {wait(2), pre_snd("x"), post_snd(2, 1, "x")},
                 {wait(3), pre_rcv("x"), post_rcv(2, 1, "x"), pre_snd("x"), post_snd(3, 2, "x")},
                 {wait(4), pre_snd("y"), post_snd(4, 1, "y"), pre_rcv("x"), post_rcv(3, 2, "x")},
                 {wait(5), pre_rcv("y"), post_rcv(4, 1, "y")}});
}

/// Capacity-2 buffer: a helper receives once, main sends three times.
inline TraceSet buffered_clocks() {
  return traces({{"x", 2}}, {{make("x", 2), signal(2), pre_snd("x"), post_snd(1, 3, "x"), pre_snd("x"),
                              post_snd(1, 4, "x"), pre_snd("x"), post_snd(1, 5, "x")},
                             {wait(2), pre_rcv("x"), post_rcv(1, 3, "x")}});
}

/// Capacity-1 buffer shared by two threads that each send then receive
/// their own message. With `spawn`, the signal/wait pair of the spawn is kept.
inline TraceSet buffer_one(bool spawn) {
  LocalTrace t1 = {pre_snd("x"), post_snd(1, 3, "x"), pre_rcv("x"), post_rcv(1, 3, "x")};
  LocalTrace t2 = {pre_snd("x"), post_snd(2, 1, "x"), pre_rcv("x"), post_rcv(2, 1, "x")};
  if (spawn) {
    t1.insert(t1.begin(), signal(2));
    t2.insert(t2.begin(), wait(2));
  }
  return traces({{"x", 1}}, {t1, t2});
}

/// Main sends and receives on a capacity-1 buffer, then the helper sends,
/// receives and closes.
inline TraceSet send_on_closed() {
  return traces({{"x", 1}}, {{signal(2), pre_snd("x"), post_snd(1, 3, "x"), pre_rcv("x"), post_rcv(1, 3, "x")},
                             {wait(2), pre_snd("x"), post_snd(2, 1, "x"), pre_rcv("x"), post_rcv(2, 1, "x"),
                              post_close("x")}});
}

/// Two helpers send into a capacity-2 buffer; main receives thread 2's first.
/// Signal/wait events are omitted, as in the hand-written original.
inline TraceSet replay_order() {
  return traces({{"x", 2}}, {{pre_rcv("x"), post_rcv(2, 1, "x"), pre_rcv("x"), post_rcv(3, 1, "x")},
                             {pre_snd("x"), post_snd(2, 1, "x")},
                             {pre_snd("x"), post_snd(3, 1, "x")}});
}

/// Capacity-1 x and y; (1)->(3), (2)->(5), (4)->(6). Replaying thread 4's
/// send first gets stuck although the program cannot deadlock this way.
inline TraceSet stuck_branch() {
  return traces({{"x", 1}, {"y", 1}},
                {{pre_rcv("y"), post_rcv(2, 2, "y"), pre_rcv("x"), post_rcv(4, 1, "x")},
                 {pre_snd("x"), post_snd(2, 1, "x"), pre_snd("y"), post_snd(2, 2, "y")},
                 {pre_rcv("x"), post_rcv(2, 1, "x")},
                 {pre_snd("x"), post_snd(4, 1, "x")}});
}

/// Replaying thread 3's send first leaves every leading receive facing an
/// empty buffer and every leading send a full one.
inline TraceSet completely_stuck() {
  return traces({{"x", 1}, {"y", 1}},
                {{pre_rcv("y"), post_rcv(2, 2, "y"), pre_rcv("x"), post_rcv(3, 1, "x")},
                 {pre_snd("x"), post_snd(2, 1, "x"), pre_snd("y"), post_snd(2, 2, "y"), pre_snd("y"),
                  post_snd(2, 3, "y")},
                 {pre_snd("x"), post_snd(3, 1, "x")},
                 {pre_rcv("y"), post_rcv(2, 3, "y"), pre_rcv("x"), post_rcv(2, 1, "x")}});
}

/// Two unbuffered receivers of one send; main's receive is left dangling.
inline TraceSet receive_race_deadlock() {
  return traces({{"x", 0}}, {{make("x", 0), signal(2), signal(3), pre_rcv("x")},
                             {wait(2), pre_snd("x"), post_snd(2, 1, "x")},
                             {wait(3), pre_rcv("x"), post_rcv(2, 1, "x")}});
}

/// A helper sends on x then y; main selects over receives on x and y.
inline TraceSet select_after() {
  return traces({{"x", 0}, {"y", 0}},
                {{make("x", 0), make("y", 0), signal(2), pre({PrimOp::receive("x"), PrimOp::receive("y")}),
                  post_rcv(2, 1, "x")},
                 {wait(2), pre_snd("x"), post_snd(2, 1, "x"), pre_snd("y")}});
}

inline std::filesystem::path corpus_dir() { return VCREPLAY_CORPUS_DIR; }
inline std::filesystem::path corpus(const std::string &name) { return corpus_dir() / name; }

}  // namespace fixtures
