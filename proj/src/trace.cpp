#include "vcreplay/trace.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

namespace vcreplay {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

struct SendKey {
  ThreadId tid;
  ProgramCounter pc;
  bool operator==(const SendKey &) const = default;
};

struct SendKeyHash {
  std::size_t operator()(const SendKey &k) const {
    return std::hash<std::int64_t>{}(k.pc) * 31 + std::hash<ThreadId>{}(k.tid);
  }
};

const ChannelId *channel_of(const LocalEvent &e) {
  return std::visit(overloaded{
                        [](const ev::PostSend &p) -> const ChannelId * { return &p.channel; },
                        [](const ev::PostReceive &p) -> const ChannelId * { return &p.channel; },
                        [](const ev::PostClose &p) -> const ChannelId * { return &p.channel; },
                        [](const ev::ChanMake &p) -> const ChannelId * { return &p.channel; },
                        [](const auto &) -> const ChannelId * { return nullptr; },
                    },
                    e);
}

bool pre_contains(const ev::Pre &pre, const LocalEvent &post) {
  PrimOp want = std::visit(overloaded{
                               [](const ev::PostSend &p) { return PrimOp::send(p.channel); },
                               [](const ev::PostReceive &p) { return PrimOp::receive(p.channel); },
                               [](const auto &) { return PrimOp::default_case(); },
                           },
                           post);
  return std::find(pre.ops.begin(), pre.ops.end(), want) != pre.ops.end();
}

}  // namespace

std::string to_string(const PrimOp &op) {
  switch (op.kind) {
    case OpKind::Send: return op.channel + "!";
    case OpKind::Receive: return op.channel + "?";
    case OpKind::Default: return "default";
  }
  return "?";
}

std::string to_string(const LocalEvent &e) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const ev::Signal &s) { os << "signal(" << s.n << ")"; },
                 [&](const ev::Wait &s) { os << "wait(" << s.n << ")"; },
                 [&](const ev::Pre &p) {
                   os << "pre(";
                   for (std::size_t i = 0; i < p.ops.size(); ++i) os << (i ? "," : "") << to_string(p.ops[i]);
                   os << ")";
                 },
                 [&](const ev::PostSend &p) { os << "post(" << p.tid << "#" << p.pc << "#" << p.channel << "!)"; },
                 [&](const ev::PostReceive &p) {
                   if (p.from_closed())
                     os << "post(closed#" << p.channel << "?)";
                   else
                     os << "post(" << p.tid << "#" << p.pc << "#" << p.channel << "?)";
                 },
                 [&](const ev::PostClose &p) { os << "post(close " << p.channel << ")"; },
                 [&](const ev::PostDefault &) { os << "post(default)"; },
                 [&](const ev::ChanMake &p) { os << "make(" << p.channel << "," << p.capacity << ")"; },
             },
             e);
  return os.str();
}

bool is_select_post(const LocalEvent &e) {
  return std::holds_alternative<ev::PostSend>(e) || std::holds_alternative<ev::PostReceive>(e) ||
         std::holds_alternative<ev::PostDefault>(e);
}

const LocalTrace &TraceSet::trace(ThreadId t) const {
  static const LocalTrace empty;
  auto it = traces.find(t);
  return it == traces.end() ? empty : it->second;
}

std::optional<std::size_t> TraceSet::capacity(const ChannelId &ch) const {
  for (const auto &c : channels)
    if (c.id == ch) return c.capacity;
  return std::nullopt;
}

std::size_t TraceSet::event_count() const {
  std::size_t n = 0;
  for (const auto &[_, t] : traces) n += t.size();
  return n;
}

const char *to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::BadThreadCount: return "BadThreadCount";
    case ViolationKind::ThreadOutOfRange: return "ThreadOutOfRange";
    case ViolationKind::DuplicateChannel: return "DuplicateChannel";
    case ViolationKind::UndeclaredChannel: return "UndeclaredChannel";
    case ViolationKind::ChanMakeMismatch: return "ChanMakeMismatch";
    case ViolationKind::DuplicateSignal: return "DuplicateSignal";
    case ViolationKind::DuplicateWait: return "DuplicateWait";
    case ViolationKind::UnmatchedSignal: return "UnmatchedSignal";
    case ViolationKind::UnmatchedWait: return "UnmatchedWait";
    case ViolationKind::EmptyPre: return "EmptyPre";
    case ViolationKind::PostWithoutPre: return "PostWithoutPre";
    case ViolationKind::PostNotInPre: return "PostNotInPre";
    case ViolationKind::PreWithoutPost: return "PreWithoutPost";
    case ViolationKind::BadSentinel: return "BadSentinel";
    case ViolationKind::SendIdentityMismatch: return "SendIdentityMismatch";
    case ViolationKind::DuplicateSendIdentity: return "DuplicateSendIdentity";
    case ViolationKind::UnmatchedReceive: return "UnmatchedReceive";
    case ViolationKind::DuplicateReceive: return "DuplicateReceive";
    case ViolationKind::UnmatchedSend: return "UnmatchedSend";
  }
  return "?";
}

std::vector<Violation> validate(const TraceSet &ts) {
  std::vector<Violation> out;
  auto report = [&](ViolationKind k, ThreadId t, std::size_t i, std::string why) {
    out.push_back({k, t, i, std::move(why)});
  };

  if (ts.threads == 0) report(ViolationKind::BadThreadCount, 0, 0, "thread count must be at least 1");

  std::set<ChannelId> declared;
  for (const auto &c : ts.channels)
    if (!declared.insert(c.id).second)
      report(ViolationKind::DuplicateChannel, 0, 0, "channel '" + c.id + "' declared twice");

  struct SendSite {
    ThreadId thread;
    std::size_t index;
    ChannelId channel;
  };
  std::unordered_map<SendKey, SendSite, SendKeyHash> sends;
  std::unordered_map<SendKey, std::size_t, SendKeyHash> receives_per_send;
  std::map<std::int64_t, int> signals, waits;
  std::set<ChannelId> made;

  for (const auto &[tid, trace] : ts.traces) {
    if (tid < 1 || static_cast<std::size_t>(tid) > ts.threads)
      report(ViolationKind::ThreadOutOfRange, tid, 0,
             "thread " + std::to_string(tid) + " outside 1.." + std::to_string(ts.threads));

    for (std::size_t i = 0; i < trace.size(); ++i) {
      const LocalEvent &e = trace[i];
      if (const ChannelId *ch = channel_of(e); ch && !declared.contains(*ch))
        report(ViolationKind::UndeclaredChannel, tid, i, "channel '" + *ch + "' is not declared");

      if (const auto *pre = std::get_if<ev::Pre>(&e)) {
        if (pre->ops.empty()) report(ViolationKind::EmptyPre, tid, i, "pre event without guards");
        for (const auto &op : pre->ops)
          if (op.kind != OpKind::Default && !declared.contains(op.channel))
            report(ViolationKind::UndeclaredChannel, tid, i, "channel '" + op.channel + "' is not declared");
        if (i + 1 < trace.size()) {
          const LocalEvent &next = trace[i + 1];
          if (!is_select_post(next))
            report(ViolationKind::PreWithoutPost, tid, i, "pre is followed by " + to_string(next));
          else if (!pre_contains(*pre, next))
            report(ViolationKind::PostNotInPre, tid, i + 1, to_string(next) + " is not a guard of " + to_string(e));
        }
      } else if (is_select_post(e)) {
        if (i == 0 || !std::holds_alternative<ev::Pre>(trace[i - 1]))
          report(ViolationKind::PostWithoutPre, tid, i, to_string(e) + " has no preceding pre event");
      }

      if (const auto *s = std::get_if<ev::Signal>(&e)) {
        if (signals[s->n]++) report(ViolationKind::DuplicateSignal, tid, i, "signal " + std::to_string(s->n) + " repeated");
      } else if (const auto *w = std::get_if<ev::Wait>(&e)) {
        if (waits[w->n]++) report(ViolationKind::DuplicateWait, tid, i, "wait " + std::to_string(w->n) + " repeated");
      } else if (const auto *m = std::get_if<ev::ChanMake>(&e)) {
        auto cap = ts.capacity(m->channel);
        if (cap && *cap != m->capacity)
          report(ViolationKind::ChanMakeMismatch, tid, i, "capacity of '" + m->channel + "' differs from declaration");
        if (!made.insert(m->channel).second)
          report(ViolationKind::ChanMakeMismatch, tid, i, "channel '" + m->channel + "' made twice");
      } else if (const auto *ps = std::get_if<ev::PostSend>(&e)) {
        if (ps->tid != tid)
          report(ViolationKind::SendIdentityMismatch, tid, i,
                 "send records thread " + std::to_string(ps->tid) + " but belongs to thread " + std::to_string(tid));
        auto [it, fresh] = sends.try_emplace(SendKey{ps->tid, ps->pc}, SendSite{tid, i, ps->channel});
        if (!fresh)
          report(ViolationKind::DuplicateSendIdentity, tid, i,
                 "send identity (" + std::to_string(ps->tid) + "," + std::to_string(ps->pc) + ") already used");
      }
    }
  }

  for (const auto &[tid, trace] : ts.traces) {
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const auto *pr = std::get_if<ev::PostReceive>(&trace[i]);
      if (!pr) continue;
      if (pr->tid == kClosedTid || pr->pc == kClosedPc) {
        if (!pr->from_closed())
          report(ViolationKind::BadSentinel, tid, i, "closed sentinel must set both tid and pc to -1");
        continue;
      }
      SendKey key{pr->tid, pr->pc};
      auto it = sends.find(key);
      if (it == sends.end() || it->second.channel != pr->channel) {
        report(ViolationKind::UnmatchedReceive, tid, i, to_string(trace[i]) + " has no matching send");
        continue;
      }
      if (receives_per_send[key]++)
        report(ViolationKind::DuplicateReceive, tid, i, to_string(trace[i]) + " consumes an already received send");
    }
  }

  for (const auto &[key, site] : sends) {
    if (!ts.buffered(site.channel) && declared.contains(site.channel) && !receives_per_send.contains(key))
      report(ViolationKind::UnmatchedSend, site.thread, site.index,
             "unbuffered send on '" + site.channel + "' was never received");
  }

  for (const auto &[n, _] : signals)
    if (!waits.contains(n)) report(ViolationKind::UnmatchedSignal, 0, 0, "signal " + std::to_string(n) + " has no wait");
  for (const auto &[n, _] : waits)
    if (!signals.contains(n)) report(ViolationKind::UnmatchedWait, 0, 0, "wait " + std::to_string(n) + " has no signal");

  std::stable_sort(out.begin(), out.end(), [](const Violation &a, const Violation &b) {
    return std::tie(a.thread, a.index) < std::tie(b.thread, b.index);
  });
  return out;
}

std::string describe(const std::vector<Violation> &violations) {
  std::ostringstream os;
  for (const auto &v : violations)
    os << to_string(v.kind) << " at thread " << v.thread << " event " << v.index << ": " << v.reason << "\n";
  return os.str();
}

}  // namespace vcreplay
