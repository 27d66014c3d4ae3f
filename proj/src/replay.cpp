#include "vcreplay/replay.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace vcreplay {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

struct SendIdHash {
  std::size_t operator()(const SendId &s) const {
    return std::hash<std::int64_t>{}(s.pc) * 1000003u ^ std::hash<ThreadId>{}(s.tid);
  }
};

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t clock_hash(std::uint64_t h, const std::optional<VectorClock> &c) {
  if (!c) return mix(h, 0xabcdef);
  for (Stamp s : c->stamps()) h = mix(h, s);
  return h;
}

EventKind kind_of(const PrimOp &op) {
  switch (op.kind) {
    case OpKind::Send: return EventKind::Send;
    case OpKind::Receive: return EventKind::Receive;
    case OpKind::Default: return EventKind::Default;
  }
  return EventKind::Default;
}

PrimOp op_of_post(const LocalEvent &post) {
  return std::visit(overloaded{
                        [](const ev::PostSend &p) { return PrimOp::send(p.channel); },
                        [](const ev::PostReceive &p) { return PrimOp::receive(p.channel); },
                        [](const auto &) { return PrimOp::default_case(); },
                    },
                    post);
}

std::size_t chosen_case(const ev::Pre &pre, const LocalEvent &post) {
  PrimOp want = op_of_post(post);
  auto it = std::find(pre.ops.begin(), pre.ops.end(), want);
  return static_cast<std::size_t>(it - pre.ops.begin());
}

}  // namespace

/// Read-only facts about a trace, computed once and shared by all states.
struct TraceIndex {
  std::size_t n = 0;
  std::unordered_map<ChannelId, std::size_t> channel_index;
  std::vector<std::size_t> capacity;
  std::vector<char> has_close;

  struct SendInfo {
    ThreadId thread = 0;
    std::size_t pos = 0;  // position of the post_snd event
    std::size_t channel = 0;
    ThreadId receiver = 0;  // 0 when never received
    std::size_t receiver_pos = 0;
    std::size_t queue = kNone;  // receive queue of (receiver, channel) for buffered sends
  };
  std::unordered_map<SendId, std::size_t, SendIdHash> send_of;
  std::vector<SendInfo> sends;
  std::vector<std::vector<std::size_t>> queues;  // send indices in receive order

  std::unordered_map<std::int64_t, std::pair<ThreadId, std::size_t>> signal_at, wait_at;

  std::size_t chan(const ChannelId &c) const { return channel_index.at(c); }
};

namespace {

std::shared_ptr<const TraceIndex> build_index(const TraceSet &ts) {
  auto idx = std::make_shared<TraceIndex>();
  idx->n = ts.threads;
  for (const auto &c : ts.channels) {
    idx->channel_index.emplace(c.id, idx->capacity.size());
    idx->capacity.push_back(c.capacity);
  }
  idx->has_close.assign(idx->capacity.size(), 0);

  for (const auto &[tid, trace] : ts.traces) {
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const LocalEvent &e = trace[i];
      if (const auto *s = std::get_if<ev::PostSend>(&e)) {
        idx->send_of.emplace(SendId{s->tid, s->pc}, idx->sends.size());
        idx->sends.push_back({tid, i, idx->chan(s->channel), 0, 0, kNone});
      } else if (const auto *c = std::get_if<ev::PostClose>(&e)) {
        idx->has_close[idx->chan(c->channel)] = 1;
      } else if (const auto *sg = std::get_if<ev::Signal>(&e)) {
        idx->signal_at[sg->n] = {tid, i};
      } else if (const auto *w = std::get_if<ev::Wait>(&e)) {
        idx->wait_at[w->n] = {tid, i};
      }
    }
  }
  // Receiver annotation (l, k) of every received send, and per-(l, channel)
  // receive queues of buffered sends in the order thread l receives them.
  std::map<std::pair<ThreadId, std::size_t>, std::size_t> queue_of;
  for (const auto &[tid, trace] : ts.traces) {
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const auto *r = std::get_if<ev::PostReceive>(&trace[i]);
      if (!r || r->from_closed()) continue;
      std::size_t si = idx->send_of.at(SendId{r->tid, r->pc});
      auto &info = idx->sends[si];
      info.receiver = tid;
      info.receiver_pos = i;
      if (idx->capacity[info.channel] > 0) {
        auto [it, fresh] = queue_of.try_emplace({tid, info.channel}, idx->queues.size());
        if (fresh) idx->queues.emplace_back();
        info.queue = it->second;
        idx->queues[it->second].push_back(si);
      }
    }
  }
  return idx;
}

}  // namespace

const char *to_string(EventKind k) {
  switch (k) {
    case EventKind::Send: return "send";
    case EventKind::Receive: return "receive";
    case EventKind::Close: return "close";
    case EventKind::Default: return "default";
    case EventKind::Init: return "init";
  }
  return "?";
}

const char *to_string(EventStatus s) {
  switch (s) {
    case EventStatus::Committed: return "committed";
    case EventStatus::NotSelected: return "not_selected";
    case EventStatus::Dangling: return "dangling";
  }
  return "?";
}

const char *to_string(TerminalClass t) {
  switch (t) {
    case TerminalClass::Exhaustive: return "exhaustive";
    case TerminalClass::Stuck: return "stuck";
    case TerminalClass::CompletelyStuck: return "completely_stuck";
  }
  return "?";
}

const char *to_string(ReplayMode m) {
  switch (m) {
    case ReplayMode::Strategy: return "strategy";
    case ReplayMode::Naive: return "naive";
    case ReplayMode::Backtrack: return "backtrack";
  }
  return "?";
}

std::string to_string(const AnnotatedEvent &e) {
  std::ostringstream os;
  os << "T" << e.thread << " " << to_string(e.kind);
  if (!e.channel.empty()) os << " " << e.channel;
  os << " pre=";
  if (e.pre) os << *e.pre; else os << "-";
  os << " post=";
  if (e.post) os << *e.post; else os << "-";
  os << " " << to_string(e.status) << " @" << e.origin.pos;
  if (e.origin.case_index) os << "." << *e.origin.case_index;
  return os.str();
}

std::string to_string(const Step &s) {
  static const char *names[] = {"SignalWait", "Sync", "Send", "Receive", "ReceiveClosed", "Close", "Default", "Make"};
  std::string out = std::string(names[static_cast<int>(s.rule)]) + "(" + std::to_string(s.thread);
  if (s.partner) out += "," + std::to_string(s.partner);
  return out + ")";
}

OriginKey origin_key(const AnnotatedEvent &e) {
  return {e.thread, e.origin.pos, e.origin.case_index.value_or(0), e.kind};
}

Assignment assignment_of(const std::vector<AnnotatedEvent> &events) {
  Assignment a;
  for (const auto &e : events) a[origin_key(e)] = ClockPair{e.pre, e.post};
  return a;
}

std::size_t BufferState::occupied() const {
  std::size_t n = 0;
  for (const auto &s : slots) {
    if (!s.occupant) break;
    ++n;
  }
  return n;
}

std::vector<AnnotatedEvent> ReplayResult::all_events() const {
  std::vector<AnnotatedEvent> out = events;
  out.insert(out.end(), dangling.begin(), dangling.end());
  return out;
}

// ---------------------------------------------------------------------------
// ReplayState

ReplayState::ReplayState(const TraceSet &ts) : ts_(&ts) {
  if (auto v = validate(ts); !v.empty()) throw ReplayError("trace is not replayable:\n" + describe(v));
  idx_ = build_index(ts);
  for (std::size_t t = 1; t <= ts.threads; ++t) clocks_.push_back(VectorClock::unit(static_cast<ThreadId>(t), ts.threads));
  cursors_.assign(ts.threads, 0);
  for (const auto &c : ts.channels) {
    if (c.capacity == 0) continue;
    BufferState b{c.id, c.capacity, {}};
    for (std::size_t i = 0; i < c.capacity; ++i) b.slots.push_back({std::nullopt, VectorClock::zero(ts.threads)});
    buffers_.emplace(c.id, std::move(b));
  }
  close_done_.assign(ts.channels.size(), 0);
  a1_next_.assign(idx_->queues.size(), 0);
  sent_.assign(idx_->sends.size(), 0);
}

std::size_t ReplayState::index(ThreadId t) const {
  if (t < 1 || static_cast<std::size_t>(t) > clocks_.size()) throw std::out_of_range("thread id out of range");
  return static_cast<std::size_t>(t) - 1;
}

const LocalEvent *ReplayState::at(ThreadId t, std::size_t offset) const {
  const LocalTrace &tr = ts_->trace(t);
  std::size_t p = cursors_[index(t)] + offset;
  return p < tr.size() ? &tr[p] : nullptr;
}

bool ReplayState::a1_blocked(const SendId &s, const ChannelId &) const {
  const auto &info = idx_->sends[idx_->send_of.at(s)];
  if (info.queue == kNone) return false;
  const auto &q = idx_->queues[info.queue];
  std::size_t next = a1_next_[info.queue];
  return next < q.size() && q[next] != idx_->send_of.at(s);
}

std::optional<Step> ReplayState::enabled_for(ThreadId t, bool strategy) const {
  const LocalEvent *e = at(t);
  if (!e) return std::nullopt;
  using R = Step::Rule;
  return std::visit(
      overloaded{
          [&](const ev::ChanMake &) -> std::optional<Step> { return Step{R::Make, t, 0}; },
          [&](const ev::Signal &s) -> std::optional<Step> {
            auto [w, pos] = idx_->wait_at.at(s.n);
            if (cursors_[index(w)] == pos) return Step{R::SignalWait, t, w};
            return std::nullopt;
          },
          [&](const ev::Wait &wt) -> std::optional<Step> {
            auto [s, pos] = idx_->signal_at.at(wt.n);
            if (cursors_[index(s)] == pos) return Step{R::SignalWait, s, t};
            return std::nullopt;
          },
          [&](const ev::PostClose &) -> std::optional<Step> { return Step{R::Close, t, 0}; },
          [&](const ev::Pre &) -> std::optional<Step> {
            const LocalEvent *post = at(t, 1);
            if (!post) return std::nullopt;
            if (std::holds_alternative<ev::PostDefault>(*post)) return Step{R::Default, t, 0};
            if (const auto *ps = std::get_if<ev::PostSend>(post)) {
              if (ts_->buffered(ps->channel)) {
                if (buffers_.at(ps->channel).full()) return std::nullopt;
                if (strategy && a1_blocked(SendId{ps->tid, ps->pc}, ps->channel)) return std::nullopt;
                return Step{R::Send, t, 0};
              }
              const auto &info = idx_->sends[idx_->send_of.at(SendId{ps->tid, ps->pc})];
              if (info.receiver && cursors_[index(info.receiver)] + 1 == info.receiver_pos)
                return Step{R::Sync, t, info.receiver};
              return std::nullopt;
            }
            if (const auto *pr = std::get_if<ev::PostReceive>(post)) {
              if (pr->from_closed()) {
                std::size_t c = idx_->chan(pr->channel);
                if (idx_->has_close[c] && !close_done_[c]) return std::nullopt;
                return Step{R::ReceiveClosed, t, 0};
              }
              if (ts_->buffered(pr->channel)) {
                const auto &head = buffers_.at(pr->channel).slots.front();
                if (head.occupant && *head.occupant == SendId{pr->tid, pr->pc}) return Step{R::Receive, t, 0};
                return std::nullopt;
              }
              const auto &info = idx_->sends[idx_->send_of.at(SendId{pr->tid, pr->pc})];
              if (cursors_[index(info.thread)] + 1 == info.pos) return Step{R::Sync, info.thread, t};
              return std::nullopt;
            }
            return std::nullopt;
          },
          [&](const auto &) -> std::optional<Step> { return std::nullopt; },
      },
      *e);
}

std::vector<Step> ReplayState::enabled(bool strategy) const {
  std::vector<Step> out;
  for (std::size_t i = 1; i <= clocks_.size(); ++i) {
    ThreadId t = static_cast<ThreadId>(i);
    if (auto s = enabled_for(t, strategy); s && s->thread == t) out.push_back(*s);
  }
  return out;
}

void ReplayState::emit_select(ThreadId t, std::size_t pre_pos, std::size_t chosen, const VectorClock &pre,
                              const VectorClock &post, std::optional<SendId> link,
                              std::optional<ProgramCounter> pc) {
  const auto &ops = std::get<ev::Pre>(ts_->trace(t)[pre_pos]).ops;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    AnnotatedEvent e;
    e.thread = t;
    e.kind = kind_of(ops[i]);
    e.channel = ops[i].channel;
    e.pre = pre;
    e.origin.pos = pre_pos;
    e.origin.case_index = i;
    if (i == chosen) {
      e.post = post;
      e.status = EventStatus::Committed;
      if (e.kind == EventKind::Send) e.origin.pc = pc;
      if (e.kind == EventKind::Receive) e.link = link;
    } else {
      e.status = EventStatus::NotSelected;
    }
    annotation_hash_ ^= clock_hash(clock_hash(mix(mix(mix(0, static_cast<std::uint64_t>(t)), pre_pos), i), e.pre), e.post);
    events_.push_back(std::move(e));
  }
}

void ReplayState::apply(const Step &s) {
  using R = Step::Rule;
  const ThreadId t = s.thread;
  const std::size_t ti = index(t);
  switch (s.rule) {
    case R::Make: {
      const auto &m = std::get<ev::ChanMake>(*at(t));
      AnnotatedEvent e;
      e.thread = t;
      e.kind = EventKind::Init;
      e.channel = m.channel;
      e.post = clocks_[ti];
      e.origin.pos = cursors_[ti];
      annotation_hash_ ^= clock_hash(mix(mix(7, static_cast<std::uint64_t>(t)), e.origin.pos), e.post);
      events_.push_back(std::move(e));
      ++cursors_[ti];
      break;
    }
    case R::SignalWait: {
      const std::size_t wi = index(s.partner);
      VectorClock cs1 = clocks_[ti];
      clocks_[ti] = cs1.inc(t);
      clocks_[wi] = cs1.inc(s.partner);
      ++cursors_[ti];
      ++cursors_[wi];
      break;
    }
    case R::Sync: {
      const std::size_t ri = index(s.partner);
      const std::size_t spos = cursors_[ti], rpos = cursors_[ri];
      const LocalTrace &st = ts_->trace(t), &rt = ts_->trace(s.partner);
      const auto &ps = std::get<ev::PostSend>(st[spos + 1]);
      VectorClock pre_s = clocks_[ti], pre_r = clocks_[ri];
      VectorClock post = pre_s.inc(t).join(pre_r.inc(s.partner));
      emit_select(t, spos, chosen_case(std::get<ev::Pre>(st[spos]), st[spos + 1]), pre_s, post, std::nullopt, ps.pc);
      emit_select(s.partner, rpos, chosen_case(std::get<ev::Pre>(rt[rpos]), rt[rpos + 1]), pre_r, post,
                  SendId{ps.tid, ps.pc}, std::nullopt);
      clocks_[ti] = post;
      clocks_[ri] = post;
      cursors_[ti] += 2;
      cursors_[ri] += 2;
      break;
    }
    case R::Send: {
      const std::size_t pos = cursors_[ti];
      const LocalTrace &tr = ts_->trace(t);
      const auto &ps = std::get<ev::PostSend>(tr[pos + 1]);
      BufferState &b = buffers_.at(ps.channel);
      std::size_t slot = b.occupied();
      VectorClock pre = clocks_[ti];
      VectorClock post = pre.inc(t).join(b.slots[slot].clock);
      SendId id{ps.tid, ps.pc};
      b.slots[slot] = Slot{id, post};
      std::size_t si = idx_->send_of.at(id);
      sent_[si] = 1;
      if (std::size_t q = idx_->sends[si].queue; q != kNone) {
        const auto &queue = idx_->queues[q];
        while (a1_next_[q] < queue.size() && sent_[queue[a1_next_[q]]]) ++a1_next_[q];
      }
      emit_select(t, pos, chosen_case(std::get<ev::Pre>(tr[pos]), tr[pos + 1]), pre, post, std::nullopt, ps.pc);
      clocks_[ti] = post;
      cursors_[ti] += 2;
      break;
    }
    case R::Receive: {
      const std::size_t pos = cursors_[ti];
      const LocalTrace &tr = ts_->trace(t);
      const auto &pr = std::get<ev::PostReceive>(tr[pos + 1]);
      BufferState &b = buffers_.at(pr.channel);
      VectorClock pre = clocks_[ti];
      VectorClock post = pre.inc(t).join(b.slots.front().clock);
      b.slots.pop_front();
      b.slots.push_back(Slot{std::nullopt, post});
      emit_select(t, pos, chosen_case(std::get<ev::Pre>(tr[pos]), tr[pos + 1]), pre, post, SendId{pr.tid, pr.pc},
                  std::nullopt);
      clocks_[ti] = post;
      cursors_[ti] += 2;
      break;
    }
    case R::ReceiveClosed:
    case R::Default: {
      const std::size_t pos = cursors_[ti];
      const LocalTrace &tr = ts_->trace(t);
      VectorClock pre = clocks_[ti];
      VectorClock post = pre.inc(t);
      std::optional<SendId> link;
      if (s.rule == R::ReceiveClosed) link = SendId{kClosedTid, kClosedPc};
      emit_select(t, pos, chosen_case(std::get<ev::Pre>(tr[pos]), tr[pos + 1]), pre, post, link, std::nullopt);
      clocks_[ti] = post;
      cursors_[ti] += 2;
      break;
    }
    case R::Close: {
      const auto &c = std::get<ev::PostClose>(*at(t));
      AnnotatedEvent e;
      e.thread = t;
      e.kind = EventKind::Close;
      e.channel = c.channel;
      e.post = clocks_[ti].inc(t);
      e.origin.pos = cursors_[ti];
      clocks_[ti] = *e.post;
      close_done_[idx_->chan(c.channel)] = 1;
      annotation_hash_ ^= clock_hash(mix(mix(11, static_cast<std::uint64_t>(t)), e.origin.pos), e.post);
      events_.push_back(std::move(e));
      ++cursors_[ti];
      break;
    }
  }
  steps_.push_back(s);
}

TerminalClass ReplayState::classify() const {
  bool exhaustive = true;
  for (std::size_t i = 1; i <= clocks_.size() && exhaustive; ++i) {
    const LocalTrace &tr = ts_->trace(static_cast<ThreadId>(i));
    for (std::size_t p = cursors_[i - 1]; p < tr.size(); ++p)
      if (!std::holds_alternative<ev::Pre>(tr[p])) {
        exhaustive = false;
        break;
      }
  }
  if (exhaustive) return TerminalClass::Exhaustive;
  for (std::size_t i = 1; i <= clocks_.size(); ++i) {
    ThreadId t = static_cast<ThreadId>(i);
    const LocalEvent *e = at(t);
    const LocalEvent *post = at(t, 1);
    if (!e || !std::holds_alternative<ev::Pre>(*e) || !post) continue;
    if (const auto *pr = std::get_if<ev::PostReceive>(post); pr && ts_->buffered(pr->channel)) {
      if (!buffers_.at(pr->channel).empty()) return TerminalClass::Stuck;
    } else if (const auto *ps = std::get_if<ev::PostSend>(post); ps && ts_->buffered(ps->channel)) {
      if (!buffers_.at(ps->channel).full()) return TerminalClass::Stuck;
    }
  }
  return TerminalClass::CompletelyStuck;
}

std::string ReplayState::shape_key() const {
  std::string k;
  k.reserve(cursors_.size() * 4 + 16);
  for (std::size_t c : cursors_) k += std::to_string(c) + ",";
  for (const auto &[id, b] : buffers_) {
    k += "|";
    for (const auto &s : b.slots)
      if (s.occupant) k += std::to_string(s.occupant->tid) + ":" + std::to_string(s.occupant->pc) + ";";
  }
  return k;
}

std::string ReplayState::full_key() const {
  std::string k = shape_key();
  for (const auto &c : clocks_) k += "#" + c.str();
  for (const auto &[id, b] : buffers_)
    for (const auto &s : b.slots) k += "/" + s.clock.str();
  k += "h" + std::to_string(annotation_hash_);
  return k;
}

std::vector<AnnotatedEvent> annotate_dangling(const ReplayState &state) {
  std::vector<AnnotatedEvent> out;
  const TraceSet &ts = state.trace();
  for (std::size_t i = 1; i <= ts.threads; ++i) {
    ThreadId t = static_cast<ThreadId>(i);
    const LocalTrace &tr = ts.trace(t);
    std::size_t pos = state.cursor(t);
    if (pos >= tr.size()) continue;
    const auto *pre = std::get_if<ev::Pre>(&tr[pos]);
    if (!pre) continue;
    for (std::size_t c = 0; c < pre->ops.size(); ++c) {
      if (pre->ops[c].kind == OpKind::Default) continue;
      AnnotatedEvent e;
      e.thread = t;
      e.kind = kind_of(pre->ops[c]);
      e.channel = pre->ops[c].channel;
      e.pre = state.clock(t);
      e.status = EventStatus::Dangling;
      e.origin.pos = pos;
      e.origin.case_index = c;
      out.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Drivers

namespace {

std::vector<ThreadId> thread_order(std::size_t n, const std::vector<ThreadId> &priority) {
  std::vector<ThreadId> order;
  std::vector<char> seen(n + 1, 0);
  for (ThreadId t : priority)
    if (t >= 1 && static_cast<std::size_t>(t) <= n && !seen[static_cast<std::size_t>(t)]) {
      order.push_back(t);
      seen[static_cast<std::size_t>(t)] = 1;
    }
  for (std::size_t t = 1; t <= n; ++t)
    if (!seen[t]) order.push_back(static_cast<ThreadId>(t));
  return order;
}

/// Applies every enabled non-Send rule until only buffered sends remain.
void apply_eager(ReplayState &st) {
  bool progress = true;
  while (progress) {
    progress = false;
    for (const Step &s : st.enabled(false)) {
      if (s.rule == Step::Rule::Send) continue;
      // Earlier firings never disable later ones, but re-check the acting thread.
      auto now = st.enabled_for(s.thread, false);
      if (now && *now == s) {
        st.apply(s);
        progress = true;
      }
    }
  }
}

ReplayResult finish(const ReplayState &st) {
  ReplayResult r;
  r.events = st.events();
  r.dangling = annotate_dangling(st);
  r.terminal = st.classify();
  r.steps = st.steps();
  r.buffers = st.buffers();
  for (std::size_t t = 1; t <= st.trace().threads; ++t) r.final_clocks.push_back(st.clock(static_cast<ThreadId>(t)));
  return r;
}

void run_linear(ReplayState &st, bool strategy, const std::vector<ThreadId> &order) {
  for (;;) {
    std::optional<Step> pick;
    for (ThreadId t : order)
      if ((pick = st.enabled_for(t, strategy))) break;
    if (!pick) return;
    st.apply(*pick);
  }
}

ReplayResult run_backtrack(const TraceSet &ts, const ReplayOptions &opts) {
  std::vector<ReplayState> stack;
  stack.emplace_back(ts);
  std::unordered_set<std::string> visited;
  std::optional<ReplayState> fallback;
  std::size_t nodes = 0;
  bool limit = false;
  while (!stack.empty()) {
    ReplayState st = std::move(stack.back());
    stack.pop_back();
    apply_eager(st);
    if (!visited.insert(st.shape_key()).second) continue;
    if (++nodes > opts.backtrack_limit) {
      limit = true;
      if (!fallback) fallback = std::move(st);
      break;
    }
    std::vector<Step> sends;
    for (const Step &s : st.enabled(opts.backtrack_with_strategy))
      if (s.rule == Step::Rule::Send) sends.push_back(s);
    if (sends.empty()) {
      if (!st.terminal()) continue;  // only strategy-withheld sends remain: a dead branch
      if (st.classify() == TerminalClass::Exhaustive) {
        ReplayResult r = finish(st);
        r.nodes = nodes;
        return r;
      }
      if (!fallback) fallback = st;
      continue;
    }
    for (auto it = sends.rbegin(); it != sends.rend(); ++it) {
      ReplayState next = st;
      next.apply(*it);
      stack.push_back(std::move(next));
    }
  }
  if (!fallback || !fallback->terminal()) {
    ReplayState st(ts);
    run_linear(st, true, thread_order(ts.threads, {}));
    fallback = std::move(st);
  }
  ReplayResult r = finish(*fallback);
  r.limit_exceeded = limit;
  r.nodes = nodes;
  return r;
}

}  // namespace

ReplayResult replay(const TraceSet &ts, const ReplayOptions &opts) {
  if (opts.mode == ReplayMode::Backtrack) return run_backtrack(ts, opts);
  ReplayState st(ts);
  if (opts.mode == ReplayMode::Naive && opts.priority.empty()) {
    std::mt19937_64 rng(opts.seed);
    for (;;) {
      std::vector<Step> en = st.enabled(false);
      if (en.empty()) break;
      st.apply(en[static_cast<std::size_t>(rng() % en.size())]);
    }
  } else {
    run_linear(st, opts.mode == ReplayMode::Strategy, thread_order(ts.threads, opts.priority));
  }
  return finish(st);
}

Enumeration enumerate_annotations(const TraceSet &ts, std::size_t limit, std::size_t max_nodes) {
  Enumeration out;
  std::set<Assignment> found;
  std::unordered_set<std::string> visited;
  std::vector<ReplayState> stack;
  stack.emplace_back(ts);
  while (!stack.empty()) {
    if (out.assignments.size() >= limit || out.nodes >= max_nodes) {
      out.truncated = true;
      break;
    }
    ReplayState st = std::move(stack.back());
    stack.pop_back();
    apply_eager(st);
    if (!visited.insert(st.full_key()).second) continue;
    ++out.nodes;
    std::vector<Step> sends = st.enabled(false);
    if (sends.empty()) {
      if (st.classify() != TerminalClass::Exhaustive) continue;
      std::vector<AnnotatedEvent> events = st.events();
      auto dangling = annotate_dangling(st);
      events.insert(events.end(), dangling.begin(), dangling.end());
      Assignment a = assignment_of(events);
      if (found.insert(a).second) {
        out.assignments.push_back(std::move(a));
        out.event_lists.push_back(std::move(events));
      }
      continue;
    }
    for (auto it = sends.rbegin(); it != sends.rend(); ++it) {
      ReplayState next = st;
      next.apply(*it);
      stack.push_back(std::move(next));
    }
  }
  return out;
}

std::vector<exec::Choice> implied_schedule(const TraceSet &ts, const std::vector<Step> &steps) {
  using R = Step::Rule;
  std::vector<std::size_t> cur(ts.threads + 1, 0);
  std::vector<exec::Choice> out;
  std::optional<std::size_t> main_final;
  const std::size_t main_len = ts.trace(1).size();
  auto case_at = [&](ThreadId t) {
    const LocalTrace &tr = ts.trace(t);
    std::size_t p = cur[static_cast<std::size_t>(t)];
    return chosen_case(std::get<ev::Pre>(tr[p]), tr[p + 1]);
  };
  for (const Step &s : steps) {
    const auto ti = static_cast<std::size_t>(s.thread);
    const auto pi = static_cast<std::size_t>(s.partner);
    bool choice = true;
    switch (s.rule) {
      case R::Make: ++cur[ti]; choice = false; break;
      case R::SignalWait: ++cur[ti]; ++cur[pi]; choice = false; break;
      case R::Sync:
        out.push_back({s.thread, case_at(s.thread), s.partner, case_at(s.partner)});
        cur[ti] += 2;
        cur[pi] += 2;
        break;
      case R::Close: out.push_back({s.thread, std::nullopt, std::nullopt, std::nullopt}); ++cur[ti]; break;
      default:
        out.push_back({s.thread, case_at(s.thread), std::nullopt, std::nullopt});
        cur[ti] += 2;
        break;
    }
    if (choice && !main_final && (s.thread == 1 || s.partner == 1) && cur[1] == main_len) main_final = out.size() - 1;
  }
  if (main_final && *main_final + 1 != out.size()) {
    // The move is only sound if the reordered firings still replay with the
    // same links; check it on a fresh state.
    std::size_t final_step = 0;
    for (std::size_t i = 0, k = 0; i < steps.size(); ++i) {
      const R r = steps[i].rule;
      if (r == R::Make || r == R::SignalWait) continue;
      if (k++ == *main_final) final_step = i;
    }
    std::vector<Step> moved = steps;
    moved.erase(moved.begin() + static_cast<std::ptrdiff_t>(final_step));
    moved.push_back(steps[final_step]);
    ReplayState st(ts);
    for (const Step &s : moved) {
      auto now = st.enabled_for(s.thread, false);
      if (!now || *now != s)
        throw ReplayError("replay order cannot be executed: the main thread finishes before " + to_string(s) +
                          "; use executable_replay()");
      st.apply(s);
    }
    exec::Choice last = out[*main_final];
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(*main_final));
    out.push_back(last);
  }
  return out;
}

std::optional<ReplayResult> executable_replay(const TraceSet &ts, std::size_t max_nodes) {
  using R = Step::Rule;
  const std::size_t main_len = ts.trace(1).size();
  auto settle = [](ReplayState &st) {
    for (bool progress = true; progress;) {
      progress = false;
      for (const Step &s : st.enabled(false))
        if ((s.rule == R::Make || s.rule == R::SignalWait) && st.enabled_for(s.thread, false) == s) {
          st.apply(s);
          progress = true;
        }
    }
  };
  std::vector<ReplayState> stack;
  stack.emplace_back(ts);
  std::unordered_set<std::string> visited;
  std::size_t nodes = 0;
  while (!stack.empty() && nodes < max_nodes) {
    ReplayState st = std::move(stack.back());
    stack.pop_back();
    settle(st);
    if (!visited.insert(st.shape_key()).second) continue;
    ++nodes;
    std::vector<Step> en = st.enabled(false);
    if (en.empty()) {
      if (st.classify() != TerminalClass::Exhaustive) continue;
      ReplayResult r = finish(st);
      r.nodes = nodes;
      return r;
    }
    for (auto it = en.rbegin(); it != en.rend(); ++it) {
      ReplayState next = st;
      next.apply(*it);
      const bool completes_main = (it->thread == 1 || it->partner == 1) && next.cursor(1) == main_len;
      if (completes_main) {
        // The main thread's last firing must leave nothing else to do.
        settle(next);
        if (!next.terminal()) continue;
      }
      stack.push_back(std::move(next));
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::ordered_json clock_json(const std::optional<VectorClock> &c) {
  if (!c) return nullptr;
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Stamp s : c->stamps()) a.push_back(s);
  return a;
}

nlohmann::ordered_json event_obj(const AnnotatedEvent &e) {
  nlohmann::ordered_json j;
  j["thread"] = e.thread;
  j["kind"] = to_string(e.kind);
  j["ch"] = e.channel.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(e.channel);
  j["pre"] = clock_json(e.pre);
  j["post"] = clock_json(e.post);
  j["committed"] = e.committed();
  j["status"] = to_string(e.status);
  nlohmann::ordered_json o;
  o["pos"] = e.origin.pos;
  o["pc"] = e.origin.pc ? nlohmann::ordered_json(*e.origin.pc) : nlohmann::ordered_json(nullptr);
  o["case"] = e.origin.case_index ? nlohmann::ordered_json(*e.origin.case_index) : nlohmann::ordered_json(nullptr);
  j["origin"] = std::move(o);
  return j;
}

}  // namespace

std::string event_json(const AnnotatedEvent &e) { return event_obj(e).dump(); }

std::string replay_json(const ReplayResult &r) {
  nlohmann::ordered_json j;
  j["terminal"] = to_string(r.terminal);
  j["events"] = nlohmann::ordered_json::array();
  for (const auto &e : r.all_events()) j["events"].push_back(event_obj(e));
  if (r.limit_exceeded) j["limit_exceeded"] = true;
  return j.dump();
}

}  // namespace vcreplay
