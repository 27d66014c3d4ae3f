#include "vcreplay/analysis.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"

namespace vcreplay {

namespace {

bool same_select(const AnnotatedEvent &a, const AnnotatedEvent &b) {
  return a.thread == b.thread && a.origin.pos == b.origin.pos;
}

bool is_comm(const AnnotatedEvent &e) {
  return (e.kind == EventKind::Send || e.kind == EventKind::Receive) && e.pre.has_value();
}

EventKind opposite(EventKind k) { return k == EventKind::Send ? EventKind::Receive : EventKind::Send; }

bool concurrent(const AnnotatedEvent &a, const AnnotatedEvent &b) {
  return a.pre && b.pre && a.pre->compare(*b.pre) == Ordering::Concurrent;
}

/// Clock used to place an event in the stream.
const VectorClock &stream_clock(const AnnotatedEvent &e) { return e.pre ? *e.pre : *e.post; }

}  // namespace

EventRef ref_of(const AnnotatedEvent &e) {
  return {e.thread, e.kind, e.origin.pos, e.origin.case_index, e.status, e.pre, e.post};
}

std::size_t Report::count(const std::string &scenario) const {
  return static_cast<std::size_t>(
      std::count_if(findings.begin(), findings.end(), [&](const Finding &f) { return f.scenario == scenario; }));
}

void Report::merge(const Report &o) {
  ac += o.ac;
  mp += o.mp;
  asc += o.asc;
  sc += o.sc;
  dr = dr || o.dr;
  findings.insert(findings.end(), o.findings.begin(), o.findings.end());
  contention.insert(contention.end(), o.contention.begin(), o.contention.end());
}

// ---------------------------------------------------------------------------
// Match pairs and alternatives

std::vector<MatchPair> match_pairs(const std::vector<AnnotatedEvent> &events, const TraceSet &ts) {
  std::map<SendId, const AnnotatedEvent *> sends;
  for (const auto &e : events)
    if (e.committed() && e.kind == EventKind::Send && e.origin.pc) sends[SendId{e.thread, *e.origin.pc}] = &e;
  std::vector<MatchPair> out;
  for (const auto &e : events) {
    if (!e.committed() || e.kind != EventKind::Receive || !e.link || e.link->closed()) continue;
    auto it = sends.find(*e.link);
    if (it == sends.end())
      throw AnalysisError("committed receive in thread " + std::to_string(e.thread) + " has no committed send (" +
                          std::to_string(e.link->tid) + "," + std::to_string(e.link->pc) + ")");
    out.push_back({*it->second, e, e.channel, ts.buffered(e.channel)});
  }
  return out;
}

Report alternative_communications(const std::vector<AnnotatedEvent> &events, const std::vector<MatchPair> &pairs) {
  Report r;
  for (const auto &p : pairs) {
    for (const AnnotatedEvent *member : {&p.send, &p.receive}) {
      const AnnotatedEvent &partner = member == &p.send ? p.receive : p.send;
      for (const auto &c : events) {
        if (!is_comm(c) || c.channel != p.channel || c.kind != opposite(member->kind)) continue;
        if (same_select(c, partner) || same_select(c, *member)) continue;
        if (!concurrent(*member, c)) continue;
        r.findings.push_back({"ac", p.channel, ref_of(*member), ref_of(c), "alternative communication partner"});
        ++r.ac;
      }
    }
  }
  return r;
}

Report alternative_select_cases(const std::vector<AnnotatedEvent> &events) {
  Report r;
  for (const auto &ns : events) {
    if (ns.status != EventStatus::NotSelected || !is_comm(ns)) continue;
    std::size_t found = 0;
    std::optional<EventRef> later;
    for (const auto &c : events) {
      if (!is_comm(c) || c.channel != ns.channel || c.kind != opposite(ns.kind) || same_select(c, ns)) continue;
      Ordering o = ns.pre->compare(*c.pre);
      if (o == Ordering::Concurrent) {
        r.findings.push_back({"asc", ns.channel, ref_of(ns), ref_of(c), "not-selected case could communicate"});
        ++found;
      } else if (o == Ordering::Before && !later) {
        later = ref_of(c);
      }
    }
    r.asc += found;
    if (!found)
      r.findings.push_back({"asc-note", ns.channel, ref_of(ns), later,
                            later ? "every potential partner happens after the selected communication"
                                  : "no potential partner exists"});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Message contention

std::vector<AnnotatedEvent> stream_order(const std::vector<AnnotatedEvent> &events) {
  std::vector<AnnotatedEvent> out;
  for (const auto &e : events)
    if (e.pre || e.post) out.push_back(e);
  auto key = [](const AnnotatedEvent &e) {
    int rank = e.kind == EventKind::Init ? 0 : 1;
    return std::make_tuple(stream_clock(e).sum(), e.thread, e.origin.pos, rank, e.origin.case_index.value_or(0));
  };
  std::stable_sort(out.begin(), out.end(), [&](const auto &a, const auto &b) { return key(a) < key(b); });
  return out;
}

namespace {

struct Epoch {
  ThreadId thread;
  Stamp stamp;
  bool init;
};

struct EpochLists {
  std::vector<Epoch> receivers, senders;
};

std::size_t real_size(const std::vector<Epoch> &es) {
  return static_cast<std::size_t>(std::count_if(es.begin(), es.end(), [](const Epoch &e) { return !e.init; }));
}

/// One Single/Multiple rewrite of an epoch list by an event with pre clock cs in thread i.
void rewrite(std::vector<Epoch> &es, ThreadId i, const VectorClock &cs) {
  std::vector<Epoch> next{{i, cs[i], false}};
  for (const Epoch &e : es)
    if (!(cs[e.thread] > e.stamp) && e.thread != i) next.push_back(e);
  es = std::move(next);  // when cs > es every old epoch is dropped: the Single rule
}

ContentionStats &stats_for(std::map<std::pair<ChannelId, int>, ContentionStats> &m, const ChannelId &ch, EventKind d) {
  auto [it, fresh] = m.try_emplace({ch, d == EventKind::Send ? 0 : 1});
  if (fresh) {
    it->second.channel = ch;
    it->second.direction = d;
  }
  return it->second;
}

}  // namespace

Report message_contention(const std::vector<AnnotatedEvent> &events) {
  Report r;
  std::map<ChannelId, EpochLists> state;
  std::map<std::pair<ChannelId, int>, ContentionStats> stats;
  for (const auto &e : stream_order(events)) {
    if (e.kind == EventKind::Init) {
      std::vector<Epoch> es;
      const VectorClock &cs = *e.post;
      for (std::size_t j = 1; j <= cs.width(); ++j) es.push_back({static_cast<ThreadId>(j), cs[static_cast<ThreadId>(j)], true});
      state[e.channel] = {es, es};
      continue;
    }
    if (!is_comm(e)) continue;  // close and default events are irrelevant here
    EpochLists &lists = state[e.channel];
    std::vector<Epoch> &es = e.kind == EventKind::Send ? lists.senders : lists.receivers;
    rewrite(es, e.thread, *e.pre);
    std::size_t n = real_size(es);
    ContentionStats &st = stats_for(stats, e.channel, e.kind);
    st.max_concurrent = std::max(st.max_concurrent, n);
    if (n >= 2) {
      ++st.count;
      ++r.mp;
      r.findings.push_back({"mp", e.channel, ref_of(e), std::nullopt,
                            std::to_string(n) + " concurrent " + (e.kind == EventKind::Send ? "senders" : "receivers")});
    }
  }
  for (auto &[_, s] : stats) r.contention.push_back(s);
  return r;
}

std::vector<ContentionStats> message_contention_full(const std::vector<AnnotatedEvent> &events) {
  struct Live {
    ThreadId thread;
    VectorClock done;  // clock after the event: its post, or inc of its pre when it never committed
  };
  std::map<std::pair<ChannelId, int>, std::vector<Live>> live;
  std::map<std::pair<ChannelId, int>, ContentionStats> stats;
  for (const auto &e : stream_order(events)) {
    if (!is_comm(e)) continue;
    auto &set = live[{e.channel, e.kind == EventKind::Send ? 0 : 1}];
    std::vector<Live> next;
    for (auto &l : set)
      if (l.thread != e.thread && !l.done.leq(*e.pre)) next.push_back(std::move(l));  // drop what happened before e
    next.push_back({e.thread, e.pre->inc(e.thread)});
    set = std::move(next);
    ContentionStats &st = stats_for(stats, e.channel, e.kind);
    st.max_concurrent = std::max(st.max_concurrent, set.size());
    if (set.size() >= 2) ++st.count;
  }
  std::vector<ContentionStats> out;
  for (auto &[_, s] : stats) out.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// Send on closed

Report send_on_closed(const std::vector<AnnotatedEvent> &events) {
  Report r;
  for (const auto &s : events) {
    if (s.kind != EventKind::Send || !s.pre) continue;
    for (const auto &c : events) {
      if (c.kind != EventKind::Close || c.channel != s.channel) continue;
      Ordering o = s.pre->compare(*c.post);
      if (o == Ordering::After || o == Ordering::Concurrent) {
        r.findings.push_back({"sc", s.channel, ref_of(s), ref_of(c),
                              o == Ordering::After ? "send succeeds the close" : "send is concurrent to the close"});
        ++r.sc;
        break;
      }
    }
  }
  return r;
}

bool send_on_closed_epoch(const std::vector<AnnotatedEvent> &events) {
  std::map<ChannelId, std::vector<Epoch>> senders;
  std::map<ChannelId, std::vector<VectorClock>> closes;
  auto hazard = [](const Epoch &e, const VectorClock &close) { return e.stamp > close[e.thread]; };
  for (const auto &e : stream_order(events)) {
    if (e.kind == EventKind::Close) {
      for (const Epoch &ep : senders[e.channel])
        if (hazard(ep, *e.post)) return true;
      closes[e.channel].push_back(*e.post);
    } else if (e.kind == EventKind::Send && e.pre) {
      auto &es = senders[e.channel];
      rewrite(es, e.thread, *e.pre);
      for (const auto &c : closes[e.channel])
        if (hazard(es.front(), c)) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Deadlock recovery

Report deadlock_recovery(const std::vector<AnnotatedEvent> &events, TerminalClass terminal) {
  Report r;
  bool main_blocked = std::any_of(events.begin(), events.end(),
                                  [](const auto &e) { return e.thread == 1 && e.status == EventStatus::Dangling; });
  r.dr = main_blocked || terminal != TerminalClass::Exhaustive;
  if (!r.dr) return r;
  for (const auto &d : events) {
    if (d.status != EventStatus::Dangling || !is_comm(d)) continue;
    bool any = false;
    for (const auto &c : events) {
      if (!is_comm(c) || c.channel != d.channel || c.kind != opposite(d.kind)) continue;
      if (c.status == EventStatus::NotSelected || same_select(c, d)) continue;
      if (!concurrent(d, c)) continue;
      r.findings.push_back({"dr", d.channel, ref_of(d), ref_of(c),
                            c.committed() ? "could communicate where this committed event did"
                                          : "could communicate with this blocked event"});
      any = true;
    }
    if (!any) r.findings.push_back({"dr", d.channel, ref_of(d), std::nullopt, "no alternatives exist"});
  }
  return r;
}

Report analyze(const std::vector<AnnotatedEvent> &events, const TraceSet &ts, TerminalClass terminal,
               const AnalysisSelection &sel) {
  Report r;
  if (sel.ac) r.merge(alternative_communications(events, match_pairs(events, ts)));
  if (sel.asc) r.merge(alternative_select_cases(events));
  if (sel.mp) r.merge(message_contention(events));
  if (sel.sc) r.merge(send_on_closed(events));
  if (sel.dr) r.merge(deadlock_recovery(events, terminal));
  return r;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

nlohmann::ordered_json clock_json(const std::optional<VectorClock> &c) {
  if (!c) return nullptr;
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Stamp s : c->stamps()) a.push_back(s);
  return a;
}

nlohmann::ordered_json ref_json(const EventRef &e) {
  nlohmann::ordered_json j;
  j["thread"] = e.thread;
  j["kind"] = to_string(e.kind);
  j["pos"] = e.pos;
  j["case"] = e.case_index ? nlohmann::ordered_json(*e.case_index) : nlohmann::ordered_json(nullptr);
  j["status"] = to_string(e.status);
  j["pre"] = clock_json(e.pre);
  j["post"] = clock_json(e.post);
  return j;
}

std::string ref_text(const EventRef &e) {
  std::ostringstream os;
  os << "T" << e.thread << "@" << e.pos;
  if (e.case_index) os << "." << *e.case_index;
  os << " " << to_string(e.kind) << " (" << to_string(e.status) << ", pre=";
  if (e.pre) os << *e.pre; else os << "-";
  os << ")";
  return os.str();
}

}  // namespace

std::string report_json(const Report &r) {
  nlohmann::ordered_json j;
  j["ac"] = r.ac;
  j["mp"] = r.mp;
  j["asc"] = r.asc;
  j["sc"] = r.sc;
  j["dr"] = r.dr;
  j["findings"] = nlohmann::ordered_json::array();
  for (const auto &f : r.findings) {
    nlohmann::ordered_json fj;
    fj["scenario"] = f.scenario;
    fj["ch"] = f.channel;
    fj["event"] = ref_json(f.subject);
    fj["other"] = f.other ? ref_json(*f.other) : nlohmann::ordered_json(nullptr);
    fj["note"] = f.note;
    j["findings"].push_back(std::move(fj));
  }
  return j.dump();
}

std::string report_text(const Report &r, const AnalysisSelection &sel) {
  std::ostringstream os;
  if (sel.ac) os << "AC  alternative communications: " << r.ac << "\n";
  if (sel.mp) os << "MP  message contention:         " << r.mp << "\n";
  if (sel.asc) os << "ASC alternative select cases:   " << r.asc << "\n";
  if (sel.sc) os << "SC  send on closed:             " << r.sc << "\n";
  if (sel.dr) os << "DR  deadlock recovery:          " << (r.dr ? "true" : "false") << "\n";
  if (!r.findings.empty()) os << "findings:\n";
  for (const auto &f : r.findings) {
    os << "  [" << f.scenario << "] " << (f.channel.empty() ? "-" : f.channel) << ": " << ref_text(f.subject);
    if (f.other) os << " <-> " << ref_text(*f.other);
    os << " -- " << f.note << "\n";
  }
  return os.str();
}

}  // namespace vcreplay
