#include "vcreplay/exec.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "vcreplay/trace_io.hpp"

namespace vcreplay::exec {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

const lang::Select &select_of(const lang::Command *cmd) { return std::get<lang::Select>(cmd->node); }

}  // namespace

bool operator==(const Value &a, const Value &b) {
  if (a.kind != b.kind) return false;
  if (a.kind != Value::Kind::Pair) return a.num == b.num;
  return a.pair->first == b.pair->first && a.pair->second == b.pair->second;
}

std::string to_string(const Value &v) {
  switch (v.kind) {
    case Value::Kind::Int: return std::to_string(v.num);
    case Value::Kind::Chan: return "chan#" + std::to_string(v.num);
    case Value::Kind::Pair: return "(" + to_string(v.pair->first) + "," + to_string(v.pair->second) + ")";
  }
  return "?";
}

std::string to_string(const Choice &c) {
  std::ostringstream os;
  os << "thread " << c.thread;
  if (c.case_index) os << " case " << *c.case_index;
  else os << " close";
  if (c.partner) os << " with thread " << *c.partner;
  if (c.partner_case) os << " case " << *c.partner_case;
  return os.str();
}

const char *to_string(RunStatus s) {
  switch (s) {
    case RunStatus::MainExited: return "MainExited";
    case RunStatus::Deadlock: return "Deadlock";
    case RunStatus::PanicSendOnClosed: return "PanicSendOnClosed";
    case RunStatus::PanicCloseOfClosed: return "PanicCloseOfClosed";
  }
  return "?";
}

std::size_t default_max_steps() {
  const char *env = std::getenv("VCREPLAY_MAX_STEPS");
  if (!env || !*env) return 100000;
  char *end = nullptr;
  unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || v == 0 || env[0] == '-')
    throw std::invalid_argument(std::string("VCREPLAY_MAX_STEPS must be a positive integer, got '") + env + "'");
  return static_cast<std::size_t>(v);
}

// ---------------------------------------------------------------------------
// Schedule files

Schedule parse_schedule(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error &e) {
    throw std::runtime_error(std::string("schedule syntax error: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("schedule must be a JSON object");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw std::runtime_error("schedule seed must be a non-negative integer");
    return Schedule::seeded(j["seed"].get<std::uint64_t>());
  }
  if (!j.contains("choices") || !j["choices"].is_array())
    throw std::runtime_error("schedule needs either \"seed\" or a \"choices\" array");
  std::vector<Choice> out;
  for (const auto &cj : j["choices"]) {
    if (!cj.is_object() || !cj.contains("thread") || !cj["thread"].is_number_integer())
      throw std::runtime_error("each schedule choice needs an integer \"thread\"");
    Choice c;
    c.thread = cj["thread"].get<ThreadId>();
    auto opt_index = [&](const char *key) -> std::optional<std::size_t> {
      if (!cj.contains(key) || cj[key].is_null()) return std::nullopt;
      if (!cj[key].is_number_unsigned()) throw std::runtime_error(std::string("schedule field '") + key + "' must be a non-negative integer");
      return cj[key].get<std::size_t>();
    };
    c.case_index = opt_index("case");
    if (auto p = opt_index("partner")) c.partner = static_cast<ThreadId>(*p);
    c.partner_case = opt_index("partner_case");
    out.push_back(c);
  }
  return Schedule::explicit_choices(std::move(out));
}

Schedule load_schedule(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schedule file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schedule(buf.str());
}

std::string write_schedule(const Schedule &s) {
  nlohmann::ordered_json j;
  if (const auto *seeded = std::get_if<Schedule::Seeded>(&s.kind)) {
    j["seed"] = seeded->seed;
  } else {
    j["choices"] = nlohmann::ordered_json::array();
    for (const auto &c : std::get<Schedule::Explicit>(s.kind).choices) {
      nlohmann::ordered_json cj;
      cj["thread"] = c.thread;
      if (c.case_index) cj["case"] = *c.case_index;
      if (c.partner) cj["partner"] = *c.partner;
      if (c.partner_case) cj["partner_case"] = *c.partner_case;
      j["choices"].push_back(std::move(cj));
    }
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// Machine

Machine::Machine(const lang::Program &program, RunOptions opts) : opts_(opts) {
  trace_.threads = 1;
  trace_.traces[1];
  Thread main;
  main.tid = 1;
  if (program.main && !program.main->commands.empty()) main.stack.push_back({program.main, 0, 0});
  threads_.push_back(std::move(main));
  settle();
}

const std::vector<std::size_t> &Machine::thread_path(ThreadId t) const {
  if (t < 1 || static_cast<std::size_t>(t) > threads_.size()) throw std::out_of_range("no such thread");
  return threads_[static_cast<std::size_t>(t) - 1].path;
}

void Machine::count_step() {
  if (++steps_ > opts_.max_steps)
    throw StepLimitError("interpreter exceeded " + std::to_string(opts_.max_steps) + " steps");
}

void Machine::emit(ThreadId t, LocalEvent e) { trace_.traces[t].push_back(std::move(e)); }

const Value *Machine::lookup(const Thread &t, const std::string &name) const {
  for (auto it = t.env.rbegin(); it != t.env.rend(); ++it)
    if (it->first == name) return &it->second;
  return nullptr;
}

void Machine::bind(Thread &t, const std::string &name, Value v) {
  for (auto &[n, val] : t.env)
    if (n == name) {
      val = std::move(v);
      return;
    }
  t.env.emplace_back(name, std::move(v));
}

Value Machine::eval(const Thread &t, const lang::Expr &e) const {
  switch (e.kind) {
    case lang::Expr::Kind::Int: return Value::integer(e.value);
    case lang::Expr::Kind::Var: {
      const Value *v = lookup(t, e.name);
      if (!v) throw RuntimeError("thread " + std::to_string(t.tid) + ": unbound variable '" + e.name + "'");
      return *v;
    }
    case lang::Expr::Kind::Pair: return Value::make_pair(eval(t, *e.lhs), eval(t, *e.rhs));
    case lang::Expr::Kind::Fst:
    case lang::Expr::Kind::Snd: {
      Value p = eval(t, *e.lhs);
      if (p.kind != Value::Kind::Pair)
        throw RuntimeError("thread " + std::to_string(t.tid) + ": fst/snd applied to non-pair " + to_string(p));
      return e.kind == lang::Expr::Kind::Fst ? p.pair->first : p.pair->second;
    }
  }
  throw RuntimeError("bad expression");
}

std::size_t Machine::channel_of(const Thread &t, const std::string &name, lang::SourceLoc loc) const {
  const Value *v = lookup(t, name);
  if (!v || v->kind != Value::Kind::Chan)
    throw RuntimeError(std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": '" + name +
                       "' is not a channel in thread " + std::to_string(t.tid));
  return static_cast<std::size_t>(v->num);
}

void Machine::enter_body(Thread &t, const lang::BlockPtr &body) {
  if (body && !body->commands.empty()) t.stack.push_back({body, 0, 0});
  t.state = ThreadState::Running;
  t.pending = nullptr;
}

void Machine::run_local(Thread &t) {
  // `t` may be invalidated by spawns (threads_ grows), so work through the index.
  const std::size_t idx = static_cast<std::size_t>(t.tid) - 1;
  while (threads_[idx].state == ThreadState::Running) {
    Thread &th = threads_[idx];
    if (th.stack.empty()) {
      th.state = ThreadState::Done;
      return;
    }
    Frame &f = th.stack.back();
    if (f.index >= f.block->commands.size()) {
      if (f.repeats_left > 0) {
        --f.repeats_left;
        f.index = 0;
      } else {
        th.stack.pop_back();
      }
      continue;
    }
    const lang::Command &cmd = f.block->commands[f.index++];
    count_step();
    std::visit(overloaded{
                   [&](const lang::Assign &a) {
                     ++th.pc;
                     Value v = eval(th, *a.value);
                     bind(th, a.target, std::move(v));
                   },
                   [&](const lang::MakeChan &m) {
                     ++th.pc;
                     std::size_t ordinal = 1;
                     auto it = std::find_if(makes_per_name_.begin(), makes_per_name_.end(),
                                            [&](const auto &p) { return p.first == m.target; });
                     if (it == makes_per_name_.end()) makes_per_name_.emplace_back(m.target, 1);
                     else ordinal = ++it->second;
                     ChannelId id = ordinal == 1 ? m.target : m.target + "@" + std::to_string(ordinal);
                     channels_.push_back({id, m.capacity, {}, false});
                     trace_.channels.push_back({id, m.capacity});
                     bind(th, m.target, Value::channel(channels_.size() - 1));
                     emit(th.tid, ev::ChanMake{id, m.capacity});
                   },
                   [&](const lang::Close &c) {
                     ++th.pc;
                     channel_of(th, c.channel, cmd.loc);  // fail early on a bad name
                     th.state = ThreadState::AtClose;
                     th.pending = &cmd;
                   },
                   [&](const lang::Spawn &s) {
                     ++th.pc;
                     ThreadId child = static_cast<ThreadId>(threads_.size() + 1);
                     emit(th.tid, ev::Signal{child});
                     Thread c;
                     c.tid = child;
                     c.env = th.env;
                     c.path = th.path;
                     c.path.push_back(th.spawned++);
                     if (s.body && !s.body->commands.empty()) c.stack.push_back({s.body, 0, 0});
                     trace_.threads = threads_.size() + 1;
                     trace_.traces[child].push_back(ev::Wait{child});
                     threads_.push_back(std::move(c));  // invalidates th
                   },
                   [&](const lang::Select &s) {
                     ++th.pc;
                     ev::Pre pre;
                     for (const auto &cs : s.cases) {
                       ChannelId ch = channels_[channel_of(th, cs.guard.channel, cmd.loc)].id;
                       pre.ops.push_back(cs.guard.kind == OpKind::Send ? PrimOp::send(ch) : PrimOp::receive(ch));
                     }
                     if (s.has_default()) pre.ops.push_back(PrimOp::default_case());
                     emit(th.tid, std::move(pre));
                     th.state = ThreadState::AtSelect;
                     th.pending = &cmd;
                   },
                   [&](const lang::Repeat &r) {
                     if (r.count > 0 && r.body && !r.body->commands.empty())
                       th.stack.push_back({r.body, 0, r.count - 1});
                   },
               },
               cmd.node);
  }
}

void Machine::settle() {
  for (std::size_t i = 0; i < threads_.size() && !status_; ++i) {
    if (threads_[i].state == ThreadState::Running) run_local(threads_[i]);
    if (threads_[0].state == ThreadState::Done) status_ = RunStatus::MainExited;
  }
  if (!status_ && enabled().empty()) status_ = RunStatus::Deadlock;
}

bool Machine::case_enabled(const Thread &t, std::size_t ci) const {
  const auto &sel = select_of(t.pending);
  const auto &guard = sel.cases[ci].guard;
  const Channel &ch = channels_[channel_of(t, guard.channel, t.pending->loc)];
  // A closed channel always lets a select proceed: receives drain or yield 0, sends panic.
  if (ch.closed) return true;
  if (ch.capacity > 0)
    return guard.kind == OpKind::Send ? ch.buffer.size() < ch.capacity : !ch.buffer.empty();
  OpKind want = guard.kind == OpKind::Send ? OpKind::Receive : OpKind::Send;
  for (const auto &u : threads_) {
    if (u.tid == t.tid || u.state != ThreadState::AtSelect) continue;
    for (const auto &uc : select_of(u.pending).cases)
      if (uc.guard.kind == want && channel_of(u, uc.guard.channel, u.pending->loc) ==
                                       channel_of(t, guard.channel, t.pending->loc))
        return true;
  }
  return false;
}

std::vector<Choice> Machine::enabled() const {
  std::vector<Choice> out;
  if (status_) return out;
  for (const auto &t : threads_) {
    if (t.state == ThreadState::AtClose) {
      out.push_back({t.tid, std::nullopt, std::nullopt, std::nullopt});
      continue;
    }
    if (t.state != ThreadState::AtSelect) continue;
    const auto &sel = select_of(t.pending);
    bool any = false;
    for (std::size_t ci = 0; ci < sel.cases.size(); ++ci) {
      const auto &guard = sel.cases[ci].guard;
      std::size_t cidx = channel_of(t, guard.channel, t.pending->loc);
      const Channel &ch = channels_[cidx];
      if (ch.capacity == 0 && !ch.closed) {
        if (guard.kind != OpKind::Send) {
          any = any || case_enabled(t, ci);
          continue;
        }
        for (const auto &u : threads_) {
          if (u.tid == t.tid || u.state != ThreadState::AtSelect) continue;
          const auto &ucases = select_of(u.pending).cases;
          for (std::size_t cj = 0; cj < ucases.size(); ++cj)
            if (ucases[cj].guard.kind == OpKind::Receive &&
                channel_of(u, ucases[cj].guard.channel, u.pending->loc) == cidx) {
              out.push_back({t.tid, ci, u.tid, cj});
              any = true;
            }
        }
      } else if (case_enabled(t, ci)) {
        out.push_back({t.tid, ci, std::nullopt, std::nullopt});
        any = true;
      }
    }
    if (!any && sel.has_default()) out.push_back({t.tid, sel.cases.size(), std::nullopt, std::nullopt});
  }
  return out;
}

void Machine::step(const Choice &want) {
  if (status_) throw ScheduleError("run already finished");
  std::vector<Choice> en = enabled();
  auto matches = [&](const Choice &e) {
    auto same = [](ThreadId t, std::optional<std::size_t> c, ThreadId et, std::optional<std::size_t> ec) {
      return t == et && (!c || c == ec);
    };
    if (same(want.thread, want.case_index, e.thread, e.case_index) &&
        (!want.partner || want.partner == e.partner) && (!want.partner_case || want.partner_case == e.partner_case))
      return want.case_index.has_value() == e.case_index.has_value();
    // The receiving side of a rendezvous may also be named.
    return e.partner && same(want.thread, want.case_index, *e.partner, e.partner_case) && want.case_index &&
           (!want.partner || want.partner == e.thread) && (!want.partner_case || want.partner_case == e.case_index);
  };
  auto it = std::find_if(en.begin(), en.end(), matches);
  if (it == en.end()) throw ScheduleError("choice not enabled: " + to_string(want));
  Choice c = *it;
  count_step();
  taken_.push_back(c);

  Thread &t = threads_[static_cast<std::size_t>(c.thread) - 1];
  const lang::Command *cmd = t.pending;

  if (!c.case_index) {
    const auto &cl = std::get<lang::Close>(cmd->node);
    Channel &ch = channels_[channel_of(t, cl.channel, cmd->loc)];
    if (ch.closed) {
      status_ = RunStatus::PanicCloseOfClosed;
      panic_ = PanicSite{t.tid, cmd->loc, ch.id};
      return;
    }
    ch.closed = true;
    emit(t.tid, ev::PostClose{ch.id});
    t.state = ThreadState::Running;
    t.pending = nullptr;
    settle();
    return;
  }

  const auto &sel = select_of(cmd);
  if (*c.case_index == sel.cases.size()) {
    emit(t.tid, ev::PostDefault{});
    enter_body(t, sel.default_body);
    settle();
    return;
  }

  const lang::Case &cs = sel.cases[*c.case_index];
  Channel &ch = channels_[channel_of(t, cs.guard.channel, cmd->loc)];
  if (cs.guard.kind == OpKind::Send) {
    if (ch.closed) {
      status_ = RunStatus::PanicSendOnClosed;
      panic_ = PanicSite{t.tid, cmd->loc, ch.id};
      return;
    }
    Value v = eval(t, *cs.guard.value);
    emit(t.tid, ev::PostSend{t.tid, t.pc, ch.id});
    if (ch.capacity > 0) {
      ch.buffer.push_back({std::move(v), t.tid, t.pc});
    } else {
      Thread &u = threads_[static_cast<std::size_t>(*c.partner) - 1];
      const lang::Case &uc = select_of(u.pending).cases[*c.partner_case];
      emit(u.tid, ev::PostReceive{t.tid, t.pc, ch.id});
      if (uc.guard.bind) bind(u, *uc.guard.bind, std::move(v));
      enter_body(u, uc.body);
    }
    enter_body(t, cs.body);
  } else {
    Value v = Value::integer(0);
    if (!ch.buffer.empty()) {
      Message m = std::move(ch.buffer.front());
      ch.buffer.erase(ch.buffer.begin());
      emit(t.tid, ev::PostReceive{m.tid, m.pc, ch.id});
      v = std::move(m.value);
    } else {
      emit(t.tid, ev::PostReceive{kClosedTid, kClosedPc, ch.id});
    }
    if (cs.guard.bind) bind(t, *cs.guard.bind, std::move(v));
    enter_body(t, cs.body);
  }
  settle();
}

RunOutcome Machine::outcome() const {
  RunOutcome o;
  o.trace = trace_;
  o.trace.threads = threads_.size();
  o.status = status_.value_or(RunStatus::Deadlock);
  for (const auto &t : threads_) o.final_pcs.push_back(t.pc);
  o.panic = panic_;
  o.choices = taken_;
  return o;
}

std::string Machine::state_key() const {
  std::ostringstream os;
  for (const auto &t : threads_) {
    os << 'T' << t.tid << ':' << static_cast<int>(t.state) << ':' << t.pc << '[';
    for (const auto &f : t.stack) os << f.block.get() << '/' << f.index << '/' << f.repeats_left << ';';
    os << ']';
    for (const auto &[n, v] : t.env) os << n << '=' << to_string(v) << ',';
    for (const auto &e : trace_.trace(t.tid)) os << vcreplay::to_string(e) << ' ';
    os << '\n';
  }
  for (const auto &c : channels_) {
    os << 'C' << c.id << (c.closed ? "!" : "") << '[';
    for (const auto &m : c.buffer) os << m.tid << '#' << m.pc << '=' << to_string(m.value) << ';';
    os << "]\n";
  }
  if (status_) os << "S" << static_cast<int>(*status_);
  return os.str();
}

// ---------------------------------------------------------------------------
// Drivers

RunOutcome run(const lang::Program &program, const Schedule &schedule, RunOptions opts) {
  Machine m(program, opts);
  if (const auto *seeded = std::get_if<Schedule::Seeded>(&schedule.kind)) {
    std::mt19937_64 rng(seeded->seed);
    while (!m.finished()) {
      auto en = m.enabled();
      m.step(en[static_cast<std::size_t>(rng() % en.size())]);
    }
  } else {
    const auto &choices = std::get<Schedule::Explicit>(schedule.kind).choices;
    std::size_t next = 0;
    while (!m.finished()) {
      if (next < choices.size()) m.step(choices[next++]);
      else m.step(m.enabled().front());
    }
  }
  return m.outcome();
}

std::vector<RunOutcome> enumerate_runs(const lang::Program &program, EnumerateOptions opts) {
  std::vector<RunOutcome> out;
  std::unordered_set<std::string> seen_outcomes;
  std::unordered_set<std::string> visited;
  std::vector<Machine> stack;
  stack.emplace_back(program, RunOptions{opts.max_steps});
  while (!stack.empty() && out.size() < opts.max_outcomes) {
    Machine m = std::move(stack.back());
    stack.pop_back();
    if (!visited.insert(m.state_key()).second) continue;
    if (m.finished()) {
      RunOutcome o = m.outcome();
      std::string key = std::string(to_string(o.status)) + "\n" + write_trace(o.trace);
      if (seen_outcomes.insert(key).second) out.push_back(std::move(o));
      continue;
    }
    auto en = m.enabled();
    for (auto it = en.rbegin(); it != en.rend(); ++it) {
      Machine next = m;
      next.step(*it);
      stack.push_back(std::move(next));
    }
  }
  return out;
}

}  // namespace vcreplay::exec
