#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vcreplay/lang.hpp"
#include "vcreplay/trace.hpp"

namespace vcreplay::exec {

/// Runtime value: integer, pair, or a reference to a channel instance.
struct Value {
  enum class Kind { Int, Pair, Chan };
  Kind kind = Kind::Int;
  std::int64_t num = 0;  // Int payload, or channel index for Chan
  std::shared_ptr<const std::pair<Value, Value>> pair;

  static Value integer(std::int64_t n) { return {Kind::Int, n, nullptr}; }
  static Value channel(std::size_t idx) { return {Kind::Chan, static_cast<std::int64_t>(idx), nullptr}; }
  static Value make_pair(Value a, Value b) {
    return {Kind::Pair, 0, std::make_shared<const std::pair<Value, Value>>(std::move(a), std::move(b))};
  }
  friend bool operator==(const Value &a, const Value &b);
};

std::string to_string(const Value &v);

/// Program-level runtime failure (unbound variable, type error, ...).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit schedule step that is not enabled in the current state.
class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The interpreter exceeded its step budget.
class StepLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * One scheduling decision. `thread` is the thread that commits; `case_index`
 * is the index into its pending select's guard list (the default branch uses
 * index = number of cases) and is absent for a pending close. For an
 * unbuffered rendezvous the partner thread and its case are named too; an
 * explicit choice may name either side of the rendezvous.
 */
struct Choice {
  ThreadId thread = 0;
  std::optional<std::size_t> case_index;
  std::optional<ThreadId> partner;
  std::optional<std::size_t> partner_case;
  friend bool operator==(const Choice &, const Choice &) = default;
};

std::string to_string(const Choice &c);

/// Seeded: uniform random among enabled choices. Explicit: follow the list,
/// then continue with the first enabled choice once it is exhausted.
struct Schedule {
  struct Seeded {
    std::uint64_t seed = 0;
  };
  struct Explicit {
    std::vector<Choice> choices;
  };
  std::variant<Seeded, Explicit> kind = Seeded{};

  static Schedule seeded(std::uint64_t seed) { return {Seeded{seed}}; }
  static Schedule explicit_choices(std::vector<Choice> c) { return {Explicit{std::move(c)}}; }
};

/// Schedule file: {"seed":N} or {"choices":[{"thread":t,"case":c,"partner":u,"partner_case":d}, ...]}.
Schedule parse_schedule(std::string_view json_text);
Schedule load_schedule(const std::filesystem::path &path);
std::string write_schedule(const Schedule &s);

enum class RunStatus { MainExited, Deadlock, PanicSendOnClosed, PanicCloseOfClosed };

const char *to_string(RunStatus s);

struct PanicSite {
  ThreadId thread = 0;
  lang::SourceLoc loc;
  ChannelId channel;
};

struct RunOutcome {
  TraceSet trace;
  RunStatus status = RunStatus::MainExited;
  std::vector<ProgramCounter> final_pcs;  // index t-1 holds thread t's counter
  std::optional<PanicSite> panic;
  std::vector<Choice> choices;  // the choices actually taken, replayable as Explicit
};

/// Default of RunOptions::max_steps: VCREPLAY_MAX_STEPS if set, else 100000.
std::size_t default_max_steps();

struct RunOptions {
  std::size_t max_steps = default_max_steps();
};

/**
 * Cooperative single-threaded interpreter state. Threads execute local
 * commands eagerly (ascending thread id) until they reach a select or a
 * close; those are the schedulable steps. Copyable, so callers can branch.
 */
class Machine {
 public:
  explicit Machine(const lang::Program &program, RunOptions opts = {});

  /// Enabled choices in canonical order (ascending thread, then case).
  std::vector<Choice> enabled() const;
  /// Applies a choice. Throws ScheduleError if it is not enabled.
  void step(const Choice &c);

  bool finished() const { return status_.has_value(); }
  std::optional<RunStatus> status() const { return status_; }
  RunOutcome outcome() const;

  /// Canonical spawn path of a thread: main is [], its k-th spawn is [k], etc.
  const std::vector<std::size_t> &thread_path(ThreadId t) const;
  std::size_t thread_count() const { return threads_.size(); }
  std::size_t steps() const { return steps_; }

  /// Compact key of the scheduling-relevant state, for search deduplication.
  std::string state_key() const;

  struct Frame {
    lang::BlockPtr block;
    std::size_t index = 0;
    std::size_t repeats_left = 0;  // further iterations of this block after the current one
  };
  struct Message {
    Value value;
    ThreadId tid = 0;
    ProgramCounter pc = 0;
  };
  struct Channel {
    ChannelId id;
    std::size_t capacity = 0;
    std::vector<Message> buffer;
    bool closed = false;
  };
  enum class ThreadState { Running, AtSelect, AtClose, Done };
  struct Thread {
    ThreadId tid = 0;
    std::vector<Frame> stack;
    std::vector<std::pair<std::string, Value>> env;
    ProgramCounter pc = 0;
    ThreadState state = ThreadState::Running;
    const lang::Command *pending = nullptr;  // the select or close being waited on
    std::vector<std::size_t> path;
    std::size_t spawned = 0;
  };

 private:
  void settle();
  void run_local(Thread &t);
  Value eval(const Thread &t, const lang::Expr &e) const;
  const Value *lookup(const Thread &t, const std::string &name) const;
  void bind(Thread &t, const std::string &name, Value v);
  std::size_t channel_of(const Thread &t, const std::string &name, lang::SourceLoc loc) const;
  bool case_enabled(const Thread &t, std::size_t ci) const;
  void enter_body(Thread &t, const lang::BlockPtr &body);
  void emit(ThreadId t, LocalEvent e);
  void count_step();

  RunOptions opts_;
  std::vector<Thread> threads_;  // index = tid - 1
  std::vector<Channel> channels_;
  std::vector<std::pair<std::string, std::size_t>> makes_per_name_;
  TraceSet trace_;
  std::optional<RunStatus> status_;
  std::optional<PanicSite> panic_;
  std::vector<Choice> taken_;
  std::size_t steps_ = 0;
};

/// Runs the program to completion under the schedule.
RunOutcome run(const lang::Program &program, const Schedule &schedule, RunOptions opts = {});

struct EnumerateOptions {
  std::size_t max_steps = default_max_steps();  // per run; exceeding it is an error
  std::size_t max_outcomes = 100000;           // stop exploring once this many distinct outcomes exist
};

/// Explores every scheduling sequence depth-first. Outcomes are deduplicated
/// by (status, canonical trace bytes) and returned in discovery order.
std::vector<RunOutcome> enumerate_runs(const lang::Program &program, EnumerateOptions opts = {});

}  // namespace vcreplay::exec
