#include <cstdlib>
#include <variant>

#include "doctest.h"
#include "fixtures.hpp"
#include "vcreplay/exec.hpp"
#include "vcreplay/lang.hpp"
#include "vcreplay/trace_io.hpp"

using namespace vcreplay;
using namespace vcreplay::exec;
using namespace fixtures;

namespace {
RunOutcome run_src(const std::string &src, const Schedule &s = Schedule::seeded(0)) {
  return run(lang::parse(src), s);
}
Choice ch(ThreadId t, std::optional<std::size_t> c = 0, std::optional<ThreadId> p = {},
          std::optional<std::size_t> pc = {}) {
  return Choice{t, c, p, pc};
}
const char *kReceiveRace = "x := make(chan, 0)\nspawn { x <- 1 }\nspawn { <-x }\n<-x\n";
}  // namespace

TEST_CASE("pinned schedule reproduces the five-thread trace") {
  RunOutcome o = run(lang::parse_file(corpus("sync_chain.mp")), load_schedule(corpus("sync_chain.schedule.json")));
  CHECK(o.status == RunStatus::MainExited);
  TraceSet expected = sync_chain();
  for (ThreadId t : {2, 3, 5}) CHECK(o.trace.trace(t) == expected.trace(t));
  // Thread 4 additionally reports completion on d after its recorded events.
  const LocalTrace &t4 = o.trace.trace(4);
  REQUIRE(t4.size() == expected.trace(4).size() + 2);
  CHECK(LocalTrace(t4.begin(), t4.begin() + 5) == expected.trace(4));
  CHECK(o.trace == load_trace(corpus("sync_chain.trace.json")));
}

TEST_CASE("receive race: terminating and deadlocking schedules") {
  SUBCASE("main receives from the sender") {
    RunOutcome o = run_src(kReceiveRace, Schedule::explicit_choices({ch(1, 0, 2, 0)}));
    CHECK(o.status == RunStatus::MainExited);
    CHECK(o.trace.trace(3).back() == pre_rcv("x"));
  }
  SUBCASE("the helper receives: main is left blocked") {
    RunOutcome o = run_src(kReceiveRace, Schedule::explicit_choices({ch(3, 0, 2, 0)}));
    CHECK(o.status == RunStatus::Deadlock);
    CHECK(o.trace.trace(1).back() == pre_rcv("x"));
    CHECK(o.trace.trace(3).back() == post_rcv(2, 1, "x"));
  }
  SUBCASE("a choice may name the receiving side") {
    RunOutcome o = run_src(kReceiveRace, Schedule::explicit_choices({ch(2, 0, 3, 0)}));
    CHECK(o.status == RunStatus::Deadlock);
  }
}

TEST_CASE("program counters count executed commands") {
  RunOutcome o = run(lang::parse_file(corpus("buffer_one.mp")), load_schedule(corpus("buffer_one.schedule.json")));
  CHECK(o.trace.trace(1)[2] == pre_snd("x"));
  CHECK(o.trace.trace(1)[3] == post_snd(1, 3, "x"));
  CHECK(o.trace.trace(2)[2] == post_snd(2, 1, "x"));
}

TEST_CASE("close semantics") {
  CHECK(run_src("x := make(chan, 0); close(x); x <- 1").status == RunStatus::PanicSendOnClosed);
  CHECK(run_src("x := make(chan, 0); close(x); close(x)").status == RunStatus::PanicCloseOfClosed);
  RunOutcome o = run_src("x := make(chan, 1); close(x); v := <-x; y := make(chan, 1); y <- v");
  CHECK(o.status == RunStatus::MainExited);
  CHECK(o.trace.trace(1)[3] == post_rcv_closed("x"));
  RunOutcome p = run_src("x := make(chan, 0); close(x); x <- 1");
  REQUIRE(p.panic);
  CHECK(p.panic->channel == "x");
  CHECK(p.panic->loc.line == 1);
}

TEST_CASE("default fires only when no case is enabled") {
  RunOutcome a = run_src("x := make(chan, 1)\nselect { case x <- 1: default: }\n");
  CHECK(a.trace.trace(1).back() == post_snd(1, 2, "x"));
  RunOutcome b = run_src("x := make(chan, 0)\nselect { case x <- 1: default: }\n");
  CHECK(b.trace.trace(1).back() == post_default());
}

TEST_CASE("channel instances made under one name are numbered") {
  RunOutcome o = run_src("x := make(chan, 1); x := make(chan, 1); x <- 1");
  REQUIRE(o.trace.channels.size() == 2);
  CHECK(o.trace.channels[1].id == "x@2");
  CHECK(o.trace.trace(1).back() == post_snd(1, 3, "x@2"));
}

TEST_CASE("values flow through channels") {
  RunOutcome o = run_src("x := make(chan, 1); x <- (1, 2); p := <-x; y := make(chan, 1); y <- snd(p)");
  CHECK(o.status == RunStatus::MainExited);
  CHECK_THROWS_AS(run_src("y := fst(3)"), RuntimeError);
  CHECK_THROWS_AS(run_src("y := z"), RuntimeError);
}

TEST_CASE("seeded runs are deterministic") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    RunOutcome a = run_src(kReceiveRace, Schedule::seeded(s));
    RunOutcome b = run_src(kReceiveRace, Schedule::seeded(s));
    CHECK(a.trace == b.trace);
    CHECK(a.choices == b.choices);
    // The recorded choices replay the same run.
    CHECK(run_src(kReceiveRace, Schedule::explicit_choices(a.choices)).trace == a.trace);
  }
}

TEST_CASE("explicit schedule errors") {
  CHECK_THROWS_AS(run_src(kReceiveRace, Schedule::explicit_choices({ch(2, 0, 1, 5)})), ScheduleError);
  CHECK_THROWS_AS(run_src(kReceiveRace, Schedule::explicit_choices({ch(9, 0)})), ScheduleError);
}

TEST_CASE("schedule files") {
  Schedule s = parse_schedule(R"({"choices":[{"thread":2,"case":0,"partner":3,"partner_case":0},{"thread":4}]})");
  auto &e = std::get<Schedule::Explicit>(s.kind);
  REQUIRE(e.choices.size() == 2);
  CHECK(e.choices[0] == ch(2, 0, 3, 0));
  CHECK(e.choices[1] == Choice{4, std::nullopt, std::nullopt, std::nullopt});
  CHECK(parse_schedule(write_schedule(s)).kind.index() == 1);
  CHECK(std::get<Schedule::Seeded>(parse_schedule(R"({"seed":42})").kind).seed == 42);
  CHECK_THROWS(parse_schedule("{"));
  CHECK_THROWS(parse_schedule(R"({"bogus":1})"));
}

TEST_CASE("step limit") {
  const char *loop = "repeat 1000 { y := 1 }";
  RunOptions opts;
  opts.max_steps = 50;
  CHECK_THROWS_AS(run(lang::parse(loop), Schedule::seeded(0), opts), StepLimitError);
  CHECK_NOTHROW(run(lang::parse(loop), Schedule::seeded(0)));
  setenv("VCREPLAY_MAX_STEPS", "7", 1);
  CHECK(default_max_steps() == 7);
  setenv("VCREPLAY_MAX_STEPS", "lots", 1);
  CHECK_THROWS(default_max_steps());
  unsetenv("VCREPLAY_MAX_STEPS");
  CHECK(default_max_steps() == 100000);
}

TEST_CASE("enumerate_runs") {
  auto outcomes = enumerate_runs(lang::parse(kReceiveRace));
  REQUIRE(outcomes.size() == 2);
  int deadlocks = 0;
  for (const auto &o : outcomes) deadlocks += o.status == RunStatus::Deadlock;
  CHECK(deadlocks == 1);
  CHECK(enumerate_runs(lang::parse("x := make(chan, 1); x <- 1; <-x")).size() == 1);
}

TEST_CASE("executor traces are valid") {
  for (const char *name : {"newsreader.mp", "cyclic.mp", "completely_stuck.mp", "send_on_closed.mp"}) {
    for (const auto &o : enumerate_runs(lang::parse_file(corpus(name)))) CHECK(validate(o.trace).empty());
  }
}
