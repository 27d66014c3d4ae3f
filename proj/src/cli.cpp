#include "vcreplay/cli.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "json.hpp"
#include "vcreplay/exec.hpp"
#include "vcreplay/lang.hpp"
#include "vcreplay/trace_io.hpp"

namespace vcreplay::cli {

namespace {

/// Writes to --out when given, else to the stream.
void emit(const CliConfig &cfg, std::ostream &out, const std::string &text) {
  if (cfg.out) {
    std::ofstream f(*cfg.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + *cfg.out);
    f << text;
  } else {
    out << text;
  }
}

int exit_for(exec::RunStatus s) {
  switch (s) {
    case exec::RunStatus::MainExited: return kOk;
    case exec::RunStatus::Deadlock: return kDeadlock;
    case exec::RunStatus::PanicSendOnClosed:
    case exec::RunStatus::PanicCloseOfClosed: return kPanic;
  }
  return kError;
}

ReplayOptions replay_options(const CliConfig &cfg) {
  ReplayOptions o;
  o.mode = cfg.mode;
  if (cfg.seed) o.seed = *cfg.seed;
  return o;
}

std::string events_text(const std::vector<AnnotatedEvent> &events) {
  std::ostringstream os;
  for (const auto &e : events) os << "  " << to_string(e) << "\n";
  return os.str();
}

}  // namespace

std::optional<CliConfig> parse_args(int argc, const char *const *argv, std::ostream &out, std::ostream &err,
                                    int &exit_code) {
  CliConfig cfg;
  CLI::App app{"Vector-clock trace replay analyzer for message-passing programs", "vcreplay"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string schedule, outpath, mode = "strategy", format;
  // An optional target keeps "flag absent" distinguishable from "--all-schedules=0".
  std::optional<std::size_t> limits[2];
  bool ac = false, mp = false, asc = false, sc = false, dr = false;

  auto *run = app.add_subcommand("run", "Execute a program and record its trace");
  run->add_option("program", cfg.input, "Program file (.mp)")->required();
  auto *seed_opt_run = run->add_option("--seed", seed, "Seed for the random scheduler");
  auto *sched_opt = run->add_option("--schedule", schedule, "Schedule file (JSON)");
  seed_opt_run->excludes(sched_opt);
  run->add_option("--out", outpath, "Trace output path (default: stdout)");

  auto add_common = [&](CLI::App *sub, bool analysis) {
    std::optional<std::size_t> &limit = limits[analysis ? 1 : 0];
    sub->add_option("trace", cfg.input, "Trace file (JSON)")->required();
    sub->add_option("--mode", mode, "Replay mode")->check(CLI::IsMember({"strategy", "naive", "backtrack"}));
    sub->add_option("--seed", seed, "Seed for naive replay order");
    sub->add_flag("--all-schedules{1000}", limit, "Enumerate alternative annotations (optional limit, default 1000)");
    sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));
    sub->add_option("--out", outpath, "Output path (default: stdout)");
    if (analysis) {
      sub->add_flag("--ac", ac, "Alternative communications");
      sub->add_flag("--mp", mp, "Message contention");
      sub->add_flag("--asc", asc, "Alternative select cases");
      sub->add_flag("--sc", sc, "Send on closed channel");
      sub->add_flag("--dr", dr, "Deadlock recovery");
    }
  };
  auto *rep = app.add_subcommand("replay", "Replay a trace and print vector-clock annotations");
  add_common(rep, false);
  auto *ana = app.add_subcommand("analyze", "Replay a trace and run the analyses");
  add_common(ana, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    exit_code = app.exit(e, out, err);
    if (exit_code != 0) exit_code = kError;
    return std::nullopt;
  }

  CLI::App *sub = app.get_subcommands().front();
  cfg.subcommand = sub->get_name();
  if (sub->count("--seed")) cfg.seed = seed;
  if (cfg.subcommand == "run" && sub->count("--schedule")) cfg.schedule = schedule;
  if (sub->count("--out")) cfg.out = outpath;
  if (cfg.subcommand != "run") {
    cfg.mode = mode == "naive" ? ReplayMode::Naive : mode == "backtrack" ? ReplayMode::Backtrack : ReplayMode::Strategy;
    if (const auto &limit = limits[sub == ana ? 1 : 0]) {
      if (*limit < 1) {
        err << "--all-schedules limit must be at least 1\n";
        exit_code = kError;
        return std::nullopt;
      }
      cfg.all_schedules = limit;
    }
    if (!format.empty()) cfg.format = format == "json" ? Format::Json : Format::Text;
    if (ac || mp || asc || sc || dr) cfg.selection = AnalysisSelection{ac, mp, asc, sc, dr};
  }
  exit_code = kOk;
  return cfg;
}

int cmd_run(const CliConfig &cfg, std::ostream &out, std::ostream &err) {
  try {
    lang::Program prog = lang::parse_file(cfg.input);
    exec::Schedule sched = cfg.schedule ? exec::load_schedule(*cfg.schedule) : exec::Schedule::seeded(cfg.seed.value_or(0));
    exec::RunOutcome o = exec::run(prog, sched);
    emit(cfg, out, write_trace(o.trace) + "\n");
    err << "status: " << exec::to_string(o.status);
    if (o.panic)
      err << " (thread " << o.panic->thread << " at " << o.panic->loc.line << ":" << o.panic->loc.column
          << ", channel " << o.panic->channel << ")";
    err << "\n";
    return exit_for(o.status);
  } catch (const lang::ParseError &e) {
    err << cfg.input << ":" << e.what() << "\n";
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
  }
  return kError;
}

int cmd_replay(const CliConfig &cfg, std::ostream &out, std::ostream &err) {
  try {
    TraceSet ts = load_trace(cfg.input);
    ReplayResult r = replay(ts, replay_options(cfg));
    std::optional<Enumeration> en;
    if (cfg.all_schedules) en = enumerate_annotations(ts, *cfg.all_schedules);
    if (cfg.format.value_or(Format::Json) == Format::Json) {
      auto j = nlohmann::ordered_json::parse(replay_json(r));
      if (en) {
        nlohmann::ordered_json s;
        s["count"] = en->assignments.size();
        s["truncated"] = en->truncated;
        j["enumeration"] = std::move(s);
      }
      emit(cfg, out, j.dump() + "\n");
    } else {
      std::ostringstream os;
      os << "terminal: " << to_string(r.terminal) << "\n" << events_text(r.all_events());
      if (r.limit_exceeded) os << "backtracking limit exceeded; partial result\n";
      if (en)
        os << en->assignments.size() << " distinct annotation" << (en->assignments.size() == 1 ? "" : "s")
           << (en->truncated ? " (truncated)" : "") << "\n";
      emit(cfg, out, os.str());
    }
    return kOk;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
  }
  return kError;
}

Report analyze_trace(const TraceSet &ts, const ReplayOptions &opts, const AnalysisSelection &sel,
                     std::optional<std::size_t> all_schedules) {
  ReplayResult r = replay(ts, opts);
  std::vector<AnnotatedEvent> events = r.all_events();
  AnalysisSelection base = sel;
  if (all_schedules && sel.sc) base.sc = false;
  Report rep = analyze(events, ts, r.terminal, base);
  if (all_schedules && sel.sc) {
    // Send-on-closed flags accumulate over every enumerated annotation.
    Report sc = send_on_closed(events);
    std::set<std::tuple<ThreadId, std::size_t, std::size_t>> flagged;
    for (const auto &f : sc.findings) flagged.insert({f.subject.thread, f.subject.pos, f.subject.case_index.value_or(0)});
    Enumeration en = enumerate_annotations(ts, *all_schedules);
    for (const auto &list : en.event_lists)
      for (const auto &f : send_on_closed(list).findings)
        if (flagged.insert({f.subject.thread, f.subject.pos, f.subject.case_index.value_or(0)}).second) {
          sc.findings.push_back(f);
          ++sc.sc;
        }
    rep.merge(sc);
  }
  return rep;
}

int cmd_analyze(const CliConfig &cfg, std::ostream &out, std::ostream &err) {
  try {
    TraceSet ts = load_trace(cfg.input);
    Report rep = analyze_trace(ts, replay_options(cfg), cfg.selection, cfg.all_schedules);
    if (cfg.format.value_or(Format::Text) == Format::Json)
      emit(cfg, out, report_json(rep) + "\n");
    else
      emit(cfg, out, report_text(rep, cfg.selection));
    return kOk;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
  }
  return kError;
}

int main_entry(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  int code = kOk;
  std::optional<CliConfig> cfg;
  try {
    cfg = parse_args(argc, argv, out, err, code);
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kError;
  }
  if (!cfg) return code;
  if (cfg->subcommand == "run") return cmd_run(*cfg, out, err);
  if (cfg->subcommand == "replay") return cmd_replay(*cfg, out, err);
  return cmd_analyze(*cfg, out, err);
}

}  // namespace vcreplay::cli
