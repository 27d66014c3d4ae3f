#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vcreplay/analysis.hpp"
#include "vcreplay/replay.hpp"

namespace vcreplay::cli {

enum ExitCode : int { kOk = 0, kError = 1, kDeadlock = 2, kPanic = 3 };

enum class Format { Text, Json };

struct CliConfig {
  std::string subcommand;  // run | replay | analyze
  std::string input;       // program (.mp) for run, trace (.json) otherwise
  std::optional<std::uint64_t> seed;
  std::optional<std::string> schedule;
  std::optional<std::string> out;
  ReplayMode mode = ReplayMode::Strategy;
  std::optional<std::size_t> all_schedules;  // enumeration limit when requested
  AnalysisSelection selection;               // all scenarios unless some were picked
  std::optional<Format> format;              // default: json for replay, text for analyze
};

/// Parses argv. Returns the exit code to use on failure (usage errors, --help).
std::optional<CliConfig> parse_args(int argc, const char *const *argv, std::ostream &out, std::ostream &err,
                                    int &exit_code);

int cmd_run(const CliConfig &cfg, std::ostream &out, std::ostream &err);
int cmd_replay(const CliConfig &cfg, std::ostream &out, std::ostream &err);
int cmd_analyze(const CliConfig &cfg, std::ostream &out, std::ostream &err);

/// Full command-line entry point.
int main_entry(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

/// Library-level composition used by the analyze command.
Report analyze_trace(const TraceSet &ts, const ReplayOptions &opts, const AnalysisSelection &sel,
                     std::optional<std::size_t> all_schedules);

}  // namespace vcreplay::cli
