#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vcreplay/trace.hpp"

namespace vcreplay::lang {

struct SourceLoc {
  std::size_t line = 0;
  std::size_t column = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string &msg, SourceLoc loc)
      : std::runtime_error(std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " + msg), loc_(loc) {}
  SourceLoc loc() const { return loc_; }

 private:
  SourceLoc loc_;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Int, Var, Pair, Fst, Snd };
  Kind kind = Kind::Int;
  std::int64_t value = 0;
  std::string name;
  ExprPtr lhs, rhs;  // Pair uses both, Fst/Snd use lhs
};

struct Block;
using BlockPtr = std::shared_ptr<const Block>;

/// Communication guard of a select case. Send uses `value`; Receive may bind.
struct Guard {
  OpKind kind = OpKind::Send;
  std::string channel;
  ExprPtr value;
  std::optional<std::string> bind;
};

struct Case {
  Guard guard;
  BlockPtr body;
};

struct Assign {
  std::string target;
  ExprPtr value;
};
struct MakeChan {
  std::string target;
  std::size_t capacity = 0;
};
struct Close {
  std::string channel;
};
struct Spawn {
  BlockPtr body;
};
/// Single sends and receives are selects with one case.
struct Select {
  std::vector<Case> cases;
  BlockPtr default_body;  // null when there is no default case
  bool has_default() const { return default_body != nullptr; }
};
/// Bounded iteration.
struct Repeat {
  std::size_t count = 0;
  BlockPtr body;
};

struct Command {
  std::variant<Assign, MakeChan, Close, Spawn, Select, Repeat> node;
  SourceLoc loc;
};

struct Block {
  std::vector<Command> commands;
};

struct Program {
  BlockPtr main;
};

/**
 * Parses the Go-flavoured concrete syntax:
 *
 *   x := make(chan, 2)      y := <-x        x <- (1, fst(p))
 *   close(x)                spawn { ... }   go { ... }
 *   select { case x <- 1: ... case v := <-y: ... default: ... }
 *   repeat 3 { ... }
 *
 * Statements are separated by newlines or ';'. `//` starts a comment.
 */
Program parse(std::string_view source);
Program parse_file(const std::string &path);

}  // namespace vcreplay::lang
