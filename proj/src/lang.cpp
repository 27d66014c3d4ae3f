#include "vcreplay/lang.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace vcreplay::lang {

namespace {

enum class Tok { Ident, Int, Assign, Arrow, LParen, RParen, LBrace, RBrace, Comma, Colon, Sep, Minus, End };

struct Token {
  Tok kind;
  std::string text;
  SourceLoc loc;
};

const char *tok_name(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Int: return "integer";
    case Tok::Assign: return "':='";
    case Tok::Arrow: return "'<-'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::Sep: return "end of statement";
    case Tok::Minus: return "'-'";
    case Tok::End: return "end of input";
  }
  return "?";
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    SourceLoc loc{line, col};
    if (c == '\n' || c == ';') {
      out.push_back({Tok::Sep, std::string(1, c), loc});
      advance(1);
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
    } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Tok::Int, std::string(src.substr(i, j - i)), loc});
      advance(j - i);
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), loc});
      advance(j - i);
    } else if (c == ':' && i + 1 < src.size() && src[i + 1] == '=') {
      out.push_back({Tok::Assign, ":=", loc});
      advance(2);
    } else if (c == '<' && i + 1 < src.size() && src[i + 1] == '-') {
      out.push_back({Tok::Arrow, "<-", loc});
      advance(2);
    } else {
      Tok k;
      switch (c) {
        case '(': k = Tok::LParen; break;
        case ')': k = Tok::RParen; break;
        case '{': k = Tok::LBrace; break;
        case '}': k = Tok::RBrace; break;
        case ',': k = Tok::Comma; break;
        case ':': k = Tok::Colon; break;
        case '-': k = Tok::Minus; break;
        default: throw ParseError(std::string("unexpected character '") + c + "'", loc);
      }
      out.push_back({k, std::string(1, c), loc});
      advance(1);
    }
  }
  out.push_back({Tok::End, "", {line, col}});
  return out;
}

bool is_keyword(const std::string &s) {
  static const char *kw[] = {"make", "chan", "close", "spawn", "go", "select", "case", "default", "repeat", "fst", "snd"};
  for (const char *k : kw)
    if (s == k) return true;
  return false;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program program() {
    Program p;
    p.main = block_until({Tok::End});
    expect(Tok::End);
    return p;
  }

 private:
  const Token &peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  bool at(Tok k) const { return peek().kind == k; }
  bool at_word(const char *w) const { return at(Tok::Ident) && peek().text == w; }

  Token expect(Tok k) {
    if (!at(k))
      throw ParseError(std::string("expected ") + tok_name(k) + ", found " +
                           (peek().kind == Tok::Ident || peek().kind == Tok::Int ? "'" + peek().text + "'"
                                                                                 : std::string(tok_name(peek().kind))),
                       peek().loc);
    return toks_[pos_++];
  }

  void expect_word(const char *w) {
    if (!at_word(w)) throw ParseError(std::string("expected '") + w + "'", peek().loc);
    ++pos_;
  }

  std::string name() {
    Token t = expect(Tok::Ident);
    if (is_keyword(t.text)) throw ParseError("'" + t.text + "' is a keyword", t.loc);
    return t.text;
  }

  void skip_seps() {
    while (at(Tok::Sep)) ++pos_;
  }

  bool at_block_end(std::initializer_list<Tok> stops, bool stop_at_case) const {
    for (Tok s : stops)
      if (at(s)) return true;
    return stop_at_case && (at_word("case") || at_word("default"));
  }

  BlockPtr block_until(std::initializer_list<Tok> stops, bool stop_at_case = false) {
    auto b = std::make_shared<Block>();
    skip_seps();
    while (!at_block_end(stops, stop_at_case)) {
      if (at(Tok::End)) throw ParseError("unexpected end of input (unclosed block?)", peek().loc);
      b->commands.push_back(command());
      if (!at_block_end(stops, stop_at_case)) {
        if (!at(Tok::Sep)) throw ParseError("expected newline or ';' after statement", peek().loc);
      }
      skip_seps();
    }
    return b;
  }

  BlockPtr braced() {
    expect(Tok::LBrace);
    BlockPtr b = block_until({Tok::RBrace});
    expect(Tok::RBrace);
    return b;
  }

  Command command() {
    SourceLoc loc = peek().loc;
    if (at_word("close")) {
      ++pos_;
      expect(Tok::LParen);
      std::string ch = name();
      expect(Tok::RParen);
      return {Close{ch}, loc};
    }
    if (at_word("spawn") || at_word("go")) {
      ++pos_;
      return {Spawn{braced()}, loc};
    }
    if (at_word("repeat")) {
      ++pos_;
      Token n = expect(Tok::Int);
      return {Repeat{std::stoull(n.text), braced()}, loc};
    }
    if (at_word("select")) {
      ++pos_;
      return {select(loc), loc};
    }
    if (at(Tok::Arrow)) {
      ++pos_;
      Guard g{OpKind::Receive, name(), nullptr, std::nullopt};
      return {single(std::move(g)), loc};
    }
    std::string target = name();
    if (at(Tok::Arrow)) {
      ++pos_;
      Guard g{OpKind::Send, target, expr(), std::nullopt};
      return {single(std::move(g)), loc};
    }
    expect(Tok::Assign);
    if (at_word("make")) {
      ++pos_;
      expect(Tok::LParen);
      expect_word("chan");
      if (at(Tok::Comma)) ++pos_;
      Token n = expect(Tok::Int);
      expect(Tok::RParen);
      return {MakeChan{target, std::stoull(n.text)}, loc};
    }
    if (at(Tok::Arrow)) {
      ++pos_;
      Guard g{OpKind::Receive, name(), nullptr, target};
      return {single(std::move(g)), loc};
    }
    return {Assign{target, expr()}, loc};
  }

  static Select single(Guard g) {
    Select s;
    s.cases.push_back({std::move(g), std::make_shared<Block>()});
    return s;
  }

  Select select(SourceLoc loc) {
    Select s;
    expect(Tok::LBrace);
    skip_seps();
    while (!at(Tok::RBrace)) {
      if (at_word("case")) {
        ++pos_;
        Guard g = guard();
        expect(Tok::Colon);
        s.cases.push_back({std::move(g), block_until({Tok::RBrace}, true)});
      } else if (at_word("default")) {
        SourceLoc dloc = peek().loc;
        ++pos_;
        if (s.has_default()) throw ParseError("select has more than one default case", dloc);
        expect(Tok::Colon);
        s.default_body = block_until({Tok::RBrace}, true);
      } else if (at(Tok::End)) {
        throw ParseError("unclosed select block", loc);
      } else {
        throw ParseError("expected 'case', 'default' or '}' in select", peek().loc);
      }
    }
    expect(Tok::RBrace);
    if (s.cases.empty() && !s.has_default()) throw ParseError("select without cases", loc);
    return s;
  }

  Guard guard() {
    if (at(Tok::Arrow)) {
      ++pos_;
      return {OpKind::Receive, name(), nullptr, std::nullopt};
    }
    std::string first = name();
    if (at(Tok::Arrow)) {
      ++pos_;
      return {OpKind::Send, first, expr(), std::nullopt};
    }
    expect(Tok::Assign);
    expect(Tok::Arrow);
    return {OpKind::Receive, name(), nullptr, first};
  }

  ExprPtr expr() {
    auto e = std::make_shared<Expr>();
    if (at(Tok::Int) || at(Tok::Minus)) {
      bool neg = at(Tok::Minus);
      if (neg) ++pos_;
      Token n = expect(Tok::Int);
      e->kind = Expr::Kind::Int;
      e->value = std::stoll(n.text) * (neg ? -1 : 1);
    } else if (at(Tok::LParen)) {
      ++pos_;
      ExprPtr first = expr();
      if (at(Tok::RParen)) {
        ++pos_;
        return first;
      }
      expect(Tok::Comma);
      e->kind = Expr::Kind::Pair;
      e->lhs = first;
      e->rhs = expr();
      expect(Tok::RParen);
    } else if (at_word("fst") || at_word("snd")) {
      e->kind = at_word("fst") ? Expr::Kind::Fst : Expr::Kind::Snd;
      ++pos_;
      expect(Tok::LParen);
      e->lhs = expr();
      expect(Tok::RParen);
    } else {
      e->kind = Expr::Kind::Var;
      e->name = name();
    }
    return e;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Program parse(std::string_view source) { return Parser(lex(source)).program(); }

Program parse_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open program file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace vcreplay::lang
