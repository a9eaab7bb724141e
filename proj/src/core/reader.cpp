#include "reader.hpp"

#include <cctype>
#include <cstdlib>
#include <unordered_map>

#include "errors.hpp"

namespace contina {

namespace {

enum class Tok : uint8_t {
  End,
  Name,     // unquoted alphabetic or quoted atom
  Symbolic, // run of symbol chars, e.g. :- ::- =>> -
  Var,
  Int,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Comma,
  Bar,
  Period,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int64_t ival = 0;
  size_t start = 0;
  size_t end = 0;
};

bool sym_char(char c) {
  switch (c) {
  case '+': case '-': case '*': case '/': case '\\': case '^':
  case '<': case '>': case '=': case '~': case ':': case '.':
  case '?': case '@': case '#': case '&':
    return true;
  default:
    return false;
  }
}

struct Lexer {
  std::string_view src;
  size_t pos = 0;

  [[noreturn]] void fail(size_t at) const {
    throw err_term("syntax_error(" + std::to_string(at) + ")");
  }

  void skip_layout() {
    while (pos < src.size()) {
      char c = src[pos];
      if (c == '%') {
        while (pos < src.size() && src[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  Token next() {
    skip_layout();
    Token t;
    t.start = pos;
    if (pos >= src.size()) {
      t.end = pos;
      return t;
    }
    char c = src[pos];
    if (c >= '0' && c <= '9') {
      size_t begin = pos;
      while (pos < src.size() && src[pos] >= '0' && src[pos] <= '9') ++pos;
      t.kind = Tok::Int;
      t.text.assign(src.substr(begin, pos - begin));
      errno = 0;
      t.ival = std::strtoll(t.text.c_str(), nullptr, 10);
      if (errno == ERANGE) fail(begin);
      t.end = pos;
      return t;
    }
    if ((c >= 'a' && c <= 'z')) {
      size_t begin = pos;
      while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
        ++pos;
      t.kind = Tok::Name;
      t.text.assign(src.substr(begin, pos - begin));
      t.end = pos;
      return t;
    }
    if ((c >= 'A' && c <= 'Z') || c == '_') {
      size_t begin = pos;
      while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
        ++pos;
      t.kind = Tok::Var;
      t.text.assign(src.substr(begin, pos - begin));
      t.end = pos;
      return t;
    }
    if (c == '\'') {
      ++pos;
      t.kind = Tok::Name;
      t.text = quoted_body(t.start);
      t.end = pos;
      return t;
    }
    switch (c) {
    case '(': t.kind = Tok::LParen; break;
    case ')': t.kind = Tok::RParen; break;
    case '[': t.kind = Tok::LBracket; break;
    case ']': t.kind = Tok::RBracket; break;
    case ',': t.kind = Tok::Comma; break;
    case '|': t.kind = Tok::Bar; break;
    case ';': t.kind = Tok::Name; break;
    case '!': t.kind = Tok::Name; break;
    default: t.kind = Tok::End; break;
    }
    if (t.kind != Tok::End) {
      ++pos;
      t.end = pos;
      t.text.assign(1, c);
      return t;
    }
    if (sym_char(c)) {
      // A lone '.' before layout or end of input terminates a clause.
      if (c == '.' &&
          (pos + 1 >= src.size() ||
           std::isspace(static_cast<unsigned char>(src[pos + 1])) ||
           src[pos + 1] == '%')) {
        ++pos;
        t.kind = Tok::Period;
        t.text = ".";
        t.end = pos;
        return t;
      }
      size_t begin = pos;
      while (pos < src.size() && sym_char(src[pos])) ++pos;
      t.kind = Tok::Symbolic;
      t.text.assign(src.substr(begin, pos - begin));
      t.end = pos;
      return t;
    }
    fail(pos);
  }

  std::string quoted_body(size_t open_at) {
    std::string out;
    while (true) {
      if (pos >= src.size()) fail(open_at);
      char c = src[pos++];
      if (c == '\'') {
        if (pos < src.size() && src[pos] == '\'') {
          out.push_back('\'');
          ++pos;
          continue;
        }
        return out;
      }
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos >= src.size()) fail(open_at);
      char e = src[pos++];
      switch (e) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case 'a': out.push_back('\a'); break;
      case 'b': out.push_back('\b'); break;
      case 'f': out.push_back('\f'); break;
      case 'v': out.push_back('\v'); break;
      case '\\': out.push_back('\\'); break;
      case '\'': out.push_back('\''); break;
      case '"': out.push_back('"'); break;
      case 'x': {
        unsigned value = 0;
        bool any = false;
        while (pos < src.size() && std::isxdigit(static_cast<unsigned char>(src[pos]))) {
          char h = src[pos++];
          unsigned d = h <= '9' ? unsigned(h - '0')
                                : unsigned(std::tolower(h) - 'a') + 10;
          value = value * 16 + d;
          any = true;
        }
        if (!any || pos >= src.size() || src[pos] != '\\') fail(open_at);
        ++pos;
        out.push_back(static_cast<char>(value & 0xff));
        break;
      }
      default: fail(pos - 1);
      }
    }
  }
};

enum class Assoc : uint8_t { XFX, XFY, YFX };

struct OpDef {
  int prec;
  Assoc assoc;
};

const std::unordered_map<std::string_view, OpDef> &infix_ops() {
  static const std::unordered_map<std::string_view, OpDef> table = {
      {":-", {1200, Assoc::XFX}},  {"::-", {1200, Assoc::XFX}},
      {";", {1100, Assoc::XFY}},   {"->", {1050, Assoc::XFY}},
      {",", {1000, Assoc::XFY}},   {"=>>", {990, Assoc::XFY}},
      {"=", {700, Assoc::XFX}},    {"==", {700, Assoc::XFX}},
      {"is", {700, Assoc::XFX}},   {"<", {700, Assoc::XFX}},
      {">", {700, Assoc::XFX}},    {"=<", {700, Assoc::XFX}},
      {">=", {700, Assoc::XFX}},   {"=:=", {700, Assoc::XFX}},
      {"=\\=", {700, Assoc::XFX}}, {"+", {500, Assoc::YFX}},
      {"-", {500, Assoc::YFX}},    {"*", {400, Assoc::YFX}},
      {"//", {400, Assoc::YFX}},   {"/", {400, Assoc::YFX}},
      {"mod", {400, Assoc::YFX}},
  };
  return table;
}

struct Parser {
  Lexer lex;
  TermPool &pool;
  Token tok;
  std::unordered_map<std::string, Term> var_map;
  std::vector<std::pair<std::string, Term>> var_order;

  Parser(std::string_view text, TermPool &p) : lex{text}, pool(p) {
    tok = lex.next();
  }

  [[noreturn]] void fail() const {
    throw err_term("syntax_error(" + std::to_string(tok.start) + ")");
  }

  void advance() { tok = lex.next(); }

  void expect(Tok kind) {
    if (tok.kind != kind) fail();
    advance();
  }

  void reset_vars() {
    var_map.clear();
    var_order.clear();
  }

  Term variable(const std::string &name) {
    if (name == "_") return pool.make_var();
    auto it = var_map.find(name);
    if (it != var_map.end()) return it->second;
    Term v = pool.make_var();
    var_map.emplace(name, v);
    var_order.emplace_back(name, v);
    return v;
  }

  Term atom_or_call(std::string name, size_t name_end) {
    if (tok.kind == Tok::LParen && tok.start == name_end) {
      advance();
      std::vector<Term> args;
      args.push_back(parse(999));
      while (tok.kind == Tok::Comma) {
        advance();
        args.push_back(parse(999));
      }
      expect(Tok::RParen);
      return pool.make_struct(intern(name), std::move(args));
    }
    return pool.make_atom(intern(name));
  }

  Term list() {
    advance();
    if (tok.kind == Tok::RBracket) {
      advance();
      return pool.make_atom(sym::nil());
    }
    std::vector<Term> elems;
    elems.push_back(parse(999));
    while (tok.kind == Tok::Comma) {
      advance();
      elems.push_back(parse(999));
    }
    Term tail = pool.make_atom(sym::nil());
    if (tok.kind == Tok::Bar) {
      advance();
      tail = parse(999);
    }
    expect(Tok::RBracket);
    return pool.make_list(elems, tail);
  }

  Term primary() {
    switch (tok.kind) {
    case Tok::Int: {
      Term t = pool.make_int(tok.ival);
      advance();
      return t;
    }
    case Tok::Var: {
      Term t = variable(tok.text);
      advance();
      return t;
    }
    case Tok::Name: {
      std::string name = std::move(tok.text);
      size_t end = tok.end;
      advance();
      return atom_or_call(std::move(name), end);
    }
    case Tok::Symbolic: {
      std::string name = std::move(tok.text);
      size_t end = tok.end;
      advance();
      if (name == "-" && tok.kind == Tok::Int) {
        Term t = pool.make_int(-tok.ival);
        advance();
        return t;
      }
      if (name == "-" || name == "+") {
        // An attached '(' is a functor call; a detached operand makes the
        // sign a prefix operator.
        bool attached = tok.kind == Tok::LParen && tok.start == end;
        bool operand = tok.kind == Tok::Int || tok.kind == Tok::Var ||
                       tok.kind == Tok::Name || tok.kind == Tok::Symbolic ||
                       tok.kind == Tok::LParen || tok.kind == Tok::LBracket;
        if (!attached && operand)
          return pool.make_struct(intern(name), {parse(200)});
      }
      return atom_or_call(std::move(name), end);
    }
    case Tok::LParen: {
      advance();
      Term t = parse(1200);
      expect(Tok::RParen);
      return t;
    }
    case Tok::LBracket:
      return list();
    default:
      fail();
    }
  }

  Term parse(int maxprec) {
    Term left = primary();
    int leftprec = 0;
    while (true) {
      std::string_view opname;
      if (tok.kind == Tok::Comma)
        opname = ",";
      else if (tok.kind == Tok::Name || tok.kind == Tok::Symbolic)
        opname = tok.text;
      else
        break;
      auto it = infix_ops().find(opname);
      if (it == infix_ops().end()) break;
      const OpDef &op = it->second;
      if (op.prec > maxprec) break;
      int left_limit = op.assoc == Assoc::YFX ? op.prec : op.prec - 1;
      if (leftprec > left_limit) break;
      Symbol f = intern(opname);
      advance();
      int right_limit = op.assoc == Assoc::XFY ? op.prec : op.prec - 1;
      Term right = parse(right_limit);
      left = pool.make_struct(f, {left, right});
      leftprec = op.prec;
    }
    return left;
  }
};

} // namespace

Term parse_term_text(TermPool &pool, std::string_view text) {
  Parser p(text, pool);
  Term t = p.parse(1200);
  if (p.tok.kind != Tok::End) p.fail();
  return t;
}

ParsedQuery parse_query_text(TermPool &pool, std::string_view text) {
  Parser p(text, pool);
  ParsedQuery q;
  q.goal = p.parse(1200);
  if (p.tok.kind == Tok::Period) p.advance();
  if (p.tok.kind != Tok::End) p.fail();
  q.vars = std::move(p.var_order);
  return q;
}

std::vector<Term> parse_program_text(TermPool &pool, std::string_view text) {
  Parser p(text, pool);
  std::vector<Term> clauses;
  while (p.tok.kind != Tok::End) {
    clauses.push_back(p.parse(1200));
    p.expect(Tok::Period);
    p.reset_vars();
  }
  return clauses;
}

} // namespace contina
