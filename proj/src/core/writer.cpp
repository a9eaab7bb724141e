#include "writer.hpp"

#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "errors.hpp"

namespace contina {

bool atom_needs_quotes(std::string_view name) {
  if (name.empty()) return true;
  char c = name[0];
  if (c < 'a' || c > 'z') return true;
  for (char ch : name) {
    bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
              (ch >= '0' && ch <= '9') || ch == '_';
    if (!ok) return true;
  }
  return false;
}

void quote_atom_into(std::string_view name, std::string &out) {
  out.push_back('\'');
  for (unsigned char ch : name) {
    switch (ch) {
    case '\'': out += "\\'"; break;
    case '\\': out += "\\\\"; break;
    case '\n': out += "\\n"; break;
    case '\t': out += "\\t"; break;
    case '\r': out += "\\r"; break;
    default:
      if (ch < 0x20) {
        static const char hex[] = "0123456789abcdef";
        out += "\\x";
        out.push_back(hex[ch >> 4]);
        out.push_back(hex[ch & 0xf]);
        out.push_back('\\');
      } else {
        out.push_back(static_cast<char>(ch));
      }
    }
  }
  out.push_back('\'');
}

namespace {

struct Writer {
  explicit Writer(std::string &o) : out(o) {}
  std::string &out;
  std::unordered_map<const Cell *, uint64_t> var_names;
  std::unordered_set<const Cell *> on_path;

  void atom(Symbol s) {
    const std::string &name = symbol_name(s);
    if (s == sym::nil()) {
      out += "[]";
      return;
    }
    if (atom_needs_quotes(name))
      quote_atom_into(name, out);
    else
      out += name;
  }

  void var(Term v) {
    auto [it, fresh] = var_names.emplace(v, var_names.size());
    out.push_back('_');
    out.push_back('V');
    out += std::to_string(it->second);
    (void)fresh;
  }

  void walk(Term t) {
    t = deref(t);
    switch (t->tag) {
    case Tag::Var:
      var(t);
      return;
    case Tag::Int:
      out += std::to_string(t->ival);
      return;
    case Tag::Atom:
      atom(t->sym);
      return;
    case Tag::Struct:
      break;
    }
    if (!on_path.insert(t).second)
      throw err_term("cyclic_term");
    if (t->sym == sym::dot() && t->args.size() == 2) {
      list(t);
    } else {
      const std::string &name = symbol_name(t->sym);
      if (atom_needs_quotes(name))
        quote_atom_into(name, out);
      else
        out += name;
      out.push_back('(');
      for (size_t i = 0; i < t->args.size(); ++i) {
        if (i) out.push_back(',');
        walk(t->args[i]);
      }
      out.push_back(')');
    }
    on_path.erase(t);
  }

  // t is a derefed cons cell already marked on_path by the caller.
  void list(Term t) {
    out.push_back('[');
    walk(t->args[0]);
    Term tail = deref(t->args[1]);
    std::vector<Term> spine;
    while (tail->tag == Tag::Struct && tail->sym == sym::dot() &&
           tail->args.size() == 2) {
      if (!on_path.insert(tail).second)
        throw err_term("cyclic_term");
      spine.push_back(tail);
      out.push_back(',');
      walk(tail->args[0]);
      tail = deref(tail->args[1]);
    }
    if (!(tail->tag == Tag::Atom && tail->sym == sym::nil())) {
      out.push_back('|');
      walk(tail);
    }
    out.push_back(']');
    for (Term seen : spine) on_path.erase(seen);
  }
};

} // namespace

void canonical_text_into(Term t, std::string &out) {
  Writer w(out);
  w.walk(t);
}

std::string canonical_text(Term t) {
  std::string out;
  canonical_text_into(t, out);
  return out;
}

} // namespace contina
