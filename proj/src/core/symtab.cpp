#include "symtab.hpp"

#include <deque>
#include <mutex>
#include <unordered_map>

namespace contina {

namespace {

struct SymTab {
  std::mutex mu;
  std::unordered_map<std::string_view, Symbol> ids;
  std::deque<std::string> names; // stable addresses; index == Symbol
};

SymTab &tab() {
  static SymTab t;
  return t;
}

} // namespace

Symbol intern(std::string_view name) {
  SymTab &t = tab();
  std::lock_guard<std::mutex> lk(t.mu);
  auto it = t.ids.find(name);
  if (it != t.ids.end())
    return it->second;
  t.names.emplace_back(name);
  Symbol s = static_cast<Symbol>(t.names.size() - 1);
  t.ids.emplace(std::string_view(t.names.back()), s);
  return s;
}

const std::string &symbol_name(Symbol s) {
  SymTab &t = tab();
  std::lock_guard<std::mutex> lk(t.mu);
  return t.names[s];
}

namespace sym {
Symbol nil() {
  static Symbol s = intern("[]");
  return s;
}
Symbol dot() {
  static Symbol s = intern(".");
  return s;
}
Symbol stop() {
  static Symbol s = intern("$stop");
  return s;
}
Symbol truth() {
  static Symbol s = intern("true");
  return s;
}
Symbol comma() {
  static Symbol s = intern(",");
  return s;
}
Symbol clause() {
  static Symbol s = intern(":-");
  return s;
}
Symbol bclause() {
  static Symbol s = intern("::-");
  return s;
}
} // namespace sym

} // namespace contina
