#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/reader.hpp"
#include "core/runtime.hpp"
#include "core/writer.hpp"

namespace contina::testing {

using Binding = std::pair<std::string, std::string>;
using Answer = std::vector<Binding>;

// One query against a runtime: parses text, loads a fresh engine with the
// named variables as the answer template, yields answers as canonical texts.
class Query {
public:
  Query(Runtime &rt, const std::string &text) : eng_(rt.make_engine()) {
    ParsedQuery pq = parse_query_text(pool_, text);
    std::vector<Term> items;
    items.reserve(pq.vars.size());
    for (auto &[name, cell] : pq.vars) {
      names_.push_back(name);
      items.push_back(cell);
    }
    eng_->load(pq.goal, pool_.make_list(items));
  }

  std::optional<Answer> next() {
    auto r = eng_->ask();
    if (!r) return std::nullopt;
    TermPool tmp;
    Term cur = deref(r->instantiate(tmp));
    Answer out;
    for (const std::string &name : names_) {
      out.emplace_back(name, canonical_text(deref(cur)->args[0]));
      cur = deref(deref(cur)->args[1]);
    }
    return out;
  }

  Engine &engine() { return *eng_; }

private:
  TermPool pool_;
  std::unique_ptr<Engine> eng_;
  std::vector<std::string> names_;
};

inline bool succeeds(Runtime &rt, const std::string &text) {
  return Query(rt, text).next().has_value();
}

inline size_t count_solutions(Runtime &rt, const std::string &text,
                              size_t cap = 10000) {
  Query q(rt, text);
  size_t n = 0;
  while (n < cap && q.next()) ++n;
  return n;
}

// All values of one variable across all solutions, canonical text.
inline std::vector<std::string> values_of(Runtime &rt, const std::string &text,
                                          const std::string &var,
                                          size_t cap = 10000) {
  Query q(rt, text);
  std::vector<std::string> out;
  while (out.size() < cap) {
    auto a = q.next();
    if (!a) break;
    for (auto &[n, v] : *a)
      if (n == var) out.push_back(v);
  }
  return out;
}

inline std::optional<std::string> first_value(Runtime &rt,
                                              const std::string &text,
                                              const std::string &var) {
  Query q(rt, text);
  auto a = q.next();
  if (!a) return std::nullopt;
  for (auto &[n, v] : *a)
    if (n == var) return v;
  return std::nullopt;
}

// Canonical error term text of a query expected to throw; empty if it didn't.
inline std::string error_of(Runtime &rt, const std::string &text) {
  try {
    Query q(rt, text);
    while (q.next()) {
    }
  } catch (const PrologError &e) {
    return e.term;
  }
  return "";
}

} // namespace contina::testing
