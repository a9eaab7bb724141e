#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "term.hpp"

namespace contina {

// Parsed query: the goal term plus the named variables of the source text in
// first-occurrence order. '_' never appears here; each '_' is a fresh cell.
struct ParsedQuery {
  Term goal = nullptr;
  std::vector<std::pair<std::string, Term>> vars;
};

// All entry points throw PrologError carrying syntax_error(ByteOffset) on
// malformed input. Terms are allocated from the given pool.

// One term, no trailing clause terminator. Wire payloads use this.
Term parse_term_text(TermPool &pool, std::string_view text);

// One goal, optional trailing '.', named-variable capture.
ParsedQuery parse_query_text(TermPool &pool, std::string_view text);

// A whole program: raw clause terms in source order, each terminated by '.'.
// Variable scope resets per clause. '%' comments and layout are skipped.
std::vector<Term> parse_program_text(TermPool &pool, std::string_view text);

} // namespace contina
