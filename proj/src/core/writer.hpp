#pragma once

#include <string>
#include <string_view>

#include "term.hpp"

namespace contina {

// Canonical text: functional notation, no whitespace, variables renamed to
// _V0.._Vn by first occurrence in a depth-first left-to-right walk, atoms
// quoted unless they match [a-z][a-zA-Z0-9_]*, lists written with sugar.
// Identical terms (up to variable renaming) produce identical strings, so the
// output doubles as a structural key. Throws PrologError (cyclic_term) on
// cyclic input.
std::string canonical_text(Term t);

// Appends instead of returning; used by the writers that build frames.
void canonical_text_into(Term t, std::string &out);

bool atom_needs_quotes(std::string_view name);
void quote_atom_into(std::string_view name, std::string &out);

} // namespace contina
