#pragma once

#include <stdexcept>
#include <string>

namespace contina {

// Runtime errors carry their Prolog-level error term as canonical text, so
// they can cross engine/pool boundaries without ownership questions.
struct PrologError : std::runtime_error {
  explicit PrologError(std::string term_text)
      : std::runtime_error(term_text), term(std::move(term_text)) {}
  std::string term;
};

inline PrologError err_term(const std::string &text) {
  return PrologError(text);
}

// Raised by halt/0,1; unwinds to the process entry point, never caught as a
// Prolog error.
struct HaltSignal {
  int code = 0;
};

} // namespace contina
