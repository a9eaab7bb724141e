#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace contina {

// Interned functor/atom name. Equal ids mean equal names, process-wide.
using Symbol = uint32_t;

Symbol intern(std::string_view name);
const std::string &symbol_name(Symbol s);

// Preinterned symbols used throughout the runtime.
namespace sym {
Symbol nil();     // '[]'
Symbol dot();     // '.'  (list cell)
Symbol stop();    // '$stop'
Symbol truth();   // 'true'
Symbol comma();   // ','
Symbol clause();  // ':-'
Symbol bclause(); // '::-'
} // namespace sym

} // namespace contina
