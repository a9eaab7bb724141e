#pragma once

// The continuation-moving protocol. move/0 packages the rest of the current
// AND-branch, ships it to the there-target, and blocks until the remote side
// either finishes it or hands a rest back via return/0; move_thread/0 instead
// enqueues the captured continuation as a todo task and resumes after the
// target has released the base's code server. While a shipped segment runs,
// unknown predicates are fetched one at a time from the base.

#include "runtime.hpp"

namespace contina {

// Registers there/here/move/return/move_thread and the package-execution
// machinery, and installs the lazy fetch hook on the runtime.
void register_mobility_builtins(Runtime &rt);

} // namespace contina
