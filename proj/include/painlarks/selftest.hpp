#pragma once

#include <iosfwd>

namespace painlarks {

// Gradient checks and core invariants, one "ok"/"FAIL" line per check.
// Returns the number of failed checks.
int run_selftest(std::ostream& out);

}  // namespace painlarks
