#pragma once

#include <ostream>

namespace tsm {

// Quick built-in property checks: exponential algebra against an independent
// ODE integration, rank-1 fit exactness, self-distance of a fitted phantom
// model, and stability of the path distance under time refinement. Prints
// one pass/fail line per check; returns true iff all pass. Designed to run
// in well under a minute.
bool run_selftest(std::ostream& out);

}  // namespace tsm
