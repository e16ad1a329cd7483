#pragma once

#include <ostream>

namespace nbs {

/// Entry point of the `nbsmooth` tool. Returns 0 on success, 1 on data or
/// configuration errors and 2 on usage errors. Errors are reported as one
/// line on `err`: `error kind=<kind>: <message>`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nbs
