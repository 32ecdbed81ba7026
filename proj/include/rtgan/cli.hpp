#pragma once

#include <iosfwd>

namespace rtgan {

// Entry point of the `rtgan` tool: synth, precompute, train, infer, eval, params.
// Returns 0 on success, 1 when a module reports an error, 2 on bad usage.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rtgan
