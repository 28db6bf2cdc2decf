#pragma once

#include <iosfwd>

namespace refx {

// Entry point of the refx command. Exit codes: 0 success, 1 runtime
// failure (explainer, I/O, external model), 2 usage or configuration error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace refx
