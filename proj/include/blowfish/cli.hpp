#pragma once

#include <iosfwd>

namespace blowfish {

// Entry point shared by the binary and the tests.  Returns the process exit
// code: 0 on success, 1 on validation errors, 2 on runtime failures.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace blowfish
