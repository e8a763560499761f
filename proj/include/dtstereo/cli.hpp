#pragma once

#include <iostream>

namespace dtstereo {

// Entry point of the `dtstereo` tool. Returns 0 on success, 1 when a
// component fails and 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace dtstereo
