#pragma once

#include <stdexcept>
#include <string>

namespace itrcr::detail {

[[noreturn]] inline void check_failed(const char* what, const char* file,
                                      int line) {
  throw std::logic_error(std::string("internal invariant violated: ") + what +
                         " (" + file + ":" + std::to_string(line) + ")");
}

}  // namespace itrcr::detail

// Always-on invariant check for conditions that are impossible given valid
// inputs (not reachable through any public-API misuse).
#define ITRCR_CHECK(cond, what)                                \
  do {                                                         \
    if (!(cond)) ::itrcr::detail::check_failed(what, __FILE__, __LINE__); \
  } while (0)
