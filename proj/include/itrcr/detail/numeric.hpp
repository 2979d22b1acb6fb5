#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace itrcr::detail {

// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Strict full-token parse; throws on anything but a finite-looking number.
inline double parse_double(std::string_view text, const std::string& where) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last || text.empty()) {
    throw std::invalid_argument("non-numeric value '" + std::string(text) +
                                "' in " + where);
  }
  return value;
}

inline long long parse_int(std::string_view text, const std::string& where) {
  long long value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() ||
      text.empty()) {
    throw std::invalid_argument("non-integer value '" + std::string(text) +
                                "' in " + where);
  }
  return value;
}

template <typename Fn>
double adaptive_simpson_rec(Fn& f, double a, double b, double fa, double fm,
                            double fb, double whole, double tol, int depth) {
  double m = a + 0.5 * (b - a);
  double lm = a + 0.5 * (m - a);
  double rm = m + 0.5 * (b - m);
  double flm = f(lm);
  double frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol,
                              depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol,
                              depth - 1);
}

// Adaptive Simpson quadrature with an absolute error target.
template <typename Fn>
double adaptive_simpson(Fn f, double a, double b, double abs_tol,
                        int max_depth = 40) {
  if (!(b > a)) return 0.0;
  double fa = f(a);
  double fb = f(b);
  double m = a + 0.5 * (b - a);
  double fm = f(m);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

}  // namespace itrcr::detail
