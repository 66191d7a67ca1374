// Generic call-and-print support for generated test harnesses.
//
// wrapper(fn, args...) calls fn once and prints one record:
//   Return value: <V> Arguments after function call: (<A1>, ..., <Ak>)
// Sized arrays print as "[ e1, e2 ]" after the call, so writes through
// array arguments show up. Floating values use the stream default of six
// significant digits.
#ifndef COVERIFY_HARNESS_H
#define COVERIFY_HARNESS_H

#define COVERIFY_HARNESS_VERSION 1

#include <assert.h>
#include <float.h>
#include <limits.h>
#include <math.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include <cmath>
#include <cstddef>
#include <iostream>
#include <type_traits>
#include <utility>

#ifndef restrict
#define restrict __restrict
#endif

namespace coverify_rt {

template <class T>
void print_value(std::ostream& os, const T& v);

template <class T, std::size_t N>
void print_value(std::ostream& os, const T (&arr)[N]) {
  os << "[ ";
  for (std::size_t i = 0; i < N; ++i) {
    if (i) os << ", ";
    print_value(os, arr[i]);
  }
  os << " ]";
}

template <class T>
void print_value(std::ostream& os, const T& v) {
  using U = std::remove_cv_t<T>;
  if constexpr (std::is_same_v<U, bool>) {
    os << (v ? 1 : 0);
  } else if constexpr (std::is_same_v<U, char> || std::is_same_v<U, signed char> ||
                       std::is_same_v<U, unsigned char>) {
    os << static_cast<int>(v);
  } else if constexpr (std::is_arithmetic_v<U>) {
    os << v;
  } else if constexpr (std::is_enum_v<U>) {
    os << static_cast<std::underlying_type_t<U>>(v);
  } else if constexpr (std::is_pointer_v<U> || std::is_null_pointer_v<U>) {
    os << "ptr";
  } else {
    os << "obj";
  }
}

inline void case_begin(int k) { std::cout << "=== CASE " << k << " ===" << std::endl; }

inline void case_end(int k) { std::cout << "=== END " << k << " ===" << std::endl; }

}  // namespace coverify_rt

template <class F, class... A>
void wrapper(F&& fn, A&&... args) {
  using R = decltype(fn(args...));
  if constexpr (std::is_void_v<R>) {
    fn(args...);
    fflush(stdout);
    std::cout << "Return value: void";
  } else {
    auto result = fn(args...);
    fflush(stdout);
    std::cout << "Return value: ";
    coverify_rt::print_value(std::cout, result);
  }
  std::cout << " Arguments after function call: (";
  int i = 0;
  ((std::cout << (i++ ? ", " : ""), coverify_rt::print_value(std::cout, args)), ...);
  std::cout << ")" << std::endl;
}

#endif
