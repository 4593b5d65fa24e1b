#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace fullstab {

/// Exact rational used for certification runs. Expression templates are
/// disabled so the type behaves like a plain value in generic code.
using Rational = boost::multiprecision::number<
    boost::multiprecision::cpp_rational_backend, boost::multiprecision::et_off>;

template <class T>
T from_rational(const Rational& r) {
  if constexpr (std::is_same_v<T, Rational>) {
    return r;
  } else {
    return static_cast<T>(r);
  }
}

inline double to_double(double a) { return a; }
inline double to_double(const Rational& a) { return static_cast<double>(a); }

inline double abs_value(double a) { return std::abs(a); }
inline Rational abs_value(const Rational& a) { return a < 0 ? Rational(-a) : a; }

/// Zero threshold for a scalar type: exact arithmetic compares against 0.
template <class T>
T zero_tolerance(double tol) {
  if constexpr (std::is_same_v<T, Rational>) {
    (void)tol;
    return T(0);
  } else {
    return T(tol);
  }
}

inline std::string to_string(const Rational& r) {
  return r.str();
}

inline std::vector<double> to_double(const std::vector<Rational>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& a : v) out.push_back(static_cast<double>(a));
  return out;
}

}  // namespace fullstab
