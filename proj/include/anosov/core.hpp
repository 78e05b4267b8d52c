#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace anosov {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Errors carry the stable name used on stderr by the CLI. Contract errors
// signal a violated numerical identity (exit 3); everything else is a
// validation failure (exit 2).
enum class ErrorKind { Validation, Contract };

class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& detail, ErrorKind kind = ErrorKind::Validation)
      : std::runtime_error(name + ": " + detail), name_(std::move(name)), kind_(kind) {}

  const std::string& name() const noexcept { return name_; }
  ErrorKind kind() const noexcept { return kind_; }

 private:
  std::string name_;
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& name, const std::string& detail) {
  throw Error(name, detail, ErrorKind::Validation);
}

[[noreturn]] inline void violate(const std::string& name, const std::string& detail) {
  throw Error(name, detail, ErrorKind::Contract);
}

// ---------------------------------------------------------------------------
// Checked 64-bit integer arithmetic.

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) fail("Overflow", "64-bit multiplication overflow");
  return r;
}

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) fail("Overflow", "64-bit addition overflow");
  return r;
}

inline std::int64_t checked_sub(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_sub_overflow(a, b, &r)) fail("Overflow", "64-bit subtraction overflow");
  return r;
}

inline std::int64_t checked_abs(std::int64_t a) {
  if (a == std::numeric_limits<std::int64_t>::min()) fail("Overflow", "abs of INT64_MIN");
  return a < 0 ? -a : a;
}

inline std::int64_t gcd64(std::int64_t a, std::int64_t b) {
  a = checked_abs(a);
  b = checked_abs(b);
  while (b != 0) {
    auto t = a % b;
    a = b;
    b = t;
  }
  return a;
}

inline std::int64_t mod_floor(std::int64_t a, std::int64_t m) {
  auto r = a % m;
  return r < 0 ? r + m : r;
}

/// Row-major 2x2 integer matrix with overflow-checked products.
struct IntMatrix2 {
  std::array<std::int64_t, 4> e{1, 0, 0, 1};

  constexpr std::int64_t operator()(int r, int c) const { return e[2 * r + c]; }

  static constexpr IntMatrix2 identity() { return {}; }

  std::int64_t trace() const { return checked_add(e[0], e[3]); }
  std::int64_t det() const { return checked_sub(checked_mul(e[0], e[3]), checked_mul(e[1], e[2])); }

  IntMatrix2 transpose() const { return {{e[0], e[2], e[1], e[3]}}; }

  friend IntMatrix2 operator*(const IntMatrix2& a, const IntMatrix2& b) {
    IntMatrix2 r;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        r.e[2 * i + j] = checked_add(checked_mul(a(i, 0), b(0, j)), checked_mul(a(i, 1), b(1, j)));
    return r;
  }

  friend IntMatrix2 operator-(const IntMatrix2& a, const IntMatrix2& b) {
    return {{checked_sub(a.e[0], b.e[0]), checked_sub(a.e[1], b.e[1]), checked_sub(a.e[2], b.e[2]),
             checked_sub(a.e[3], b.e[3])}};
  }

  friend bool operator==(const IntMatrix2&, const IntMatrix2&) = default;

  IntMatrix2 pow(int n) const {
    IntMatrix2 result;
    IntMatrix2 base = *this;
    while (n > 0) {
      if (n & 1) result = result * base;
      n >>= 1;
      if (n > 0) base = base * base;
    }
    return result;
  }

  /// Image of an integer vector.
  std::array<std::int64_t, 2> apply(std::array<std::int64_t, 2> v) const {
    return {checked_add(checked_mul(e[0], v[0]), checked_mul(e[1], v[1])),
            checked_add(checked_mul(e[2], v[0]), checked_mul(e[3], v[1]))};
  }

  /// Image modulo m; inputs must already be reduced.
  std::array<std::int64_t, 2> apply_mod(std::array<std::int64_t, 2> v, std::int64_t m) const {
    auto r0 = mod_floor(static_cast<std::int64_t>((static_cast<__int128>(mod_floor(e[0], m)) * v[0] +
                                                   static_cast<__int128>(mod_floor(e[1], m)) * v[1]) %
                                                  m),
                        m);
    auto r1 = mod_floor(static_cast<std::int64_t>((static_cast<__int128>(mod_floor(e[2], m)) * v[0] +
                                                   static_cast<__int128>(mod_floor(e[3], m)) * v[1]) %
                                                  m),
                        m);
    return {r0, r1};
  }
};

// ---------------------------------------------------------------------------
// Compensated summation (Neumaier). Terms are added in caller order, so a
// fixed orbit order gives bit-reproducible totals.

template <typename Value>
class CompensatedSum;

template <>
class CompensatedSum<double> {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

template <>
class CompensatedSum<Complex> {
 public:
  void add(Complex z) {
    re_.add(z.real());
    im_.add(z.imag());
  }
  CompensatedSum& operator+=(Complex z) {
    add(z);
    return *this;
  }
  Complex value() const { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum<double> re_;
  CompensatedSum<double> im_;
};

// ---------------------------------------------------------------------------
// Small fitting helpers shared by several modules.

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) fail("DegenerateFit", "need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) fail("DegenerateFit", "abscissae coincide");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

/// Torus distance of a coordinate difference, in [0, 1/2].
inline double torus_gap(double d) {
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

/// Max-metric distance on the 2-torus.
inline double torus_distance(std::array<double, 2> a, std::array<double, 2> b) {
  return std::max(torus_gap(a[0] - b[0]), torus_gap(a[1] - b[1]));
}

inline double wrap_unit(double x) {
  x -= std::floor(x);
  return x >= 1.0 ? 0.0 : x;
}

namespace detail {

// FFTW planning is not thread-safe.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

}  // namespace anosov
