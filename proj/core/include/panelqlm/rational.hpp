#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace panelqlm {

// Exact rational scalar on int64 with overflow detection. Used for the
// small-integer matrix identities where floating point would hide an exact
// result behind a tolerance. Throws std::overflow_error instead of wrapping.
class Rational {
 public:
  Rational() : num_(0), den_(1) {}
  Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT: implicit on purpose
  Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) {
    if (den_ == 0) throw std::invalid_argument("Rational: zero denominator");
    normalize();
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(checked(mul(a.num_, b.den_) + mul(b.num_, a.den_)), mul(a.den_, b.den_));
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return Rational(checked(mul(a.num_, b.den_) - mul(b.num_, a.den_)), mul(a.den_, b.den_));
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(mul(a.num_, b.num_), mul(a.den_, b.den_));
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("Rational: division by zero");
    return Rational(mul(a.num_, b.den_), mul(a.den_, b.num_));
  }
  Rational operator-() const { return Rational(-num_, den_); }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }

 private:
  static std::int64_t checked(__int128 v) {
    if (v > INT64_MAX || v < INT64_MIN) throw std::overflow_error("Rational overflow");
    return static_cast<std::int64_t>(v);
  }
  static std::int64_t mul(std::int64_t a, std::int64_t b) {
    return checked(static_cast<__int128>(a) * b);
  }
  void normalize() {
    if (den_ < 0) { num_ = -num_; den_ = -den_; }
    std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) { num_ /= g; den_ /= g; }
    if (num_ == 0) den_ = 1;
  }

  std::int64_t num_;
  std::int64_t den_;
};

}  // namespace panelqlm

namespace Eigen {

template <>
struct NumTraits<panelqlm::Rational> : GenericNumTraits<panelqlm::Rational> {
  using Real = panelqlm::Rational;
  using NonInteger = panelqlm::Rational;
  using Nested = panelqlm::Rational;
  using Literal = std::int64_t;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 4,
  };
  static panelqlm::Rational epsilon() { return panelqlm::Rational(0); }
  static panelqlm::Rational dummy_precision() { return panelqlm::Rational(0); }
  static int digits10() { return 18; }
};

}  // namespace Eigen
