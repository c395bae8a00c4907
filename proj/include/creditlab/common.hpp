#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace creditlab {

// Bad configuration or strategy/model files. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Violated data contract (malformed inputs, broken invariants, failed
// calibration). CLI maps this to exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Violated operation precondition (programming error at the call site).
class DomainError : public std::logic_error {
 public:
  explicit DomainError(const std::string& what) : std::logic_error(what) {}
};

// Calendar month. Stored as a flat month index so arithmetic is trivial;
// serialized as YYYYMM everywhere.
class Period {
 public:
  constexpr Period() = default;

  static Period from_yyyymm(int yyyymm) {
    const int y = yyyymm / 100;
    const int m = yyyymm % 100;
    if (y < 1 || m < 1 || m > 12)
      throw DataError("invalid period " + std::to_string(yyyymm));
    Period p;
    p.idx_ = y * 12 + (m - 1);
    return p;
  }

  static constexpr Period from_index(int idx) {
    Period p;
    p.idx_ = idx;
    return p;
  }

  constexpr int yyyymm() const { return (idx_ / 12) * 100 + idx_ % 12 + 1; }
  constexpr int year() const { return idx_ / 12; }
  constexpr int index() const { return idx_; }
  constexpr Period plus_months(int n) const { return from_index(idx_ + n); }
  constexpr Period prev() const { return from_index(idx_ - 1); }
  constexpr Period next() const { return from_index(idx_ + 1); }

  // Whole months from a to b (positive when b is later).
  friend constexpr int months_between(Period a, Period b) { return b.idx_ - a.idx_; }

  friend constexpr auto operator<=>(Period, Period) = default;

 private:
  int idx_ = 0;
};

// Missing numeric values travel as quiet NaN; CSV renders them as empty cells.
inline constexpr double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("logit argument outside (0,1)");
  return std::log(p / (1.0 - p));
}

}  // namespace creditlab
