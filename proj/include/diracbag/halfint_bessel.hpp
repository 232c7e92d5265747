#pragma once

// Bessel functions J_p of half-integer order, their consecutive ratios and
// their positive zeros.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace diracbag {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// p stored as 2p so that half-integers are exact.
class HalfInt {
 public:
  constexpr HalfInt() = default;
  constexpr explicit HalfInt(int twice) : twice_(twice) {
    if (twice < 1) throw DomainError("HalfInt: twice_value must be >= 1");
  }
  static constexpr HalfInt from_twice(int twice) { return HalfInt(twice); }

  constexpr int twice_value() const { return twice_; }
  constexpr double value() const { return 0.5 * twice_; }
  constexpr bool is_half_odd() const { return (twice_ & 1) == 1; }
  constexpr HalfInt plus_one() const { return HalfInt(twice_ + 2); }

  friend constexpr bool operator==(HalfInt a, HalfInt b) { return a.twice_ == b.twice_; }
  friend constexpr auto operator<=>(HalfInt a, HalfInt b) { return a.twice_ <=> b.twice_; }

  std::string str() const {
    return (twice_ & 1) ? std::to_string(twice_) + "/2" : std::to_string(twice_ / 2);
  }

 private:
  int twice_ = 1;
};

class BesselPoleError : public std::runtime_error {
 public:
  BesselPoleError(const std::string& what, double nearest_zero)
      : std::runtime_error(what), nearest_zero_(nearest_zero) {}
  double nearest_zero() const { return nearest_zero_; }

 private:
  double nearest_zero_;
};

namespace detail {

inline void require_half_odd(HalfInt p, const char* who) {
  if (!p.is_half_odd())
    throw DomainError(std::string(who) + ": order must be a half-odd integer, got " + p.str());
}

inline double j_half(double x) { return std::sqrt(2.0 / (std::numbers::pi * x)) * std::sin(x); }

inline double j_three_halves(double x) {
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (std::sin(x) / x - std::cos(x));
}

// J_{p+1}/J_p from the downward ratio recurrence
// r_q = x / (2(q+1) - x r_{q+1}); the minimal solution makes it stable.
inline double ratio_cf(double p, double x) {
  const double ax = std::abs(x);
  const int extra = 40 + static_cast<int>(ax) + static_cast<int>(8.0 * std::sqrt(p + ax));
  double q = p + extra;
  double r = x / (2.0 * (q + 1.0));
  while (q > p) {
    q -= 1.0;
    r = x / (2.0 * (q + 1.0) - x * r);
  }
  return r;
}

}  // namespace detail

// J_p(x), x > 0.
inline double bessel_j_half(HalfInt p, double x) {
  detail::require_half_odd(p, "bessel_j_half");
  if (!(x > 0.0)) throw DomainError("bessel_j_half: x must be positive");
  const int n = (p.twice_value() - 1) / 2;  // p = n + 1/2
  const double j0 = detail::j_half(x);
  if (n == 0) return j0;
  const double j1 = detail::j_three_halves(x);
  if (n == 1) return j1;
  const double pv = p.value();

  if (x >= pv) {
    double a = j0, b = j1;
    for (int q = 1; q < n; ++q) {
      const double c = (2.0 * (q + 0.5) / x) * b - a;
      a = b;
      b = c;
    }
    return b;
  }

  // Miller's algorithm normalized against whichever closed form is larger.
  const int top = n + 30 + static_cast<int>(10.0 * std::sqrt(pv + x));
  double f_hi = 0.0, f = 1e-280, f_p = 0.0, f0 = 0.0, f1 = 0.0;
  for (int q = top; q >= 0; --q) {
    // f currently holds J_{q+1/2} up to scale, f_hi holds J_{q+3/2}.
    if (q == n) f_p = f;
    if (q == 1) f1 = f;
    if (q == 0) {
      f0 = f;
      break;
    }
    const double g = (2.0 * (q + 0.5) / x) * f - f_hi;
    f_hi = f;
    f = g;
    if (std::abs(f) > 1e250) {
      f *= 1e-250;
      f_hi *= 1e-250;
      f_p *= 1e-250;
      f1 *= 1e-250;
    }
  }
  if (std::abs(j0) >= std::abs(j1)) return f_p * (j0 / f0);
  return f_p * (j1 / f1);
}

namespace detail {

inline double mcmahon(double p, int k) {
  const double mu = 4.0 * p * p;
  const double beta = (k + 0.5 * p - 0.25) * std::numbers::pi;
  const double e = 8.0 * beta;
  return beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e * e * e);
}

inline double refine_zero(HalfInt p, double lo, double hi) {
  double flo = bessel_j_half(p, lo);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = bessel_j_half(p, mid);
    if (fm == 0.0) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  double z = 0.5 * (lo + hi);
  const double pv = p.value();
  for (int it = 0; it < 2; ++it) {
    const double jp = bessel_j_half(p, z);
    const double jq = bessel_j_half(p.plus_one(), z);
    const double deriv = (pv / z) * jp - jq;
    if (deriv == 0.0) break;
    const double zn = z - jp / deriv;
    if (zn <= lo || zn >= hi) break;
    z = zn;
  }
  return z;
}

}  // namespace detail

// Positive zeros of J_p with lazy growth; immutable entries once computed.
class BesselZeroTable {
 public:
  BesselZeroTable() = default;
  explicit BesselZeroTable(HalfInt order) : order_(order) {}
  BesselZeroTable(HalfInt order, std::vector<double> zeros) : order_(order), zeros_(std::move(zeros)) {}

  HalfInt order() const { return order_; }
  const std::vector<double>& zeros() const { return zeros_; }
  std::size_t size() const { return zeros_.size(); }
  double operator[](std::size_t i) const { return zeros_[i]; }

 private:
  friend class BesselZeroCache;
  HalfInt order_{1};
  std::vector<double> zeros_;
};

class BesselZeroCache {
 public:
  double zero(HalfInt p, int k) {
    detail::require_half_odd(p, "bessel_zero");
    if (k < 1) throw DomainError("bessel_zero: k must be >= 1");
    std::lock_guard<std::mutex> lock(mutex_);
    return zero_locked(p, k);
  }

  BesselZeroTable table(HalfInt p, int count) {
    for (int k = 1; k <= count; ++k) zero(p, k);
    std::lock_guard<std::mutex> lock(mutex_);
    auto& t = tables_.at(p.twice_value());
    return BesselZeroTable(p, std::vector<double>(t.begin(), t.begin() + count));
  }

  // Lines "2p k z"; entries already present are kept.
  std::size_t load(const std::string& path) {
    std::ifstream in(path);
    if (!in) return 0;
    std::lock_guard<std::mutex> lock(mutex_);
    std::map<int, std::map<int, double>> read;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      int tp = 0, k = 0;
      double z = 0;
      if (!(ls >> tp >> k >> z)) continue;
      if (tp < 1 || (tp & 1) == 0 || k < 1 || !(z > 0)) continue;
      read[tp][k] = z;
    }
    std::size_t n = 0;
    for (auto& [tp, ks] : read) {
      auto& t = tables_[tp];
      int expect = static_cast<int>(t.size()) + 1;
      for (auto& [k, z] : ks) {
        if (k < expect) continue;
        if (k != expect) break;
        t.push_back(z);
        ++expect;
        ++n;
      }
    }
    return n;
  }

  void save(const std::string& path) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write zero cache " + path);
    out << std::setprecision(17);
    for (auto& [tp, zs] : tables_)
      for (std::size_t i = 0; i < zs.size(); ++i) out << tp << ' ' << (i + 1) << ' ' << zs[i] << '\n';
  }

  void clear() {
    std::lock_guard<std::mutex> lock(mutex_);
    tables_.clear();
  }

 private:
  double zero_locked(HalfInt p, int k) {
    auto& t = tables_[p.twice_value()];
    while (static_cast<int>(t.size()) < k) t.push_back(compute(p, static_cast<int>(t.size()) + 1));
    return t[k - 1];
  }

  double compute(HalfInt p, int k) {
    if (p.twice_value() == 1) return k * std::numbers::pi;
    // Interlacing with order p-1 gives a bracket with exactly one zero.
    const HalfInt lower(p.twice_value() - 2);
    double lo = zero_locked(lower, k);
    double hi = zero_locked(lower, k + 1);
    const double guess = detail::mcmahon(p.value(), k);
    const double glo = std::max(lo, guess - 0.5), ghi = std::min(hi, guess + 0.5);
    if (glo < ghi) {
      const double a = bessel_j_half(p, glo), b = bessel_j_half(p, ghi);
      if ((a < 0) != (b < 0)) {
        lo = glo;
        hi = ghi;
      }
    }
    return detail::refine_zero(p, lo, hi);
  }

  mutable std::mutex mutex_;
  std::map<int, std::vector<double>> tables_;
};

inline BesselZeroCache& zero_cache() {
  static BesselZeroCache cache;
  return cache;
}

inline double bessel_zero(HalfInt p, int k) { return zero_cache().zero(p, k); }

// J_p(z + t) with z = z_{p,k}, from the Taylor series at the zero. Keeps full
// relative accuracy when t is far below the spacing of doubles near z.
// Coefficients follow from the Bessel equation shifted to z:
// c_{n+2} = -[z(n+1)(2n+1)c_{n+1} + (n^2 + z^2 - p^2)c_n + 2z c_{n-1} + c_{n-2}] / (z^2 (n+2)(n+1)).
inline double bessel_j_half_near_zero(HalfInt p, int k, double t) {
  const double z = bessel_zero(p, k);
  if (!(std::abs(t) < 0.5 * z)) throw DomainError("bessel_j_half_near_zero: |t| must be below z/2");
  const double pv = p.value();
  double c[4] = {0.0, 0.0, 0.0, -bessel_j_half(p.plus_one(), z)};  // c_{n-3}, ..., c_n with n = 1
  double sum = c[3] * t, tn = t;
  for (int n = 1; n < 60; ++n) {
    // c[3] = c_n, c[2] = c_{n-1}, c[1] = c_{n-2}, c[0] = c_{n-3}
    const int km = n - 1;  // recurrence index giving c_{km+2} = c_{n+1}
    const double next = -(z * (km + 1) * (2 * km + 1) * c[3] + (km * km + z * z - pv * pv) * c[2] +
                          2.0 * z * c[1] + c[0]) /
                        (z * z * (km + 2) * (km + 1));
    c[0] = c[1];
    c[1] = c[2];
    c[2] = c[3];
    c[3] = next;
    tn *= t;
    const double term = next * tn;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// J_{p+1}(x)/J_p(x); odd in x.
inline double bessel_ratio(HalfInt p, double x) {
  detail::require_half_odd(p, "bessel_ratio");
  if (x == 0.0) return 0.0;
  const double pv = p.value();
  const double ax = std::abs(x);
  if (ax < 1e-4) return x / (2.0 * (pv + 1.0)) + x * x * x / (8.0 * (pv + 1.0) * (pv + 1.0) * (pv + 2.0));
  const double r = detail::ratio_cf(pv, x);
  bool pole = !std::isfinite(r);
  if (!pole && ax > pv) pole = std::abs(bessel_j_half(p, ax)) < 1e-300;
  if (pole) {
    int k = std::max(1, static_cast<int>(std::floor(ax / std::numbers::pi)));
    double best = bessel_zero(p, k);
    for (int kk = std::max(1, k - 2); kk <= k + 2; ++kk) {
      const double z = bessel_zero(p, kk);
      if (std::abs(z - ax) < std::abs(best - ax)) best = z;
    }
    throw BesselPoleError("bessel_ratio: x is a zero of J_" + p.str(), std::copysign(best, x));
  }
  return r;
}

// d/dx of J_{p+1}/J_p expressed through the ratio itself.
inline double bessel_ratio_derivative(HalfInt p, double x, double r) {
  if (x == 0.0) return 1.0 / (2.0 * (p.value() + 1.0));
  return 1.0 + r * r - (2.0 * p.value() + 1.0) * r / x;
}

}  // namespace diracbag
