#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "diracbag/halfint_bessel.hpp"

using namespace diracbag;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double pi = std::numbers::pi;

// ascending series sum_k (-1)^k (x/2)^(2k+p) / (k! Gamma(k+p+1))
double series_j(double p, double x, int terms = 40) {
  double s = 0.0;
  for (int k = 0; k < terms; ++k) {
    const double lg = std::lgamma(k + 1.0) + std::lgamma(k + p + 1.0);
    const double t = std::exp((2 * k + p) * std::log(x / 2.0) - lg);
    s += (k % 2 ? -t : t);
  }
  return s;
}

double bisect(double (*f)(double), double a, double b) {
  double fa = f(a);
  for (int i = 0; i < 200; ++i) {
    const double c = 0.5 * (a + b), fc = f(c);
    if ((fc < 0) == (fa < 0)) {
      a = c;
      fa = fc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("HalfInt stores twice the order") {
  CHECK(HalfInt(5).value() == 2.5);
  CHECK(HalfInt(5).is_half_odd());
  CHECK_FALSE(HalfInt(4).is_half_odd());
  CHECK(HalfInt(3).plus_one() == HalfInt(5));
  CHECK(HalfInt(7).str() == "7/2");
  CHECK_THROWS_AS(HalfInt(0), DomainError);
}

TEST_CASE("closed forms of the lowest orders") {
  CHECK_THAT(bessel_j_half(HalfInt(1), pi), WithinAbs(0.0, 1e-15));
  CHECK_THAT(bessel_j_half(HalfInt(3), pi), WithinRel(std::sqrt(2.0) / pi, 1e-13));
  CHECK_THAT(bessel_j_half(HalfInt(1), 0.7), WithinRel(std::sqrt(2.0 / (pi * 0.7)) * std::sin(0.7), 1e-14));
}

TEST_CASE("power-series oracle") {
  CHECK_THAT(bessel_j_half(HalfInt(5), 1.0), WithinRel(series_j(2.5, 1.0), 1e-13));
  for (int p2 : {1, 3, 5, 9, 15, 21})
    for (double x : {0.01, 0.3, 1.0, 2.5, 6.0})
      CHECK_THAT(bessel_j_half(HalfInt(p2), x), WithinAbs(series_j(0.5 * p2, x, 60), 1e-12));
}

TEST_CASE("bessel_j_half rejects non-positive x") {
  CHECK_THROWS_AS(bessel_j_half(HalfInt(1), 0.0), DomainError);
  CHECK_THROWS_AS(bessel_j_half(HalfInt(3), -1.0), DomainError);
  CHECK_THROWS_AS(bessel_j_half(HalfInt(2), 1.0), DomainError);
}

TEST_CASE("three-term recurrence residual on a log grid") {
  for (int p2 = 3; p2 <= 25; p2 += 2) {
    const double p = 0.5 * p2;
    for (double lx = -3.0; lx <= 2.0; lx += 0.125) {
      const double x = std::pow(10.0, lx);
      const double jm = bessel_j_half(HalfInt(p2 - 2), x), j0 = bessel_j_half(HalfInt(p2), x),
                   jp = bessel_j_half(HalfInt(p2 + 2), x);
      const double scale = std::max({1.0, std::abs(j0), std::abs(jm), std::abs(jp)});
      INFO("p = " << p << ", x = " << x);
      CHECK(std::abs(jm + jp - (2.0 * p / x) * j0) < 1e-10 * scale);
    }
  }
}

TEST_CASE("ratio near zero") {
  const double x = 1e-4;
  CHECK_THAT(bessel_ratio(HalfInt(1), x), WithinAbs(x / 3.0, 1e-12));
  CHECK(bessel_ratio(HalfInt(1), 0.0) == 0.0);
}

TEST_CASE("ratio against the Mittag-Leffler partial sum") {
  const double x = 2.0;
  const int n = 10000;
  double s = 0.0;
  for (int k = n; k >= 1; --k) s += 2.0 * x / (k * k * pi * pi - x * x);
  // tail sum_{k>n} 2x/(k pi)^2 to O(n^-3)
  const double tail = 2.0 * x / (pi * pi) * (1.0 / n - 0.5 / (double(n) * n) + 1.0 / (6.0 * n * double(n) * n));
  const double direct = (std::sin(x) / x - std::cos(x)) / std::sin(x);
  CHECK_THAT(bessel_ratio(HalfInt(1), x), WithinAbs(s, 5e-5));
  CHECK_THAT(bessel_ratio(HalfInt(1), x), WithinAbs(s + tail, 1e-9));
  CHECK_THAT(bessel_ratio(HalfInt(1), x), WithinRel(direct, 1e-13));
}

TEST_CASE("ratio is odd") {
  for (int p2 : {1, 3, 7})
    for (double x : {0.2, 1.7, 5.3, 12.9}) CHECK(bessel_ratio(HalfInt(p2), -x) == -bessel_ratio(HalfInt(p2), x));
}

TEST_CASE("ratio blows up with a sign change at a zero") {
  const double z = bessel_zero(HalfInt(3), 2);
  CHECK(std::abs(bessel_ratio(HalfInt(3), z)) > 1e10);
  CHECK(bessel_ratio(HalfInt(3), z - 1e-6) > 1e5);
  CHECK(bessel_ratio(HalfInt(3), z + 1e-6) < -1e5);
}

TEST_CASE("ratio increases between consecutive poles") {
  for (int p2 : {1, 3, 5}) {
    const HalfInt p(p2);
    std::vector<double> poles{0.0};
    for (int k = 1; k <= 4; ++k) poles.push_back(bessel_zero(p, k));
    for (std::size_t i = 0; i + 1 < poles.size(); ++i) {
      const double a = poles[i], b = poles[i + 1];
      double prev = -INFINITY;
      for (int s = 1; s < 200; ++s) {
        const double x = a + (b - a) * s / 200.0;
        const double r = bessel_ratio(p, x);
        CHECK(r > prev);
        prev = r;
      }
    }
  }
}

TEST_CASE("zeros of low orders") {
  CHECK_THAT(bessel_zero(HalfInt(1), 1), WithinRel(pi, 1e-14));
  CHECK_THAT(bessel_zero(HalfInt(1), 7), WithinRel(7.0 * pi, 1e-14));
  const double oracle = bisect([](double x) { return std::sin(x) - x * std::cos(x); }, pi + 1e-9, 1.5 * pi - 1e-9);
  CHECK_THAT(bessel_zero(HalfInt(3), 1), WithinRel(oracle, 1e-12));
  CHECK_THAT(oracle, WithinAbs(4.493409457909064, 1e-12));
  CHECK_THROWS_AS(bessel_zero(HalfInt(1), 0), DomainError);
}

TEST_CASE("zeros are simple, increasing and interlaced") {
  for (int p2 = 1; p2 <= 15; p2 += 2) {
    const HalfInt p(p2), q(p2 + 2);
    const auto t = zero_cache().table(p, 8);
    for (std::size_t k = 0; k < 8; ++k) {
      CHECK(std::abs(bessel_j_half(p, t[k])) < 1e-12);
      if (k + 1 < 8) {
        CHECK(t[k] < t[k + 1]);
        CHECK(t[k] < bessel_zero(q, int(k) + 1));
        CHECK(bessel_zero(q, int(k) + 1) < t[k + 1]);
      }
    }
  }
}

TEST_CASE("zero cache round trip is exact") {
  const auto dir = std::filesystem::temp_directory_path() / "diracbag_zero_cache_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "zeros.txt").string();
  BesselZeroCache a;
  std::vector<double> fresh;
  for (int p2 : {1, 3, 5, 7})
    for (int k = 1; k <= 6; ++k) fresh.push_back(a.zero(HalfInt(p2), k));
  a.save(path);

  BesselZeroCache b;
  const std::size_t loaded = b.load(path);
  CHECK(loaded >= 24);
  CHECK(b.load(path) == 0);  // already present
  std::size_t i = 0;
  for (int p2 : {1, 3, 5, 7})
    for (int k = 1; k <= 6; ++k) CHECK(b.zero(HalfInt(p2), k) == fresh[i++]);
  // entries past the file are computed identically
  CHECK(b.zero(HalfInt(7), 9) == a.zero(HalfInt(7), 9));
  CHECK(BesselZeroCache().load((dir / "missing.txt").string()) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("Taylor evaluation next to a zero") {
  // J_{1/2}(k pi + t) = (-1)^k sqrt(2/(pi x)) sin t, exact in t
  for (int k = 1; k <= 5; ++k)
    for (double t : {-0.3, -1e-3, -1e-9, 1e-12, 2e-6, 0.1, 0.4}) {
      const double x = k * pi + t;
      const double ref = (k % 2 ? -1.0 : 1.0) * std::sqrt(2.0 / (pi * x)) * std::sin(t);
      CHECK_THAT(bessel_j_half_near_zero(HalfInt(1), k, t), WithinRel(ref, 1e-13));
    }
  for (int p2 : {3, 5, 9})
    for (int k : {1, 2, 4}) {
      const HalfInt p(p2);
      const double z = bessel_zero(p, k);
      CHECK_THAT(bessel_j_half_near_zero(p, k, 0.05), WithinAbs(bessel_j_half(p, z + 0.05), 1e-14));
      CHECK_THAT(bessel_j_half_near_zero(p, k, -0.2), WithinAbs(bessel_j_half(p, z - 0.2), 1e-14));
      // slope at the zero is -J_{p+1}(z)
      const double t = 1e-10;
      CHECK_THAT(bessel_j_half_near_zero(p, k, t) / t, WithinRel(-bessel_j_half(p.plus_one(), z), 1e-9));
      CHECK_THROWS_AS(bessel_j_half_near_zero(p, k, z), DomainError);
    }
}
