#pragma once

// Spherical harmonics (Condon-Shortley phase, orthonormal on the unit sphere)
// and the spherical harmonic spinors psi^{mu}_{j -+ 1/2}.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "halfint_bessel.hpp"

namespace diracbag {

using cdouble = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Spinor = Eigen::Vector2cd;

inline constexpr int sh_index(int n, int ell) { return n * n + n + ell; }

// All Y_n^ell for n <= nmax at one point of the unit sphere.
class HarmonicTable {
 public:
  HarmonicTable() = default;
  explicit HarmonicTable(int nmax) { resize(nmax); }

  void resize(int nmax) {
    nmax_ = nmax;
    values_.assign(static_cast<std::size_t>((nmax + 1) * (nmax + 1)), cdouble(0));
    plm_.assign(values_.size(), 0.0);
    ca_.assign(values_.size(), 0.0);
    cb_.assign(values_.size(), 0.0);
    for (int l = 0; l <= nmax; ++l)
      for (int n = l + 2; n <= nmax; ++n) {
        ca_[sh_index(n, l)] = std::sqrt((4.0 * n * n - 1.0) / (static_cast<double>(n) * n - static_cast<double>(l) * l));
        cb_[sh_index(n, l)] = std::sqrt((static_cast<double>(n - 1) * (n - 1) - static_cast<double>(l) * l) /
                                        (4.0 * (n - 1) * (n - 1) - 1.0));
      }
  }

  int nmax() const { return nmax_; }

  void evaluate(const Vec3& point) {
    double t, s, phi;
    angles(point, t, s, phi);
    evaluate_angles(t, s, phi);
  }

  // Only the normalized Legendre part; Y_n^ell = plm(n, ell) e^{i ell phi} for ell >= 0.
  double legendre(const Vec3& point) {
    double t, s, phi;
    angles(point, t, s, phi);
    fill_legendre(t, s);
    return phi;
  }
  double plm(int n, int ell) const { return plm_[sh_index(n, ell)]; }

  void evaluate_angles(double t, double s, double phi) {
    const int L = nmax_;
    fill_legendre(t, s);
    const cdouble e1 = std::polar(1.0, phi);
    cdouble e = 1.0;
    for (int l = 0; l <= L; ++l) {
      const double sign = (l & 1) ? -1.0 : 1.0;
      for (int n = l; n <= L; ++n) {
        const cdouble y = plm_[sh_index(n, l)] * e;
        values_[sh_index(n, l)] = y;
        if (l > 0) values_[sh_index(n, -l)] = sign * std::conj(y);
      }
      e *= e1;
    }
  }

  cdouble operator()(int n, int ell) const { return values_[sh_index(n, ell)]; }
  const std::vector<cdouble>& values() const { return values_; }

 private:
  static void angles(const Vec3& point, double& t, double& s, double& phi) {
    const double rho = std::hypot(point.x(), point.y());
    const double norm = std::sqrt(rho * rho + point.z() * point.z());
    t = point.z() / norm;
    s = rho / norm;
    phi = (rho > 0.0) ? std::atan2(point.y(), point.x()) : 0.0;
  }

  void fill_legendre(double t, double s) {
    const int L = nmax_;
    double pll = 1.0 / std::sqrt(4.0 * std::numbers::pi);
    for (int l = 0; l <= L; ++l) {
      if (l > 0) pll *= -std::sqrt((2.0 * l + 1.0) / (2.0 * l)) * s;
      plm_[sh_index(l, l)] = pll;
      if (l + 1 <= L) plm_[sh_index(l + 1, l)] = std::sqrt(2.0 * l + 3.0) * t * pll;
      for (int n = l + 2; n <= L; ++n) {
        const int i = sh_index(n, l);
        plm_[i] = ca_[i] * (t * plm_[sh_index(n - 1, l)] - cb_[i] * plm_[sh_index(n - 2, l)]);
      }
    }
  }

  int nmax_ = -1;
  std::vector<cdouble> values_;
  std::vector<double> plm_, ca_, cb_;
};

inline cdouble spherical_harmonic(int n, int ell, const Vec3& point) {
  if (n < 0 || std::abs(ell) > n) throw DomainError("spherical_harmonic: requires |ell| <= n");
  HarmonicTable t(n);
  t.evaluate(point);
  return t(n, ell);
}

// branch = -1 selects psi_{j-1/2}, +1 selects psi_{j+1/2}.
struct SpinorLabel {
  int j2 = 1;
  int mu2 = 1;
  int branch = -1;

  double j() const { return 0.5 * j2; }
  double mu() const { return 0.5 * mu2; }
  int orbital() const { return branch < 0 ? (j2 - 1) / 2 : (j2 + 1) / 2; }

  void validate() const {
    if (j2 < 1 || (j2 & 1) == 0) throw DomainError("SpinorLabel: j must be a positive half-odd integer");
    if ((mu2 & 1) == 0 || std::abs(mu2) > j2) throw DomainError("SpinorLabel: need |mu| <= j, mu half-odd");
    if (branch != -1 && branch != 1) throw DomainError("SpinorLabel: branch must be +1 or -1");
  }

  SpinorLabel swapped() const { return {j2, mu2, -branch}; }
  friend bool operator==(const SpinorLabel&, const SpinorLabel&) = default;
};

// Components of a spinor as (coefficient, harmonic index) pairs; a zero
// coefficient marks an absent component.
struct SpinorRecipe {
  double c_up = 0.0, c_dn = 0.0;
  int n = 0;
  int ell_up = 0, ell_dn = 0;
};

inline SpinorRecipe spinor_recipe(const SpinorLabel& s) {
  const double j = s.j(), mu = s.mu();
  SpinorRecipe r;
  r.n = s.orbital();
  r.ell_up = (s.mu2 - 1) / 2;
  r.ell_dn = (s.mu2 + 1) / 2;
  if (s.branch < 0) {
    r.c_up = std::sqrt((j + mu) / (2.0 * j));
    r.c_dn = std::sqrt((j - mu) / (2.0 * j));
  } else {
    r.c_up = std::sqrt((j + 1.0 - mu) / (2.0 * j + 2.0));
    r.c_dn = -std::sqrt((j + 1.0 + mu) / (2.0 * j + 2.0));
  }
  if (std::abs(r.ell_up) > r.n) r.c_up = 0.0;
  if (std::abs(r.ell_dn) > r.n) r.c_dn = 0.0;
  return r;
}

inline Spinor spinor_from_table(const SpinorRecipe& r, const HarmonicTable& t) {
  Spinor v;
  v(0) = r.c_up != 0.0 ? r.c_up * t(r.n, r.ell_up) : cdouble(0);
  v(1) = r.c_dn != 0.0 ? r.c_dn * t(r.n, r.ell_dn) : cdouble(0);
  return v;
}

inline Spinor spinor(const SpinorLabel& label, const Vec3& point) {
  label.validate();
  const SpinorRecipe r = spinor_recipe(label);
  HarmonicTable t(r.n);
  t.evaluate(point);
  return spinor_from_table(r, t);
}

// sigma . v acting on a spinor.
inline Spinor sigma_dot(const Eigen::Vector3cd& v, const Spinor& s) {
  Spinor out;
  out(0) = v(2) * s(0) + (v(0) - cdouble(0, 1) * v(1)) * s(1);
  out(1) = (v(0) + cdouble(0, 1) * v(1)) * s(0) - v(2) * s(1);
  return out;
}

inline Spinor sigma_dot(const Vec3& v, const Spinor& s) { return sigma_dot(Eigen::Vector3cd(v.cast<cdouble>()), s); }

inline Eigen::Matrix2cd sigma_matrix(const Vec3& v) {
  Eigen::Matrix2cd m;
  m << v(2), cdouble(v(0), -v(1)), cdouble(v(0), v(1)), -v(2);
  return m;
}

// Labels for all spinors with j <= jmax2/2, ordered by j, then mu, then branch.
inline std::vector<SpinorLabel> spinor_labels(int jmax2) {
  std::vector<SpinorLabel> out;
  for (int j2 = 1; j2 <= jmax2; j2 += 2)
    for (int mu2 = -j2; mu2 <= j2; mu2 += 2)
      for (int b : {-1, 1}) out.push_back({j2, mu2, b});
  return out;
}

}  // namespace diracbag
