#pragma once

// Exact eigenvalue curves of the Dirac operator with the tau boundary
// condition on a ball of radius R.

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "halfint_bessel.hpp"
#include "quadrature.hpp"

namespace diracbag {

struct BallModel {
  double R = 1.0;
  double m = 0.0;
  void validate() const {
    if (!(R > 0.0)) throw DomainError("BallModel: R must be positive");
    if (!(m >= 0.0)) throw DomainError("BallModel: m must be non-negative");
  }
};

// branch -1 is the L^- family (upper component psi_{j-1/2}), +1 is L^+.
struct ChannelIndex {
  HalfInt j{1};
  int branch = -1;
  int k = 0;

  void validate() const {
    if (!j.is_half_odd()) throw DomainError("ChannelIndex: j must be a half-odd integer");
    if (branch != -1 && branch != 1) throw DomainError("ChannelIndex: branch must be +1 or -1");
  }
  char branch_char() const { return branch < 0 ? '-' : '+'; }
  friend bool operator==(const ChannelIndex&, const ChannelIndex&) = default;
};

struct Interval {
  double lo = 0.0, hi = 0.0;
  bool contains(double x) const { return x > lo && x < hi; }
  double width() const { return hi - lo; }
};

struct EigenCurveSample {
  double tau = 0.0;
  double lambda = 0.0;
  ChannelIndex channel;
  double residual = 0.0;
  int multiplicity = 0;
  // lambda - anchor, kept to full precision near |lambda| = m.
  double offset = 0.0;
  double anchor = 0.0;
  bool limit_regime = false;
  bool mirrored = false;
};

namespace ball_detail {

// An interval end: +-m, or +-sqrt((z_{q,kz}/R)^2 + m^2) for a zero of J_q.
struct End {
  double value = 0.0;
  bool mass = false;
  HalfInt q{1};
  int kz = 0;
};

inline End mass_end(double v) { return {v, true, HalfInt(1), 0}; }

inline End zero_end(HalfInt q, int kz, double sign, const BallModel& mdl) {
  const double z = bessel_zero(q, kz) / mdl.R;
  return {sign * std::sqrt(z * z + mdl.m * mdl.m), false, q, kz};
}

struct Ends {
  End lo, hi;
};

inline Ends ends(const ChannelIndex& c, const BallModel& mdl) {
  c.validate();
  mdl.validate();
  const HalfInt j = c.j, j1 = c.j.plus_one();
  const int k = c.k, ak = std::abs(k);
  if (c.branch < 0) {
    if (k == 0) return {mass_end(mdl.m), zero_end(j, 1, 1.0, mdl)};
    if (k > 0) return {zero_end(j1, k, 1.0, mdl), zero_end(j, k + 1, 1.0, mdl)};
    return {zero_end(j1, ak, -1.0, mdl), zero_end(j, ak, -1.0, mdl)};
  }
  if (k == 0) return {zero_end(j, 1, -1.0, mdl), mass_end(-mdl.m)};
  if (k > 0) return {zero_end(j, k + 1, -1.0, mdl), zero_end(j1, k, -1.0, mdl)};
  return {zero_end(j, ak, 1.0, mdl), zero_end(j1, ak, 1.0, mdl)};
}

struct HValue {
  double log_h;
  double dlog_h;  // derivative with respect to lambda
};

// log h at lambda = e.value + d * off, off >= 0, d = +1 from the lower end and
// -1 from the upper end. Differences lambda -+ m and the Bessel argument near
// the zero of the end are formed from off directly.
inline HValue log_h_at(const ChannelIndex& c, const BallModel& mdl, const End& e, int d, double off) {
  const double m = mdl.m, R = mdl.R;
  const double lam = e.value + d * off;
  double lm = lam - m, lp = lam + m;
  double x, b2;
  double jj = 0.0, jj1 = 0.0;  // J_j(x), J_{j+1}(x)
  bool have_values = false;
  if (e.mass) {
    if (e.value > 0.0) {
      lm = d * off;
      lp = 2.0 * m + d * off;
    } else {
      lp = d * off;
      lm = -2.0 * m + d * off;
    }
    b2 = lm * lp;
    x = std::sqrt(b2) * R;
  } else {
    // |lambda| = E + s off
    const double E = std::abs(e.value);
    const double s = (e.value > 0.0 ? 1.0 : -1.0) * d;
    const double z = bessel_zero(e.q, e.kz);
    const double dx2 = R * R * s * off * (2.0 * E + s * off);  // x^2 - z^2
    x = std::sqrt(z * z + dx2);
    b2 = x * x / (R * R);
    const double t = dx2 / (x + z);
    if (std::abs(t) < 0.05 * z) {
      const double near = bessel_j_half_near_zero(e.q, e.kz, t);
      if (e.q == c.j) {
        jj = near;
        jj1 = bessel_j_half(c.j.plus_one(), x);
      } else {
        jj = bessel_j_half(c.j, x);
        jj1 = near;
      }
      have_values = true;
    }
  }
  const double b = std::sqrt(b2);
  double r;
  if (have_values) {
    r = jj1 / jj;
  } else {
    try {
      r = bessel_ratio(c.j, x);
    } catch (const BesselPoleError&) {
      r = std::numeric_limits<double>::infinity();
    }
  }
  const double log_s = 0.5 * (std::log(std::abs(lm)) - std::log(std::abs(lp)));
  const double dlog_s = 0.5 * (1.0 / lm - 1.0 / lp);
  double dlog_ratio;
  if (x < 1e-6) {
    const double p1 = c.j.value() + 1.0;
    // r ~ x/(2p1) so dlog r/dlambda ~ lambda / b^2
    dlog_ratio = lam / b2 * (1.0 + x * x / (2.0 * p1 * (c.j.value() + 2.0)));
  } else {
    const double dr = bessel_ratio_derivative(c.j, x, r);
    dlog_ratio = dr / r * lam * R / b;
  }
  if (c.branch < 0) return {log_s + std::log(std::abs(r)), dlog_s + dlog_ratio};
  return {log_s - std::log(std::abs(r)), dlog_s - dlog_ratio};
}

}  // namespace ball_detail

inline Interval interval(const ChannelIndex& c, const BallModel& mdl) {
  const auto e = ball_detail::ends(c, mdl);
  return {e.lo.value, e.hi.value};
}

inline double h_of_lambda(const ChannelIndex& c, const BallModel& mdl, double lambda) {
  const auto e = ball_detail::ends(c, mdl);
  if (!(lambda > e.lo.value && lambda < e.hi.value))
    throw DomainError("h_of_lambda: lambda outside the channel interval");
  const double mid = 0.5 * (e.lo.value + e.hi.value);
  if (lambda <= mid) return std::exp(ball_detail::log_h_at(c, mdl, e.lo, 1, lambda - e.lo.value).log_h);
  return std::exp(ball_detail::log_h_at(c, mdl, e.hi, -1, e.hi.value - lambda).log_h);
}

// h at a stored sample, using its anchor and offset rather than lambda.
inline double h_of_sample(const EigenCurveSample& s, const BallModel& mdl) {
  const ChannelIndex c = s.mirrored ? ChannelIndex{s.channel.j, -s.channel.branch, s.channel.k} : s.channel;
  const double anchor = s.mirrored ? -s.anchor : s.anchor, offset = s.mirrored ? -s.offset : s.offset;
  const auto e = ball_detail::ends(c, mdl);
  if (anchor == e.hi.value) return std::exp(ball_detail::log_h_at(c, mdl, e.hi, -1, -offset).log_h);
  return std::exp(ball_detail::log_h_at(c, mdl, e.lo, 1, offset).log_h);
}

inline EigenCurveSample eigenvalue_at(const ChannelIndex& c, const BallModel& mdl, double tau) {
  const auto e = ball_detail::ends(c, mdl);
  const double width = e.hi.value - e.lo.value;
  EigenCurveSample s;
  s.tau = tau;
  s.channel = c;
  s.multiplicity = c.j.twice_value() + 1;
  if (tau < -700.0 || tau > 700.0) {
    s.limit_regime = true;
    s.anchor = tau < 0.0 ? e.lo.value : e.hi.value;
    s.lambda = s.anchor;
    return s;
  }
  // log h increases with lambda. Decide the half, then bisect in the offset
  // from that end so that the offset keeps full relative precision.
  const double half = 0.5 * width;
  const bool upper = ball_detail::log_h_at(c, mdl, e.lo, 1, half).log_h < tau;
  const ball_detail::End& end = upper ? e.hi : e.lo;
  const int d = upper ? -1 : 1;
  auto F = [&](double off) { return ball_detail::log_h_at(c, mdl, end, d, off).log_h - tau; };
  // F increases with off from the lower end, decreases from the upper end
  double lo = 0.0, hi = half;
  for (int it = 0; it < 2200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double f = F(mid);
    if ((f < 0.0) == (d > 0)) lo = mid;
    else hi = mid;
  }
  double off = 0.5 * (lo + hi);
  double best = std::abs(F(off));
  for (int it = 0; it < 3 && std::isfinite(best); ++it) {
    const auto hv = ball_detail::log_h_at(c, mdl, end, d, off);
    const double slope = d * hv.dlog_h;
    if (slope == 0.0 || !std::isfinite(slope)) break;
    const double cand = off - (hv.log_h - tau) / slope;
    if (!(cand > 0.0 && cand <= half)) break;
    const double fc = std::abs(F(cand));
    if (!(fc < best)) break;
    off = cand;
    best = fc;
  }
  if (!std::isfinite(off) || off < 0.0) throw std::runtime_error("eigenvalue_at: bracket failure for j=" + c.j.str());
  // root closer to the end than double resolution allows
  if (off == 0.0) s.limit_regime = true;
  s.anchor = end.value;
  s.offset = d * off;
  s.lambda = s.anchor + s.offset;
  // relative residual of h(lambda) = e^tau
  s.residual = std::isfinite(best) ? std::abs(std::expm1(best)) : std::numeric_limits<double>::infinity();
  return s;
}

inline EigenCurveSample first_positive(const BallModel& mdl, double tau) {
  EigenCurveSample s = eigenvalue_at({HalfInt(1), -1, 0}, mdl, tau);
  s.multiplicity = 2;
  return s;
}

// lambda - m for a sample, exact when anchored at m.
inline double gap_to_mass(const EigenCurveSample& s, double m) { return s.anchor == m ? s.offset : s.lambda - m; }

inline std::vector<EigenCurveSample> curve_sweep(const std::vector<ChannelIndex>& channels, const BallModel& mdl,
                                                 const std::vector<double>& taus, bool include_mirror = true) {
  std::vector<EigenCurveSample> out;
  out.reserve(channels.size() * taus.size() * (include_mirror ? 2 : 1));
  for (const auto& c : channels) {
    for (double t : taus) out.push_back(eigenvalue_at(c, mdl, t));
    if (!include_mirror) continue;
    const ChannelIndex partner{c.j, -c.branch, c.k};
    for (double t : taus) {
      EigenCurveSample s = eigenvalue_at(partner, mdl, -t);
      s.tau = t;
      s.lambda = -s.lambda;
      s.anchor = -s.anchor;
      s.offset = -s.offset;
      s.channel = c;
      s.mirrored = true;
      out.push_back(s);
    }
  }
  return out;
}

// All channels with j <= jmax2/2 and |k| <= kmax, both branches.
inline std::vector<ChannelIndex> channel_list(int jmax2, int kmax) {
  std::vector<ChannelIndex> out;
  for (int j2 = 1; j2 <= jmax2; j2 += 2)
    for (int b : {-1, 1})
      for (int k = -kmax; k <= kmax; ++k) out.push_back({HalfInt(j2), b, k});
  return out;
}

struct RadialProfile {
  std::vector<double> r, f, g;
  double kappa = 0.0;
};

// f = sqrt(r) J_{l+1/2}(b r), g = +-(b/(lambda+m)) sqrt(r) J_{l'+1/2}(b r).
inline RadialProfile radial_profile(const ChannelIndex& c, const BallModel& mdl, double lambda,
                                    const std::vector<double>& r_grid) {
  c.validate();
  const double m = mdl.m;
  const double b = std::sqrt((lambda - m) * (lambda + m));
  const HalfInt pf = c.branch < 0 ? c.j : c.j.plus_one();
  const HalfInt pg = c.branch < 0 ? c.j.plus_one() : c.j;
  const double sg = c.branch < 0 ? -1.0 : 1.0;
  RadialProfile out;
  out.kappa = c.branch * (c.j.value() + 0.5);
  out.r = r_grid;
  for (double r : r_grid) {
    if (r <= 0.0) {
      out.f.push_back(0.0);
      out.g.push_back(0.0);
      continue;
    }
    const double sr = std::sqrt(r);
    out.f.push_back(sr * bessel_j_half(pf, b * r));
    out.g.push_back(sg * (b / (lambda + m)) * sr * bessel_j_half(pg, b * r));
  }
  return out;
}

inline double L_of_tau(const BallModel& mdl, double tau) {
  const auto s = first_positive(mdl, tau);
  return gap_to_mass(s, mdl.m) * std::exp(-tau);
}

struct DerivativeReport {
  double tau = 0.0, lambda = 0.0;
  double fd = 0.0;             // central difference of lambda(tau)
  double boundary_form = 0.0;  // e^tau |u|^2_bdry / |phi|^2
  double volume_form = 0.0;    // ((lambda-m)|u|^2 - (lambda+m)|v|^2) / |phi|^2
  double implicit_form = 0.0;  // e^tau / h'(lambda)
  double u_norm2 = 0.0, v_norm2 = 0.0, bdry_norm2 = 0.0;
  double norm_identity_residual = 0.0;
  double max_rel_gap = 0.0;
};

inline DerivativeReport derivative_check(const ChannelIndex& c, const BallModel& mdl, double tau,
                                         double dtau = 1e-5, int n_quad = 96) {
  DerivativeReport rep;
  const auto s0 = eigenvalue_at(c, mdl, tau);
  const auto sp = eigenvalue_at(c, mdl, tau + dtau);
  const auto sm = eigenvalue_at(c, mdl, tau - dtau);
  rep.tau = tau;
  rep.lambda = s0.lambda;
  rep.fd = (sp.anchor == sm.anchor ? sp.offset - sm.offset : sp.lambda - sm.lambda) / (2.0 * dtau);

  const auto e = ball_detail::ends(c, mdl);
  const bool upper = s0.anchor == e.hi.value && s0.anchor != e.lo.value;
  const auto hv = upper ? ball_detail::log_h_at(c, mdl, e.hi, -1, -s0.offset)
                        : ball_detail::log_h_at(c, mdl, e.lo, 1, s0.offset);
  rep.implicit_form = 1.0 / hv.dlog_h;

  const GaussRule gr = gauss_legendre(n_quad, 0.0, mdl.R);
  const auto prof = radial_profile(c, mdl, s0.lambda, gr.x);
  double uu = 0.0, vv = 0.0;
  for (int i = 0; i < n_quad; ++i) {
    const double w = gr.w[i];
    uu += w * prof.f[i] * prof.f[i];
    vv += w * prof.g[i] * prof.g[i];
  }
  const auto bnd = radial_profile(c, mdl, s0.lambda, {mdl.R});
  const double ub = bnd.f[0] * bnd.f[0];
  const double et = std::exp(tau);
  const double lm = s0.anchor == mdl.m ? s0.offset : s0.lambda - mdl.m;
  const double lp = s0.anchor == -mdl.m ? s0.offset : s0.lambda + mdl.m;
  rep.u_norm2 = uu;
  rep.v_norm2 = vv;
  rep.bdry_norm2 = ub;
  rep.boundary_form = et * ub / (uu + vv);
  rep.volume_form = (lm * uu - lp * vv) / (uu + vv);
  rep.norm_identity_residual = std::abs(et * ub - (lm * uu - lp * vv)) / std::max(et * ub, 1e-300);
  const double ref = std::abs(rep.implicit_form);
  for (double v : {rep.fd, rep.boundary_form, rep.volume_form})
    rep.max_rel_gap = std::max(rep.max_rel_gap, std::abs(v - rep.implicit_form) / ref);
  return rep;
}

}  // namespace diracbag
