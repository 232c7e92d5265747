#pragma once

// Eigenvalues of the Dirac operator with the tau boundary condition on a
// general surface, located as zeros of the boundary system
//   M1 = I - 2i W (s.nu) + 2 (lambda + m) e^tau K
//   M2 = I - 2i (s.nu) W - 2 (lambda - m) e^-tau (s.nu) K (s.nu).
// Candidates are minima of the smallest singular value of [M1 / c1; M2 / c2].

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "layerops.hpp"

namespace diracbag {

struct BieOptions {
  double tol = -1.0;        // <= 0: 10 x identity residual at lambda = m, floored
  double tol_floor = 1e-7;
  double cross_tol = -1.0;  // <= 0: 5 x tol
  double lambda_max = -1.0; // <= 0: sqrt((z_{5/2,1} / R_equiv)^2 + m^2)
  double log_ratio = 1.15;    // growth of |lambda| - m between scan points near m
  double max_spacing = -1.0;  // <= 0: min(0.1, e^-tau) / R_equiv
  double lambda_tol = 1e-8;
  int threads = 1;
  bool scale_rows = false;  // divide M1, M2 by max(1, |coefficient|)
};

struct SigmaSample {
  double lambda = 0.0;
  double sigma_min = 0.0;  // stacked system
  double sigma_m1 = 0.0;   // M1 alone
  int block = -1;
};

struct BieEigenpair {
  double tau = 0.0, lambda = 0.0, m = 0.0;
  VectorXcd u;  // coefficients, unit norm
  int block = -1;
  double sigma_min = 0.0, sigma_m1 = 0.0;
  double residual = 0.0;        // |M1 u|
  double cross_residual = 0.0;  // |M2 u| / |u|
  int multiplicity = 0;
  std::vector<double> smallest;  // few smallest stacked singular values

  // v = i e^tau (s.nu) u
  VectorXcd v(const BoundaryOperator& sn) const { return cdouble(0, std::exp(tau)) * sn.apply(u); }
};

class NoEigenvalueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BieSolver {
 public:
  BieSolver(SpacePtr sp, double m, BieOptions opt = {}) : sp_(std::move(sp)), m_(m), opt_(opt) {
    if (!(m >= 0.0)) throw DomainError("BieSolver: m must be non-negative");
    sn_ = sigma_nu(sp_);
    const LayerOperators lo = assemble_layers(sp_, SpectralParams::make(m, m));
    id_residual_ = identity_residuals(lo, sn_).max();
    if (opt_.tol <= 0.0) opt_.tol = 10.0 * std::max(id_residual_, opt_.tol_floor);
    if (opt_.cross_tol <= 0.0) opt_.cross_tol = 5.0 * opt_.tol;
    r_equiv_ = std::cbrt(3.0 * sp_->surface().volume() / (4.0 * std::numbers::pi));
    if (opt_.lambda_max <= 0.0) {
      const double z = bessel_zero(HalfInt(5), 1);
      opt_.lambda_max = std::sqrt(z * z / (r_equiv_ * r_equiv_) + m * m);
    }
  }

  const SpinorSpace& space() const { return *sp_; }
  const BoundaryOperator& sigma_nu_op() const { return sn_; }
  double m() const { return m_; }
  double tol() const { return opt_.tol; }
  double cross_tol() const { return opt_.cross_tol; }
  double lambda_max() const { return opt_.lambda_max; }
  double identity_residual() const { return id_residual_; }
  const BieOptions& options() const { return opt_; }

  struct Evaluation {
    SigmaSample sample;
    std::vector<double> singular_values;  // all blocks, ascending
    VectorXcd u;
    double residual = 0.0, cross_residual = 0.0;
  };

  Evaluation evaluate(double lambda, double tau, bool vectors = false) const {
    const LayerOperators lo = assemble_layers(sp_, SpectralParams::make(lambda, m_));
    const double et = std::exp(tau);
    const double a1 = 2.0 * (lambda + m_) * et, a2 = 2.0 * (lambda - m_) / et;
    const double c1 = opt_.scale_rows ? std::max(1.0, std::abs(a1)) : 1.0;
    const double c2 = opt_.scale_rows ? std::max(1.0, std::abs(a2)) : 1.0;
    const cdouble I2(0, 2);
    Evaluation ev;
    ev.sample.lambda = lambda;
    ev.sample.sigma_min = ev.sample.sigma_m1 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < sp_->num_blocks(); ++k) {
      const auto cols = sp_->trial_columns(k);
      if (cols.empty()) continue;
      const MatrixXcd& W = lo.W.block(k);
      const MatrixXcd& K = lo.K.block(k);
      const MatrixXcd& S = sn_.block(k);
      const auto n = W.rows();
      const auto nc = static_cast<Eigen::Index>(cols.size());
      MatrixXcd ST(n, nc), KT(n, nc), IT = MatrixXcd::Zero(n, nc);
      for (Eigen::Index c = 0; c < nc; ++c) {
        ST.col(c) = S.col(cols[c]);
        KT.col(c) = K.col(cols[c]);
        IT(cols[c], c) = 1.0;
      }
      const MatrixXcd M1 = IT - I2 * (W * ST) + a1 * KT;
      const MatrixXcd M2 = IT - I2 * (S * (W * IT)) - a2 * (S * (K * ST));
      MatrixXcd St(2 * n, nc);
      St << M1 / c1, M2 / c2;
      Eigen::JacobiSVD<MatrixXcd> s1(M1);
      ev.sample.sigma_m1 = std::min(ev.sample.sigma_m1, s1.singularValues()(nc - 1));
      if (vectors) {
        Eigen::JacobiSVD<MatrixXcd> svd(St, Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        for (Eigen::Index i = 0; i < sv.size(); ++i) ev.singular_values.push_back(sv(i));
        if (sv(nc - 1) < ev.sample.sigma_min) {
          ev.sample.sigma_min = sv(nc - 1);
          ev.sample.block = k;
          const VectorXcd x = svd.matrixV().col(nc - 1);
          ev.u = VectorXcd::Zero(sp_->dim());
          const auto& idx = sp_->blocks()[k];
          for (Eigen::Index c = 0; c < nc; ++c) ev.u(idx[cols[c]]) = x(c);
          ev.residual = (M1 * x).norm();
          ev.cross_residual = (M2 * x).norm() / x.norm();
        }
      } else {
        Eigen::JacobiSVD<MatrixXcd> svd(St);
        const auto& sv = svd.singularValues();
        for (Eigen::Index i = 0; i < sv.size(); ++i) ev.singular_values.push_back(sv(i));
        if (sv(nc - 1) < ev.sample.sigma_min) {
          ev.sample.sigma_min = sv(nc - 1);
          ev.sample.block = k;
        }
      }
    }
    std::sort(ev.singular_values.begin(), ev.singular_values.end());
    return ev;
  }

  double sigma(double lambda, double tau) const { return evaluate(lambda, tau).sample.sigma_min; }

  // sigma_min at each grid value; negative lambda values scan the lower branch.
  std::vector<SigmaSample> sigma_min_scan(double tau, const std::vector<double>& grid) const {
    std::vector<SigmaSample> out(grid.size());
    const int nthreads = std::max(1, std::min<int>(opt_.threads, static_cast<int>(grid.size())));
    auto work = [&](int t) {
      for (std::size_t i = t; i < grid.size(); i += nthreads) out[i] = evaluate(grid[i], tau).sample;
    };
    if (nthreads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    return out;
  }

  // Scan grid for |lambda| - m in [x_lo, x_hi]: geometric near m, then with
  // spacing capped so that the narrow dips of large tau are not stepped over.
  // sign = -1 mirrors it to the lower branch.
  std::vector<double> default_grid(double tau, int sign = 1, double x_lo = -1.0, double x_hi = -1.0) const {
    const double xmax = x_hi > 0.0 ? x_hi : opt_.lambda_max - m_;
    const double xmin = x_lo > 0.0 ? x_lo : std::min(1e-2, 0.02 * std::exp(tau)) * std::max(xmax, 1.0);
    const double cap = opt_.max_spacing > 0.0 ? opt_.max_spacing : std::min(0.1, std::exp(-tau)) / r_equiv_;
    std::vector<double> g;
    for (double x = xmin; x < xmax; x += std::min(x * (opt_.log_ratio - 1.0), cap)) g.push_back(sign * (m_ + x));
    g.push_back(sign * (m_ + xmax));
    return g;
  }

  // Golden-section minimization of sigma_min over [lo, hi], then a parabolic
  // step on sigma^2 to sharpen the vertex.
  BieEigenpair refine_eigenvalue(double tau, double lo, double hi, bool require = true) const {
    if (lo > hi) std::swap(lo, hi);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = sigma(x1, tau), f2 = sigma(x2, tau);
    const double xtol = std::min(opt_.lambda_tol, 1e-6 * std::max(std::abs(std::abs(lo) - m_), 1e-12));
    while (b - a > xtol) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = sigma(x1, tau);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = sigma(x2, tau);
      }
    }
    double lam = f1 < f2 ? x1 : x2;
    double fl = std::min(f1, f2);
    const double h = 4.0 * xtol;
    if (lam - h > lo && lam + h < hi) {
      const double fm = sigma(lam - h, tau), fp = sigma(lam + h, tau);
      const double qm = fm * fm, q0 = fl * fl, qp = fp * fp;
      const double den = qm - 2.0 * q0 + qp;
      if (den > 0.0) {
        const double cand = lam + 0.5 * h * (qm - qp) / den;
        if (std::abs(cand - lam) < h) {
          const double fc = sigma(cand, tau);
          if (fc <= fl) {
            lam = cand;
            fl = fc;
          }
        }
      }
    }
    BieEigenpair p = pair_at(lam, tau);
    if (require && !(p.sigma_min < opt_.tol))
      throw NoEigenvalueError("refine_eigenvalue: minimum " + std::to_string(p.sigma_min) + " at lambda " +
                              std::to_string(lam) + " is not below tol " + std::to_string(opt_.tol));
    return p;
  }

  BieEigenpair pair_at(double lambda, double tau) const {
    const Evaluation ev = evaluate(lambda, tau, true);
    BieEigenpair p;
    p.tau = tau;
    p.lambda = lambda;
    p.m = m_;
    p.u = ev.u;
    p.block = ev.sample.block;
    p.sigma_min = ev.sample.sigma_min;
    p.sigma_m1 = ev.sample.sigma_m1;
    p.residual = ev.residual;
    p.cross_residual = ev.cross_residual;
    for (double s : ev.singular_values)
      if (s < opt_.tol) ++p.multiplicity;
    for (std::size_t i = 0; i < std::min<std::size_t>(4, ev.singular_values.size()); ++i)
      p.smallest.push_back(ev.singular_values[i]);
    return p;
  }

  // Local minima of a scan, refined; sorted by |lambda|.
  // Local minima of a scan, refined and kept when below tol.
  std::vector<BieEigenpair> candidates(double tau, const std::vector<SigmaSample>& scan,
                                       std::size_t max_count = 8) const {
    std::vector<BieEigenpair> out;
    for (std::size_t i = 0; i < scan.size() && out.size() < max_count; ++i) {
      const bool left = i == 0 || scan[i].sigma_min <= scan[i - 1].sigma_min;
      const bool right = i + 1 == scan.size() || scan[i].sigma_min <= scan[i + 1].sigma_min;
      if (!(left && right)) continue;
      const double lo = scan[i == 0 ? 0 : i - 1].lambda;
      const double hi = scan[i + 1 == scan.size() ? i : i + 1].lambda;
      BieEigenpair p = refine_eigenvalue(tau, lo, hi, false);
      if (p.sigma_min < opt_.tol) out.push_back(std::move(p));
    }
    return out;
  }

  // Walks the grid in order and returns the first local minimum whose
  // refinement falls below tol. Points are evaluated in chunks of `threads`.
  std::optional<BieEigenpair> first_minimum(double tau, const std::vector<double>& grid) const {
    std::vector<SigmaSample> seen;
    const std::size_t chunk = static_cast<std::size_t>(std::max(1, opt_.threads));
    auto try_at = [&](std::size_t i) -> std::optional<BieEigenpair> {
      const double lo = i == 0 ? grid[0] - 0.5 * (grid[1] - grid[0]) : seen[i - 1].lambda;
      const double hi = seen[std::min(i + 1, seen.size() - 1)].lambda;
      BieEigenpair p = refine_eigenvalue(tau, lo, hi, false);
      if (p.sigma_min < opt_.tol) return p;
      return std::nullopt;
    };
    for (std::size_t start = 0; start < grid.size(); start += chunk) {
      const std::vector<double> part(grid.begin() + start, grid.begin() + std::min(grid.size(), start + chunk));
      for (auto& smp : sigma_min_scan(tau, part)) seen.push_back(smp);
      // a point is a minimum once its right neighbour is known
      for (std::size_t i = start == 0 ? 0 : start - 1; i + 1 < seen.size(); ++i) {
        const bool left = i == 0 || seen[i].sigma_min <= seen[i - 1].sigma_min;
        if (left && seen[i].sigma_min <= seen[i + 1].sigma_min)
          if (auto p = try_at(i)) return p;
      }
    }
    const std::size_t n = seen.size();
    if (n >= 2 && seen[n - 1].sigma_min < seen[n - 2].sigma_min)
      if (auto p = try_at(n - 1)) return p;
    return std::nullopt;
  }

  // Eigenvalue closest to m (sign = +1) or to -m (sign = -1).
  BieEigenpair find_first(double tau, int sign = 1) const {
    if (auto p = first_minimum(tau, default_grid(tau, sign))) return *p;
    throw NoEigenvalueError("find_first: no minimum below tol at tau = " + std::to_string(tau));
  }

  struct Trace {
    std::vector<BieEigenpair> pairs;
    bool truncated = false;
    std::string diagnostic;
  };

  // Continuation along tau_grid. Since L = (lambda - m) e^-tau is
  // non-increasing and lambda is increasing, lambda(tau') for tau' > tau lies
  // in [lambda, m + (lambda - m) e^{tau' - tau}].
  Trace trace_curve(const std::vector<double>& taus, std::optional<BieEigenpair> seed = std::nullopt) const {
    Trace tr;
    if (taus.empty()) return tr;
    BieEigenpair cur = seed ? *seed : find_first(taus.front());
    if (std::abs(cur.tau - taus.front()) > 1e-14) cur = find_first(taus.front());
    tr.pairs.push_back(cur);
    for (std::size_t i = 1; i < taus.size(); ++i) {
      const double dt = taus[i] - taus[i - 1];
      const double x = cur.lambda - m_;
      double lo = m_ + x * std::exp(std::min(0.0, dt)), hi = m_ + x * std::exp(std::max(0.0, dt));
      const double pad = 0.1 * (hi - lo) + 1e-6 * x;
      lo = std::max(m_ + 0.5 * (lo - m_), lo - pad);
      hi += pad;
      auto next = first_minimum(taus[i], default_grid(taus[i], 1, lo - m_, hi - m_));
      if (!next) {
        tr.truncated = true;
        tr.diagnostic = "lost track at tau = " + std::to_string(taus[i]) + ": no minimum below tol in [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]";
        break;
      }
      cur = *next;
      tr.pairs.push_back(cur);
    }
    return tr;
  }

 private:
  SpacePtr sp_;
  double m_;
  BieOptions opt_;
  BoundaryOperator sn_;
  double id_residual_ = 0.0;
  double r_equiv_ = 1.0;
};

// Volume reconstruction and the norm identities along a curve.
struct VolumeGrid {
  int n_radial = 10;
  int n_theta = 12;
  int n_phi = 24;
  int upsample = 3;
};

struct NormReport {
  double boundary_u2 = 0.0;   // |u|^2 on the surface
  double interior_u2 = 0.0;   // |u|^2 in the domain
  double interior_v2 = 0.0;
  double lhs = 0.0;           // e^tau |u|^2_surface
  double rhs = 0.0;           // (lambda - m)|u|^2 - (lambda + m)|v|^2
  double relation_residual = 0.0;  // |lhs - rhs| / |lhs|
  double u_fraction = 0.0;    // |u|^2 / |phi|^2 in the domain
  double dlambda_boundary = 0.0;
  double dlambda_volume = 0.0;
};

namespace bie_detail {

inline double lagrange_eval(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double li = 1.0;
    for (std::size_t j = 0; j < xs.size(); ++j)
      if (j != i) li *= (x - xs[j]) / (xs[i] - xs[j]);
    acc += li * ys[i];
  }
  return acc;
}

}  // namespace bie_detail

// Interior values on rays x = s X(p) at s = Chebyshev points of [0, s_max],
// completed by the trace at s = 1, are interpolated in s and integrated with
// dV = s^2 (X.nu) J ds dOmega.
inline NormReport eigenfunction_norms(const BieEigenpair& pair, const BieSolver& solver, VolumeGrid vg = {}) {
  const SpinorSpace& sp = solver.space();
  const QuadratureSurface& surf = sp.surface();
  const double m = pair.m, lam = pair.lambda, tau = pair.tau;
  const SpectralParams prm = SpectralParams::make(lam, m);
  const VectorXcd u = pair.u;
  const VectorXcd su = solver.sigma_nu_op().apply(u);
  // density i (alpha.nu) g with g = (u, i e^tau (s.nu) u)
  const VectorXcd d_up = -std::exp(tau) * u;
  const VectorXcd d_dn = cdouble(0, 1) * su;
  const VectorXcd v = cdouble(0, std::exp(tau)) * su;

  const double hmax = surf.max_patch_size();
  double s_max = 1.0;
  {
    // Keep every interior node at least 2.5 h from the surface.
    double margin = 1e300;
    for (std::size_t k = 0; k < surf.size(); ++k)
      margin = std::min(margin, surf.nodes()[k].dot(surf.normals()[k]));
    s_max = 1.0 - 2.5 * hmax / margin;
    if (!(s_max > 0.2)) throw DomainError("eigenfunction_norms: surface grid too coarse for interior sampling");
  }
  std::vector<double> sr;
  for (int i = 0; i < vg.n_radial; ++i)
    sr.push_back(0.5 * s_max * (1.0 - std::cos(std::numbers::pi * (i + 0.5) / vg.n_radial)));
  std::vector<double> snodes = sr;
  snodes.push_back(1.0);

  const GaussRule gt = gauss_legendre(vg.n_theta);
  const GaussRule gs = gauss_legendre(2 * vg.n_radial + 4, 0.0, 1.0);
  std::vector<Vec3> pts;
  std::vector<Vec3> dirs;
  std::vector<double> wdir;
  for (int i = 0; i < vg.n_theta; ++i) {
    const double t = gt.x[i], st = std::sqrt(1.0 - t * t);
    for (int k = 0; k < vg.n_phi; ++k) {
      const double ph = 2.0 * std::numbers::pi * k / vg.n_phi;
      const Vec3 p(st * std::cos(ph), st * std::sin(ph), t);
      dirs.push_back(p);
      wdir.push_back(gt.w[i] * 2.0 * std::numbers::pi / vg.n_phi);
      for (double s : sr) pts.push_back(s * surf.point(p));
    }
  }
  const auto vals = volume_potential(sp, prm, d_up, d_dn, pts, vg.upsample, false);

  NormReport r;
  HarmonicTable table(sp.max_degree());
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    const Vec3& p = dirs[d];
    const Vec3 X = surf.point(p);
    const double jac = surf.jacobian(p) * X.dot(surf.normal(p));
    std::vector<double> fu, fv;
    for (int i = 0; i < vg.n_radial; ++i) {
      const auto& q = vals[d * vg.n_radial + i];
      fu.push_back(q.head<2>().squaredNorm());
      fv.push_back(q.tail<2>().squaredNorm());
    }
    fu.push_back(sp.evaluate(u, p, table).squaredNorm());
    fv.push_back(sp.evaluate(v, p, table).squaredNorm());
    double iu = 0.0, iv = 0.0;
    for (std::size_t q = 0; q < gs.x.size(); ++q) {
      const double s = gs.x[q];
      iu += gs.w[q] * s * s * bie_detail::lagrange_eval(snodes, fu, s);
      iv += gs.w[q] * s * s * bie_detail::lagrange_eval(snodes, fv, s);
    }
    r.interior_u2 += wdir[d] * jac * iu;
    r.interior_v2 += wdir[d] * jac * iv;
  }
  r.boundary_u2 = u.squaredNorm();
  r.lhs = std::exp(tau) * r.boundary_u2;
  r.rhs = (lam - m) * r.interior_u2 - (lam + m) * r.interior_v2;
  r.relation_residual = std::abs(r.lhs - r.rhs) / std::abs(r.lhs);
  const double phi2 = r.interior_u2 + r.interior_v2;
  r.u_fraction = r.interior_u2 / phi2;
  r.dlambda_boundary = r.lhs / phi2;
  r.dlambda_volume = r.rhs / phi2;
  return r;
}

// Central difference of lambda(tau) from two nearby refinements.
inline double finite_difference_derivative(const BieSolver& solver, const BieEigenpair& pair, double dtau = 1e-3) {
  const double m = solver.m(), x = pair.lambda - m;
  auto at = [&](double t) {
    const double dt = t - pair.tau;
    double lo = m + x * std::exp(std::min(0.0, dt)), hi = m + x * std::exp(std::max(0.0, dt));
    const double pad = 0.1 * (hi - lo) + 1e-7 * x;
    return solver.refine_eigenvalue(t, lo - pad, hi + pad, true).lambda;
  };
  return (at(pair.tau + dtau) - at(pair.tau - dtau)) / (2.0 * dtau);
}

}  // namespace diracbag
