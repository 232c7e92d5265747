#pragma once

// Boundary layer operators K_lambda, W_lambda and the Calderon-type operator
// C_lambda, discretized by a Galerkin method in the orthonormal basis
// e_b = psi_b(p) / sqrt(J(p)) of spherical harmonic spinors pulled back to the
// surface. Singular integrals use a product rule in polar coordinates centred
// at each target (Gauss in the polar angle, trapezoid in the azimuth); the
// azimuthal sum cancels the odd leading term of the W kernel.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrature.hpp"
#include "sphspinor.hpp"
#include "surface.hpp"

namespace diracbag {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

struct SpectralParams {
  enum class Regime { propagating, evanescent };
  double lambda = 0.0;
  double m = 0.0;
  Regime regime = Regime::evanescent;

  static SpectralParams make(double lambda, double m) {
    SpectralParams p;
    p.lambda = lambda;
    p.m = m;
    p.regime = std::abs(lambda) > m ? Regime::propagating : Regime::evanescent;
    return p;
  }
  // b = sqrt(lambda^2 - m^2) in the propagating regime, else 0.
  double wavenumber() const { return regime == Regime::propagating ? std::sqrt((lambda - m) * (lambda + m)) : 0.0; }
  // sqrt(m^2 - lambda^2) in the evanescent regime, else 0.
  double decay() const { return regime == Regime::evanescent ? std::sqrt((m - lambda) * (m + lambda)) : 0.0; }
  // Kernels carry exp(-s r): s = i b or s = sqrt(m^2 - lambda^2).
  cdouble s() const { return regime == Regime::propagating ? cdouble(0.0, wavenumber()) : cdouble(decay(), 0.0); }
  bool self_adjoint() const { return regime == Regime::evanescent; }
};

// 4x4 fundamental solution of H - lambda, H = -i alpha.grad + m beta.
inline Eigen::Matrix4cd kernel_phi(const SpectralParams& prm, const Vec3& x) {
  const double r = x.norm();
  if (!(r > 0.0)) throw DomainError("kernel_phi: singular at x = 0");
  const cdouble s = prm.s();
  const cdouble pref = std::exp(-s * r) / (4.0 * std::numbers::pi * r);
  const cdouble c = (1.0 + s * r) * cdouble(0, 1) / (r * r);
  const Eigen::Matrix2cd sx = sigma_matrix(x);
  Eigen::Matrix4cd M = Eigen::Matrix4cd::Zero();
  M.topLeftCorner<2, 2>() = (prm.lambda + prm.m) * Eigen::Matrix2cd::Identity();
  M.bottomRightCorner<2, 2>() = (prm.lambda - prm.m) * Eigen::Matrix2cd::Identity();
  M.topRightCorner<2, 2>() = c * sx;
  M.bottomLeftCorner<2, 2>() = c * sx;
  return pref * M;
}

struct SpaceOptions {
  int max_degree = -1;     // default: min(n_theta - 1, (n_phi - 1) / 2)
  int trial_degree = -1;   // default: ceil(2 max_degree / 3)
  int inner_theta = -1;    // default: n_theta
  int inner_phi = -1;      // default: n_phi rounded up to even
  bool force_general = false;
};

// Trial space: all spinors psi^{mu}_{j -+ 1/2} with j <= max_degree - 1/2,
// grouped into blocks of equal mu when the surface is rotationally symmetric.
class SpinorSpace {
 public:
  struct Target {
    Vec3 p;
    double weight;  // parameter-sphere quadrature weight of the outer rule
    double sqrt_jac;
    Vec3 x, nu;
  };

  SpinorSpace(SurfacePtr surface, SpaceOptions opt = {}) : surface_(std::move(surface)) {
    const int nt = surface_->n_theta(), np = surface_->n_phi();
    L_ = opt.max_degree > 0 ? opt.max_degree : std::min(nt - 1, (np - 1) / 2);
    if (L_ < 1) throw DomainError("SpinorSpace: resolution too coarse");
    Lt_ = opt.trial_degree > 0 ? std::min(opt.trial_degree, L_) : (2 * L_ + 2) / 3;
    n_in_theta_ = opt.inner_theta > 0 ? opt.inner_theta : nt;
    n_in_phi_ = opt.inner_phi > 0 ? opt.inner_phi : np;
    if (n_in_phi_ & 1) ++n_in_phi_;
    blocked_ = surface_->axisymmetric() && !opt.force_general;
    build_layout();
    build_targets();
  }

  const QuadratureSurface& surface() const { return *surface_; }
  const SurfacePtr& surface_ptr() const { return surface_; }
  int max_degree() const { return L_; }
  // Columns of a block that belong to the trial space j <= trial_degree - 1/2.
  // Operator norms restricted to these columns are free of truncation effects
  // at the top shells when the surface is not a sphere.
  int trial_degree() const { return Lt_; }
  std::vector<int> trial_columns(int block) const {
    std::vector<int> out;
    const auto& idx = blocks_[block];
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (labels_[idx[i]].j2 <= 2 * Lt_ - 1) out.push_back(static_cast<int>(i));
    return out;
  }
  int dim() const { return static_cast<int>(labels_.size()); }
  bool blocked() const { return blocked_; }
  int inner_theta() const { return n_in_theta_; }
  int inner_phi() const { return n_in_phi_; }
  const std::vector<SpinorLabel>& labels() const { return labels_; }
  const std::vector<SpinorRecipe>& recipes() const { return recipes_; }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int block_of(int b) const { return block_of_[b]; }
  int pos_in_block(int b) const { return pos_[b]; }
  const std::vector<Target>& targets() const { return targets_; }
  // Values psi_b at target t: 2 x dim.
  const MatrixXcd& target_values(int t) const { return target_psi_[t]; }

  int index_of(const SpinorLabel& l) const {
    for (int b = 0; b < dim(); ++b)
      if (labels_[b] == l) return b;
    return -1;
  }

  // Spinor values of all basis functions psi_b(p) (not divided by sqrt J).
  void psi_values(const Vec3& p, HarmonicTable& table, Eigen::Ref<MatrixXcd> out) const {
    table.evaluate(p);
    for (int b = 0; b < dim(); ++b) out.col(b) = spinor_from_table(recipes_[b], table);
  }

  VectorXcd analyze(const SpinorBoundaryField& u) const {
    const auto& s = *surface_;
    if (u.size() != s.size()) throw DomainError("analyze: field size mismatch");
    VectorXcd c = VectorXcd::Zero(dim());
    HarmonicTable table(L_);
    MatrixXcd vals(2, dim());
    for (std::size_t k = 0; k < s.size(); ++k) {
      psi_values(s.param_points()[k], table, vals);
      const double f = s.param_weights()[k] * std::sqrt(s.jacobians()[k]);
      c.noalias() += f * (vals.adjoint() * u.values[k]);
    }
    return c;
  }

  Spinor evaluate(const VectorXcd& c, const Vec3& p, HarmonicTable& table) const {
    MatrixXcd vals(2, dim());
    psi_values(p, table, vals);
    return (vals * c) / std::sqrt(surface_->jacobian(p));
  }

  SpinorBoundaryField synthesize(const VectorXcd& c) const {
    const auto& s = *surface_;
    SpinorBoundaryField u;
    u.values.resize(s.size());
    HarmonicTable table(L_);
    for (std::size_t k = 0; k < s.size(); ++k) u.values[k] = evaluate(c, s.param_points()[k], table);
    return u;
  }

  // Coefficient vector of a single basis spinor.
  VectorXcd unit(const SpinorLabel& l) const {
    const int b = index_of(l);
    if (b < 0) throw DomainError("SpinorSpace: label outside the trial space");
    VectorXcd c = VectorXcd::Zero(dim());
    c(b) = 1.0;
    return c;
  }

 private:
  void build_layout() {
    std::vector<SpinorLabel> all = spinor_labels(2 * L_ - 1);
    std::map<int, std::vector<SpinorLabel>> by_mu;
    for (const auto& l : all) by_mu[blocked_ ? l.mu2 : 0].push_back(l);
    for (auto& [mu2, ls] : by_mu) {
      std::vector<int> idx;
      for (const auto& l : ls) {
        idx.push_back(static_cast<int>(labels_.size()));
        block_of_.push_back(static_cast<int>(blocks_.size()));
        pos_.push_back(static_cast<int>(idx.size()) - 1);
        labels_.push_back(l);
        recipes_.push_back(spinor_recipe(l));
      }
      blocks_.push_back(std::move(idx));
    }
  }

  void build_targets() {
    const auto& s = *surface_;
    HarmonicTable table(L_);
    auto add = [&](const Vec3& p, double w) {
      Target t;
      t.p = p;
      t.weight = w;
      t.sqrt_jac = std::sqrt(s.jacobian(p));
      t.x = s.point(p);
      t.nu = s.normal(p);
      targets_.push_back(t);
      MatrixXcd vals(2, dim());
      psi_values(p, table, vals);
      target_psi_.push_back(std::move(vals));
    };
    if (blocked_) {
      const auto& g = s.theta_rule();
      for (int i = 0; i < s.n_theta(); ++i) {
        const double t = g.x[i];
        add(Vec3(std::sqrt(1.0 - t * t), 0.0, t), 2.0 * std::numbers::pi * g.w[i]);
      }
    } else {
      for (std::size_t k = 0; k < s.size(); ++k) add(s.param_points()[k], s.param_weights()[k]);
    }
  }

  SurfacePtr surface_;
  int L_ = 1, Lt_ = 1, n_in_theta_ = 0, n_in_phi_ = 0;
  bool blocked_ = false;
  std::vector<SpinorLabel> labels_;
  std::vector<SpinorRecipe> recipes_;
  std::vector<std::vector<int>> blocks_;
  std::vector<int> block_of_, pos_;
  std::vector<Target> targets_;
  std::vector<MatrixXcd> target_psi_;
};

using SpacePtr = std::shared_ptr<const SpinorSpace>;

inline SpacePtr make_space(SurfacePtr s, SpaceOptions opt = {}) {
  return std::make_shared<SpinorSpace>(std::move(s), opt);
}

// Block-diagonal operator on the coefficient space of a SpinorSpace. The basis
// is orthonormal in L^2 of the surface, so matrix adjoints are the L^2 adjoints.
class BoundaryOperator {
 public:
  BoundaryOperator() = default;
  explicit BoundaryOperator(SpacePtr sp) : space_(std::move(sp)) {
    for (const auto& b : space_->blocks()) {
      const auto n = static_cast<Eigen::Index>(b.size());
      blocks_.push_back(MatrixXcd::Zero(n, n));
    }
  }

  static BoundaryOperator identity(SpacePtr sp) {
    BoundaryOperator op(std::move(sp));
    for (auto& b : op.blocks_) b.setIdentity();
    return op;
  }

  const SpinorSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  MatrixXcd& block(int i) { return blocks_[i]; }
  const MatrixXcd& block(int i) const { return blocks_[i]; }
  int dim() const { return space_->dim(); }

  MatrixXcd dense() const {
    MatrixXcd M = MatrixXcd::Zero(dim(), dim());
    for (int k = 0; k < num_blocks(); ++k) {
      const auto& idx = space_->blocks()[k];
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j) M(idx[i], idx[j]) = blocks_[k](i, j);
    }
    return M;
  }

  VectorXcd apply(const VectorXcd& c) const {
    VectorXcd out = VectorXcd::Zero(c.size());
    for (int k = 0; k < num_blocks(); ++k) {
      const auto& idx = space_->blocks()[k];
      VectorXcd v(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) v(i) = c(idx[i]);
      const VectorXcd w = blocks_[k] * v;
      for (std::size_t i = 0; i < idx.size(); ++i) out(idx[i]) = w(i);
    }
    return out;
  }

  BoundaryOperator adjoint() const {
    BoundaryOperator r(*this);
    for (auto& b : r.blocks_) b = b.adjoint().eval();
    return r;
  }

  // Spectral norm (largest singular value over blocks).
  double norm2() const {
    double n = 0.0;
    for (const auto& b : blocks_) {
      if (b.size() == 0) continue;
      Eigen::JacobiSVD<MatrixXcd> svd(b);
      n = std::max(n, svd.singularValues()(0));
    }
    return n;
  }

  // Block k with columns limited to the trial space.
  MatrixXcd trial_block(int k) const {
    const auto cols = space_->trial_columns(k);
    MatrixXcd M(blocks_[k].rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) M.col(c) = blocks_[k].col(cols[c]);
    return M;
  }

  double trial_norm2() const {
    double n = 0.0;
    for (int k = 0; k < num_blocks(); ++k) {
      const MatrixXcd M = trial_block(k);
      if (M.cols() == 0) continue;
      Eigen::JacobiSVD<MatrixXcd> svd(M);
      n = std::max(n, svd.singularValues()(0));
    }
    return n;
  }

  BoundaryOperator& operator+=(const BoundaryOperator& o) {
    for (int k = 0; k < num_blocks(); ++k) blocks_[k] += o.blocks_[k];
    return *this;
  }
  BoundaryOperator& operator-=(const BoundaryOperator& o) {
    for (int k = 0; k < num_blocks(); ++k) blocks_[k] -= o.blocks_[k];
    return *this;
  }
  BoundaryOperator& operator*=(cdouble a) {
    for (auto& b : blocks_) b *= a;
    return *this;
  }

  friend BoundaryOperator operator+(BoundaryOperator a, const BoundaryOperator& b) { return a += b; }
  friend BoundaryOperator operator-(BoundaryOperator a, const BoundaryOperator& b) { return a -= b; }
  friend BoundaryOperator operator*(cdouble a, BoundaryOperator b) { return b *= a; }
  friend BoundaryOperator operator*(const BoundaryOperator& a, const BoundaryOperator& b) {
    BoundaryOperator r(a.space_);
    for (int k = 0; k < a.num_blocks(); ++k) r.blocks_[k].noalias() = a.blocks_[k] * b.blocks_[k];
    return r;
  }

  void make_hermitian() {
    for (auto& b : blocks_) b = (0.5 * (b + b.adjoint())).eval();
  }

  // Row-major complex doubles after a header of (N, lambda, m, kind).
  void dump(const std::string& path, double lambda, double m, const std::string& kind) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    const std::uint64_t n = static_cast<std::uint64_t>(dim());
    char tag[8] = {0};
    for (std::size_t i = 0; i < kind.size() && i < 8; ++i) tag[i] = kind[i];
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&lambda), sizeof lambda);
    out.write(reinterpret_cast<const char*>(&m), sizeof m);
    out.write(tag, 8);
    const MatrixXcd M = dense();
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j) {
        const double re = M(i, j).real(), im = M(i, j).imag();
        out.write(reinterpret_cast<const char*>(&re), sizeof re);
        out.write(reinterpret_cast<const char*>(&im), sizeof im);
      }
  }

 private:
  SpacePtr space_;
  std::vector<MatrixXcd> blocks_;
};

struct LayerOperators {
  SpectralParams params;
  BoundaryOperator K, W;
};

namespace layer_detail {

// Accumulates sum_t c_t Psi_t^H I_t into the block structure.
inline void accumulate(const SpinorSpace& sp, BoundaryOperator& op, const MatrixXcd& psi, const MatrixXcd& I,
                       double c) {
  for (int k = 0; k < sp.num_blocks(); ++k) {
    const auto& idx = sp.blocks()[k];
    const auto n = static_cast<Eigen::Index>(idx.size());
    MatrixXcd P(2, n), Q(2, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      P.col(i) = psi.col(idx[i]);
      Q.col(i) = I.col(idx[i]);
    }
    op.block(k).noalias() += c * (P.adjoint() * Q);
  }
}

inline Eigen::Matrix3d frame_for(const Vec3& p) {
  const Vec3 e3 = p.normalized();
  Vec3 ref = std::abs(e3.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
  const Vec3 e1 = ref.cross(e3).normalized();
  const Vec3 e2 = e3.cross(e1);
  Eigen::Matrix3d F;
  F.col(0) = e1;
  F.col(1) = e2;
  F.col(2) = e3;
  return F;
}

}  // namespace layer_detail

inline LayerOperators assemble_layers(const SpacePtr& sp, const SpectralParams& prm) {
  const auto& space = *sp;
  const auto& surf = space.surface();
  const int L = space.max_degree();
  const int nh = (L + 1) * (L + 1);
  const int D = space.dim();
  const int nta = space.inner_theta(), npa = space.inner_phi();
  const int ni = nta * npa;
  const GaussRule g = gauss_legendre(nta, 0.0, std::numbers::pi);
  std::vector<Vec3> local(ni);
  std::vector<double> wl(ni);
  for (int a = 0; a < nta; ++a)
    for (int b = 0; b < npa; ++b) {
      const double th = g.x[a], ph = 2.0 * std::numbers::pi * b / npa;
      local[a * npa + b] = Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
      wl[a * npa + b] = g.w[a] * std::sin(th) * 2.0 * std::numbers::pi / npa;
    }

  LayerOperators out{prm, BoundaryOperator(sp), BoundaryOperator(sp)};
  const cdouble s = prm.s();
  const double inv4pi = 1.0 / (4.0 * std::numbers::pi);
  HarmonicTable table(L);
  // Moments S(c, h) = sum_q kernel_c(q) Y_h(q). With Y = P (cos + i sin) the
  // sums over ell >= 0 split into cosine and sine parts, and ell < 0 follows by
  // conjugation of the harmonic.
  Eigen::Matrix<cdouble, 4, Eigen::Dynamic> S(4, nh);
  // A and B hold 4 complex moments per harmonic as 8 interleaved doubles.
  std::vector<double> A(8 * static_cast<std::size_t>(nh)), B(A.size());
  MatrixXcd IK(2, D), IW(2, D);
  const cdouble I1(0, 1);

  for (std::size_t t = 0; t < space.targets().size(); ++t) {
    const auto& tg = space.targets()[t];
    const Eigen::Matrix3d F = layer_detail::frame_for(tg.p);
    std::fill(A.begin(), A.end(), 0.0);
    std::fill(B.begin(), B.end(), 0.0);
    for (int q = 0; q < ni; ++q) {
      const Vec3 pq = F * local[q];
      const Vec3 xq = surf.point(pq);
      const Vec3 d = tg.x - xq;
      const double r = d.norm();
      const double w = wl[q] * std::sqrt(surf.jacobian(pq)) * inv4pi;
      const cdouble e = std::exp(-s * r);
      const cdouble kk = w * e / r;
      const cdouble kw = w * e * (1.0 + s * r) * I1 / (r * r * r);
      const cdouble kv[4] = {kk, kw * d.x(), kw * d.y(), kw * d.z()};
      const double phi = table.legendre(pq);
      for (int l = 0; l <= L; ++l) {
        const double c = std::cos(l * phi), sn = std::sin(l * phi);
        double kc[8], ks[8];
        for (int i = 0; i < 4; ++i) {
          kc[2 * i] = kv[i].real() * c;
          kc[2 * i + 1] = kv[i].imag() * c;
          ks[2 * i] = kv[i].real() * sn;
          ks[2 * i + 1] = kv[i].imag() * sn;
        }
        for (int n = l; n <= L; ++n) {
          const int h = sh_index(n, l);
          const double p = table.plm(n, l);
          double* a = &A[8 * static_cast<std::size_t>(h)];
          double* b = &B[8 * static_cast<std::size_t>(h)];
          for (int i = 0; i < 8; ++i) {
            a[i] += kc[i] * p;
            b[i] += ks[i] * p;
          }
        }
      }
    }
    for (int l = 0; l <= L; ++l) {
      const double sign = (l & 1) ? -1.0 : 1.0;
      for (int n = l; n <= L; ++n) {
        const int h = sh_index(n, l);
        for (int i = 0; i < 4; ++i) {
          const cdouble a(A[8 * h + 2 * i], A[8 * h + 2 * i + 1]);
          const cdouble b(B[8 * h + 2 * i], B[8 * h + 2 * i + 1]);
          S(i, h) = a + I1 * b;
          if (l > 0) S(i, sh_index(n, -l)) = sign * (a - I1 * b);
        }
      }
    }
    for (int b = 0; b < D; ++b) {
      const auto& rc = space.recipes()[b];
      const int iu = sh_index(rc.n, rc.ell_up);
      const int id = sh_index(rc.n, rc.ell_dn);
      const cdouble cu = rc.c_up, cd = rc.c_dn;
      const cdouble ku = cu != 0.0 ? cu * S(0, iu) : cdouble(0), kd = cd != 0.0 ? cd * S(0, id) : cdouble(0);
      IK(0, b) = ku;
      IK(1, b) = kd;
      cdouble up = 0, dn = 0;
      if (cu != 0.0) {
        up += cu * S(3, iu);
        dn += cu * (S(1, iu) + I1 * S(2, iu));
      }
      if (cd != 0.0) {
        up += cd * (S(1, id) - I1 * S(2, id));
        dn -= cd * S(3, id);
      }
      IW(0, b) = up;
      IW(1, b) = dn;
    }
    const double c = tg.weight * tg.sqrt_jac;
    layer_detail::accumulate(space, out.K, space.target_values(static_cast<int>(t)), IK, c);
    layer_detail::accumulate(space, out.W, space.target_values(static_cast<int>(t)), IW, c);
  }
  if (prm.self_adjoint()) {
    out.K.make_hermitian();
    out.W.make_hermitian();
  }
  return out;
}

inline BoundaryOperator assemble_K(const SpacePtr& sp, const SpectralParams& prm) {
  return assemble_layers(sp, prm).K;
}

inline BoundaryOperator assemble_W(const SpacePtr& sp, const SpectralParams& prm) {
  return assemble_layers(sp, prm).W;
}

// Galerkin matrix of multiplication by sigma.nu.
inline BoundaryOperator sigma_nu(const SpacePtr& sp) {
  const auto& space = *sp;
  BoundaryOperator op(sp);
  for (std::size_t t = 0; t < space.targets().size(); ++t) {
    const auto& tg = space.targets()[t];
    const MatrixXcd& psi = space.target_values(static_cast<int>(t));
    const MatrixXcd I = sigma_matrix(tg.nu) * psi;
    layer_detail::accumulate(space, op, psi, I, tg.weight);
  }
  op.make_hermitian();
  return op;
}

// 2x2 block operator on pairs (upper, lower) of spinor fields.
struct BoundaryOperator4 {
  BoundaryOperator a, b, c, d;  // [[a, b], [c, d]]

  friend BoundaryOperator4 operator*(const BoundaryOperator4& x, const BoundaryOperator4& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
  }
  friend BoundaryOperator4 operator+(const BoundaryOperator4& x, const BoundaryOperator4& y) {
    return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d};
  }
  friend BoundaryOperator4 operator-(const BoundaryOperator4& x, const BoundaryOperator4& y) {
    return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d};
  }
  BoundaryOperator4 adjoint() const { return {a.adjoint(), c.adjoint(), b.adjoint(), d.adjoint()}; }

  static BoundaryOperator4 identity(const SpacePtr& sp) {
    return {BoundaryOperator::identity(sp), BoundaryOperator(sp), BoundaryOperator(sp), BoundaryOperator::identity(sp)};
  }

  double norm2(bool trial = false) const {
    double n = 0.0;
    for (int k = 0; k < a.num_blocks(); ++k) {
      const auto m = a.block(k).rows();
      if (m == 0) continue;
      MatrixXcd M;
      if (trial) {
        const auto cols = a.trial_block(k).cols();
        if (cols == 0) continue;
        M.resize(2 * m, 2 * cols);
        M << a.trial_block(k), b.trial_block(k), c.trial_block(k), d.trial_block(k);
      } else {
        M.resize(2 * m, 2 * m);
        M << a.block(k), b.block(k), c.block(k), d.block(k);
      }
      Eigen::JacobiSVD<MatrixXcd> svd(M);
      n = std::max(n, svd.singularValues()(0));
    }
    return n;
  }
};

inline BoundaryOperator4 assemble_C(const LayerOperators& lo) {
  const double lam = lo.params.lambda, m = lo.params.m;
  return {cdouble(lam + m) * lo.K, lo.W, lo.W, cdouble(lam - m) * lo.K};
}

inline BoundaryOperator4 alpha_nu(const BoundaryOperator& sn) {
  BoundaryOperator z(sn.space_ptr());
  return {z, sn, sn, z};
}

struct IdentityResiduals {
  double calderon = 0.0;       // |(C (alpha.nu))^2 + 1/4|
  double square = 0.0;         // |(W s)^2 + (lambda^2 - m^2)(K s)^2 + 1/4|
  double anticommutator = 0.0; // |{K s, W s}|
  double max() const { return std::max({calderon, square, anticommutator}); }
};

// Norms are taken over the trial columns (see SpinorSpace::trial_columns).

inline IdentityResiduals identity_residuals(const LayerOperators& lo, const BoundaryOperator& sn) {
  const auto& sp = sn.space_ptr();
  IdentityResiduals r;
  const BoundaryOperator4 CA = assemble_C(lo) * alpha_nu(sn);
  BoundaryOperator4 sq = CA * CA;
  const BoundaryOperator4 id = BoundaryOperator4::identity(sp);
  sq = sq + BoundaryOperator4{0.25 * id.a, id.b, id.c, 0.25 * id.d};
  r.calderon = sq.norm2(true);
  const BoundaryOperator Ws = lo.W * sn, Ks = lo.K * sn;
  const double b2 = (lo.params.lambda - lo.params.m) * (lo.params.lambda + lo.params.m);
  BoundaryOperator s2 = Ws * Ws + cdouble(b2) * (Ks * Ks);
  s2 += 0.25 * BoundaryOperator::identity(sp);
  r.square = s2.trial_norm2();
  r.anticommutator = (Ks * Ws + Ws * Ks).trial_norm2();
  return r;
}

// {W, sigma.nu}
inline double anticommutator_norm(const BoundaryOperator& W, const BoundaryOperator& sn) {
  return (W * sn + sn * W).trial_norm2();
}

// Phi_lambda g at interior points for g = (upper, lower) given by coefficients.
// The density is resampled on a grid refined by `upsample`.
inline std::vector<Eigen::Vector4cd> volume_potential(const SpinorSpace& space, const SpectralParams& prm,
                                                      const VectorXcd& g_up, const VectorXcd& g_dn,
                                                      const std::vector<Vec3>& points, int upsample = 3,
                                                      bool check_distance = true) {
  const auto& surf = space.surface();
  if (check_distance) {
    const double hmax = surf.max_patch_size();
    for (const auto& x : points) {
      const double s = surf.radial_fraction(x);
      if (s >= 1.0) throw DomainError("volume_potential: point outside the domain");
      double dmin = 1e300;
      for (const auto& y : surf.nodes()) dmin = std::min(dmin, (x - y).norm());
      if (dmin <= 2.0 * hmax) throw DomainError("volume_potential: point closer than 2 h to the boundary");
    }
  }
  const int nt = surf.n_theta() * upsample, np = surf.n_phi() * upsample;
  const GaussRule gr = gauss_legendre(nt);
  std::vector<Vec3> ys;
  std::vector<double> ws;
  std::vector<Spinor> gu, gd;
  HarmonicTable table(space.max_degree());
  for (int i = 0; i < nt; ++i) {
    const double t = gr.x[i], st = std::sqrt(1.0 - t * t);
    for (int k = 0; k < np; ++k) {
      const double ph = 2.0 * std::numbers::pi * k / np;
      const Vec3 p(st * std::cos(ph), st * std::sin(ph), t);
      ys.push_back(surf.point(p));
      ws.push_back(gr.w[i] * 2.0 * std::numbers::pi / np * surf.jacobian(p));
      gu.push_back(space.evaluate(g_up, p, table));
      gd.push_back(space.evaluate(g_dn, p, table));
    }
  }
  // kernel_phi applied without forming the 4x4 matrix
  const cdouble s = prm.s();
  const double lp = prm.lambda + prm.m, lm = prm.lambda - prm.m;
  const double inv4pi = 1.0 / (4.0 * std::numbers::pi);
  std::vector<Eigen::Vector4cd> out(points.size(), Eigen::Vector4cd::Zero());
  for (std::size_t a = 0; a < points.size(); ++a) {
    Eigen::Vector4cd acc = Eigen::Vector4cd::Zero();
    for (std::size_t q = 0; q < ys.size(); ++q) {
      const Vec3 x = points[a] - ys[q];
      const double r = x.norm();
      const cdouble pref = ws[q] * inv4pi * std::exp(-s * r) / r;
      const cdouble c = (1.0 + s * r) * cdouble(0, 1) / (r * r);
      acc.head<2>() += pref * (lp * gu[q] + c * sigma_dot(x, gd[q]));
      acc.tail<2>() += pref * (c * sigma_dot(x, gu[q]) + lm * gd[q]);
    }
    out[a] = acc;
  }
  return out;
}

}  // namespace diracbag
