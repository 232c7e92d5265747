#pragma once

// Closed surfaces given as linear images of the unit sphere, sampled on a
// Gauss-Legendre (in cos theta) by trapezoid (in phi) product grid.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quadrature.hpp"
#include "sphspinor.hpp"

namespace diracbag {

struct SurfaceParams {
  std::string kind = "sphere";
  double R = 1.0;
  double a = 1.0, b = 1.0, c = 1.0;
  int n_theta = 24;
  int n_phi = 48;
};

struct SpinorBoundaryField {
  std::vector<Spinor> values;
  std::size_t size() const { return values.size(); }
};

class QuadratureSurface {
 public:
  // The surface is X(p) = A p for unit vectors p in the computational frame;
  // physical coordinates are Q X(p).
  QuadratureSurface(SurfaceParams params, const Eigen::Matrix3d& A, const Eigen::Matrix3d& Q)
      : params_(std::move(params)), A_(A), Q_(Q) {
    if (params_.n_theta < 8 || params_.n_phi < 16)
      throw DomainError("surface: need n_theta >= 8 and n_phi >= 16");
    if (!(A_.determinant() > 0.0)) throw DomainError("surface: map must preserve orientation");
    Ainv_t_ = A_.inverse().transpose();
    detA_ = A_.determinant();
    axisymmetric_ = A_(0, 1) == 0.0 && A_(1, 0) == 0.0 && A_(0, 2) == 0.0 && A_(2, 0) == 0.0 && A_(1, 2) == 0.0 &&
                    A_(2, 1) == 0.0 && A_(0, 0) == A_(1, 1);
    build();
  }

  const SurfaceParams& params() const { return params_; }
  int n_theta() const { return params_.n_theta; }
  int n_phi() const { return params_.n_phi; }
  std::size_t size() const { return nodes_.size(); }
  bool axisymmetric() const { return axisymmetric_; }
  const Eigen::Matrix3d& map() const { return A_; }
  const Eigen::Matrix3d& orientation() const { return Q_; }
  const GaussRule& theta_rule() const { return theta_; }

  Vec3 point(const Vec3& p) const { return A_ * p; }
  Vec3 normal(const Vec3& p) const { return (Ainv_t_ * p).normalized(); }
  double jacobian(const Vec3& p) const { return detA_ * (Ainv_t_ * p).norm(); }

  const std::vector<Vec3>& param_points() const { return param_points_; }
  const std::vector<double>& param_weights() const { return param_weights_; }
  const std::vector<Vec3>& nodes() const { return nodes_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& jacobians() const { return jac_; }
  const std::vector<double>& patch_metric() const { return h_; }
  double max_patch_size() const {
    double h = 0.0;
    for (double v : h_) h = std::max(h, v);
    return h;
  }

  Vec3 physical(const Vec3& x) const { return Q_ * x; }

  double area() const {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
  }

  double volume() const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * nodes_[i].dot(normals_[i]);
    return s / 3.0;
  }

  // Distance along the ray from the origin to the surface, relative to x.
  double radial_fraction(const Vec3& x) const {
    // x = s X(p) with p unit; X(p)=A p so p = A^{-1} x / |A^{-1} x| and s = |A^{-1} x|.
    return (A_.inverse() * x).norm();
  }

  void write_nodes_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x,y,z,nx,ny,nz,w\n" << std::setprecision(17);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Vec3 x = physical(nodes_[i]), n = physical(normals_[i]);
      out << x.x() << ',' << x.y() << ',' << x.z() << ',' << n.x() << ',' << n.y() << ',' << n.z() << ','
          << weights_[i] << '\n';
    }
  }

 private:
  void build() {
    const int nt = params_.n_theta, np = params_.n_phi;
    theta_ = gauss_legendre(nt);
    const double dphi = 2.0 * std::numbers::pi / np;
    for (int i = 0; i < nt; ++i) {
      const double t = theta_.x[i], s = std::sqrt(1.0 - t * t);
      for (int k = 0; k < np; ++k) {
        const double phi = k * dphi;
        const Vec3 p(s * std::cos(phi), s * std::sin(phi), t);
        param_points_.push_back(p);
        param_weights_.push_back(theta_.w[i] * dphi);
        nodes_.push_back(point(p));
        normals_.push_back(normal(p));
        jac_.push_back(jacobian(p));
        weights_.push_back(param_weights_.back() * jac_.back());
        h_.push_back(std::sqrt(weights_.back()));
      }
    }
  }

  SurfaceParams params_;
  Eigen::Matrix3d A_, Q_, Ainv_t_;
  double detA_ = 1.0;
  bool axisymmetric_ = false;
  GaussRule theta_;
  std::vector<Vec3> param_points_, nodes_, normals_;
  std::vector<double> param_weights_, weights_, jac_, h_;
};

using SurfacePtr = std::shared_ptr<const QuadratureSurface>;

inline SurfacePtr make_sphere(double R, int n_theta, int n_phi) {
  if (!(R > 0.0)) throw DomainError("make_sphere: R must be positive");
  SurfaceParams p;
  p.kind = "sphere";
  p.R = p.a = p.b = p.c = R;
  p.n_theta = n_theta;
  p.n_phi = n_phi;
  return std::make_shared<QuadratureSurface>(p, R * Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity());
}

// Semi-axes a, b, c along the physical x, y, z axes. When two semi-axes agree
// the computational frame puts the symmetry axis along z.
inline SurfacePtr make_ellipsoid(double a, double b, double c, int n_theta, int n_phi) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw DomainError("make_ellipsoid: semi-axes must be positive");
  SurfaceParams p;
  p.kind = "ellipsoid";
  p.a = a;
  p.b = b;
  p.c = c;
  p.R = std::cbrt(a * b * c);
  p.n_theta = n_theta;
  p.n_phi = n_phi;
  Eigen::Matrix3d Q = Eigen::Matrix3d::Identity();
  Eigen::Vector3d s(a, b, c);
  if (a != b && b == c) {
    Q << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    s = Eigen::Vector3d(b, c, a);
  } else if (a != b && a == c) {
    Q << 0, 1, 0, 0, 0, 1, 1, 0, 0;
    s = Eigen::Vector3d(c, a, b);
  }
  return std::make_shared<QuadratureSurface>(p, s.asDiagonal().toDenseMatrix(), Q);
}

inline double ellipsoid_volume(double a, double b, double c) { return 4.0 * std::numbers::pi / 3.0 * a * b * c; }

// Factor s such that (s a, s b, s c) encloses target_volume.
inline double equal_volume_scale(double a, double b, double c,
                                 double target_volume = 4.0 * std::numbers::pi / 3.0) {
  return std::cbrt(target_volume / ellipsoid_volume(a, b, c));
}

inline SurfacePtr make_surface(const SurfaceParams& p) {
  if (p.kind == "sphere") return make_sphere(p.R, p.n_theta, p.n_phi);
  if (p.kind == "ellipsoid") return make_ellipsoid(p.a, p.b, p.c, p.n_theta, p.n_phi);
  throw DomainError("unknown surface kind '" + p.kind + "'");
}

inline SpinorBoundaryField apply_sigma_nu(const QuadratureSurface& s, const SpinorBoundaryField& u) {
  if (u.size() != s.size()) throw DomainError("apply_sigma_nu: field size mismatch");
  SpinorBoundaryField out;
  out.values.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out.values[i] = sigma_dot(s.normals()[i], u.values[i]);
  return out;
}

inline double field_norm(const QuadratureSurface& s, const SpinorBoundaryField& u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += s.weights()[i] * u.values[i].squaredNorm();
  return std::sqrt(acc);
}

}  // namespace diracbag
