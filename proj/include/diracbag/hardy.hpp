#pragma once

// Skew projections P+- = 1/2 +- i W_m (sigma.nu) onto the Hardy spaces of the
// surface and diagnostics that single out the ball.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "layerops.hpp"

namespace diracbag {

struct RankGap {
  double smallest_kept = std::numeric_limits<double>::infinity();
  double largest_dropped = 0.0;
  bool ambiguous = false;
  std::string str() const {
    return "kept >= " + std::to_string(smallest_kept) + ", dropped <= " + std::to_string(largest_dropped);
  }
};

struct ProjectionPair {
  BoundaryOperator P_plus, P_minus, P_plus_adj, P_minus_adj;
  BoundaryOperator W_m, sigma_nu;
  // Orthonormal basis of range(P+) per block, in block coordinates.
  std::vector<MatrixXcd> range_basis_plus;
  double rank_tolerance = 0.5;
  RankGap gap;

  int range_dim() const {
    int n = 0;
    for (const auto& b : range_basis_plus) n += static_cast<int>(b.cols());
    return n;
  }
};

struct ProjectionResiduals {
  double sum = 0.0;            // |P+ + P- - I|
  double product = 0.0;        // max(|P+ P-|, |P- P+|)
  double idempotent_plus = 0.0;
  double idempotent_minus = 0.0;
  double adjoint_consistency = 0.0;  // |P+* - (P+)^H|
  double max() const { return std::max({product, idempotent_plus, idempotent_minus}); }
};

// The nonzero singular values of a projection are >= 1, so an absolute
// threshold well below 1 separates the range from the kernel. The columns fed
// to the factorization are those of the trial space.
inline ProjectionPair build_projections(const SpacePtr& sp, double m, double rank_tolerance = 0.5) {
  ProjectionPair pp;
  pp.W_m = assemble_W(sp, SpectralParams::make(m, m));
  pp.sigma_nu = sigma_nu(sp);
  const BoundaryOperator id = BoundaryOperator::identity(sp);
  const BoundaryOperator iWs = cdouble(0, 1) * (pp.W_m * pp.sigma_nu);
  const BoundaryOperator isW = cdouble(0, 1) * (pp.sigma_nu * pp.W_m);
  pp.P_plus = 0.5 * id + iWs;
  pp.P_minus = 0.5 * id - iWs;
  pp.P_plus_adj = 0.5 * id - isW;
  pp.P_minus_adj = 0.5 * id + isW;
  pp.rank_tolerance = rank_tolerance;
  for (int k = 0; k < pp.P_plus.num_blocks(); ++k) {
    const MatrixXcd M = pp.P_plus.trial_block(k);
    if (M.cols() == 0) {
      pp.range_basis_plus.emplace_back(M.rows(), 0);
      continue;
    }
    Eigen::JacobiSVD<MatrixXcd> svd(M, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) > rank_tolerance) {
        ++r;
        pp.gap.smallest_kept = std::min(pp.gap.smallest_kept, s(i));
      } else {
        pp.gap.largest_dropped = std::max(pp.gap.largest_dropped, s(i));
      }
    }
    pp.range_basis_plus.push_back(svd.matrixU().leftCols(r));
  }
  pp.gap.ambiguous = pp.gap.smallest_kept < 4.0 * pp.gap.largest_dropped;
  return pp;
}

inline ProjectionResiduals projection_residuals(const ProjectionPair& pp) {
  ProjectionResiduals r;
  const auto& sp = pp.P_plus.space_ptr();
  const BoundaryOperator id = BoundaryOperator::identity(sp);
  r.sum = (pp.P_plus + pp.P_minus - id).norm2();
  r.product = std::max((pp.P_plus * pp.P_minus).trial_norm2(), (pp.P_minus * pp.P_plus).trial_norm2());
  r.idempotent_plus = (pp.P_plus * pp.P_plus - pp.P_plus).trial_norm2();
  r.idempotent_minus = (pp.P_minus * pp.P_minus - pp.P_minus).trial_norm2();
  r.adjoint_consistency = (pp.P_plus_adj - pp.P_plus.adjoint()).norm2();
  return r;
}

// Largest |nu(y) - nu(x) + 2 ((x - y).nu(x)) (x - y) / |x - y|^2| over pairs of
// nodes taken with the given stride. Zero on spheres.
inline double reflection_residual(const QuadratureSurface& s, std::size_t max_nodes = 400) {
  const std::size_t n = s.size();
  const std::size_t stride = std::max<std::size_t>(1, n / max_nodes);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; i += stride) {
    const Vec3 x = s.physical(s.nodes()[i]), nx = s.physical(s.normals()[i]);
    for (std::size_t j = 0; j < n; j += stride) {
      if (j == i) continue;
      const Vec3 y = s.physical(s.nodes()[j]), ny = s.physical(s.normals()[j]);
      const Vec3 d = x - y;
      const double d2 = d.squaredNorm();
      if (d2 == 0.0) continue;
      worst = std::max(worst, (ny - nx + 2.0 * d.dot(nx) * d / d2).norm());
    }
  }
  return worst;
}

struct BallTestReport {
  double anticommutator = 0.0;       // |{W_m, sigma.nu}|
  double anticommutator_lambda = 0.0;  // same at a second lambda, when requested
  double skew = 0.0;                 // |P+ - P+*|
  double reflection = 0.0;
  bool looks_like_ball(double tol = 0.02) const {
    return anticommutator < tol && skew < tol && reflection < tol;
  }
};

inline BallTestReport ball_test(const ProjectionPair& pp, double m, double lambda_probe = -1.0) {
  BallTestReport r;
  r.anticommutator = anticommutator_norm(pp.W_m, pp.sigma_nu);
  r.skew = (pp.P_plus - pp.P_plus_adj).trial_norm2();
  r.reflection = reflection_residual(pp.P_plus.space().surface());
  if (lambda_probe >= 0.0) {
    const BoundaryOperator W = assemble_W(pp.P_plus.space_ptr(), SpectralParams::make(lambda_probe, m));
    r.anticommutator_lambda = anticommutator_norm(W, pp.sigma_nu);
  }
  return r;
}

// |P- u| / |u| for coefficient vectors.
inline double hardy_defect(const ProjectionPair& pp, const VectorXcd& u) {
  const double n = u.norm();
  if (!(n > 0.0)) throw DomainError("hardy_defect: zero field");
  return pp.P_minus.apply(u).norm() / n;
}

}  // namespace diracbag
