#pragma once

// Rayleigh quotient <(s.nu) K_m (s.nu) u, u> / |u|^2 and its maximum over the
// Hardy space range(P+).

#include <algorithm>
#include <cmath>
#include <vector>

#include "hardy.hpp"

namespace diracbag {

struct RayleighResult {
  double R_Omega = 0.0;
  VectorXcd maximizer;  // unit coefficient vector
  int block = -1;
  double EL_residual = 0.0;
  double excluded_mode_overlap = 0.0;
  double unconstrained_top = 0.0;
  double K_norm = 0.0;
  std::vector<double> pencil;  // 1 / eigenvalues of the reduced problem, ascending
};

struct RayleighOperator {
  BoundaryOperator K_m, A;  // A = (s.nu) K_m (s.nu)
};

inline RayleighOperator rayleigh_operator(const ProjectionPair& pp, double m) {
  RayleighOperator r;
  r.K_m = assemble_K(pp.P_plus.space_ptr(), SpectralParams::make(m, m));
  r.A = pp.sigma_nu * r.K_m * pp.sigma_nu;
  r.A.make_hermitian();
  return r;
}

inline double rayleigh_value(const BoundaryOperator& A, const VectorXcd& u) {
  const double n2 = u.squaredNorm();
  if (!(n2 > 0.0)) throw DomainError("rayleigh_value: zero field");
  return std::real(u.dot(A.apply(u))) / n2;
}

inline double rayleigh_value(const BoundaryOperator& A, const SpinorBoundaryField& u) {
  return rayleigh_value(A, A.space().analyze(u));
}

// Largest overlap |<u, psi>| with the given excluded labels.
inline double mode_overlap(const SpinorSpace& sp, const VectorXcd& u, const std::vector<SpinorLabel>& labels) {
  double best = 0.0;
  const double n = u.norm();
  for (const auto& l : labels) {
    const int b = sp.index_of(l);
    if (b >= 0) best = std::max(best, std::abs(u(b)) / n);
  }
  return best;
}

inline RayleighResult rayleigh_max(const ProjectionPair& pp, const RayleighOperator& ro) {
  const auto& sp = pp.P_plus.space();
  if (pp.range_dim() == 0) throw DomainError("rayleigh_max: empty range basis");
  RayleighResult res;
  res.K_norm = ro.K_m.norm2();
  for (int k = 0; k < ro.A.num_blocks(); ++k) {
    const MatrixXcd& B = pp.range_basis_plus[k];
    const MatrixXcd& Ak = ro.A.block(k);
    if (Ak.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> full(Ak, Eigen::EigenvaluesOnly);
      res.unconstrained_top = std::max(res.unconstrained_top, full.eigenvalues()(Ak.rows() - 1));
    }
    if (B.cols() == 0) continue;
    MatrixXcd red = B.adjoint() * Ak * B;
    red = (0.5 * (red + red.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(red);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()(i) > 0.0) res.pencil.push_back(1.0 / es.eigenvalues()(i));
    const Eigen::Index top = es.eigenvalues().size() - 1;
    if (es.eigenvalues()(top) > res.R_Omega) {
      res.R_Omega = es.eigenvalues()(top);
      res.block = k;
      const VectorXcd local = B * es.eigenvectors().col(top);
      res.maximizer = VectorXcd::Zero(sp.dim());
      const auto& idx = sp.blocks()[k];
      for (std::size_t i = 0; i < idx.size(); ++i) res.maximizer(idx[i]) = local(i);
    }
  }
  std::sort(res.pencil.begin(), res.pencil.end());
  if (res.R_Omega > 0.0) {
    const VectorXcd& u = res.maximizer;
    const VectorXcd r = pp.P_plus_adj.apply(u) - ro.A.apply(u) / res.R_Omega;
    res.EL_residual = r.norm() / u.norm();
    std::vector<SpinorLabel> excl;
    for (int mu2 : {-1, 1}) excl.push_back({1, mu2, 1});
    res.excluded_mode_overlap = mode_overlap(sp, u, excl);
  }
  return res;
}

struct LstarComparison {
  double L_probe = 0.0;
  double inv_R = 0.0;
  double ratio = 0.0;  // L_probe * R_Omega
  bool inequality_holds(double delta) const { return L_probe >= (1.0 - delta) * inv_R; }
};

inline LstarComparison compare_Lstar(double lambda_probe, double m, double tau_probe, double R_Omega) {
  LstarComparison c;
  c.L_probe = (lambda_probe - m) * std::exp(-tau_probe);
  c.inv_R = 1.0 / R_Omega;
  c.ratio = c.L_probe * R_Omega;
  return c;
}

}  // namespace diracbag
