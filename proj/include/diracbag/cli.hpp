#pragma once

// Mode dispatch for the command-line tool. Kept in a header so tests can run
// modes in-process.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ball_spectrum.hpp"
#include "bie_spectrum.hpp"
#include "hardy.hpp"
#include "io.hpp"
#include "rayleigh.hpp"

namespace diracbag {

enum ExitCode { exit_ok = 0, exit_usage = 1, exit_solver = 2, exit_verify = 3 };

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

inline Check check_below(std::string name, double v, double thr) { return {std::move(name), v, thr, v < thr}; }

inline void print_checks(std::ostream& out, const std::vector<Check>& cs) {
  out << std::setprecision(6);
  for (const auto& c : cs)
    out << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold << '\n';
}

// Resolution of the cache directory: flag, then DIRACBAG_CACHE, then config.
inline std::string resolve_cache_dir(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DIRACBAG_CACHE"); env && *env) return env;
  return from_config;
}

inline std::string zero_cache_path(const std::string& dir) {
  return (std::filesystem::path(dir) / "bessel_zeros.txt").string();
}

inline std::string sibling_path(const std::string& out, const std::string& suffix) {
  std::filesystem::path p(out);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + suffix)).string();
}

// Identity suite on the configured surface and ball.
inline std::vector<Check> verify_suite(const RunConfig& cfg) {
  std::vector<Check> cs;
  const double m = cfg.m;

  BallModel ball = cfg.ball.value_or(BallModel{1.0, m});
  ball.m = m;
  if (m > 0.0) {
    const auto lo = first_positive(ball, -40.0);
    cs.push_back(check_below("ball_first_lower_limit", gap_to_mass(lo, m), 1e-8));
    const double z = std::numbers::pi / ball.R;
    const auto hi = first_positive(ball, 40.0);
    cs.push_back(check_below("ball_first_upper_limit", std::abs(hi.lambda - std::sqrt(z * z + m * m)), 1e-8));
  }
  {
    double worst = 0.0, sym = 0.0;
    const auto chans = channel_list(3, 1);
    for (double t = -4.0; t <= 4.0; t += 1.0) {
      for (const auto& c : chans) {
        const auto s = eigenvalue_at(c, ball, t);
        worst = std::max(worst, std::abs(h_of_sample(s, ball) - std::exp(t)) / std::exp(t));
      }
    }
    const auto sweep = curve_sweep(chans, ball, {-1.0, 0.0, 1.0}, true);
    for (const auto& s : sweep) {
      if (!s.mirrored) continue;
      const auto d = eigenvalue_at({s.channel.j, -s.channel.branch, s.channel.k}, ball, -s.tau);
      sym = std::max(sym, std::abs(s.lambda + d.lambda));
    }
    cs.push_back(check_below("ball_inversion", worst, 1e-11));
    cs.push_back(check_below("ball_mirror_symmetry", sym, 1e-10));
  }
  if (m > 0.0) {
    cs.push_back(check_below("ball_L_minus30_times_R", std::abs(L_of_tau(ball, -30.0) * ball.R - 3.0), 1e-6));
    double gap = 0.0;
    for (double t : {-2.0, 0.0, 2.0}) gap = std::max(gap, derivative_check({HalfInt(1), -1, 0}, ball, t).max_rel_gap);
    cs.push_back(check_below("ball_derivative_formulas", gap, 1e-5));
  }

  const SurfaceParams sp_par = cfg.surface.value_or(SurfaceParams{});
  const auto surf = make_surface(sp_par);
  const auto sp = make_space(surf);
  const bool sphere = sp_par.kind == "sphere";
  const BoundaryOperator sn = sigma_nu(sp);
  const BoundaryOperator id = BoundaryOperator::identity(sp);

  for (double lam : {m, m + 0.5}) {
    const auto lo = assemble_layers(sp, SpectralParams::make(lam, m));
    const auto r = identity_residuals(lo, sn);
    const std::string at = lam == m ? "_at_m" : "_at_m+0.5";
    cs.push_back(check_below("calderon" + at, r.calderon, 0.05));
    cs.push_back(check_below("alpha_nu_square" + at, r.square, 0.05));
    cs.push_back(check_below("anticommutator_C" + at, r.anticommutator, 0.05));
    if (lam == m) {
      cs.push_back(check_below("K_hermitian_at_m", (lo.K - lo.K.adjoint()).norm2(), 1e-12));
      if (sphere) {
        double worst = 0.0;
        for (int b = 0; b < sp->dim(); ++b) {
          const int n = sp->labels()[b].orbital();
          if (n > 3) continue;
          const VectorXcd e = sp->unit(sp->labels()[b]);
          const double d = sp_par.R / (2.0 * n + 1.0);
          worst = std::max(worst, (lo.K.apply(e) - d * e).norm());
        }
        cs.push_back(check_below("sphere_K_eigenpairs_k<=3", worst, 5e-3));
      }
    }
  }
  cs.push_back(check_below("sigma_nu_square", (sn * sn - id).trial_norm2(), 0.05));

  // identity (i) over the resolution ladder; a value already at round-off counts as converged
  if (cfg.ladder.size() >= 2) {
    std::vector<double> res;
    for (int nt : cfg.ladder) {
      SurfaceParams p = sp_par;
      p.n_theta = nt;
      p.n_phi = 2 * nt;
      const auto s = make_space(make_surface(p));
      res.push_back(identity_residuals(assemble_layers(s, SpectralParams::make(m + 0.5, m)), sigma_nu(s)).calderon);
    }
    double worst = 0.0;
    for (std::size_t i = 1; i < res.size(); ++i)
      if (!(res[i] < res[i - 1]) && !(res[i] < 1e-12 && res[i - 1] < 1e-12)) worst = std::max(worst, res[i] / res[i - 1]);
    cs.push_back({"calderon_decreases_over_ladder", res.back(), 1.0, worst == 0.0});
  }

  const auto pp = build_projections(sp, m);
  const auto pr = projection_residuals(pp);
  cs.push_back(check_below("P_plus_plus_P_minus", pr.sum, 1e-12));
  cs.push_back(check_below("P_plus_P_minus", pr.product, 0.05));
  cs.push_back(check_below("P_plus_idempotent", pr.idempotent_plus, 0.05));
  cs.push_back(check_below("P_minus_idempotent", pr.idempotent_minus, 0.05));
  cs.push_back(check_below("rank_gap_ratio", pp.gap.largest_dropped / pp.gap.smallest_kept, 0.25));
  if (sphere) {
    const auto bt = ball_test(pp, m);
    cs.push_back(check_below("sphere_anticommutator_W_sigma_nu", bt.anticommutator, 0.02));
    cs.push_back(check_below("sphere_reflection_identity", bt.reflection, 1e-8));
  }
  const auto ro = rayleigh_operator(pp, m);
  const auto rr = rayleigh_max(pp, ro);
  cs.push_back({"rayleigh_positive", rr.R_Omega, 0.0, rr.R_Omega > 0.0});
  cs.push_back({"rayleigh_below_unconstrained", rr.R_Omega - rr.unconstrained_top, 1e-12,
                rr.R_Omega <= rr.unconstrained_top + 1e-12});
  cs.push_back(check_below("rayleigh_maximizer_hardy_defect", hardy_defect(pp, rr.maximizer), 0.05));
  if (sphere) {
    cs.push_back(check_below("sphere_rayleigh_one_third", std::abs(rr.R_Omega / sp_par.R - 1.0 / 3.0), 1e-2));
    cs.push_back(check_below("sphere_rayleigh_excluded_mode", rr.excluded_mode_overlap, 0.05));
  }
  if (sphere && m > 0.0) {
    BieOptions opt;
    opt.threads = cfg.threads;
    const BieSolver solver(sp, m, opt);
    const auto p = solver.find_first(0.0);
    const double exact = first_positive(BallModel{sp_par.R, m}, 0.0).lambda;
    cs.push_back(check_below("sphere_bie_vs_analytic_tau0", std::abs(p.lambda - exact), 1e-2));
    cs.push_back({"sphere_bie_even_multiplicity", static_cast<double>(p.multiplicity), 2.0, p.multiplicity >= 2});
  }
  return cs;
}

struct RunStreams {
  std::ostream& out = std::cout;  // used when no output path is set
  std::ostream& err = std::cerr;
};

inline void with_output(const std::string& path, std::ostream& fallback, const auto& write) {
  if (path.empty() || path == "-") {
    write(fallback);
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  write(static_cast<std::ostream&>(f));
}

// Returns an ExitCode. Solver exceptions propagate to the caller.
inline int run(const RunConfig& cfg, RunStreams io = {}) {
  switch (cfg.mode) {
    case Mode::curves: {
      const auto samples = curve_sweep(channel_list(cfg.j_max2, cfg.k_max), *cfg.ball, cfg.taus(), true);
      with_output(cfg.out, io.out, [&](std::ostream& o) { write_curve_csv(o, samples); });
      return exit_ok;
    }
    case Mode::first: {
      std::vector<double> taus = cfg.taus();
      with_output(cfg.out, io.out, [&](std::ostream& o) {
        CsvWriter w(o, {"tau", "lambda", "offset", "L", "residual"});
        for (double t : taus) {
          const auto s = first_positive(*cfg.ball, t);
          const double gap = gap_to_mass(s, cfg.ball->m);
          w.row(t, s.lambda, gap, gap * std::exp(-t), s.residual);
        }
      });
      return exit_ok;
    }
    case Mode::bie: {
      const auto taus = cfg.taus();
      BieOptions opt;
      opt.threads = cfg.threads;
      if (cfg.lambda_max > 0.0) opt.lambda_max = cfg.lambda_max;
      BieSolver::Trace tr;
      std::vector<SigmaSample> scan;
      if (!taus.empty()) {
        const BieSolver solver(make_space(make_surface(*cfg.surface)), cfg.m, opt);
        scan = solver.sigma_min_scan(taus.front(), solver.default_grid(taus.front()));
        tr = solver.trace_curve(taus);
      }
      with_output(cfg.out, io.out, [&](std::ostream& o) { write_bie_csv(o, tr.pairs); });
      if (!cfg.out.empty() && cfg.out != "-") {
        std::ofstream f(sibling_path(cfg.out, ".scan.csv"));
        write_scan_csv(f, taus.empty() ? 0.0 : taus.front(), scan);
      }
      if (tr.truncated) {
        io.err << "bie: " << tr.diagnostic << '\n';
        return exit_solver;
      }
      return exit_ok;
    }
    case Mode::rayleigh: {
      const auto sp = make_space(make_surface(*cfg.surface));
      const auto pp = build_projections(sp, cfg.m);
      const auto ro = rayleigh_operator(pp, cfg.m);
      const auto rr = rayleigh_max(pp, ro);
      BieOptions opt;
      opt.threads = cfg.threads;
      const BieSolver solver(sp, cfg.m, opt);
      const auto probe = solver.find_first(cfg.tau_probe);
      const auto cmp = compare_Lstar(probe.lambda, cfg.m, cfg.tau_probe, rr.R_Omega);
      with_output(cfg.out, io.out, [&](std::ostream& o) {
        o << std::setprecision(17);
        o << "R_Omega=" << rr.R_Omega << "\ninv_R_Omega=" << 1.0 / rr.R_Omega << "\nmaximizer_block=" << rr.block
          << "\nEL_residual=" << rr.EL_residual << "\nexcluded_mode_overlap=" << rr.excluded_mode_overlap
          << "\nunconstrained_top=" << rr.unconstrained_top << "\nK_norm=" << rr.K_norm
          << "\nrange_dim=" << pp.range_dim() << "\ndim=" << sp->dim() << "\nrank_gap_kept=" << pp.gap.smallest_kept
          << "\nrank_gap_dropped=" << pp.gap.largest_dropped << "\ntau_probe=" << cfg.tau_probe
          << "\nlambda_probe=" << probe.lambda << "\nL_probe=" << cmp.L_probe << "\nL_probe_times_R=" << cmp.ratio
          << "\ninequality_delta_0.1=" << (cmp.inequality_holds(0.1) ? "true" : "false") << '\n';
      });
      if (!cfg.out.empty() && cfg.out != "-") {
        std::ofstream f(sibling_path(cfg.out, ".pencil.csv"));
        CsvWriter w(f, {"index", "value"});
        for (std::size_t i = 0; i < rr.pencil.size(); ++i) w.row(i, rr.pencil[i]);
      }
      return exit_ok;
    }
    case Mode::verify: {
      const auto cs = verify_suite(cfg);
      with_output(cfg.out, io.out, [&](std::ostream& o) { print_checks(o, cs); });
      for (const auto& c : cs)
        if (!c.pass) return exit_verify;
      return exit_ok;
    }
  }
  return exit_usage;
}

}  // namespace diracbag
