// Acceptance run: one PASS/FAIL line per numbered criterion plus the figure data
// check. Exit status is nonzero if any line fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "diracbag/ball_spectrum.hpp"
#include "diracbag/bie_spectrum.hpp"
#include "diracbag/hardy.hpp"
#include "diracbag/io.hpp"
#include "diracbag/layerops.hpp"
#include "diracbag/rayleigh.hpp"

using namespace diracbag;

namespace {

const double m = 1.0;
int failures = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Runs one criterion, timing it against its budget in seconds.
void criterion(const std::string& id, double budget, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << id << ": " << o.detail << " time=" << std::setprecision(3) << secs
            << "s/" << budget << "s" << (in_time ? "" : " (over budget)") << std::endl;
}

std::string fmt(std::initializer_list<std::pair<const char*, double>> kv) {
  std::ostringstream s;
  s << std::setprecision(4);
  bool first = true;
  for (const auto& [k, v] : kv) {
    s << (first ? "" : " ") << k << '=' << v;
    first = false;
  }
  return s.str();
}

bool improving(double prev, double cur) { return cur < prev || (cur < 1e-12 && prev < 1e-12); }

double unit_f() { return std::cbrt(0.5); }

SurfacePtr ellipsoid(int nt) { return make_ellipsoid(2 * unit_f(), unit_f(), unit_f(), nt, 2 * nt); }

// max |K e - e/(2n+1)| over sphere modes of orbital degree n <= 3
double sphere_K_error(int nt) {
  const auto sp = make_space(make_sphere(1.0, nt, 2 * nt));
  const auto K = assemble_K(sp, SpectralParams::make(m, m));
  double worst = 0.0;
  for (const auto& l : sp->labels()) {
    const int n = l.orbital();
    if (n > 3) continue;
    const VectorXcd e = sp->unit(l);
    worst = std::max(worst, (K.apply(e) - e / (2.0 * n + 1.0)).norm());
  }
  return worst;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> r;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) r.push_back(f);
    rows.push_back(r);
  }
  return rows;
}

// endpoint is +-m or sqrt((z/R)^2 + m^2) for a zero z of J_q, q in {j, j+1}
bool admissible_end(double e, double j, const BallModel& b) {
  if (std::abs(std::abs(e) - b.m) < 1e-12) return true;
  const double x = std::sqrt((e - b.m) * (e + b.m)) * b.R;
  for (double q : {j, j + 1.0})
    if (std::abs(std::cyl_bessel_j(q, x)) < 1e-9) return true;
  return false;
}

}  // namespace

int main() {
  const BallModel unit{1.0, m};

  criterion("criterion 1 ball first eigenvalue limits", 1.0, [&] {
    const double lo = gap_to_mass(first_positive(unit, -40.0), m);
    const double hi = std::abs(first_positive(unit, 40.0).lambda - std::sqrt(std::numbers::pi * std::numbers::pi + 1));
    return Outcome{lo >= 0.0 && lo < 1e-8 && hi < 1e-8, fmt({{"gap(-40)", lo}, {"err(+40)", hi}, {"tol", 1e-8}})};
  });

  criterion("criterion 2 first-order asymptotics", 1.0, [&] {
    double worst = 0.0;
    bool decreasing = true;
    for (double R : {0.5, 1.0, 3.0}) {
      const BallModel b{R, m};
      worst = std::max(worst, std::abs(L_of_tau(b, -30.0) * R - 3.0));
      double prev = INFINITY;
      for (double t = -30.0; t <= 20.0; t += 10.0) {
        const double L = L_of_tau(b, t);
        decreasing = decreasing && L < prev;
        prev = L;
      }
    }
    return Outcome{worst < 1e-6 && decreasing,
                   fmt({{"max|L(-30)R-3|", worst}, {"tol", 1e-6}, {"strictly_decreasing", double(decreasing)}})};
  });

  // shared sweep for criteria 3 and 4
  const BallModel r3{3.0, m};
  const auto chans = channel_list(7, 2);
  std::vector<double> taus;
  for (int i = 0; i < 250; ++i) taus.push_back(-12.0 + 24.0 * i / 249.0);
  std::vector<EigenCurveSample> sweep;

  criterion("criterion 3 inversion fidelity", 10.0, [&] {
    sweep = curve_sweep(chans, r3, taus, false);
    double worst = 0.0;
    for (const auto& s : sweep)
      worst = std::max(worst, std::abs(h_of_sample(s, r3) - std::exp(s.tau)) / std::exp(s.tau));
    return Outcome{worst < 1e-11 && sweep.size() >= 10000,
                   fmt({{"samples", double(sweep.size())}, {"max_rel", worst}, {"tol", 1e-11}})};
  });

  criterion("criterion 4 monotonicity and mirror symmetry", 10.0, [&] {
    bool mono = !sweep.empty();
    for (std::size_t i = 1; i < sweep.size(); ++i)
      if (sweep[i].channel == sweep[i - 1].channel && !(sweep[i].lambda > sweep[i - 1].lambda)) mono = false;
    double sym = 0.0;
    for (const auto& s : sweep) {
      const auto d = eigenvalue_at({s.channel.j, -s.channel.branch, s.channel.k}, r3, -s.tau);
      sym = std::max(sym, std::abs(s.lambda + d.lambda));
    }
    return Outcome{mono && sym < 1e-10, fmt({{"increasing", double(mono)}, {"max|l-(t)+l+(-t)|", sym}, {"tol", 1e-10}})};
  });

  criterion("criterion 5 derivative formula", 5.0, [&] {
    double gap = 0.0;
    for (double t : {-2.0, 0.0, 2.0}) gap = std::max(gap, derivative_check({HalfInt(1), -1, 0}, unit, t).max_rel_gap);
    return Outcome{gap < 1e-5, fmt({{"max_rel_gap", gap}, {"tol", 1e-5}})};
  });

  criterion("criterion 6 single-layer spectrum on the sphere", 30.0, [&] {
    const double e24 = sphere_K_error(24), e32 = sphere_K_error(32);
    return Outcome{e24 < 5e-3 && improving(e24, e32), fmt({{"err24", e24}, {"err32", e32}, {"tol", 5e-3}})};
  });

  // criteria 7 and 8 share the refinement ladder
  std::map<int, ProjectionResiduals> proj;
  criterion("criterion 7 operator identities", 120.0, [&] {
    bool ok = true;
    std::ostringstream d;
    d << std::setprecision(3);
    for (double lam : {m, m + 0.5}) {
      IdentityResiduals r[2];
      int i = 0;
      for (int nt : {24, 32}) {
        const auto sp = make_space(make_sphere(1.0, nt, 2 * nt));
        r[i++] = identity_residuals(assemble_layers(sp, SpectralParams::make(lam, m)), sigma_nu(sp));
        if (lam == m) proj[nt] = projection_residuals(build_projections(sp, m));
      }
      ok = ok && r[0].max() < 0.05 && improving(r[0].calderon, r[1].calderon) && improving(r[0].square, r[1].square) &&
           improving(r[0].anticommutator, r[1].anticommutator);
      d << "lambda=" << lam << " (i)=" << r[0].calderon << "->" << r[1].calderon << " (ii)=" << r[0].square << "->"
        << r[1].square << " (iii)=" << r[0].anticommutator << "->" << r[1].anticommutator << "; ";
    }
    d << "tol=0.05";
    return Outcome{ok, d.str()};
  });

  criterion("criterion 8 projection algebra", 120.0, [&] {
    if (proj.size() != 2) return Outcome{false, "projections missing"};
    const auto &a = proj[24], &b = proj[32];
    const bool ok = a.product < 0.05 && a.idempotent_plus < 0.05 && a.idempotent_minus < 0.05 &&
                    improving(a.product, b.product) && improving(a.idempotent_plus, b.idempotent_plus) &&
                    improving(a.idempotent_minus, b.idempotent_minus) && a.sum < 1e-15 && b.sum < 1e-15;
    return Outcome{ok, fmt({{"P+P-", a.product},
                            {"->", b.product},
                            {"P+^2-P+", a.idempotent_plus},
                            {"->", b.idempotent_plus},
                            {"P-^2-P-", a.idempotent_minus},
                            {"->", b.idempotent_minus},
                            {"sum", std::max(a.sum, b.sum)}})};
  });

  criterion("criterion 9 ball dichotomy", 120.0, [&] {
    const auto s = ball_test(build_projections(make_space(make_sphere(1.0, 24, 48)), m), m);
    const auto e = ball_test(build_projections(make_space(make_ellipsoid(2.0, 1.0, 1.0, 24, 48)), m), m);
    const double sep = e.reflection / std::max(s.reflection, 1e-300);
    const bool ok = s.anticommutator < 0.02 && e.anticommutator > 10.0 * s.anticommutator && sep >= 100.0;
    return Outcome{ok, fmt({{"sphere", s.anticommutator},
                            {"ellipsoid", e.anticommutator},
                            {"reflection_sphere", s.reflection},
                            {"reflection_ellipsoid", e.reflection}})};
  });

  criterion("criterion 10 boundary solver vs analytic", 300.0, [&] {
    const double exact = first_positive(unit, 0.0).lambda;
    std::vector<double> err;
    int mult = 0;
    for (int nt : {16, 24, 32}) {
      const BieSolver solver(make_space(make_sphere(1.0, nt, 2 * nt)), m);
      const auto p = solver.find_first(0.0);
      err.push_back(std::abs(p.lambda - exact));
      if (nt == 24) mult = p.multiplicity;
    }
    const bool ok = err[1] < 1e-2 && improving(err[0], err[1]) && improving(err[1], err[2]) && mult >= 2 && mult % 2 == 0;
    return Outcome{ok, fmt({{"err16", err[0]}, {"err24", err[1]}, {"err32", err[2]}, {"multiplicity", double(mult)}})};
  });

  criterion("criterion 11 Rayleigh quotient on spheres", 60.0, [&] {
    auto R_of = [](double R) {
      const auto pp = build_projections(make_space(make_sphere(R, 24, 48)), m);
      return rayleigh_max(pp, rayleigh_operator(pp, m));
    };
    const auto r1 = R_of(1.0);
    double scale = 0.0;
    for (double R : {0.5, 2.0}) scale = std::max(scale, std::abs(R_of(R).R_Omega / R - r1.R_Omega));
    const bool ok = std::abs(r1.R_Omega - 1.0 / 3.0) < 1e-2 && r1.excluded_mode_overlap < 0.05 && scale < 1e-2;
    return Outcome{ok, fmt({{"R_B1", r1.R_Omega}, {"excluded_overlap", r1.excluded_mode_overlap}, {"scaling_err", scale}})};
  });

  criterion("criterion 12 inequality chain at tau=-6", 600.0, [&] {
    auto probe = [](SurfacePtr s) {
      const auto sp = make_space(std::move(s));
      const auto pp = build_projections(sp, m);
      const double R = rayleigh_max(pp, rayleigh_operator(pp, m)).R_Omega;
      return compare_Lstar(BieSolver(sp, m).find_first(-6.0).lambda, m, -6.0, R);
    };
    const auto e = probe(ellipsoid(24));
    const auto b = probe(make_sphere(1.0, 24, 48));
    const bool ok = e.inequality_holds(0.1) && std::abs(b.ratio - 1.0) < 0.1;
    return Outcome{ok, fmt({{"ellipsoid_L", e.L_probe}, {"ellipsoid_1/R", e.inv_R}, {"ball_L*R", b.ratio}})};
  });

  criterion("criterion 13 ellipsoid above ball at tau=3", 600.0, [&] {
    const double ball = first_positive(unit, 3.0).lambda;
    // tolerance: sphere discretization error at this tau plus ellipsoid refinement change
    const double sphere_err =
        std::abs(BieSolver(make_space(make_sphere(1.0, 24, 48)), m).find_first(3.0).lambda - ball);
    const double e24 = BieSolver(make_space(ellipsoid(24)), m).find_first(3.0).lambda;
    const double e16 = BieSolver(make_space(ellipsoid(16)), m).find_first(3.0).lambda;
    const double tol = sphere_err + std::abs(e24 - e16);
    return Outcome{e24 - ball > tol, fmt({{"ellipsoid", e24}, {"ball", ball}, {"tol", tol}})};
  });

  criterion("criterion 14 spectrum symmetry on the ellipsoid", 600.0, [&] {
    const BieSolver solver(make_space(ellipsoid(24)), m);
    const double p = solver.find_first(1.0, 1).lambda;
    const double q = solver.find_first(-1.0, -1).lambda;
    return Outcome{std::abs(p + q) < 2e-2, fmt({{"lambda(1)", p}, {"lambda-(-1)", q}, {"tol", 2e-2}})};
  });

  criterion("figure data: curve counts and interval membership", 60.0, [&] {
    struct Fig {
      int jmax2;
      std::vector<int> branches;
    };
    const std::vector<Fig> figs = {{7, {-1, 1}}, {1, {-1}}, {1, {-1, 1}}, {3, {-1, 1}}, {7, {-1, 1}}};
    std::vector<double> ft;
    for (int i = 0; i <= 240; ++i) ft.push_back(-6.0 + 0.05 * i);
    bool ok = true;
    std::size_t rows_total = 0, curves_total = 0;
    for (const auto& f : figs) {
      std::vector<ChannelIndex> cs;
      for (const auto& c : channel_list(f.jmax2, 2))
        if (std::find(f.branches.begin(), f.branches.end(), c.branch) != f.branches.end()) cs.push_back(c);
      std::ostringstream csv;
      write_curve_csv(csv, curve_sweep(cs, r3, ft, false));
      const auto rows = parse_csv(csv.str());
      ok = ok && !rows.empty() && rows[0] == curve_header();
      // samples per (j, branch, k); each must sit in its own interval, increasing in tau
      std::map<std::tuple<int, int, int>, std::vector<std::pair<double, double>>> curves;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const int b = r[3] == "+" ? 1 : (r[3] == "-" ? -1 : 0);
        ok = ok && b != 0;
        curves[{std::stoi(r[2]), b, std::stoi(r[4])}].push_back({std::stod(r[0]), std::stod(r[1])});
      }
      rows_total += rows.size() - 1;
      curves_total += curves.size();
      ok = ok && curves.size() == cs.size();
      std::map<std::pair<int, int>, std::vector<Interval>> by_family;
      for (const auto& [key, pts] : curves) {
        const auto [j2, b, k] = key;
        const ChannelIndex c{HalfInt(j2), b, k};
        const Interval I = interval(c, r3);
        ok = ok && pts.size() == ft.size();
        ok = ok && admissible_end(I.lo, 0.5 * j2, r3) && admissible_end(I.hi, 0.5 * j2, r3);
        for (std::size_t i = 0; i < pts.size(); ++i) {
          ok = ok && I.contains(pts[i].second);
          if (i) ok = ok && pts[i].second > pts[i - 1].second;
        }
        by_family[{j2, b}].push_back(I);
      }
      // one curve per interval: intervals of a family never overlap
      for (auto& [fam, iv] : by_family) {
        std::sort(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
        for (std::size_t i = 1; i < iv.size(); ++i) ok = ok && iv[i].lo >= iv[i - 1].hi;
      }
    }
    return Outcome{ok, fmt({{"figures", double(figs.size())}, {"curves", double(curves_total)}, {"rows", double(rows_total)}})};
  });

  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " failing" : std::string("acceptance: all pass"))
            << std::endl;
  return failures ? 1 : 0;
}
