#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "diracbag/cli.hpp"

using namespace diracbag;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

int error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> r;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) r.push_back(f);
    if (!line.empty() && line.back() == ',') r.emplace_back();
    rows.push_back(r);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  const auto d = fs::temp_directory_path() / "diracbag_cli_test";
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DIRACBAG_CLI) + " " + args + " >" + (scratch_dir() / "stdout.txt").string() +
                          " 2>" + (scratch_dir() / "stderr.txt").string();
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const auto p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse("# comment\nmode = curves\nR = 3   # trailing\nm=1\nj_max = 7/2\nk_max=1\n\ntau_min=-1\n"
                       "tau_max=1\ntau_step=0.5\nout=x.csv\n");
  CHECK(c.mode == Mode::curves);
  REQUIRE(c.ball);
  CHECK(c.ball->R == 3.0);
  CHECK(c.ball->m == 1.0);
  CHECK(c.j_max2 == 7);
  CHECK(c.k_max == 1);
  CHECK(c.out == "x.csv");
  CHECK(c.taus() == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
  CHECK(parse("mode=curves\nj_max=3.5\n").j_max2 == 7);
  CHECK(parse("mode=first\n").ball->R == 1.0);

  const auto s = parse("mode=bie\nsurface=ellipsoid\na=2\nb=1\nc=1\nequal_volume=true\nn_theta=16\nn_phi=32\n"
                       "ladder=8, 12,16\nthreads=3\n");
  REQUIRE(s.surface);
  CHECK(s.surface->kind == "ellipsoid");
  CHECK(std::abs(s.surface->a * s.surface->b * s.surface->c - 1.0) < 1e-14);
  CHECK(s.surface->n_theta == 16);
  CHECK(s.ladder == std::vector<int>{8, 12, 16});
  CHECK(s.threads == 3);
  CHECK_FALSE(s.ball);
  const auto eq = parse("equal_volume = false\nsurface=ellipsoid\na=2\nmode=rayleigh\n");
  CHECK(eq.surface->a == 2.0);
  const auto sp = parse("mode=verify\nsurface=sphere\nR=2\n");
  CHECK(sp.surface->R == 2.0);
}

TEST_CASE("config errors carry line numbers") {
  CHECK(error_line("mode=curves\nR=1\ncolour=blue\n") == 3);
  CHECK(error_line("mode=curves\n\n# x\nR=1\nR=2\n") == 5);
  CHECK(error_line("mode=curves\nR=abc\n") == 2);
  CHECK(error_line("mode=sideways\n") == 1);
  CHECK(error_line("mode=curves\nj_max=2\n") == 2);
  CHECK(error_line("mode=curves\nj_max=4/2\n") == 2);
  CHECK(error_line("mode=curves\njust a line\n") == 2);
  CHECK(error_line("mode=curves\ntau_step=0\n") == 2);
  CHECK(error_line("mode=curves\nk_max=-1\n") == 2);
  CHECK(error_line("mode=curves\nn_theta=12\n") == 2);
  CHECK(error_line("mode=bie\nsurface=torus\n") == 2);
  CHECK(error_line("mode=bie\nsurface=sphere\nequal_volume=maybe\n") == 3);
  // whole-file problems have no line
  CHECK(error_line("R=1\n") == 0);
  CHECK(error_line("mode=bie\n") == 0);
  CHECK(error_line("mode=curves\nsurface=sphere\n") == 0);
  CHECK_THROWS_AS(parse("mode=curves\nR=-1\n"), DomainError);
  try {
    parse("mode=curves\nR=1\ncolour=blue\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).starts_with("line 3: "));
  }
  CHECK_THROWS_AS(load_config("/nonexistent/diracbag.cfg"), ConfigError);
}

TEST_CASE("curves output") {
  auto cfg = parse("mode=curves\nR=3\nm=1\nj_max=3/2\nk_max=1\ntau_min=-2\ntau_max=2\ntau_step=1\n");
  std::ostringstream a, b;
  REQUIRE(run(cfg, {a, std::cerr}) == exit_ok);
  REQUIRE(run(cfg, {b, std::cerr}) == exit_ok);
  CHECK(a.str() == b.str());
  std::istringstream in(a.str());
  const auto rows = read_csv(in);
  REQUIRE_FALSE(rows.empty());
  CHECK(rows[0] == curve_header());
  const auto chans = channel_list(3, 1);
  CHECK(rows.size() == 1 + chans.size() * 5 * 2);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    REQUIRE(r.size() == curve_header().size());
    CHECK((r[3] == "+" || r[3] == "-"));
    const ChannelIndex c{HalfInt(std::stoi(r[2])), r[3] == "-" ? -1 : 1, std::stoi(r[4])};
    CHECK(interval(c, {3.0, 1.0}).contains(std::stod(r[1])));
    // doubles round-trip
    const double lam = std::stod(r[1]);
    std::ostringstream back;
    back << std::setprecision(17) << lam;
    CHECK(back.str() == r[1]);
  }
}

TEST_CASE("empty tau range gives a header only") {
  for (const char* mode : {"curves", "first"}) {
    auto cfg = parse(std::string("mode=") + mode + "\ntau_min=1\ntau_max=0\n");
    std::ostringstream o;
    CHECK(run(cfg, {o, std::cerr}) == exit_ok);
    std::istringstream in(o.str());
    CHECK(read_csv(in).size() == 1);
  }
  auto cfg = parse("mode=bie\nsurface=sphere\nn_theta=8\nn_phi=16\ntau_min=1\ntau_max=0\n");
  std::ostringstream o;
  CHECK(run(cfg, {o, std::cerr}) == exit_ok);
  std::istringstream in(o.str());
  const auto rows = read_csv(in);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].back() == "cross_residual");
}

TEST_CASE("first-eigenvalue table") {
  auto cfg = parse("mode=first\nR=1\nm=1\ntau_min=-30\ntau_max=-10\ntau_step=10\n");
  std::ostringstream o;
  REQUIRE(run(cfg, {o, std::cerr}) == exit_ok);
  std::istringstream in(o.str());
  const auto rows = read_csv(in);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"tau", "lambda", "offset", "L", "residual"});
  CHECK(std::abs(std::stod(rows[1][3]) - 3.0) < 1e-6);
  CHECK(std::stod(rows[1][2]) > 0.0);
}

TEST_CASE("cache directory resolution") {
  ::unsetenv("DIRACBAG_CACHE");
  CHECK(resolve_cache_dir("", "cfgdir") == "cfgdir");
  CHECK(resolve_cache_dir("flagdir", "cfgdir") == "flagdir");
  ::setenv("DIRACBAG_CACHE", "envdir", 1);
  CHECK(resolve_cache_dir("", "cfgdir") == "envdir");
  CHECK(resolve_cache_dir("flagdir", "cfgdir") == "flagdir");
  ::unsetenv("DIRACBAG_CACHE");
  CHECK(sibling_path("out/a.csv", ".scan.csv") == "out/a.scan.csv");
}

TEST_CASE("binary: exit codes, cache hit and miss, determinism") {
  const auto dir = scratch_dir();
  CHECK(run_cli("") == exit_usage);
  CHECK(run_cli("--config /nonexistent.cfg") == exit_usage);
  CHECK(run_cli("--config " + write_file("bad.cfg", "mode=curves\ncolour=blue\n").string()) == exit_usage);
  CHECK(slurp(dir / "stderr.txt").find("line 2") != std::string::npos);
  CHECK(run_cli("--config x --threads 0") == exit_usage);

  const auto cfg = write_file("curves.cfg", "mode=curves\nR=3\nm=1\nj_max=7/2\nk_max=2\ntau_min=-6\ntau_max=6\n"
                                            "tau_step=0.5\n");
  const auto cache = dir / "cache";
  fs::remove_all(cache);
  REQUIRE(run_cli("--config " + cfg.string() + " --cache-dir " + cache.string() + " --out " +
                  (dir / "miss.csv").string()) == exit_ok);
  CHECK(fs::exists(cache / "bessel_zeros.txt"));
  REQUIRE(run_cli("--config " + cfg.string() + " --cache-dir " + cache.string() + " --out " +
                  (dir / "hit.csv").string()) == exit_ok);
  REQUIRE(run_cli("--config " + cfg.string() + " --out -") == exit_ok);
  const std::string miss = slurp(dir / "miss.csv"), hit = slurp(dir / "hit.csv");
  CHECK_FALSE(miss.empty());
  CHECK(miss == hit);
  CHECK(slurp(dir / "stdout.txt") == miss);

  // no eigenvalue below lambda_max: solver failure
  const auto bie = write_file("bie.cfg", "mode=bie\nsurface=sphere\nn_theta=8\nn_phi=16\nlambda_max=1.05\n"
                                         "tau_min=0\ntau_max=0\n");
  CHECK(run_cli("--config " + bie.string() + " --out " + (dir / "bie.csv").string()) == exit_solver);
  CHECK(slurp(dir / "stderr.txt").find("bie_spectrum") != std::string::npos);

  // repeated ladder level cannot show improvement: verification failure
  const auto ver = write_file("verify.cfg", "mode=verify\nsurface=sphere\nn_theta=12\nn_phi=24\nladder=8,8\n");
  CHECK(run_cli("--config " + ver.string()) == exit_verify);
  CHECK(slurp(dir / "stdout.txt").find("FAIL") != std::string::npos);
  fs::remove_all(dir);
}
