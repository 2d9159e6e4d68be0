#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const char* kCli = NTFD_CLI_PATH;

struct CliResult {
  int exit_code;
  std::string out_dir;
};

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ntfd_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(kCli) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// data rows of a CSV (comments and header skipped), split into cells
std::vector<std::vector<std::string>> data_rows(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

TEST_CASE("cli: simulate writes paths and moments; determinism across reruns and threads") {
  const fs::path dir_a = fresh_dir("sim_a");
  const fs::path dir_b = fresh_dir("sim_b");
  const fs::path dir_c = fresh_dir("sim_c");
  const std::string common =
      "simulate --beta-bar 1 --paths 500 --horizon 0.5 --seed 11 --dump-paths 2 ";
  CHECK(run_cli(common + "--threads 1 --out " + dir_a.string(), dir_a / "log") == 0);
  CHECK(run_cli(common + "--threads 1 --out " + dir_b.string(), dir_b / "log") == 0);
  CHECK(run_cli(common + "--threads 2 --out " + dir_c.string(), dir_c / "log") == 0);

  for (const char* name : {"paths.csv", "moments.csv"}) {
    const std::string a = slurp(dir_a / name);
    CHECK(a == slurp(dir_b / name));  // byte-identical rerun
    CHECK(a == slurp(dir_c / name));  // thread count does not leak into output
    CHECK(a.find("\r") == std::string::npos);  // LF endings
  }

  const auto rows = data_rows(dir_a / "paths.csv");
  CHECK(rows.size() == 2 * 501);  // two dumped paths, 501 samples each
  CHECK(rows[0].size() == 6);     // path, t, x, x_tilde, X, X_tilde
}

TEST_CASE("cli: single path with zero horizon dumps exactly the initial point") {
  const fs::path dir = fresh_dir("sim_tiny");
  CHECK(run_cli("simulate --beta-bar 1 --paths 1 --horizon 0 --init point --x0 0.25 --xt0 -0.5 "
                "--out " + dir.string(), dir / "log") == 0);
  const auto rows = data_rows(dir / "paths.csv");
  REQUIRE(rows.size() == 1);
  CHECK(std::stod(rows[0][1]) == 0.0);
  CHECK(std::stod(rows[0][2]) == 0.25);
  CHECK(std::stod(rows[0][3]) == -0.5);
}

TEST_CASE("cli: sample-path correlation grows with temperature") {
  // single long paths at three temperatures; stationary correlation of
  // (x, x~) is 1/cosh(bb/2): 0.970, 0.887, 0.425
  double corr[3];
  int idx = 0;
  for (const char* bb : {"0.5", "1", "3"}) {
    const fs::path dir = fresh_dir(std::string("sim_corr_") + bb);
    CHECK(run_cli(std::string("simulate --beta-bar ") + bb +
                      " --paths 1 --horizon 200 --dt 0.01 --seed 4 --dump-paths 1 --out " +
                      dir.string(),
                  dir / "log") == 0);
    const auto rows = data_rows(dir / "paths.csv");
    REQUIRE(rows.size() > 1000);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (const auto& row : rows) {
      const double x = std::stod(row[2]), y = std::stod(row[3]);
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
    }
    const double n = static_cast<double>(rows.size());
    corr[idx++] = (sxy - sx * sy / n) /
                  std::sqrt((sxx - sx * sx / n) * (syy - sy * sy / n));
  }
  CHECK(corr[0] > corr[1]);  // beta_bar 0.5 hotter than 1
  CHECK(corr[1] > corr[2]);  // beta_bar 1 hotter than 3
}

TEST_CASE("cli: histogram overlay and chi-square footer") {
  const fs::path cold = fresh_dir("hist_cold");
  CHECK(run_cli("histogram --beta-bar 3 --paths 20000 --horizon 0.2 --seed 5 --out " +
                    cold.string(), cold / "log") == 0);
  const fs::path hot = fresh_dir("hist_hot");
  CHECK(run_cli("histogram --beta-bar 0.5 --paths 20000 --horizon 0.2 --seed 5 --out " +
                    hot.string(), hot / "log") == 0);

  const std::string cold_text = slurp(cold / "histogram.csv");
  CHECK(cold_text.find("p_value=") != std::string::npos);

  auto peak_analytic = [](const fs::path& file) {
    double peak = 0;
    for (const auto& row : data_rows(file)) peak = std::max(peak, std::stod(row[3]));
    return peak;
  };
  // colder marginal is narrower, so its analytic peak density is higher
  CHECK(peak_analytic(cold / "histogram.csv") > peak_analytic(hot / "histogram.csv"));

  // p-value parses and the fit is accepted at alpha = 0.01
  const auto pos = cold_text.find("p_value=");
  const double p = std::stod(cold_text.substr(pos + 8));
  CHECK(p > 0.01);

  SUBCASE("pooled slice is flagged in the output") {
    const fs::path pooled = fresh_dir("hist_pooled");
    CHECK(run_cli("histogram --beta-bar 1 --paths 2000 --horizon 1 --slice pooled --seed 5 "
                  "--out " + pooled.string(), pooled / "log") == 0);
    CHECK(slurp(pooled / "histogram.csv").find("slice=pooled") != std::string::npos);
  }
}

TEST_CASE("cli: uncertainty sweep table") {
  const fs::path dir = fresh_dir("unc");
  CHECK(run_cli("uncertainty --beta-bar 1 --sweep 1,inf --paths 20000 --horizon 0.5 --seed 6 "
                "--out " + dir.string(), dir / "log") == 0);
  const auto rows = data_rows(dir / "uncertainty.csv");
  REQUIRE(rows.size() == 2);
  // analytic column for beta_bar = 1 prints the closed form
  CHECK(std::stod(rows[0][8]) == doctest::Approx(1.08197670686933).epsilon(1e-10));
  // zero-temperature row: product -> 0.5 within 3 SE
  CHECK(rows[1][0] == "inf");
  const double product = std::stod(rows[1][6]);
  const double se = std::stod(rows[1][7]);
  CHECK(std::abs(product - 0.5) < 3 * se);
}

TEST_CASE("cli: residual report") {
  const fs::path dir = fresh_dir("resid");
  CHECK(run_cli("residuals --beta-bar 1 --grid-extent 4 --grid-spacing 0.04 --out " + dir.string(),
                dir / "log") == 0);
  const auto rows = data_rows(dir / "residuals.csv");
  REQUIRE(rows.size() == 6);
  for (const auto& row : rows) {
    CHECK(std::stod(row[1]) < 1e-10);  // closed-form norms
    CHECK(row[5] == "1");              // converged
  }

  SUBCASE("zero temperature reports exactly zero cross coupling") {
    const fs::path cold = fresh_dir("resid_cold");
    CHECK(run_cli("residuals --beta inf --grid-extent 3 --grid-spacing 0.05 --out " + cold.string(),
                  cold / "log") == 0);
    CHECK(slurp(cold / "residuals.csv").find("drift_cross_coupling=0\n") != std::string::npos);
  }
}

TEST_CASE("cli: exit codes") {
  const fs::path dir = fresh_dir("exit_codes");

  SUBCASE("0: success") {
    CHECK(run_cli("simulate --beta-bar 1 --paths 10 --horizon 0.01 --out " + dir.string(),
                  dir / "log") == 0);
  }

  SUBCASE("2: config errors") {
    CHECK(run_cli("simulate --paths 10 --out " + dir.string(), dir / "log") == 2);  // no temperature
    CHECK(run_cli("histogram --beta-bar 1 --bins 1 --paths 10 --out " + dir.string(),
                  dir / "log") == 2);
    CHECK(run_cli("uncertainty --beta-bar 1 --sweep , --paths 10 --out " + dir.string(),
                  dir / "log") == 2);
    CHECK(run_cli("simulate --beta-bar -1 --out " + dir.string(), dir / "log") == 2);
    CHECK(run_cli("simulate --beta-bar 1 --dt 0 --out " + dir.string(), dir / "log") == 2);
    CHECK(run_cli("bogus-subcommand", dir / "log") == 2);
  }

  SUBCASE("2: unknown config-file key") {
    const fs::path cfg = dir / "bad.cfg";
    std::ofstream(cfg) << "beta_bar=1\nnot_a_key=3\n";
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " + dir.string(), dir / "log") == 2);
  }

  SUBCASE("3: numerical divergence") {
    CHECK(run_cli("simulate --beta-bar 0.5 --paths 4 --dt 10 --horizon 100 --out " + dir.string(),
                  dir / "log") == 3);
  }

  SUBCASE("4: grid-convergence failure on a pathologically coarse grid") {
    CHECK(run_cli("residuals --beta-bar 1 --grid-extent 6 --grid-spacing 1.5 --out " + dir.string(),
                  dir / "log") == 4);
  }

  SUBCASE("config file + override + both-temperatures warning") {
    const fs::path cfg = dir / "ok.cfg";
    std::ofstream(cfg) << "# comment line\nbeta=2\nbeta_bar=1\npaths=20\nhorizon=0.01\n";
    const fs::path log = dir / "warn_log";
    CHECK(run_cli("simulate --config " + cfg.string() + " --out " + dir.string(), log) == 0);
    CHECK(slurp(log).find("beta_bar wins") != std::string::npos);
  }
}

TEST_CASE("cli: NELSON_TFD_THREADS fallback keeps output identical") {
  const fs::path dir_env = fresh_dir("env_threads");
  const fs::path dir_flag = fresh_dir("flag_threads");
  const std::string common = "simulate --beta-bar 1 --paths 300 --horizon 0.2 --seed 9 --out ";
  {
    const std::string cmd = "NELSON_TFD_THREADS=2 " + std::string(kCli) + " " + common +
                            dir_env.string() + " >" + (dir_env / "log").string() + " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
  }
  CHECK(run_cli(common + dir_flag.string() + " --threads 1", dir_flag / "log") == 0);
  CHECK(slurp(dir_env / "moments.csv") == slurp(dir_flag / "moments.csv"));
}
