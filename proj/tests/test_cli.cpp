#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sparsegp/assembly.hpp"
#include "sparsegp/io.hpp"
#include "sparsegp/sparse_matrix.hpp"

using namespace sparsegp;
namespace fs = std::filesystem;
using io::json;

namespace {

struct Result {
  int code = -1;
  std::string err;
};

/// Scratch directory removed at scope exit.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("sparsegp_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path operator/(const std::string& f) const { return dir / f; }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

Result run(const std::string& args, const Scratch& s) {
  const fs::path err = s / "stderr.txt";
  const std::string cmd = std::string("\"") + SPARSEGP_CLI + "\" " + args + " 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t line_count(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

bool one_error_line(const Result& r, const std::string& kind, int code) {
  const std::string prefix = "sparsegp: error kind=" + kind + " exit=" + std::to_string(code) + " message=";
  return r.err.rfind(prefix, 0) == 0 && std::count(r.err.begin(), r.err.end(), '\n') == 1;
}

/// Matern core with no sparse factor and the given nugget; one posterior draw.
void write_single_draw(const fs::path& p, double tau2) {
  bayes::PosteriorDraw d;
  d.beta = Vector::Constant(1, 0.3);
  d.theta.core = kernels::StationaryMatern{1.2, 0.15, kernels::Smoothness::FiveHalves};
  d.theta.noise = kernels::Homoskedastic{tau2};
  std::ostringstream out;
  io::write_samples_jsonl(out, std::vector<bayes::PosteriorDraw>{d});
  put(p, out.str());
}

json illustration_model() {
  const auto p = oracle::illustration_params();
  json bumps = json::array();
  for (const auto& b : p.bumps)
    bumps.push_back({{"centroid", b.centroid}, {"amplitude", b.amplitude}, {"shape", b.shape}, {"radius", b.radius}});
  return {{"core", {{"type", "constant"}}},
          {"sparse",
           {{"n1", p.n1}, {"n2", p.n2}, {"scale", p.scale}, {"wendland_radius", p.wendland_radius}, {"bumps", bumps}}},
          {"noise", {{"tau2", 0.0}}}};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and version") {
  Scratch s("help");
  CHECK(run("--help > \"" + (s / "out.txt").string() + "\"", s).code == 0);
  CHECK(slurp(s / "out.txt").find("kernel-export") != std::string::npos);
  CHECK(run("--version > \"" + (s / "out.txt").string() + "\"", s).code == 0);
  const Result none = run("", s);
  CHECK(none.code == 2);
  CHECK(one_error_line(none, "config", 2));
}

TEST_CASE("simulate") {
  Scratch s("simulate");
  const auto a = s / "a", b = s / "b";
  REQUIRE(run("--seed 7 simulate S1 --replicates 2 -o \"" + a.string() + "\"", s).code == 0);
  REQUIRE(run("--seed 7 simulate S1 --replicates 2 -o \"" + b.string() + "\"", s).code == 0);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  CHECK(names == std::vector<std::string>{"S1_rep0_test.csv", "S1_rep0_train.csv", "S1_rep1_test.csv", "S1_rep1_train.csv"});
  for (const auto& n : names) CHECK(slurp(a / n) == slurp(b / n));
  CHECK(slurp(a / "S1_rep0_train.csv") != slurp(a / "S1_rep1_train.csv"));
  CHECK(line_count(a / "S1_rep0_train.csv") == 51);
  CHECK(line_count(a / "S1_rep0_test.csv") == 301);

  const auto d = s / "d";
  REQUIRE(run("--seed 3 simulate D1 -o \"" + d.string() + "\"", s).code == 0);
  const auto rows = read_csv(d / "D1_rep0_train.csv");
  REQUIRE(rows.size() == 51);
  CHECK(rows[0] == std::vector<std::string>{"x1", "z"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double x = std::stod(rows[i][0]), z = std::stod(rows[i][1]);
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    CHECK(std::abs(z) < 1.0 + 6.0 * std::sqrt(0.1));
  }

  const auto e = s / "empty";
  CHECK(run("simulate S2 --replicates 0 -o \"" + e.string() + "\"", s).code == 0);
  CHECK_FALSE(fs::exists(e));

  const Result bad = run("simulate S7 -o \"" + (s / "x").string() + "\"", s);
  CHECK(bad.code == 2);
  CHECK(one_error_line(bad, "config", 2));
  CHECK_FALSE(fs::exists(s / "x"));
}

TEST_CASE("train writes samples, trace and manifest") {
  Scratch s("train");
  REQUIRE(run("--seed 1 simulate D1 -o \"" + s.dir.string() + "\"", s).code == 0);
  put(s / "cfg.json", R"({"model": {"sparse": {"n1": 2, "n2": 2}},
                           "mcmc": {"iterations": 200, "burn_in_fraction": 0.5}})");
  const auto data = (s / "D1_rep0_train.csv").string();
  const auto cfg = (s / "cfg.json").string();
  REQUIRE(run("--config \"" + cfg + "\" train --data \"" + data + "\" -o \"" + (s / "out").string() + "\"", s).code == 0);
  CHECK(line_count(s / "out" / "samples.jsonl") == 100);
  CHECK(line_count(s / "out" / "trace.csv") == 202);
  const json manifest = json::parse(slurp(s / "out" / "manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["retained"] == 100);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);
  CHECK(manifest.contains("versions"));

  REQUIRE(run("--config \"" + cfg + "\" train --data \"" + data + "\" -o \"" + (s / "again").string() + "\"", s).code == 0);
  for (const char* f : {"samples.jsonl", "trace.csv", "manifest.json"}) CHECK(slurp(s / "out" / f) == slurp(s / "again" / f));

  SUBCASE("predict from the trained samples") {
    const auto samples = (s / "out" / "samples.jsonl").string();
    const auto query = (s / "D1_rep0_test.csv").string();
    REQUIRE(run("--config \"" + cfg + "\" predict --samples \"" + samples + "\" --data \"" + data + "\" --query \"" + query +
                    "\" --draws 3 -o \"" + (s / "pred.csv").string() + "\"",
                s)
                .code == 0);
    const auto rows = read_csv(s / "pred.csv");
    REQUIRE(rows.size() == 301);
    CHECK(rows[0] == std::vector<std::string>{"x1", "post_mean", "post_sd", "draw_1", "draw_2", "draw_3"});
    double se = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double x = std::stod(rows[i][0]);
      const double truth = x <= 0.25 || (x > 0.5 && x <= 0.75) ? -1.0 : 1.0;
      se += std::pow(std::stod(rows[i][1]) - truth, 2);
    }
    CHECK(std::sqrt(se / 300.0) < 0.6);
  }
}

TEST_CASE("train error taxonomy") {
  Scratch s("train_errors");
  put(s / "data.csv", "x1,z\n0.1,1\n0.2,oops\n");
  put(s / "good.csv", "x1,z\n0.1,1\n0.2,2\n0.3,1.5\n");
  put(s / "unknown.json", R"({"mcmc": {"iterations": 5, "sedd": 2}})");
  put(s / "ok.json", R"({"mcmc": {"iterations": 5}})");
  put(s / "broken.json", R"({"mcmc": )");

  const Result unknown =
      run("--config \"" + (s / "unknown.json").string() + "\" train --data \"" + (s / "good.csv").string() + "\" -o \"" +
              (s / "o1").string() + "\"",
          s);
  CHECK(unknown.code == 2);
  CHECK(one_error_line(unknown, "config", 2));
  CHECK(unknown.err.find("sedd") != std::string::npos);
  CHECK_FALSE(fs::exists(s / "o1"));

  const Result broken = run("--config \"" + (s / "broken.json").string() + "\" train --data \"" +
                                (s / "good.csv").string() + "\" -o \"" + (s / "o2").string() + "\"",
                            s);
  CHECK(broken.code == 2);

  const Result bad_data = run("--config \"" + (s / "ok.json").string() + "\" train --data \"" +
                                  (s / "data.csv").string() + "\" -o \"" + (s / "o3").string() + "\"",
                              s);
  CHECK(bad_data.code == 3);
  CHECK(one_error_line(bad_data, "data", 3));
  CHECK(bad_data.err.find("row 3") != std::string::npos);
  CHECK_FALSE(fs::exists(s / "o3" / "samples.jsonl"));

  const Result missing = run("train --data \"" + (s / "nope.csv").string() + "\" -o \"" + (s / "o4").string() + "\"", s);
  CHECK(missing.code == 3);

  const Result no_output = run("train --data \"" + (s / "good.csv").string() + "\"", s);
  CHECK(no_output.code == 2);
}

TEST_CASE("numerical failures exit with code 4") {
  Scratch s("numerical");
  put(s / "inputs.csv", "x1\n0.1\n0.2\n");
  put(s / "cfg.json", R"({"model": {"core": {"type": "matern", "variance": 1e308},
                                     "sparse": {"n1": 1, "n2": 1, "scale": 1e308, "wendland_radius": 1.0,
                                                "bumps": [{"centroid": [0.1], "radius": 0.5}]}}})");
  const Result r = run("--config \"" + (s / "cfg.json").string() + "\" kernel-export --inputs \"" +
                           (s / "inputs.csv").string() + "\" -o \"" + (s / "out.mtx").string() + "\"",
                       s);
  CHECK(r.code == 4);
  CHECK(one_error_line(r, "numerical", 4));
  CHECK_FALSE(fs::exists(s / "out.mtx"));
}

TEST_CASE("predict interpolates a noise-free model") {
  Scratch s("interp");
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::string data = "x1,z\n";
  std::vector<double> z;
  for (int i = 0; i < 25; ++i) {
    const double x = (i + u(gen)) / 25.0;
    z.push_back(std::sin(6.0 * x) + 0.3 * u(gen));
    data += io::format_double(x) + "," + io::format_double(z.back()) + "\n";
  }
  put(s / "data.csv", data);
  write_single_draw(s / "samples.jsonl", 0.0);
  REQUIRE(run("predict --samples \"" + (s / "samples.jsonl").string() + "\" --data \"" + (s / "data.csv").string() +
                  "\" --query \"" + (s / "data.csv").string() + "\" -o \"" + (s / "pred.csv").string() + "\"",
              s)
              .code == 0);
  const auto rows = read_csv(s / "pred.csv");
  REQUIRE(rows.size() == 26);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::abs(std::stod(rows[i][1]) - z[i - 1]) < 1e-6);
    CHECK(std::stod(rows[i][2]) < 1e-3);
  }

  put(s / "empty.csv", "x1\n");
  REQUIRE(run("predict --samples \"" + (s / "samples.jsonl").string() + "\" --data \"" + (s / "data.csv").string() +
                  "\" --query \"" + (s / "empty.csv").string() + "\" --draws 2 -o \"" + (s / "empty_pred.csv").string() + "\"",
              s)
              .code == 0);
  CHECK(slurp(s / "empty_pred.csv") == "x1,post_mean,post_sd,draw_1,draw_2\n");

  put(s / "nothing.csv", "");
  REQUIRE(run("predict --samples \"" + (s / "samples.jsonl").string() + "\" --data \"" + (s / "data.csv").string() +
                  "\" --query \"" + (s / "nothing.csv").string() + "\" -o \"" + (s / "nothing_pred.csv").string() + "\"",
              s)
              .code == 0);
  CHECK(slurp(s / "nothing_pred.csv") == "x1,post_mean,post_sd\n");

  put(s / "no_samples.jsonl", "");
  CHECK(run("predict --samples \"" + (s / "no_samples.jsonl").string() + "\" --data \"" + (s / "data.csv").string() +
                "\" --query \"" + (s / "data.csv").string() + "\" -o \"" + (s / "p.csv").string() + "\"",
            s)
            .code == 3);
}

TEST_CASE("unconditional predictions") {
  Scratch s("uncond");
  std::string query = "x1\n";
  for (int i = 0; i < 10; ++i) query += io::format_double(0.1 * i + 0.05) + "\n";
  put(s / "query.csv", query);
  write_single_draw(s / "samples.jsonl", 0.0);
  const std::string args = "--seed 4 predict --unconditional --samples \"" + (s / "samples.jsonl").string() +
                           "\" --query \"" + (s / "query.csv").string() + "\" --draws 100 -o ";
  REQUIRE(run(args + "\"" + (s / "u.csv").string() + "\"", s).code == 0);
  REQUIRE(run(args + "\"" + (s / "u2.csv").string() + "\"", s).code == 0);
  CHECK(slurp(s / "u.csv") == slurp(s / "u2.csv"));
  const auto rows = read_csv(s / "u.csv");
  REQUIRE(rows.size() == 11);
  REQUIRE(rows[0].size() == 103);
  CHECK(rows[0].back() == "draw_100");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double mean = std::stod(rows[i][1]), sd = std::stod(rows[i][2]);
    CHECK(mean == doctest::Approx(0.3));
    CHECK(sd == doctest::Approx(std::sqrt(1.2)).epsilon(1e-12));
    double sum = 0.0;
    for (std::size_t k = 3; k < rows[i].size(); ++k) sum += std::stod(rows[i][k]);
    CHECK(std::abs(sum / 100.0 - mean) < 3.0 * sd / 10.0);
  }
}

TEST_CASE("benchmark command") {
  Scratch s("bench");
  put(s / "cfg.json", R"({"benchmark": {"scenarios": ["S2"], "models": ["M1"], "replicates": 2, "iterations": 20}})");
  const std::string base = "--config \"" + (s / "cfg.json").string() + "\" benchmark -o ";
  REQUIRE(run(base + "\"" + (s / "a").string() + "\"", s).code == 0);
  REQUIRE(run(base + "\"" + (s / "b").string() + "\"", s).code == 0);
  CHECK(slurp(s / "a" / "scores_raw.csv") == slurp(s / "b" / "scores_raw.csv"));
  CHECK(slurp(s / "a" / "scores_summary.csv") == slurp(s / "b" / "scores_summary.csv"));
  const auto summary = read_csv(s / "a" / "scores_summary.csv");
  REQUIRE(summary.size() == 2);
  const auto& header = summary[0];
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c].find("rel_") != std::string::npos) CHECK(std::stod(summary[1][c]) == 1.0);
  CHECK(line_count(s / "a" / "scores_raw.csv") == 3);

  REQUIRE(run("benchmark --replicates 1 --iterations 0 -o \"" + (s / "full").string() + "\"", s).code == 0);
  CHECK(line_count(s / "full" / "scores_summary.csv") == 13);
}

TEST_CASE("kernel export") {
  Scratch s("export");
  const int n = 100;
  std::string inputs = "x1\n";
  for (int i = 0; i < n; ++i) inputs += io::format_double(static_cast<double>(i) / (n - 1)) + "\n";
  put(s / "inputs.csv", inputs);
  put(s / "cfg.json", json{{"model", illustration_model()}}.dump());
  const std::string base = "--config \"" + (s / "cfg.json").string() + "\" kernel-export --inputs \"" +
                           (s / "inputs.csv").string() + "\" -o ";
  REQUIRE(run(base + "\"" + (s / "c.mtx").string() + "\"", s).code == 0);

  std::istringstream in(slurp(s / "c.mtx"));
  const auto c = linalg::read_matrix_market(in);
  REQUIRE(c.dim() == n);
  const auto params = oracle::illustration_params();
  long nonzero = 0;
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double expect = oracle::sparse(params, {static_cast<double>(i) / (n - 1)}, {static_cast<double>(j) / (n - 1)});
      worst = std::max(worst, std::abs(c.coeff(i, j) - expect));
      if (expect != 0.0) ++nonzero;
    }
  CHECK(worst < 1e-12);
  CHECK(c.nnz() == nonzero);
  const std::string text = slurp(s / "c.mtx");
  CHECK(text.find("% sparsity_fraction " + io::format_double(static_cast<double>(nonzero) / (n * n))) !=
        std::string::npos);

  const auto cfg = io::load_config(s / "cfg.json");
  const auto table = io::read_table_file(s / "inputs.csv", false);
  CHECK(c == linalg::assemble_covariance(table.inputs, cfg.model.theta, {}, false));

  REQUIRE(run(base + "\"" + (s / "n.mtx").string() + "\" --normalized", s).code == 0);
  std::istringstream nin(slurp(s / "n.mtx"));
  const auto normalized = linalg::read_matrix_market(nin);
  for (int i = 0; i < n; ++i) CHECK(normalized.coeff(i, i) == 1.0);
  CHECK(normalized == linalg::assemble_sparse_factor(table.inputs, cfg.model.theta, {}, true));

  REQUIRE(run(base + "\"" + (s / "c2.mtx").string() + "\"", s).code == 0);
  CHECK(slurp(s / "c.mtx") == slurp(s / "c2.mtx"));

  put(s / "plain.json", R"({"model": {"core": {"type": "matern"}}})");
  CHECK(run("--config \"" + (s / "plain.json").string() + "\" kernel-export --normalized --inputs \"" +
                (s / "inputs.csv").string() + "\" -o \"" + (s / "p.mtx").string() + "\"",
            s)
            .code == 2);

  json zero = illustration_model();
  for (auto& b : zero["sparse"]["bumps"]) b["amplitude"] = 0.0;
  zero["sparse"]["wendland_radius"] = 1e-4;
  put(s / "zero.json", json{{"model", zero}}.dump());
  REQUIRE(run("--config \"" + (s / "zero.json").string() + "\" kernel-export --inputs \"" + (s / "inputs.csv").string() +
                  "\" -o \"" + (s / "z.mtx").string() + "\"",
              s)
              .code == 0);
  std::istringstream zin(slurp(s / "z.mtx"));
  CHECK(linalg::read_matrix_market(zin).nnz() == n);
}

}  // TEST_SUITE
