#include "sparsegp/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <Eigen/Core>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "sparsegp/assembly.hpp"
#include "sparsegp/io.hpp"
#include "sparsegp/parallel.hpp"
#include "sparsegp/predict.hpp"
#include "sparsegp/random.hpp"
#include "sparsegp/sparse_matrix.hpp"
#include "sparsegp/synthetic.hpp"

namespace sparsegp::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  int verbose = 0;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

io::RunConfig load(const Globals& g) {
  if (g.config.empty()) return io::parse_config(json::object());
  return io::load_config(g.config);
}

std::size_t resolve_workers(const Globals& g, const io::RunConfig& cfg) {
  if (g.workers) {
    if (*g.workers == 0) throw ConfigError("--workers must be positive");
    return *g.workers;
  }
  if (std::getenv("SPARSEGP_WORKERS") == nullptr && cfg.workers > 0) return cfg.workers;
  return default_worker_count();
}

std::string pick_path(const std::string& flag, const std::optional<std::string>& fallback, const char* what) {
  if (!flag.empty()) return flag;
  if (fallback && !fallback->empty()) return *fallback;
  throw ConfigError(std::string("no ") + what + " path given (flag or io section)");
}

std::string read_file(const fs::path& path, bool data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (data) throw DataError("cannot open " + path.string());
    throw IoError("cannot open " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

/// Coordinate bounds default to the data range.
void fill_bounds(bayes::PriorSpec& priors, const InputMatrix& inputs) {
  if (!priors.coordinate_bounds.empty()) return;
  if (inputs.rows() == 0) throw DataError("data file has no usable rows");
  for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
    double lo = inputs.col(k).minCoeff(), hi = inputs.col(k).maxCoeff();
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
    priors.coordinate_bounds.emplace_back(lo, hi);
  }
}

void check_theta(const kernels::KernelHyperparameters& theta, std::size_t dim, const char* where) {
  try {
    if (theta.sparse) theta.sparse->validate(dim);
    if (const auto* ns = std::get_if<kernels::ParametricNonstationary>(&theta.core))
      for (const auto& b : ns->basis) {
        if (const auto* s = std::get_if<kernels::NaturalSplineBasis>(&b); s && s->coordinate >= dim)
          throw ConfigError("basis coordinate out of range");
        if (const auto* r = std::get_if<kernels::RadialBasis>(&b); r && r->center.size() != dim)
          throw ConfigError("radial basis center has the wrong dimension");
      }
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

std::string csv_header(std::size_t dim, const std::vector<std::string>& extra) {
  std::string out;
  for (std::size_t k = 0; k < dim; ++k) out += (k ? ",x" : "x") + std::to_string(k + 1);
  for (const auto& e : extra) out += (out.empty() ? "" : ",") + e;
  return out + "\n";
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, output;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  auto cfg = load(g);
  const auto data_path = pick_path(a.data, cfg.data_path, "data");
  const fs::path out_dir = pick_path(a.output, cfg.output_path, "output");
  const auto workers = resolve_workers(g, cfg);

  const auto raw = read_file(data_path, true);
  std::istringstream in(raw);
  const auto table = io::read_table(in, true);
  const auto data = io::make_dataset(table, cfg.model.mean);

  auto priors = cfg.model.priors;
  fill_bounds(priors, data.inputs);
  priors.validate(static_cast<std::size_t>(data.dim()));

  auto mcmc = cfg.mcmc;
  if (g.seed) mcmc.seed = *g.seed;
  mcmc.likelihood.plan.worker_count = workers;

  bayes::ChainStart start;
  if (cfg.model.initial_from_config) {
    check_theta(cfg.model.theta, static_cast<std::size_t>(data.dim()), "model");
    start.theta = cfg.model.theta;
    if (cfg.model.beta.empty()) {
      start.beta = bayes::default_initial_state(data, priors, cfg.model.theta, derive_seed(mcmc.seed, 1)).beta;
    } else {
      start.beta = Eigen::Map<const Vector>(cfg.model.beta.data(), static_cast<Eigen::Index>(cfg.model.beta.size()));
    }
  } else {
    start = bayes::default_initial_state(data, priors, cfg.model.theta, derive_seed(mcmc.seed, 1));
  }

  const auto samples = bayes::mcmc_run(data, priors, start, mcmc);

  std::ostringstream jsonl, trace;
  io::write_samples_jsonl(jsonl, samples.retained());
  io::write_trace_csv(trace, samples);
  const json manifest = {
      {"command", "train"},
      {"config_hash", io::fnv1a_hex(cfg.canonical)},
      {"data_hash", io::fnv1a_hex(raw)},
      {"seed", mcmc.seed},
      {"iterations", mcmc.iterations},
      {"stored_draws", samples.draws.size()},
      {"burn_in", samples.burn_in},
      {"retained", samples.draws.size() - samples.burn_in},
      {"data_rows", data.size()},
      {"dropped_rows", table.dropped_rows},
      {"acceptance",
       {{"beta", samples.acceptance[0]},
        {"kernel", samples.acceptance[1]},
        {"bumps", samples.acceptance[2]},
        {"amplitudes", samples.acceptance[3]}}},
      {"versions",
       {{"sparsegp", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                       std::to_string(SPDLOG_VER_PATCH)}}}};

  ensure_directory(out_dir);
  io::write_file_atomic(out_dir / "samples.jsonl", jsonl.str());
  io::write_file_atomic(out_dir / "trace.csv", trace.str());
  io::write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  spdlog::info("train: wrote {} retained draws to {}", samples.draws.size() - samples.burn_in, out_dir.string());
  return kOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string samples, data, query, output;
  bool unconditional = false;
  int draws = 0;
  std::optional<std::size_t> max_draws;
};

int cmd_predict(const Globals& g, const PredictArgs& a) {
  auto cfg = load(g);
  const auto query_path = pick_path(a.query, cfg.query_path, "query");
  const auto out_path = pick_path(a.output, cfg.output_path, "output");
  if (a.draws < 0) throw ConfigError("--draws must be non-negative");
  const auto workers = resolve_workers(g, cfg);
  const std::uint64_t seed = g.seed.value_or(0);

  std::istringstream sin(read_file(a.samples, true));
  const auto samples = io::read_samples_jsonl(sin);
  if (samples.empty()) throw DataError("samples file " + a.samples + " has no draws");

  std::optional<bayes::Dataset> data;
  if (!a.unconditional) data = io::make_dataset(io::read_table_file(pick_path(a.data, cfg.data_path, "data"), true), cfg.model.mean);

  auto query = io::read_table_file(query_path, false);
  std::size_t dim = static_cast<std::size_t>(query.inputs.cols());
  if (query.inputs.rows() == 0 && dim == 0) dim = data ? static_cast<std::size_t>(data->dim()) : 0;
  if (data && query.inputs.rows() > 0 && static_cast<Eigen::Index>(dim) != data->dim())
    throw DataError("query has " + std::to_string(dim) + " input columns, data has " + std::to_string(data->dim()));

  std::vector<std::string> extra{"post_mean", "post_sd"};
  for (int k = 0; k < a.draws; ++k) extra.push_back("draw_" + std::to_string(k + 1));
  std::string out = csv_header(dim, extra);

  const Eigen::Index m = query.inputs.rows();
  if (m == 0) {
    io::write_file_atomic(out_path, out);
    return kOk;
  }
  for (const auto& s : samples) check_theta(s.theta, dim, "samples");
  const Matrix design = io::make_design(query, cfg.model.mean);
  const std::size_t max_draws = a.max_draws.value_or(cfg.predict.max_posterior_draws);

  Vector mean, sd;
  Matrix draws(m, a.draws);
  if (a.unconditional) {
    const std::size_t total = samples.size();
    const std::size_t used = max_draws > 0 ? std::min(max_draws, total) : total;
    Vector sum = Vector::Zero(m), sum_sq = Vector::Zero(m), var = Vector::Zero(m);
    for (std::size_t k = 0; k < used; ++k) {
      const auto& s = samples[k * total / used];
      if (s.beta.size() != design.cols()) throw DataError("posterior draw has the wrong number of mean coefficients");
      const Vector mu = design.cols() == 0 ? Vector(Vector::Zero(m)) : Vector(design * s.beta);
      const kernels::KernelFeatures qf(s.theta, query.inputs);
      for (Eigen::Index i = 0; i < m; ++i) var(i) += qf.pair(i, i);
      sum += mu;
      sum_sq += mu.cwiseAbs2();
    }
    const double n = static_cast<double>(used);
    mean = sum / n;
    sd = (var / n + sum_sq / n - mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
    for (int k = 0; k < a.draws; ++k) {
      const auto& s = samples[static_cast<std::size_t>(k) * total / static_cast<std::size_t>(a.draws)];
      draws.col(k) = bayes::predict_unconditional(s.beta, s.theta, query.inputs, design,
                                                  derive_seed(seed, static_cast<std::uint64_t>(k)), 1)
                         .col(0);
    }
  } else {
    bayes::PredictionOptions opts;
    opts.seed = seed;
    opts.max_posterior_draws = max_draws;
    opts.likelihood = cfg.mcmc.likelihood;
    opts.likelihood.plan.worker_count = workers;
    const std::size_t used = max_draws > 0 ? std::min(max_draws, samples.size()) : samples.size();
    opts.draws_per_sample = a.draws > 0 ? static_cast<int>((static_cast<std::size_t>(a.draws) + used - 1) / used) : 0;
    for (const auto& s : samples)
      if (s.beta.size() != data->mean_terms()) throw DataError("posterior draw has the wrong number of mean coefficients");
    const auto result = bayes::predict_conditional(samples, *data, query.inputs, design, opts);
    mean = result.mean;
    sd = result.sd;
    const auto cols = static_cast<std::size_t>(result.draws.cols());
    for (int k = 0; k < a.draws; ++k)
      draws.col(k) = result.draws.col(static_cast<Eigen::Index>(static_cast<std::size_t>(k) * cols / static_cast<std::size_t>(a.draws)));
  }

  for (Eigen::Index i = 0; i < m; ++i) {
    std::string line;
    for (Eigen::Index k = 0; k < query.inputs.cols(); ++k) line += io::format_double(query.inputs(i, k)) + ",";
    line += io::format_double(mean(i)) + "," + io::format_double(sd(i));
    for (int k = 0; k < a.draws; ++k) line += "," + io::format_double(draws(i, k));
    out += line + "\n";
  }
  io::write_file_atomic(out_path, out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string tag, output;
  int replicates = 1;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a) {
  const auto tag = synth::parse_scenario(a.tag);
  if (a.replicates < 0) throw ConfigError("--replicates must be non-negative");
  const auto scenario = synth::make_scenario(tag);
  const std::uint64_t seed = g.seed.value_or(0);
  if (a.replicates == 0) return kOk;
  const fs::path dir = a.output;
  ensure_directory(dir);

  auto write_xy = [](const InputMatrix& x, const Vector& z) {
    std::string out = "x1,z\n";
    for (Eigen::Index i = 0; i < x.rows(); ++i) out += io::format_double(x(i, 0)) + "," + io::format_double(z(i)) + "\n";
    return out;
  };
  for (int r = 0; r < a.replicates; ++r) {
    const auto draw = synth::generate_scenario_draw(
        scenario, derive_seed(seed, static_cast<std::uint64_t>(tag), static_cast<std::uint64_t>(r)));
    const std::string stem = synth::to_string(tag) + "_rep" + std::to_string(r);
    io::write_file_atomic(dir / (stem + "_train.csv"), write_xy(draw.train_x, draw.train_z));
    io::write_file_atomic(dir / (stem + "_test.csv"), write_xy(draw.test_x, draw.test_truth));
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchmarkArgs {
  std::string output;
  std::optional<int> replicates;
  std::optional<std::size_t> iterations;
};

int cmd_benchmark(const Globals& g, const BenchmarkArgs& a) {
  auto cfg = load(g);
  const fs::path dir = pick_path(a.output, cfg.output_path, "output");
  auto bench = cfg.benchmark;
  if (a.replicates) {
    if (*a.replicates < 0) throw ConfigError("--replicates must be non-negative");
    bench.replicates = *a.replicates;
  }
  if (a.iterations) bench.mcmc_iterations = *a.iterations;
  bench.seed = g.seed.value_or(cfg.mcmc.seed);
  bench.workers = resolve_workers(g, cfg);
  bench.mcmc = cfg.mcmc;

  const auto table = synth::run_benchmark(bench);
  std::ostringstream raw, summary;
  table.write_raw_csv(raw);
  table.write_summary_csv(summary);
  ensure_directory(dir);
  io::write_file_atomic(dir / "scores_raw.csv", raw.str());
  io::write_file_atomic(dir / "scores_summary.csv", summary.str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct ExportArgs {
  std::string inputs, output;
  bool normalized = false;
};

int cmd_kernel_export(const Globals& g, const ExportArgs& a) {
  auto cfg = load(g);
  const auto inputs_path = pick_path(a.inputs, cfg.inputs_path, "inputs");
  const auto out_path = pick_path(a.output, cfg.output_path, "output");
  const auto table = io::read_table_file(inputs_path, false);
  const auto& theta = cfg.model.theta;
  check_theta(theta, static_cast<std::size_t>(table.inputs.cols()), "model");
  if (a.normalized && !theta.sparse) throw ConfigError("--normalized needs a sparse section in the model");

  linalg::AssemblyPlan plan = cfg.mcmc.likelihood.plan;
  plan.worker_count = resolve_workers(g, cfg);
  const auto matrix = a.normalized ? linalg::assemble_sparse_factor(table.inputs, theta, plan, true)
                                   : linalg::assemble_covariance(table.inputs, theta, plan, false);
  std::ostringstream out;
  linalg::write_matrix_market(out, matrix,
                              {std::string("matrix ") + (a.normalized ? "normalized_sparse_factor" : "C_y"),
                               "sparsity_fraction " + io::format_double(linalg::sparsity_fraction(matrix))});
  io::write_file_atomic(out_path, out.str());
  return kOk;
}

// ---------------------------------------------------------------------------

void setup_logging(int verbose) {
  auto logger = std::make_shared<spdlog::logger>("sparsegp", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  logger->set_pattern("[%l] %v");
  logger->set_level(verbose >= 2 ? spdlog::level::debug : verbose == 1 ? spdlog::level::info : spdlog::level::warn);
  spdlog::set_default_logger(logger);
}

int fail(const char* kind, int code, const std::string& message) {
  std::string flat = message;
  for (char& c : flat)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "sparsegp: error kind=" << kind << " exit=" << code << " message=" << flat << std::endl;
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Sparse-kernel Gaussian process regression", "sparsegp"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Globals g;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed overriding the config");
  app.add_option("--workers", g.workers, "Worker threads (overrides SPARSEGP_WORKERS and the config)");
  app.add_flag("-v,--verbose", g.verbose, "Log progress (repeat for debug output)");

  TrainArgs train;
  auto* sub_train = app.add_subcommand("train", "Run the MCMC sampler and write posterior samples");
  sub_train->add_option("--data", train.data, "Training CSV (x1..xd, z, optional w1..wp, tau2)");
  sub_train->add_option("--output,-o", train.output, "Output directory");

  PredictArgs pred;
  auto* sub_pred = app.add_subcommand("predict", "Posterior prediction at query points");
  sub_pred->add_option("--samples", pred.samples, "samples.jsonl written by train")->required();
  sub_pred->add_option("--data", pred.data, "Training CSV used for conditioning");
  sub_pred->add_option("--query", pred.query, "Query CSV (x1..xd, optional w1..wp)");
  sub_pred->add_option("--output,-o", pred.output, "Output CSV");
  sub_pred->add_flag("--unconditional", pred.unconditional, "Draw from the prior given each posterior draw");
  sub_pred->add_option("--draws", pred.draws, "Number of simulated draw columns");
  sub_pred->add_option("--max-posterior-draws", pred.max_draws, "Evenly subsample at most this many posterior draws");

  SimulateArgs sim;
  auto* sub_sim = app.add_subcommand("simulate", "Write synthetic train/test files for a scenario");
  sub_sim->add_option("scenario", sim.tag, "S1, S2, S3, S4 or D1")->required();
  sub_sim->add_option("--replicates", sim.replicates, "Number of replicates");
  sub_sim->add_option("--output,-o", sim.output, "Output directory")->required();

  BenchmarkArgs bench;
  auto* sub_bench = app.add_subcommand("benchmark", "Score models across synthetic scenarios");
  sub_bench->add_option("--output,-o", bench.output, "Output directory");
  sub_bench->add_option("--replicates", bench.replicates, "Replicates per scenario");
  sub_bench->add_option("--iterations", bench.iterations, "MCMC iterations per fit");

  ExportArgs exp;
  auto* sub_exp = app.add_subcommand("kernel-export", "Assemble C_y at given inputs and write Matrix Market");
  sub_exp->add_option("--inputs", exp.inputs, "CSV with x1..xd");
  sub_exp->add_option("--output,-o", exp.output, "Output .mtx file");
  sub_exp->add_flag("--normalized", exp.normalized, "Write the unit-diagonal sparse factor instead");

  for (auto* sub : {sub_train, sub_pred, sub_sim, sub_bench, sub_exp}) sub->fallthrough();

  std::vector<std::string> rev;
  if (args.size() > 1) rev.assign(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    return fail("config", kConfigError, e.what());
  }

  setup_logging(g.verbose);
  try {
    if (*sub_train) return cmd_train(g, train);
    if (*sub_pred) return cmd_predict(g, pred);
    if (*sub_sim) return cmd_simulate(g, sim);
    if (*sub_bench) return cmd_benchmark(g, bench);
    if (*sub_exp) return cmd_kernel_export(g, exp);
  } catch (const ConfigError& e) {
    return fail("config", kConfigError, e.what());
  } catch (const DataError& e) {
    return fail("data", kDataError, e.what());
  } catch (const NumericalError& e) {
    return fail("numerical", kNumericalError, e.what());
  } catch (const std::exception& e) {
    return fail("io", kFailure, e.what());
  }
  return kFailure;
}

}  // namespace sparsegp::cli
