#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sparsegp/kernels.hpp"
#include "sparsegp/likelihood.hpp"
#include "sparsegp/mcmc.hpp"
#include "sparsegp/model.hpp"
#include "sparsegp/synthetic.hpp"

namespace sparsegp::io {

using nlohmann::json;

enum class MeanMode { Zero, Constant, Design };

struct ModelSection {
  MeanMode mean = MeanMode::Constant;
  /// Kernel structure and values. Values are used as given by kernel-export
  /// and, with `initial = "config"`, as the chain's starting point.
  kernels::KernelHyperparameters theta{};
  bayes::PriorSpec priors{};
  /// "default": data-driven start; "config": start from `theta` and `beta`.
  bool initial_from_config = false;
  std::vector<double> beta;
};

struct PredictSection {
  std::size_t max_posterior_draws = 0;
};

struct RunConfig {
  ModelSection model{};
  bayes::McmcConfig mcmc{};
  /// Worker count for assembly and benchmark replicates; 0 means automatic.
  std::size_t workers = 0;
  PredictSection predict{};
  synth::BenchmarkConfig benchmark{};
  /// Optional default paths from the io section.
  std::optional<std::string> data_path;
  std::optional<std::string> query_path;
  std::optional<std::string> inputs_path;
  std::optional<std::string> output_path;
  /// Canonical serialization, used for the manifest hash.
  std::string canonical;
};

/// Parses a config document. Unknown keys, wrong types and invalid values
/// throw ConfigError. An empty document yields every default.
RunConfig parse_config(const json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Hyperparameters <-> JSON. Parsing is strict and fills unspecified values
/// with defaults. A basis may be given as a list of descriptors or as the
/// shorthand {"type": "natural_spline", "knot_count": K, "coordinate": k,
/// "lower": l, "upper": u}, which expands to K - 1 columns.
json theta_to_json(const kernels::KernelHyperparameters& theta);
kernels::KernelHyperparameters theta_from_json(const json& j);

// ---------------------------------------------------------------------------
// Tabular data
// ---------------------------------------------------------------------------

/// A parsed data file: x1..xd, optional z, w1..wp and tau2 columns.
struct Table {
  InputMatrix inputs;
  Vector z;  ///< empty when the file has no z column
  Matrix design;
  std::optional<Vector> noise;
  bool has_z = false;
  std::size_t dropped_rows = 0;
};

/// Reads a comma-separated file with a header. Rows whose z is empty or NA
/// are dropped when `require_z`; any other non-numeric field throws DataError
/// naming the row (1-based, counting the header as row 1) and column.
Table read_table(std::istream& in, bool require_z);
Table read_table_file(const std::filesystem::path& path, bool require_z);

/// Builds a Dataset from a table for a mean mode.
bayes::Dataset make_dataset(const Table& table, MeanMode mean);
/// Design matrix for query points under a mean mode.
Matrix make_design(const Table& table, MeanMode mean);

// ---------------------------------------------------------------------------
// Posterior samples
// ---------------------------------------------------------------------------

json draw_to_json(const bayes::PosteriorDraw& draw);
bayes::PosteriorDraw draw_from_json(const json& j);

/// One JSON object per line.
void write_samples_jsonl(std::ostream& out, std::span<const bayes::PosteriorDraw> draws);
std::vector<bayes::PosteriorDraw> read_samples_jsonl(std::istream& in);

/// iteration, retained flag, log densities, beta and the scalar hyperparameters.
void write_trace_csv(std::ostream& out, const bayes::PosteriorSampleSet& samples);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& data);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace sparsegp::io
