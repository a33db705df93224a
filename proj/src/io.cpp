#include "sparsegp/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace sparsegp::io {

namespace {

// Strict view of a JSON object: every key must be consumed before finish().
class Object {
 public:
  Object(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  template <typename T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(where(key) + " is required");
    return get<T>(key, T{});
  }

  const json* sub(const std::string& key) {
    used_.insert(key);
    return has(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError("unknown key '" + where(item.key()) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double positive(double v, const std::string& name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name + " must be positive and finite");
  return v;
}

kernels::Smoothness parse_nu(Object& o) {
  try {
    return kernels::smoothness_from_value(o.get<double>("nu", 1.5));
  } catch (const ConfigError& e) {
    throw ConfigError(o.where("nu") + ": " + e.what());
  }
}

json basis_to_json(const kernels::BasisFunction& b) {
  if (const auto* s = std::get_if<kernels::NaturalSplineBasis>(&b))
    return {{"type", "natural_spline"}, {"coordinate", s->coordinate}, {"lower", s->lower},
            {"upper", s->upper},        {"knots", s->knots},           {"index", s->index},
            {"offset", s->offset},      {"scale", s->scale}};
  const auto& r = std::get<kernels::RadialBasis>(b);
  return {{"type", "radial"}, {"center", r.center}, {"width", r.width}};
}

kernels::BasisFunction basis_from_json(const json& j, const std::string& path) {
  Object o(j, path);
  const auto type = o.require<std::string>("type");
  if (type == "natural_spline") {
    kernels::NaturalSplineBasis s;
    s.coordinate = o.get<std::size_t>("coordinate", 0);
    s.lower = o.get<double>("lower", 0.0);
    s.upper = o.get<double>("upper", 1.0);
    s.knots = o.require<std::vector<double>>("knots");
    s.index = o.get<std::size_t>("index", 0);
    s.offset = o.get<double>("offset", 0.0);
    s.scale = o.get<double>("scale", 1.0);
    o.finish();
    if (!(s.upper > s.lower) || s.knots.size() < 2 || s.index + 1 >= s.knots.size() || !(s.scale > 0.0))
      throw ConfigError(path + ": invalid natural spline descriptor");
    return s;
  }
  if (type == "radial") {
    kernels::RadialBasis r;
    r.center = o.require<std::vector<double>>("center");
    r.width = positive(o.get<double>("width", 1.0), path + ".width");
    o.finish();
    return r;
  }
  throw ConfigError(path + ".type must be 'natural_spline' or 'radial'");
}

std::vector<kernels::BasisFunction> basis_list_from_json(const json& j, const std::string& path) {
  if (j.is_array()) {
    std::vector<kernels::BasisFunction> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(basis_from_json(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
  }
  Object o(j, path);
  const auto type = o.require<std::string>("type");
  if (type != "natural_spline") throw ConfigError(path + ": basis shorthand supports only 'natural_spline'");
  const auto coordinate = o.get<std::size_t>("coordinate", 0);
  const auto lower = o.get<double>("lower", 0.0);
  const auto upper = o.get<double>("upper", 1.0);
  const auto count = o.get<std::size_t>("knot_count", 5);
  o.finish();
  if (!(upper > lower)) throw ConfigError(path + ": upper must exceed lower");
  return kernels::natural_spline_basis(coordinate, lower, upper, count);
}

json core_to_json(const kernels::CoreKernelParams& core) {
  if (const auto* m = std::get_if<kernels::StationaryMatern>(&core))
    return {{"type", "matern"},
            {"variance", m->variance},
            {"length_scale", m->length_scale},
            {"nu", kernels::smoothness_value(m->nu)}};
  if (const auto* ns = std::get_if<kernels::ParametricNonstationary>(&core)) {
    json basis = json::array();
    for (const auto& b : ns->basis) basis.push_back(basis_to_json(b));
    return {{"type", "nonstationary"},
            {"nu", kernels::smoothness_value(ns->nu)},
            {"log_sigma0", ns->log_sigma0},
            {"log_Sigma0", ns->log_Sigma0},
            {"sigma_coeffs", ns->sigma_coeffs},
            {"Sigma_coeffs", ns->Sigma_coeffs},
            {"reg_var_sigma", ns->reg_var_sigma},
            {"reg_var_Sigma", ns->reg_var_Sigma},
            {"basis", basis}};
  }
  return {{"type", "constant"}};
}

kernels::CoreKernelParams core_from_json(const json& j, const std::string& path) {
  Object o(j, path);
  const auto type = o.get<std::string>("type", "matern");
  if (type == "matern") {
    kernels::StationaryMatern m;
    m.nu = parse_nu(o);
    m.variance = positive(o.get<double>("variance", 1.0), o.where("variance"));
    m.length_scale = positive(o.get<double>("length_scale", 1.0), o.where("length_scale"));
    o.finish();
    return m;
  }
  if (type == "nonstationary") {
    kernels::ParametricNonstationary ns;
    ns.nu = parse_nu(o);
    ns.log_sigma0 = o.get<double>("log_sigma0", 0.0);
    ns.log_Sigma0 = o.get<double>("log_Sigma0", 0.0);
    if (const json* b = o.sub("basis")) ns.basis = basis_list_from_json(*b, o.where("basis"));
    ns.sigma_coeffs = o.get<std::vector<double>>("sigma_coeffs", std::vector<double>(ns.basis.size(), 0.0));
    ns.Sigma_coeffs = o.get<std::vector<double>>("Sigma_coeffs", std::vector<double>(ns.basis.size(), 0.0));
    ns.reg_var_sigma = positive(o.get<double>("reg_var_sigma", 1.0), o.where("reg_var_sigma"));
    ns.reg_var_Sigma = positive(o.get<double>("reg_var_Sigma", 1.0), o.where("reg_var_Sigma"));
    o.finish();
    if (ns.sigma_coeffs.size() != ns.basis.size() || ns.Sigma_coeffs.size() != ns.basis.size())
      throw ConfigError(path + ": coefficient counts must match the basis size");
    if (!std::isfinite(ns.log_sigma0) || !std::isfinite(ns.log_Sigma0))
      throw ConfigError(path + ": log_sigma0 and log_Sigma0 must be finite");
    return ns;
  }
  if (type == "constant") {
    o.finish();
    return kernels::ConstantCore{};
  }
  throw ConfigError(path + ".type must be 'matern', 'nonstationary' or 'constant'");
}

json sparse_to_json(const kernels::SparseKernelParams& sp) {
  json bumps = json::array();
  for (const auto& b : sp.bumps)
    bumps.push_back({{"centroid", b.centroid}, {"amplitude", b.amplitude}, {"shape", b.shape}, {"radius", b.radius}});
  return {{"n1", sp.n1},
          {"n2", sp.n2},
          {"scale", sp.scale},
          {"wendland_radius", sp.wendland_radius},
          {"bumps", bumps},
          {"inclusion_probs", sp.inclusion_probs}};
}

kernels::SparseKernelParams sparse_from_json(const json& j, const std::string& path) {
  Object o(j, path);
  kernels::SparseKernelParams sp;
  sp.n1 = o.get<int>("n1", 4);
  sp.n2 = o.get<int>("n2", 4);
  if (sp.n1 < 0 || sp.n2 < 0) throw ConfigError(path + ": n1 and n2 must be non-negative");
  sp.scale = o.get<double>("scale", 1.0);
  if (!(sp.scale >= 0.0) || !std::isfinite(sp.scale)) throw ConfigError(path + ".scale must be non-negative");
  if (const json* r = o.sub("wendland_radius")) {
    try {
      sp.wendland_radius = r->is_array() ? r->get<std::vector<double>>() : std::vector<double>{r->get<double>()};
    } catch (const json::exception&) {
      throw ConfigError(path + ".wendland_radius has the wrong type");
    }
  }
  const double shape = o.get<double>("shape", 1.0);
  const auto count = static_cast<std::size_t>(sp.n1 * sp.n2);
  if (const json* bumps = o.sub("bumps")) {
    if (!bumps->is_array()) throw ConfigError(path + ".bumps must be an array");
    for (std::size_t k = 0; k < bumps->size(); ++k) {
      Object b((*bumps)[k], path + ".bumps[" + std::to_string(k) + "]");
      kernels::BumpFunction bump;
      bump.centroid = b.require<std::vector<double>>("centroid");
      bump.amplitude = b.get<double>("amplitude", 1.0);
      bump.shape = b.get<double>("shape", shape);
      bump.radius = b.get<double>("radius", 1.0);
      b.finish();
      sp.bumps.push_back(std::move(bump));
    }
  } else {
    sp.bumps.assign(count, kernels::BumpFunction{{}, 1.0, shape, 1.0});
  }
  sp.inclusion_probs = o.get<std::vector<double>>("inclusion_probs", std::vector<double>(count, 0.5));
  o.finish();
  if (sp.bumps.size() != count || sp.inclusion_probs.size() != count)
    throw ConfigError(path + ": bumps and inclusion_probs need n1 * n2 entries");
  for (double p : sp.inclusion_probs)
    if (!(p > 0.0 && p < 1.0)) throw ConfigError(path + ": inclusion_probs must lie in (0, 1)");
  for (const auto& b : sp.bumps)
    if (!(b.radius > 0.0) || !(b.shape > 0.0) || !(b.amplitude >= 0.0))
      throw ConfigError(path + ": bump radius and shape must be positive, amplitude non-negative");
  for (double r : sp.wendland_radius)
    if (!(r > 0.0)) throw ConfigError(path + ".wendland_radius must be positive");
  return sp;
}

json noise_to_json(const kernels::NoiseParams& noise) {
  if (const auto* h = std::get_if<kernels::Homoskedastic>(&noise)) return {{"tau2", h->tau2}};
  return {{"tau2_per_point", std::get<kernels::Heteroskedastic>(noise).tau2_per_point}};
}

kernels::NoiseParams noise_from_json(const json& j, const std::string& path) {
  Object o(j, path);
  if (o.has("tau2_per_point")) {
    kernels::Heteroskedastic h{o.get<std::vector<double>>("tau2_per_point", {})};
    o.finish();
    for (double t : h.tau2_per_point)
      if (!(t >= 0.0)) throw ConfigError(path + ": noise variances must be non-negative");
    return h;
  }
  kernels::Homoskedastic h{o.get<double>("tau2", 0.1)};
  o.finish();
  if (!(h.tau2 >= 0.0) || !std::isfinite(h.tau2)) throw ConfigError(path + ".tau2 must be non-negative");
  return h;
}

kernels::KernelHyperparameters theta_from_object(Object& o) {
  kernels::KernelHyperparameters theta;
  if (const json* c = o.sub("core")) theta.core = core_from_json(*c, o.where("core"));
  if (const json* s = o.sub("sparse")) theta.sparse = sparse_from_json(*s, o.where("sparse"));
  if (const json* n = o.sub("noise")) theta.noise = noise_from_json(*n, o.where("noise"));
  return theta;
}

bayes::PriorSpec priors_from_json(const json& j) {
  Object o(j, "model.priors");
  bayes::PriorSpec p;
  p.beta_variance = o.get("beta_variance", p.beta_variance);
  p.s0_upper = o.get("s0_upper", p.s0_upper);
  p.D0 = o.get("D0", p.D0);
  p.Dr = o.get("Dr", p.Dr);
  p.reg_variance_upper = o.get("reg_variance_upper", p.reg_variance_upper);
  p.tau2_upper = o.get("tau2_upper", p.tau2_upper);
  p.core_variance_upper = o.get("core_variance_upper", p.core_variance_upper);
  p.length_scale_upper = o.get("length_scale_upper", p.length_scale_upper);
  for (const auto& pair : o.get<std::vector<std::vector<double>>>("coordinate_bounds", {})) {
    if (pair.size() != 2) throw ConfigError("model.priors.coordinate_bounds entries must be [lower, upper]");
    p.coordinate_bounds.emplace_back(pair[0], pair[1]);
  }
  o.finish();
  for (double v : {p.beta_variance, p.s0_upper, p.D0, p.Dr, p.reg_variance_upper, p.tau2_upper,
                   p.core_variance_upper, p.length_scale_upper})
    positive(v, "model.priors bounds");
  return p;
}

MeanMode parse_mean(const std::string& s) {
  if (s == "zero") return MeanMode::Zero;
  if (s == "constant") return MeanMode::Constant;
  if (s == "design") return MeanMode::Design;
  throw ConfigError("model.mean must be 'zero', 'constant' or 'design'");
}

bool is_missing(std::string_view s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null";
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_number(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out += ',';
    out += cells[k];
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

json theta_to_json(const kernels::KernelHyperparameters& theta) {
  return {{"core", core_to_json(theta.core)},
          {"sparse", theta.sparse ? sparse_to_json(*theta.sparse) : json(nullptr)},
          {"noise", noise_to_json(theta.noise)}};
}

kernels::KernelHyperparameters theta_from_json(const json& j) {
  Object o(j, "theta");
  auto theta = theta_from_object(o);
  o.finish();
  return theta;
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  const json empty = json::object();
  Object root(doc.is_null() ? empty : doc, "");

  if (const json* m = root.sub("model")) {
    Object o(*m, "model");
    cfg.model.mean = parse_mean(o.get<std::string>("mean", "constant"));
    cfg.model.theta = theta_from_object(o);
    if (const json* p = o.sub("priors")) cfg.model.priors = priors_from_json(*p);
    const auto initial = o.get<std::string>("initial", "default");
    if (initial != "default" && initial != "config") throw ConfigError("model.initial must be 'default' or 'config'");
    cfg.model.initial_from_config = initial == "config";
    cfg.model.beta = o.get<std::vector<double>>("beta", {});
    o.finish();
  }

  auto& mc = cfg.mcmc;
  if (const json* m = root.sub("mcmc")) {
    Object o(*m, "mcmc");
    mc.iterations = o.get("iterations", mc.iterations);
    mc.seed = o.get("seed", mc.seed);
    mc.burn_in_fraction = o.get("burn_in_fraction", mc.burn_in_fraction);
    mc.thin = o.get("thin", mc.thin);
    mc.warmup = o.get("warmup", mc.warmup);
    mc.adaptation_interval = o.get("adaptation_interval", mc.adaptation_interval);
    mc.initial_scale = o.get("initial_scale", mc.initial_scale);
    mc.adapt = o.get("adapt", mc.adapt);
    mc.flat_likelihood = o.get("flat_likelihood", mc.flat_likelihood);
    mc.check_cache = o.get("check_cache", mc.check_cache);
    if (const json* b = o.sub("blocks")) {
      Object bo(*b, "mcmc.blocks");
      mc.blocks.beta = bo.get("beta", true);
      mc.blocks.kernel = bo.get("kernel", true);
      mc.blocks.bumps = bo.get("bumps", true);
      mc.blocks.amplitudes = bo.get("amplitudes", true);
      mc.blocks.inclusion = bo.get("inclusion", true);
      bo.finish();
    }
    o.finish();
    if (!(mc.burn_in_fraction >= 0.0 && mc.burn_in_fraction < 1.0))
      throw ConfigError("mcmc.burn_in_fraction must lie in [0, 1)");
    if (mc.thin == 0 || mc.adaptation_interval == 0) throw ConfigError("mcmc.thin and adaptation_interval must be positive");
    positive(mc.initial_scale, "mcmc.initial_scale");
  }

  auto& lk = mc.likelihood;
  if (const json* s = root.sub("solver")) {
    Object o(*s, "solver");
    const auto method = o.get<std::string>("method", "auto");
    if (method == "auto")
      lk.method = bayes::LikelihoodMethod::Automatic;
    else if (method == "dense")
      lk.method = bayes::LikelihoodMethod::Dense;
    else if (method == "iterative")
      lk.method = bayes::LikelihoodMethod::Iterative;
    else
      throw ConfigError("solver.method must be 'auto', 'dense' or 'iterative'");
    lk.dense_threshold = o.get("dense_threshold", lk.dense_threshold);
    lk.lanczos.probes = o.get("probes", lk.lanczos.probes);
    lk.lanczos.steps = o.get("steps", lk.lanczos.steps);
    lk.lanczos.seed = o.get("lanczos_seed", lk.lanczos.seed);
    lk.minres_tol = o.get("minres_tol", lk.minres_tol);
    lk.minres_max_iters = o.get("minres_max_iters", lk.minres_max_iters);
    lk.plan.batch_size = o.get("batch_size", lk.plan.batch_size);
    cfg.workers = o.get("workers", cfg.workers);
    o.finish();
    if (lk.lanczos.probes <= 0 || lk.lanczos.steps <= 0) throw ConfigError("solver.probes and steps must be positive");
    if (lk.plan.batch_size == 0) throw ConfigError("solver.batch_size must be positive");
    positive(lk.minres_tol, "solver.minres_tol");
  }

  if (const json* s = root.sub("io")) {
    Object o(*s, "io");
    auto path = [&](const char* key) -> std::optional<std::string> {
      if (!o.has(key)) {
        o.sub(key);
        return std::nullopt;
      }
      return o.get<std::string>(key, "");
    };
    cfg.data_path = path("data");
    cfg.query_path = path("query");
    cfg.inputs_path = path("inputs");
    cfg.output_path = path("output");
    o.finish();
  }

  if (const json* s = root.sub("predict")) {
    Object o(*s, "predict");
    cfg.predict.max_posterior_draws = o.get("max_posterior_draws", cfg.predict.max_posterior_draws);
    o.finish();
  }

  auto& bm = cfg.benchmark;
  if (const json* s = root.sub("benchmark")) {
    Object o(*s, "benchmark");
    if (o.has("scenarios")) {
      bm.scenarios.clear();
      for (const auto& t : o.get<std::vector<std::string>>("scenarios", {})) bm.scenarios.push_back(synth::parse_scenario(t));
    }
    if (o.has("models")) {
      bm.models.clear();
      for (const auto& t : o.get<std::vector<std::string>>("models", {})) bm.models.push_back(synth::parse_model(t));
    }
    bm.replicates = o.get("replicates", bm.replicates);
    bm.mcmc_iterations = o.get("iterations", bm.mcmc_iterations);
    bm.burn_in_fraction = o.get("burn_in_fraction", bm.burn_in_fraction);
    bm.max_posterior_draws = o.get("max_posterior_draws", bm.max_posterior_draws);
    bm.settings.n1 = o.get("n1", bm.settings.n1);
    bm.settings.n2 = o.get("n2", bm.settings.n2);
    bm.settings.bump_shape = o.get("bump_shape", bm.settings.bump_shape);
    bm.settings.spline_knots = o.get("spline_knots", bm.settings.spline_knots);
    if (o.has("nu")) {
      try {
        bm.settings.nu = kernels::smoothness_from_value(o.get<double>("nu", 2.5));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("benchmark.nu: ") + e.what());
      }
    } else {
      o.sub("nu");
    }
    o.finish();
    if (bm.replicates < 0) throw ConfigError("benchmark.replicates must be non-negative");
    if (!(bm.burn_in_fraction >= 0.0 && bm.burn_in_fraction < 1.0))
      throw ConfigError("benchmark.burn_in_fraction must lie in [0, 1)");
    if (bm.settings.n1 < 1 || bm.settings.n2 < 1) throw ConfigError("benchmark.n1 and n2 must be positive");
  }
  root.finish();

  cfg.canonical = (doc.is_null() ? empty : doc).dump();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

Table read_table(std::istream& in, bool require_z) {
  std::string line;
  std::size_t line_no = 0;
  Table table;
  // Skip leading blank lines before the header.
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) {
    if (require_z) throw DataError("data file is empty (no header)");
    table.inputs.resize(0, 0);
    table.design.resize(0, 0);
    return table;
  }

  const std::string header = line;
  const auto names = split(header);
  static const std::regex x_re("x([1-9][0-9]*)"), w_re("w([1-9][0-9]*)");
  std::vector<int> x_col, w_col;
  int z_col = -1, tau_col = -1;
  std::map<int, int> xs, ws;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::string name(names[c]);
    std::smatch m;
    if (std::regex_match(name, m, x_re)) {
      if (!xs.emplace(std::stoi(m[1]), static_cast<int>(c)).second) throw DataError("duplicate column " + name);
    } else if (std::regex_match(name, m, w_re)) {
      if (!ws.emplace(std::stoi(m[1]), static_cast<int>(c)).second) throw DataError("duplicate column " + name);
    } else if (name == "z") {
      if (z_col >= 0) throw DataError("duplicate column z");
      z_col = static_cast<int>(c);
    } else if (name == "tau2") {
      if (tau_col >= 0) throw DataError("duplicate column tau2");
      tau_col = static_cast<int>(c);
    } else {
      throw DataError("unknown column '" + name + "' (expected x1..xd, z, w1..wp, tau2)");
    }
  }
  auto contiguous = [](const std::map<int, int>& cols, const char* prefix, std::vector<int>& out) {
    int expect = 1;
    for (const auto& [k, c] : cols) {
      if (k != expect) throw DataError(std::string("columns ") + prefix + "1.." + prefix + "k must be contiguous");
      out.push_back(c);
      ++expect;
    }
  };
  contiguous(xs, "x", x_col);
  contiguous(ws, "w", w_col);
  if (x_col.empty()) throw DataError("data file needs at least one input column x1");
  if (require_z && z_col < 0) throw DataError("data file needs an observation column z");
  table.has_z = z_col >= 0;

  std::vector<std::vector<double>> xrows, wrows;
  std::vector<double> zs, taus;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != names.size())
      throw DataError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " fields, expected " +
                      std::to_string(names.size()));
    auto number = [&](int c) {
      double v = 0.0;
      if (!parse_number(cells[static_cast<std::size_t>(c)], v))
        throw DataError("row " + std::to_string(line_no) + ", column " + std::string(names[static_cast<std::size_t>(c)]) +
                        ": non-numeric value '" + std::string(cells[static_cast<std::size_t>(c)]) + "'");
      return v;
    };
    double z = 0.0;
    if (require_z) {
      if (is_missing(cells[static_cast<std::size_t>(z_col)])) {
        ++table.dropped_rows;
        continue;
      }
      z = number(z_col);
    }
    std::vector<double> xr, wr;
    for (int c : x_col) xr.push_back(number(c));
    for (int c : w_col) wr.push_back(number(c));
    if (tau_col >= 0) {
      const double t = number(tau_col);
      if (t < 0.0) throw DataError("row " + std::to_string(line_no) + ": tau2 must be non-negative");
      taus.push_back(t);
    }
    xrows.push_back(std::move(xr));
    wrows.push_back(std::move(wr));
    zs.push_back(z);
  }
  if (table.dropped_rows > 0) spdlog::info("dropped {} rows with missing z", table.dropped_rows);

  const auto n = static_cast<Eigen::Index>(xrows.size());
  table.inputs.resize(n, static_cast<Eigen::Index>(x_col.size()));
  table.design.resize(n, static_cast<Eigen::Index>(w_col.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < x_col.size(); ++k) table.inputs(i, static_cast<Eigen::Index>(k)) = xrows[i][k];
    for (std::size_t k = 0; k < w_col.size(); ++k) table.design(i, static_cast<Eigen::Index>(k)) = wrows[i][k];
  }
  if (require_z) table.z = Eigen::Map<const Vector>(zs.data(), n);
  if (tau_col >= 0) table.noise = Eigen::Map<const Vector>(taus.data(), n);
  return table;
}

Table read_table_file(const std::filesystem::path& path, bool require_z) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file " + path.string());
  return read_table(in, require_z);
}

Matrix make_design(const Table& table, MeanMode mean) {
  const Eigen::Index n = table.inputs.rows();
  switch (mean) {
    case MeanMode::Zero:
      return Matrix(n, 0);
    case MeanMode::Constant:
      return Matrix::Ones(n, 1);
    case MeanMode::Design:
      if (table.design.cols() == 0 && n > 0) throw DataError("mean 'design' needs columns w1..wp");
      return table.design;
  }
  return Matrix(n, 0);
}

bayes::Dataset make_dataset(const Table& table, MeanMode mean) {
  bayes::Dataset data;
  data.inputs = table.inputs;
  data.z = table.z;
  data.design = make_design(table, mean);
  data.noise = table.noise;
  data.validate();
  return data;
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

json draw_to_json(const bayes::PosteriorDraw& draw) {
  return {{"iteration", draw.iteration},
          {"beta", std::vector<double>(draw.beta.data(), draw.beta.data() + draw.beta.size())},
          {"theta", theta_to_json(draw.theta)},
          {"log_likelihood", draw.log_likelihood},
          {"log_prior", draw.log_prior},
          {"log_posterior", draw.log_posterior()}};
}

bayes::PosteriorDraw draw_from_json(const json& j) {
  try {
    bayes::PosteriorDraw d;
    d.iteration = j.at("iteration").get<std::size_t>();
    const auto beta = j.at("beta").get<std::vector<double>>();
    d.beta = Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    d.theta = theta_from_json(j.at("theta"));
    d.log_likelihood = j.value("log_likelihood", 0.0);
    d.log_prior = j.value("log_prior", 0.0);
    return d;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed posterior sample: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed posterior sample: ") + e.what());
  }
}

void write_samples_jsonl(std::ostream& out, std::span<const bayes::PosteriorDraw> draws) {
  for (const auto& d : draws) out << draw_to_json(d).dump() << '\n';
}

std::vector<bayes::PosteriorDraw> read_samples_jsonl(std::istream& in) {
  std::vector<bayes::PosteriorDraw> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("samples line " + std::to_string(line_no) + " is not valid JSON");
    }
    out.push_back(draw_from_json(j));
  }
  return out;
}

void write_trace_csv(std::ostream& out, const bayes::PosteriorSampleSet& samples) {
  std::vector<std::string> header{"iteration", "retained", "log_likelihood", "log_prior", "log_posterior"};
  if (samples.draws.empty()) {
    out << csv_join(header) << '\n';
    return;
  }
  const auto& first = samples.draws.front();
  for (Eigen::Index k = 0; k < first.beta.size(); ++k) header.push_back("beta_" + std::to_string(k + 1));
  const auto& t0 = first.theta;
  if (std::holds_alternative<kernels::StationaryMatern>(t0.core)) {
    header.insert(header.end(), {"core_variance", "length_scale"});
  } else if (std::holds_alternative<kernels::ParametricNonstationary>(t0.core)) {
    header.insert(header.end(), {"log_sigma0", "log_Sigma0", "reg_var_sigma", "reg_var_Sigma"});
  }
  if (std::holds_alternative<kernels::Homoskedastic>(t0.noise)) header.push_back("tau2");
  if (t0.sparse) {
    header.push_back("s0");
    for (std::size_t k = 0; k < t0.sparse->wendland_radius.size(); ++k) header.push_back("r0_" + std::to_string(k + 1));
    header.push_back("active_bumps");
  }
  out << csv_join(header) << '\n';

  for (std::size_t idx = 0; idx < samples.draws.size(); ++idx) {
    const auto& d = samples.draws[idx];
    std::vector<std::string> row{std::to_string(d.iteration), idx >= samples.burn_in ? "1" : "0",
                                 format_double(d.log_likelihood), format_double(d.log_prior),
                                 format_double(d.log_posterior())};
    for (Eigen::Index k = 0; k < d.beta.size(); ++k) row.push_back(format_double(d.beta(k)));
    if (const auto* m = std::get_if<kernels::StationaryMatern>(&d.theta.core)) {
      row.push_back(format_double(m->variance));
      row.push_back(format_double(m->length_scale));
    } else if (const auto* ns = std::get_if<kernels::ParametricNonstationary>(&d.theta.core)) {
      for (double v : {ns->log_sigma0, ns->log_Sigma0, ns->reg_var_sigma, ns->reg_var_Sigma}) row.push_back(format_double(v));
    }
    if (const auto* h = std::get_if<kernels::Homoskedastic>(&d.theta.noise)) row.push_back(format_double(h->tau2));
    if (d.theta.sparse) {
      row.push_back(format_double(d.theta.sparse->scale));
      for (double r : d.theta.sparse->wendland_radius) row.push_back(format_double(r));
      int active = 0;
      for (const auto& b : d.theta.sparse->bumps) active += b.amplitude != 0.0 ? 1 : 0;
      row.push_back(std::to_string(active));
    }
    out << csv_join(row) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot rename into " + path.string());
  }
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace sparsegp::io
