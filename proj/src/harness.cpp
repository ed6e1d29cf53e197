#include "sysid/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sysid/estimator.hpp"
#include "sysid/format.hpp"
#include "sysid/random.hpp"
#include "sysid/tuning.hpp"

namespace sysid::harness {

using nlohmann::json;

namespace {

constexpr ExperimentKind kAllKinds[] = {
    ExperimentKind::fig1_q_sweep,        ExperimentKind::fig2_single_traj,
    ExperimentKind::fig3_init_perturb,   ExperimentKind::fig4_strong_m_sweep,
    ExperimentKind::fig5_lambda_sweep,   ExperimentKind::rate_check,
    ExperimentKind::custom,
};

bool is_single_trajectory(ExperimentKind k) { return k == ExperimentKind::fig2_single_traj; }

[[noreturn]] void field_error(std::string_view field, const std::string& what) {
  throw ConfigError("field '" + std::string(field) + "': " + what);
}

double as_number(const json& j, std::string_view field) {
  if (j.is_string() && (j == "inf" || j == "infinity")) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) field_error(field, "expected a number, got " + j.dump());
  return j.get<double>();
}

std::vector<double> number_list(const json& j, std::string_view field) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const auto& e : j) out.push_back(as_number(e, field));
  } else if (j.is_object()) {
    // {"min": a, "max": b, "step": s}
    for (const auto& [key, _] : j.items()) {
      if (key != "min" && key != "max" && key != "step") field_error(field, "unknown key '" + key + "'");
    }
    if (!j.contains("min") || !j.contains("max") || !j.contains("step")) {
      field_error(field, "range needs min, max and step");
    }
    const double lo = as_number(j["min"], field);
    const double hi = as_number(j["max"], field);
    const double step = as_number(j["step"], field);
    if (!(step > 0.0) || hi < lo) field_error(field, "range needs step > 0 and max >= min");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
    }
  } else {
    field_error(field, "expected a number, a list, or a {min,max,step} range");
  }
  return out;
}

std::vector<std::size_t> size_list(const json& j, std::string_view field) {
  std::vector<std::size_t> out;
  auto one = [&](const json& e) {
    if (!e.is_number_integer() || e.get<long long>() < 1) field_error(field, "expected positive integers");
    out.push_back(e.get<std::size_t>());
  };
  if (j.is_number()) {
    one(j);
  } else if (j.is_array()) {
    for (const auto& e : j) one(e);
  } else if (j.is_object()) {
    for (const auto& [key, _] : j.items()) {
      if (key != "min" && key != "max" && key != "per_decade") {
        field_error(field, "unknown key '" + key + "'");
      }
    }
    if (!j.contains("min") || !j.contains("max")) field_error(field, "range needs min and max");
    const auto lo = j["min"].get<std::size_t>();
    const auto hi = j["max"].get<std::size_t>();
    const unsigned per = j.value("per_decade", 10u);
    if (lo < 1 || hi < lo || per < 1) field_error(field, "range needs 1 <= min <= max");
    out = log_spaced(lo, hi, per);
  } else {
    field_error(field, "expected integers or a {min,max,per_decade} range");
  }
  return out;
}

NoiseConfig parse_noise(const json& j) {
  if (j.is_string()) {
    if (j != "none") field_error("noise", "only \"none\" may be given as a string");
    return NoiseConfig::none();
  }
  if (!j.is_object()) field_error("noise", "expected an object");
  NoiseConfig cfg;
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "scale") field_error("noise", "unknown key '" + key + "'");
  }
  try {
    cfg.kind = parse_noise_kind(j.at("kind").get<std::string>());
  } catch (const std::exception& e) {
    field_error("noise.kind", e.what());
  }
  if (j.contains("scale")) cfg.scale = number_list(j["scale"], "noise.scale");
  return cfg;
}

std::optional<RemainderEnvelope> parse_envelope(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_object()) field_error("envelope", "expected an object or null");
  for (const auto& [key, _] : j.items()) {
    if (key != "c" && key != "beta") field_error("envelope", "unknown key '" + key + "'");
  }
  if (!j.contains("c") || !j.contains("beta")) field_error("envelope", "needs c and beta");
  return RemainderEnvelope{as_number(j["c"], "envelope.c"), as_number(j["beta"], "envelope.beta")};
}

Matrix parse_matrix(const json& j, std::string_view field) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) field_error(field, "expected a list of rows");
  const std::size_t cols = j[0].size();
  std::vector<double> data;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) field_error(field, "rows must have equal length");
    for (const auto& e : row) data.push_back(as_number(e, field));
  }
  return Matrix(j.size(), cols, std::move(data));
}

SystemSpec parse_system(const json& j) {
  if (j.is_string()) {
    try {
      return builtin(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      field_error("system", e.what());
    }
  }
  if (!j.is_object()) field_error("system", "expected a builtin name or an object");
  if (j.contains("builtin")) {
    if (j.size() != 1) field_error("system", "'builtin' takes no other keys");
    return parse_system(j["builtin"]);
  }
  for (const auto& [key, _] : j.items()) {
    if (key != "name" && key != "theta" && key != "terms" && key != "envelope") {
      field_error("system", "unknown key '" + key + "'");
    }
  }
  if (!j.contains("theta")) field_error("system", "custom systems need 'theta'");
  Matrix theta = parse_matrix(j["theta"], "system.theta");
  std::vector<PolynomialTerm> terms;
  if (j.contains("terms")) {
    for (const auto& t : j["terms"]) {
      try {
        terms.push_back({t.at("row").get<std::size_t>(), t.at("coeff").get<double>(),
                         t.at("powers").get<std::vector<unsigned>>()});
      } catch (const json::exception& e) {
        field_error("system.terms", e.what());
      }
    }
  }
  std::optional<RemainderEnvelope> env;
  if (j.contains("envelope")) env = parse_envelope(j["envelope"]);
  try {
    return polynomial_system(j.value("name", std::string("custom")), std::move(theta),
                             std::move(terms), env, NoiseConfig::none());
  } catch (const std::invalid_argument& e) {
    field_error("system", e.what());
  }
}

std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// A point in data space: everything that determines a simulated dataset.
struct DataPoint {
  Vector m;
  double q = 0.0;
  double sigma_u = 0.0;
  std::size_t N = 0;
};

std::vector<DataPoint> data_points(const ExperimentConfig& cfg) {
  std::vector<DataPoint> pts;
  if (is_single_trajectory(cfg.experiment)) {
    for (double su : cfg.sigma_u_values)
      for (std::size_t N : cfg.n_values) pts.push_back({{}, 0.0, su, N});
    return pts;
  }
  for (const auto& m : cfg.m_values) {
    if (cfg.q_schedule == QSchedule::inverse_fourth_root) {
      for (std::size_t N : cfg.n_values) {
        pts.push_back({m, cfg.q_scale * std::pow(static_cast<double>(N), -0.25), 0.0, N});
      }
    } else {
      for (double q : cfg.q_values)
        for (std::size_t N : cfg.n_values) pts.push_back({m, q, 0.0, N});
    }
  }
  return pts;
}

struct CellResult {
  std::vector<std::optional<double>> errors;  // per lambda
  std::vector<std::string> status;            // per lambda
  std::optional<double> cv_lambda;
  std::optional<double> cv_error;
  std::string cv_status;
};

CellResult run_cell(const ExperimentConfig& cfg, const DataPoint& pt, std::uint64_t seed) {
  const std::size_t num_lambda = cfg.lambda_values.size();
  CellResult out{std::vector<std::optional<double>>(num_lambda),
                 std::vector<std::string>(num_lambda, "ok"), std::nullopt, std::nullopt, "ok"};
  auto fail_all = [&](const std::string& status) {
    std::fill(out.status.begin(), out.status.end(), status);
    out.cv_status = status;
  };

  RandomStream rng(seed);
  const bool single = is_single_trajectory(cfg.experiment);
  const bool want_cv = cfg.cv_folds >= 2 && !single;
  std::optional<Dataset> data;
  Moments mom;
  try {
    if (single) {
      mom = collect_single_trajectory_moments(cfg.system, pt.sigma_u, pt.N, rng);
    } else {
      AcquisitionConfig acq{pt.N, pt.q, pt.m, cfg.region, cfg.init_perturbation_std};
      if (want_cv) {
        data = collect(cfg.system, acq, rng);
        mom = moments_of(*data);
      } else {
        mom = collect_moments(cfg.system, acq, rng);
      }
    }
  } catch (const TrajectoryDiverged&) {
    fail_all("diverged");
    return out;
  } catch (const SimulationError&) {
    fail_all("simulation_error");
    return out;
  }

  const Matrix& theta = cfg.system.theta_true();
  for (std::size_t l = 0; l < num_lambda; ++l) {
    try {
      const Estimate est = fit_from_moments(mom.xzt, mom.zzt, cfg.lambda_values[l], pt.N);
      out.errors[l] = estimation_error(est, theta);
    } catch (const RankDeficientDesign&) {
      out.status[l] = "rank_deficient";
    }
  }

  if (want_cv) {
    try {
      const CvResult cv = kfold_cv(*data, cfg.lambda_values, cfg.cv_folds);
      out.cv_lambda = cv.best_lambda;
      out.cv_error =
          estimation_error(fit_from_moments(mom.xzt, mom.zzt, cv.best_lambda, pt.N), theta);
    } catch (const RankDeficientDesign&) {
      out.cv_status = "rank_deficient";
    }
  }
  return out;
}

struct Aggregate {
  std::size_t ok = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  a.ok = xs.size();
  if (xs.empty()) return a;
  double s = 0.0;
  for (double x : xs) s += x;
  a.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return a;
}

void put_optional(std::ostream& os, const std::optional<double>& v) {
  os << ',';
  if (v) os << format_double(*v);
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::fig1_q_sweep: return "fig1_q_sweep";
    case ExperimentKind::fig2_single_traj: return "fig2_single_traj";
    case ExperimentKind::fig3_init_perturb: return "fig3_init_perturb";
    case ExperimentKind::fig4_strong_m_sweep: return "fig4_strong_m_sweep";
    case ExperimentKind::fig5_lambda_sweep: return "fig5_lambda_sweep";
    case ExperimentKind::rate_check: return "rate_check";
    case ExperimentKind::custom: return "custom";
  }
  return "unknown";
}

std::vector<std::size_t> log_spaced(std::size_t lo, std::size_t hi, unsigned per_decade) {
  std::vector<std::size_t> out;
  const double a = std::log10(static_cast<double>(lo));
  const double b = std::log10(static_cast<double>(hi));
  const auto steps = static_cast<std::size_t>(std::ceil((b - a) * per_decade - 1e-9));
  for (std::size_t i = 0; i <= steps; ++i) {
    const double e = std::min(b, a + static_cast<double>(i) / per_decade);
    const auto v = static_cast<std::size_t>(std::llround(std::pow(10.0, e)));
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  if (out.back() != hi) out.push_back(hi);
  return out;
}

void ExperimentConfig::validate() const {
  const std::size_t d = system.dim();
  if (trials < 1) throw ConfigError("field 'trials': must be >= 1");
  if (n_values.empty()) throw ConfigError("field 'N': at least one value required");
  if (lambda_values.empty()) throw ConfigError("field 'lambda': at least one value required");
  for (double l : lambda_values) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("field 'lambda': values must be >= 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("field 'delta': must lie in (0, 1)");
  if (is_single_trajectory(experiment)) {
    if (sigma_u_values.empty()) throw ConfigError("field 'sigma_u': required for fig2_single_traj");
    for (double s : sigma_u_values) {
      if (!(s >= 0.0)) throw ConfigError("field 'sigma_u': values must be >= 0");
    }
    return;
  }
  if (q_schedule == QSchedule::fixed && q_values.empty()) {
    throw ConfigError("field 'q': at least one value required");
  }
  if (!(q_scale > 0.0)) throw ConfigError("field 'q_scale': must be > 0");
  if (m_values.empty()) throw ConfigError("field 'm': at least one center required");
  if (cv_folds == 1) throw ConfigError("field 'cv_folds': must be 0 (off) or >= 2");
  for (const auto& pt : data_points(*this)) {
    if (cv_folds >= 2 && pt.N < cv_folds) {
      throw ConfigError("field 'cv_folds': N = " + std::to_string(pt.N) + " is below the fold count");
    }
    AcquisitionConfig acq{pt.N, pt.q, pt.m, region, init_perturbation_std};
    try {
      acq.validate(d);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("assumption on feasible region violated: ") + e.what());
    }
  }
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error at " + line_col(text, e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  static const std::set<std::string> known{
      "experiment", "system", "noise",    "envelope", "N",        "q",
      "q_schedule", "q_scale", "m",       "lambda",   "sigma_u",  "init_perturbation_std",
      "region",     "b",       "cv_folds", "trials",  "master_seed", "delta",
      "output_path", "description"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "'");
  }

  ExperimentConfig cfg;
  try {
    if (!doc.contains("experiment")) throw ConfigError("field 'experiment': required");
    const auto name = doc["experiment"].get<std::string>();
    auto it = std::find_if(std::begin(kAllKinds), std::end(kAllKinds),
                           [&](ExperimentKind k) { return to_string(k) == name; });
    if (it == std::end(kAllKinds)) field_error("experiment", "unknown experiment '" + name + "'");
    cfg.experiment = *it;

    if (!doc.contains("system")) throw ConfigError("field 'system': required");
    cfg.system = parse_system(doc["system"]);
    if (doc.contains("noise")) {
      try {
        cfg.system = cfg.system.with_noise(parse_noise(doc["noise"]));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        field_error("noise", e.what());
      }
    }
    if (doc.contains("envelope")) cfg.system = cfg.system.with_envelope(parse_envelope(doc["envelope"]));

    const std::size_t d = cfg.system.dim();
    if (!doc.contains("N")) throw ConfigError("field 'N': required");
    cfg.n_values = size_list(doc["N"], "N");
    if (doc.contains("q")) cfg.q_values = number_list(doc["q"], "q");

    cfg.q_schedule = cfg.experiment == ExperimentKind::rate_check ? QSchedule::inverse_fourth_root
                                                                  : QSchedule::fixed;
    if (doc.contains("q_schedule")) {
      const auto s = doc["q_schedule"].get<std::string>();
      if (s == "fixed") {
        cfg.q_schedule = QSchedule::fixed;
      } else if (s == "inverse_fourth_root") {
        cfg.q_schedule = QSchedule::inverse_fourth_root;
      } else {
        field_error("q_schedule", "expected 'fixed' or 'inverse_fourth_root'");
      }
    }
    if (doc.contains("q_scale")) cfg.q_scale = as_number(doc["q_scale"], "q_scale");

    if (doc.contains("m")) {
      const auto& jm = doc["m"];
      if (!jm.is_array()) field_error("m", "expected a list of center points");
      for (const auto& v : jm) {
        Vector m = number_list(v, "m");
        if (m.size() != d) field_error("m", "center points must have length " + std::to_string(d));
        cfg.m_values.push_back(std::move(m));
      }
    } else {
      cfg.m_values.push_back(Vector(d, 0.0));
    }
    if (doc.contains("lambda")) cfg.lambda_values = number_list(doc["lambda"], "lambda");
    if (doc.contains("sigma_u")) cfg.sigma_u_values = number_list(doc["sigma_u"], "sigma_u");
    if (doc.contains("init_perturbation_std")) {
      cfg.init_perturbation_std = as_number(doc["init_perturbation_std"], "init_perturbation_std");
    }
    if (doc.contains("region")) {
      const auto& r = doc["region"];
      if (r == "all") {
        cfg.region = FeasibleRegion::everywhere();
      } else if (r.is_object() && r.contains("lower") && r.contains("upper") && r.size() == 2) {
        try {
          cfg.region = FeasibleRegion::box(number_list(r["lower"], "region.lower"),
                                           number_list(r["upper"], "region.upper"));
        } catch (const ConfigError&) {
          throw;
        } catch (const std::invalid_argument& e) {
          field_error("region", e.what());
        }
        if (cfg.region.lower.size() != d) field_error("region", "bounds must have length " + std::to_string(d));
      } else {
        field_error("region", "expected \"all\" or {lower, upper}");
      }
    }
    if (doc.contains("b")) cfg.b = as_number(doc["b"], "b");
    cfg.cv_folds = cfg.experiment == ExperimentKind::fig5_lambda_sweep ? 10 : 0;
    if (doc.contains("cv_folds")) cfg.cv_folds = doc["cv_folds"].get<std::size_t>();
    if (doc.contains("trials")) {
      if (!doc["trials"].is_number_integer() || doc["trials"].get<long long>() < 1) {
        field_error("trials", "must be a positive integer");
      }
      cfg.trials = doc["trials"].get<std::size_t>();
    }
    if (doc.contains("master_seed")) cfg.master_seed = doc["master_seed"].get<std::uint64_t>();
    if (doc.contains("delta")) cfg.delta = as_number(doc["delta"], "delta");
    if (doc.contains("output_path")) cfg.output_path = doc["output_path"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

BoundSetup bound_setup(const ExperimentConfig& cfg, std::size_t N, double q, const Vector& m,
                       double lambda) {
  if (is_single_trajectory(cfg.experiment)) return {std::nullopt, "single trajectory: no bounds"};
  if (cfg.init_perturbation_std > 0.0) {
    return {std::nullopt, "bounds skipped: initializations are perturbed"};
  }
  const auto& env = cfg.system.envelope();
  if (!env) return {std::nullopt, "bounds skipped: envelope (c,β) unset"};

  BoundParams bp;
  bp.n = cfg.system.n();
  bp.p = cfg.system.p();
  bp.N = N;
  bp.q = q;
  bp.m_one_norm = norm1(m);
  bp.m_two_norm = norm2(m);
  bp.sigma_w = cfg.system.noise().sigma_w();
  bp.beta = env->beta;
  bp.c = env->c;
  bp.b = cfg.b ? *cfg.b : minimal_b(bp.m_one_norm, q);
  bp.delta = cfg.delta;
  bp.lambda = lambda;
  bp.theta_norm = spectral_norm(cfg.system.theta_true());

  try {
    bp.check_burn_in();
  } catch (const BoundPreconditionError&) {
    return {std::nullopt, "burn-in N ≥ " + std::to_string(4 * bp.dim()) + " unmet; bounds skipped"};
  }
  try {
    bp.validate();
  } catch (const BoundPreconditionError& e) {
    return {std::nullopt, std::string(e.what()) + "; bounds skipped"};
  }
  return {bp, "bounds enabled"};
}

RunResult run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const auto points = data_points(cfg);
  const std::size_t trials = cfg.trials;
  const std::size_t num_cells = points.size() * trials;
  if (points.size() >= (1ULL << 32) || trials >= (1ULL << 32)) {
    throw ConfigError("sweep too large for seed derivation");
  }

  std::vector<CellResult> cells(num_cells);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= num_cells) return;
      const std::size_t pi = idx / trials;
      const std::size_t t = idx % trials;
      try {
        cells[idx] = run_cell(cfg, points[pi],
                              derive_seed(cfg.master_seed, static_cast<std::uint32_t>(pi),
                                          static_cast<std::uint32_t>(t)));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  RunResult result;
  const std::string experiment(to_string(cfg.experiment));
  const bool single = is_single_trajectory(cfg.experiment);

  auto base_row = [&](const DataPoint& pt, double lambda) {
    ResultRow r;
    r.experiment = experiment;
    r.system = cfg.system.name();
    if (!single) {
      r.q = pt.q;
      r.m_norm1 = norm1(pt.m);
    } else {
      r.sigma_u = pt.sigma_u;
    }
    r.lambda = lambda;
    r.N = pt.N;
    return r;
  };

  auto emit_group = [&](ResultRow proto, const std::optional<BoundReport>& bound,
                        auto&& value_of, auto&& status_of) {
    std::vector<double> ok_values;
    std::vector<double> cv_lambdas;
    std::size_t failed = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      ResultRow r = proto;
      r.trial = static_cast<long>(t);
      r.bound = bound;
      r.status = status_of(t);
      r.error = value_of(t);
      if (r.status == "ok" && r.error) {
        ok_values.push_back(*r.error);
      } else {
        ++failed;
      }
      result.rows.push_back(std::move(r));
    }
    const Aggregate agg = aggregate(ok_values);
    ResultRow a = proto;
    a.trial = -1;
    a.bound = bound;
    a.status = failed == 0 ? "ok" : "failed=" + std::to_string(failed);
    if (agg.ok > 0) {
      a.error = agg.mean;
      a.error_mean = agg.mean;
      a.error_std = agg.stddev;
    }
    result.rows.push_back(std::move(a));
    result.failed_cells += failed;
  };

  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const DataPoint& pt = points[pi];
    const CellResult* row_cells = &cells[pi * trials];
    for (std::size_t l = 0; l < cfg.lambda_values.size(); ++l) {
      const double lambda = cfg.lambda_values[l];
      std::optional<BoundReport> bound;
      if (!single) {
        const BoundSetup setup = bound_setup(cfg, pt.N, pt.q, pt.m, lambda);
        if (setup.params) bound = theorem1_bound(*setup.params);
      }
      emit_group(
          base_row(pt, lambda), bound, [&](std::size_t t) { return row_cells[t].errors[l]; },
          [&](std::size_t t) { return row_cells[t].status[l]; });
    }
    if (cfg.cv_folds >= 2 && !single) {
      // Cross-validation rows: lambda holds the selected value, error the
      // error of the full-data fit at that value.
      std::vector<double> selected;
      std::size_t failed = 0;
      for (std::size_t t = 0; t < trials; ++t) {
        ResultRow r = base_row(pt, row_cells[t].cv_lambda.value_or(0.0));
        r.trial = static_cast<long>(t);
        r.status = row_cells[t].cv_status == "ok" ? "cv" : row_cells[t].cv_status;
        r.error = row_cells[t].cv_error;
        if (row_cells[t].cv_lambda && row_cells[t].cv_error) {
          selected.push_back(*row_cells[t].cv_lambda);
        } else {
          ++failed;
        }
        result.rows.push_back(std::move(r));
      }
      std::vector<double> errs;
      for (std::size_t t = 0; t < trials; ++t) {
        if (row_cells[t].cv_error) errs.push_back(*row_cells[t].cv_error);
      }
      const Aggregate agg = aggregate(errs);
      ResultRow a = base_row(pt, aggregate(selected).mean);
      a.trial = -1;
      a.status = failed == 0 ? "cv" : "cv_failed=" + std::to_string(failed);
      if (agg.ok > 0) {
        a.error = agg.mean;
        a.error_mean = agg.mean;
        a.error_std = agg.stddev;
      }
      result.rows.push_back(std::move(a));
      result.failed_cells += failed;
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kCsvHeader << ",error_mean,error_std\n";
  for (const auto& r : rows) {
    os << r.experiment << ',' << r.system;
    put_optional(os, r.q);
    put_optional(os, r.m_norm1);
    os << ',' << format_double(r.lambda);
    put_optional(os, r.sigma_u);
    os << ',' << r.N << ',' << r.trial;
    put_optional(os, r.error);
    if (r.bound) {
      os << ',' << format_double(r.bound->total) << ',' << format_double(r.bound->noise_term) << ','
         << format_double(r.bound->nonlinearity_term) << ','
         << format_double(r.bound->regularization_term);
    } else {
      os << ",,,,";
    }
    os << ',' << r.status;
    put_optional(os, r.error_mean);
    put_optional(os, r.error_std);
    os << '\n';
  }
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

RunSummary run(const ExperimentConfig& cfg_in, const RunOptions& opts) {
  ExperimentConfig cfg = cfg_in;
  if (opts.seed) cfg.master_seed = *opts.seed;
  RunResult res = run_experiment(cfg, opts.threads);

  std::filesystem::path out = cfg.output_path;
  if (opts.out_dir) {
    std::filesystem::create_directories(*opts.out_dir);
    out = *opts.out_dir / out.filename();
  } else if (out.has_parent_path()) {
    std::filesystem::create_directories(out.parent_path());
  }
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + out.string() + "'");
  write_csv(os, res.rows);
  if (!os) throw std::runtime_error("write to '" + out.string() + "' failed");
  return {out, res.rows.size(), res.failed_cells, res.wall_seconds};
}

Diagnostics validate(const ExperimentConfig& cfg) {
  Diagnostics diag;
  const auto points = data_points(cfg);
  const bool single = is_single_trajectory(cfg.experiment);
  std::size_t index = 0;
  for (const auto& pt : points) {
    for (double lambda : cfg.lambda_values) {
      std::ostringstream os;
      os << "point " << index++ << ": ";
      if (single) {
        os << "sigma_u=" << format_double(pt.sigma_u);
      } else {
        os << "q=" << format_double(pt.q) << " m_norm1=" << format_double(norm1(pt.m));
      }
      os << " lambda=" << format_double(lambda) << " N=" << pt.N << ": ";
      const BoundSetup setup = bound_setup(cfg, pt.N, pt.q, pt.m, lambda);
      os << setup.reason;
      if (setup.params) {
        ++diag.points_with_bounds;
      } else {
        ++diag.points_without_bounds;
      }
      diag.lines.push_back(os.str());
    }
  }
  return diag;
}

Diagnostics validate(const std::filesystem::path& config_path) {
  return validate(load_config(config_path));
}

}  // namespace sysid::harness
