// Runs the acceptance suite and prints one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sysid/acquisition.hpp"
#include "sysid/bounds.hpp"
#include "sysid/estimator.hpp"
#include "sysid/harness.hpp"
#include "sysid/linalg.hpp"
#include "sysid/random.hpp"
#include "sysid/systems.hpp"

#ifndef SYSID_CONFIG_DIR
#define SYSID_CONFIG_DIR "configs"
#endif

using namespace sysid;
namespace h = sysid::harness;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

AcquisitionConfig make_cfg(std::size_t N, double q, Vector m) {
  AcquisitionConfig cfg;
  cfg.num_experiments = N;
  cfg.q = q;
  cfg.m = std::move(m);
  return cfg;
}

BoundParams pendulum_params(std::size_t N, double q, double lambda) {
  BoundParams bp;
  bp.n = 2;
  bp.p = 1;
  bp.N = N;
  bp.q = q;
  bp.sigma_w = 0.5;
  bp.beta = 1.0;
  bp.c = 2.0;
  bp.b = 1.0;
  bp.delta = 0.1;
  bp.lambda = lambda;
  bp.theta_norm = spectral_norm(builtin("pendulum").theta_true());
  return bp;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen) {
  std::normal_distribution<double> dist;
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = dist(gen);
  return m;
}

double sum_squares(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
  return s;
}

h::ExperimentConfig load(const char* name) {
  return h::load_config(std::filesystem::path(SYSID_CONFIG_DIR) / name);
}

// Aggregated mean error keyed by (q, m_norm1, lambda, sigma_u, N).
using Key = std::tuple<double, double, double, double, std::size_t>;

std::map<Key, double> means(const std::vector<h::ResultRow>& rows) {
  std::map<Key, double> out;
  for (const auto& r : rows) {
    if (r.trial != -1 || r.status.rfind("cv", 0) == 0 || !r.error_mean) continue;
    out[{r.q.value_or(-1), r.m_norm1.value_or(-1), r.lambda, r.sigma_u.value_or(-1), r.N}] =
        *r.error_mean;
  }
  return out;
}

double mean_at(const std::map<Key, double>& m, double q, std::size_t N, double lambda = 0.0,
               double m_norm1 = 0.0) {
  const auto it = m.find({q, m_norm1, lambda, -1.0, N});
  return it == m.end() ? NAN : it->second;
}

double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (auto [x, y] : pts) {
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Shared between criteria 4, 5, 6 and 12.
std::string g_fig1_csv;
std::map<Key, double> g_fig1;

const h::RunResult& fig1_run() {
  static const h::RunResult res = [] {
    auto r = h::run_experiment(load("fig1.json"), 1);
    g_fig1_csv = h::to_csv(r.rows);
    g_fig1 = means(r.rows);
    return r;
  }();
  return res;
}

Outcome exact_recovery() {
  const SystemSpec s = builtin("linear2x1").with_noise(NoiseConfig::none());
  RandomStream rng(1);
  const Dataset d = collect(s, make_cfg(12, 1.0, {0, 0, 0}), rng);
  const Batches b = assemble_batches(d);
  const double err = estimation_error(fit(b.x, b.z, 0.0), s.theta_true());
  return {err <= 1e-8, "error=" + fmt(err)};
}

Outcome pe_suite() {
  const std::pair<std::size_t, std::size_t> dims[] = {{1, 1}, {2, 1}, {3, 2}};
  double worst = INFINITY;
  int cases = 0;
  for (auto [n, p] : dims) {
    const std::size_t d = n + p;
    for (std::size_t mult : {4, 8, 50}) {
      for (double q : {0.1, 1.0}) {
        for (bool corner : {false, true}) {
          const Vector m(d, corner ? 0.05 : 0.0);
          const std::size_t N = mult * d;
          Matrix zzt(d, d);
          for (const auto& z : plan_initializations(make_cfg(N, q, m), d))
            for (std::size_t a = 0; a < d; ++a)
              for (std::size_t c = 0; c < d; ++c) zzt(a, c) += z[a] * z[c];
          BoundParams bp;
          bp.n = n;
          bp.p = p;
          bp.N = N;
          bp.q = q;
          bp.m_one_norm = norm1(m);
          bp.m_two_norm = norm2(m);
          const PeBounds pe = pe_bounds(bp);
          const auto ext = sym_eig_extremes(zzt);
          worst = std::min({worst, ext.lambda_min - pe.lower, pe.upper - ext.lambda_max});
          ++cases;
        }
      }
    }
  }
  return {worst >= -1e-9, std::to_string(cases) + " cases, min slack=" + fmt(worst)};
}

Outcome bound_coverage() {
  const SystemSpec s = builtin("pendulum");
  const BoundReport bound = theorem1_bound(pendulum_params(2000, 0.9, 0.0));
  int covered = 0;
  for (std::uint32_t t = 0; t < 200; ++t) {
    RandomStream rng(derive_seed(2024, 0, t));
    const Moments mom = collect_moments(s, make_cfg(2000, 0.9, {0, 0, 0}), rng);
    const Estimate e = fit_from_moments(mom.xzt, mom.zzt, 0.0, mom.count);
    if (estimation_error(e, s.theta_true()) <= bound.total) ++covered;
  }
  return {covered >= 180, std::to_string(covered) + "/200 within bound " + fmt(bound.total)};
}

Outcome fig1_crossover() {
  fig1_run();
  const double a100 = mean_at(g_fig1, 0.6, 100), b100 = mean_at(g_fig1, 1.2, 100);
  const double a1e5 = mean_at(g_fig1, 0.6, 100000), b1e5 = mean_at(g_fig1, 1.2, 100000);
  const bool ok = a100 > b100 && a1e5 < b1e5;
  return {ok, "N=100: q0.6=" + fmt(a100) + " q1.2=" + fmt(b100) + "; N=1e5: q0.6=" + fmt(a1e5) +
                  " q1.2=" + fmt(b1e5)};
}

Outcome fig2_plateau() {
  fig1_run();
  const auto res = h::run_experiment(load("fig2.json"), 1);
  const double multi = mean_at(g_fig1, 0.6, 100000);
  bool ok = std::isfinite(multi);
  std::string detail;
  for (double su : {0.1, 0.5, 1.0}) {
    double mean = NAN;
    for (const auto& r : res.rows)
      if (r.trial == -1 && r.N == 100000 && r.sigma_u == su && r.error_mean) mean = *r.error_mean;
    ok = ok && mean >= 0.4 && mean <= 2.0 && mean >= 3.0 * multi;
    detail += "sigma_u=" + fmt(su) + ": " + fmt(mean) + "; ";
  }
  detail += "multi-trajectory q=0.6: " + fmt(multi);
  if (res.failed_cells) detail += "; " + std::to_string(res.failed_cells) + " failed cells";
  return {ok, detail};
}

Outcome fig3_robustness() {
  fig1_run();
  const auto pert = means(h::run_experiment(load("fig3.json"), 1).rows);
  bool ok = true;
  std::string detail;
  for (double q : {0.6, 0.9, 1.2}) {
    const double base = mean_at(g_fig1, q, 10000), p = mean_at(pert, q, 10000);
    const double rel = std::abs(p - base) / base;
    ok = ok && rel <= 0.25;
    detail += "q=" + fmt(q) + ": " + fmt(p) + " vs " + fmt(base) + " (" + fmt(100 * rel) + "%); ";
  }
  return {ok, detail};
}

Outcome fig4_ordering() {
  const auto res = h::run_experiment(load("fig4.json"), 1);
  std::map<double, std::vector<std::pair<double, double>>> by_q;
  for (const auto& r : res.rows)
    if (r.trial == -1 && r.error_mean) by_q[*r.q].push_back({*r.m_norm1, *r.error_mean});
  bool ok = by_q.size() == 3;
  std::string detail;
  for (auto& [q, pts] : by_q) {
    std::sort(pts.begin(), pts.end());
    ok = ok && pts.size() == 4;
    detail += "q=" + fmt(q) + ":";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) ok = ok && pts[i].second > pts[i - 1].second;
      detail += " " + fmt(pts[i].second);
    }
    detail += "; ";
  }
  return {ok, detail};
}

Outcome fig5_regularization() {
  const auto res = h::run_experiment(load("fig5.json"), 1);
  const auto m = means(res.rows);
  std::map<double, double> cv_lambda;
  for (const auto& r : res.rows)
    if (r.trial == -1 && r.status.rfind("cv", 0) == 0) cv_lambda[*r.q] = r.lambda;
  bool ok = cv_lambda.size() == 3;
  std::string detail;
  for (double q : {0.05, 0.1, 0.15}) {
    const double at_zero = mean_at(m, q, 500);
    double best = INFINITY;
    for (const auto& [k, v] : m)
      if (std::get<0>(k) == q) best = std::min(best, v);
    const double sel = cv_lambda.count(q) ? cv_lambda[q] : NAN;
    ok = ok && best <= 0.9 * at_zero && sel >= 1.0 && sel <= 30.0;
    detail += "q=" + fmt(q) + ": lambda0=" + fmt(at_zero) + " min=" + fmt(best) +
              " cv lambda=" + fmt(sel) + "; ";
  }
  return {ok, detail};
}

Outcome rate_check() {
  std::string detail;
  bool ok = true;
  for (auto [file, lo, hi] : {std::tuple{"rate_check.json", -0.45, -0.10},
                              std::tuple{"rate_check_linear.json", -0.6, -0.4}}) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : h::run_experiment(load(file), 1).rows)
      if (r.trial == -1 && r.error_mean) pts.push_back({static_cast<double>(r.N), *r.error_mean});
    const double slope = loglog_slope(pts);
    ok = ok && pts.size() >= 2 && slope >= lo && slope <= hi;
    detail += std::string(file) + ": slope " + fmt(slope) + " over " + std::to_string(pts.size()) +
              " N; ";
  }
  return {ok, detail};
}

Outcome ridge_oracle() {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> lam(0.0, 10.0);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  double worst_residual = 0.0;
  int objective_violations = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = dim(gen), d = dim(gen) + 1, N = 4 * d + dim(gen) * 3;
    const Matrix z = random_matrix(d, N, gen);
    const Matrix x = random_matrix(n, N, gen);
    const double lambda = rep % 10 == 0 ? 0.0 : lam(gen);
    const Estimate e = fit(x, z, lambda);
    const Matrix xzt = mul_transpose(x, z);
    const Matrix lhs = mat_mul(e.theta_hat, mul_transpose(z, z) + lambda * Matrix::identity(d));
    worst_residual = std::max(worst_residual, frobenius_norm(lhs - xzt) / std::max(1.0, frobenius_norm(xzt)));
    const auto objective = [&](const Matrix& t) {
      return sum_squares(x - mat_mul(t, z)) + lambda * sum_squares(t);
    };
    const double best = objective(e.theta_hat);
    for (int k = 0; k < 100; ++k) {
      Matrix delta = random_matrix(n, d, gen);
      delta *= 1e-3 / frobenius_norm(delta);
      if (objective(e.theta_hat + delta) < best) ++objective_violations;
    }
  }
  return {worst_residual <= 1e-8 && objective_violations == 0,
          "max relative residual " + fmt(worst_residual) + ", " + std::to_string(objective_violations) +
              " objective violations"};
}

Outcome nonlinearity_validity() {
  const SystemSpec s = builtin("pendulum").with_noise(NoiseConfig::none());
  double worst = INFINITY;
  int cases = 0;
  for (double q : {0.1, 0.4, 0.9, 1.5}) {
    for (const Vector& m : {Vector{0, 0, 0}, Vector{0.1, 0, 0}, Vector{0.2, -0.1, 0.05}}) {
      if (!(norm1(m) + q < 2.0)) continue;
      for (double lambda : {0.0, 0.5, 5.0, 50.0}) {
        for (std::size_t N : {12, 60, 600}) {
          RandomStream rng(1);
          const Dataset d = collect(s, make_cfg(N, q, m), rng);
          const Batches b = assemble_batches(d);
          const Estimate e = fit(b.x, b.z, lambda);
          const double actual = error_decomposition(e, d, s.theta_true()).nonlin_term;
          BoundParams bp = pendulum_params(N, q, lambda);
          bp.m_one_norm = norm1(m);
          bp.m_two_norm = norm2(m);
          bp.b = minimal_b(bp.m_one_norm, q);
          worst = std::min(worst, nonlinearity_term_lemma3(bp) - actual);
          ++cases;
        }
      }
    }
  }
  return {worst >= -1e-9, std::to_string(cases) + " cases, min slack=" + fmt(worst)};
}

Outcome determinism() {
  fig1_run();
  const auto cfg = load("fig1.json");
  const std::string again = h::to_csv(h::run_experiment(cfg, 1).rows);
  const std::string par1 = h::to_csv(h::run_experiment(cfg, 8).rows);
  const std::string par2 = h::to_csv(h::run_experiment(cfg, 8).rows);
  const bool ok = !g_fig1_csv.empty() && g_fig1_csv == again && g_fig1_csv == par1 && par1 == par2;
  return {ok, std::to_string(g_fig1_csv.size()) + " bytes; 1-thread repeat " +
                  (g_fig1_csv == again ? "identical" : "differs") + ", 8-thread runs " +
                  (par1 == par2 && par1 == g_fig1_csv ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds; 0 means none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "exact recovery", 1, exact_recovery},
      {2, "persistent excitation suite", 5, pe_suite},
      {3, "error bound coverage", 60, bound_coverage},
      {4, "q crossover", 300, fig1_crossover},
      {5, "single-trajectory plateau", 300, fig2_plateau},
      {6, "perturbed initialization", 300, fig3_robustness},
      {7, "strong system ordering", 300, fig4_ordering},
      {8, "regularization benefit", 600, fig5_regularization},
      {9, "rate check", 600, rate_check},
      {10, "ridge oracle", 10, ridge_oracle},
      {11, "nonlinearity bound validity", 30, nonlinearity_validity},
      {12, "determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0 && secs > c.time_limit) {
      out.pass = false;
      out.detail += " [exceeded " + fmt(c.time_limit) + " s]";
    }
    if (!out.pass) ++failures;
    std::printf("%s %2d %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures,
              std::size(criteria));
  return failures == 0 ? 0 : 1;
}
