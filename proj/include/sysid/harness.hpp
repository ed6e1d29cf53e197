#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sysid/acquisition.hpp"
#include "sysid/bounds.hpp"
#include "sysid/systems.hpp"

namespace sysid::harness {

enum class ExperimentKind {
  fig1_q_sweep,
  fig2_single_traj,
  fig3_init_perturb,
  fig4_strong_m_sweep,
  fig5_lambda_sweep,
  rate_check,
  custom,
};

std::string_view to_string(ExperimentKind kind);

enum class QSchedule { fixed, inverse_fourth_root };

/// One experiment sweep, normally loaded from a JSON document.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::custom;
  SystemSpec system = builtin("linear2x1");
  std::vector<std::size_t> n_values;
  std::vector<double> q_values;
  QSchedule q_schedule = QSchedule::fixed;
  double q_scale = 1.0;  // c0 in q = c0 * N^{-1/4}
  std::vector<Vector> m_values;
  std::vector<double> lambda_values{0.0};
  std::vector<double> sigma_u_values;
  double init_perturbation_std = 0.0;
  FeasibleRegion region;
  std::optional<double> b;  // default: minimal_b(||m||_1, q)
  std::size_t cv_folds = 0;
  std::size_t trials = 100;
  std::uint64_t master_seed = 1;
  double delta = 0.1;
  std::string output_path = "results.csv";

  /// Structural checks plus Assumption 2 for every (m, q) point.
  void validate() const;
};

/// Throws ConfigError with the offending field in the message.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses a JSON document; unknown keys are rejected. Syntax errors report line and column.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// 10 points per decade between lo and hi (inclusive, deduplicated, rounded).
std::vector<std::size_t> log_spaced(std::size_t lo, std::size_t hi, unsigned per_decade = 10);

/// One output line. Aggregated rows carry trial = -1 and error_mean/error_std.
struct ResultRow {
  std::string experiment;
  std::string system;
  std::optional<double> q;
  std::optional<double> m_norm1;
  double lambda = 0.0;
  std::optional<double> sigma_u;
  std::size_t N = 0;
  long trial = 0;
  std::optional<double> error;
  std::optional<BoundReport> bound;
  std::string status;
  std::optional<double> error_mean;
  std::optional<double> error_std;
};

inline constexpr std::string_view kCsvHeader =
    "experiment,system,q,m_norm1,lambda,sigma_u,N,trial,error,bound_total,bound_noise,"
    "bound_nonlin,bound_reg,status";

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows);
std::string to_csv(const std::vector<ResultRow>& rows);

struct RunResult {
  std::vector<ResultRow> rows;
  std::size_t failed_cells = 0;
  double wall_seconds = 0.0;
};

/// Runs every (sweep point, trial) cell on `threads` workers. Row order and
/// content are independent of the thread count.
RunResult run_experiment(const ExperimentConfig& cfg, unsigned threads = 1);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
};

struct RunSummary {
  std::filesystem::path output;
  std::size_t rows_written = 0;
  std::size_t failed_cells = 0;
  double wall_seconds = 0.0;
};

RunSummary run(const ExperimentConfig& cfg, const RunOptions& opts);

/// Per-point report of which sweep points get bounds and which are simulation-only.
struct Diagnostics {
  std::vector<std::string> lines;
  std::size_t points_with_bounds = 0;
  std::size_t points_without_bounds = 0;
};

Diagnostics validate(const ExperimentConfig& cfg);
Diagnostics validate(const std::filesystem::path& config_path);

/// Bound inputs for one sweep point, or the reason bounds are skipped.
struct BoundSetup {
  std::optional<BoundParams> params;
  std::string reason;
};

BoundSetup bound_setup(const ExperimentConfig& cfg, std::size_t N, double q, const Vector& m,
                       double lambda);

}  // namespace sysid::harness
