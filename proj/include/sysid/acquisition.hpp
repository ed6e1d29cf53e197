#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sysid/linalg.hpp"
#include "sysid/random.hpp"
#include "sysid/systems.hpp"

namespace sysid {

/// Region S where experiments may be initialized.
struct FeasibleRegion {
  enum class Kind { all, box };
  Kind kind = Kind::all;
  Vector lower;
  Vector upper;

  static FeasibleRegion everywhere() { return {}; }
  /// Throws std::invalid_argument unless lower <= upper coordinatewise.
  static FeasibleRegion box(Vector lower, Vector upper);

  bool contains(std::span<const double> z) const;
};

/// Experiment design for the multiple length-1 trajectory scheme.
struct AcquisitionConfig {
  std::size_t num_experiments = 0;
  double q = 0.0;
  Vector m;  // center point, length n+p
  FeasibleRegion region;
  double init_perturbation_std = 0.0;

  /// Checks N >= 1, q > 0, |m| = dim, and that every point m +/- q e_j lies in the region.
  void validate(std::size_t dim) const;
};

/// The planned vectors m +/- q e_j, ordered by the alternating sign rule.
std::vector<Vector> plan_initializations(const AcquisitionConfig& cfg, std::size_t dim);

struct Triple {
  Vector x1;
  Vector x0;
  Vector u0;
};

struct GroundTruth {
  Matrix w;  // n x N noise realizations
  Matrix r;  // n x N remainder values r(z0)
};

enum class DataSource { algorithm1, single_trajectory };

struct Dataset {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<Triple> triples;
  std::optional<GroundTruth> ground_truth;
  DataSource source = DataSource::algorithm1;

  std::size_t size() const noexcept { return triples.size(); }
};

/// Runs one reset-and-step experiment per planned initialization. With a
/// nonzero init_perturbation_std every z0 coordinate is perturbed by i.i.d.
/// Gaussian noise, and the realized z0 is what gets recorded.
Dataset collect(const SystemSpec& sys, const AcquisitionConfig& cfg, RandomStream& rng);

/// Sufficient statistics of a dataset: X Z' (n x d) and Z Z' (d x d).
struct Moments {
  Matrix xzt;
  Matrix zzt;
  std::size_t count = 0;
};

/// Moments accumulated in sample order, matching collect_moments bit for bit.
Moments moments_of(const Dataset& data);

/// Same experiments and random draws as collect, keeping only the moments.
Moments collect_moments(const SystemSpec& sys, const AcquisitionConfig& cfg, RandomStream& rng);

class TrajectoryDiverged : public SimulationError {
 public:
  TrajectoryDiverged(std::size_t step_index, double state_norm);
  std::size_t step_index() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// State-norm ceiling for single-trajectory rollouts.
inline constexpr double kDivergenceThreshold = 1e10;

/// Single trajectory from x0 = 0 driven by i.i.d. N(0, sigma_u^2 I) inputs, no resets.
Dataset collect_single_trajectory(const SystemSpec& sys, double sigma_u, std::size_t num_samples,
                                  RandomStream& rng);

/// Same draws as collect_single_trajectory, keeping only the moments.
Moments collect_single_trajectory_moments(const SystemSpec& sys, double sigma_u,
                                          std::size_t num_samples, RandomStream& rng);

/// CSV with header trial,i,x1_1..x1_n,x0_1..x0_n,u0_1..u0_p.
void write_dataset_csv_header(std::ostream& os, std::size_t n, std::size_t p);
void write_dataset_csv_rows(std::ostream& os, const Dataset& data, long trial);
void write_dataset_csv(std::ostream& os, const Dataset& data, long trial = 0);

/// Reads a dataset CSV; dimensions are taken from the header. Rows are
/// grouped by trial in order of first appearance.
std::vector<std::pair<long, Dataset>> read_dataset_csv(std::istream& is);

}  // namespace sysid
