#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "sysid/acquisition.hpp"

namespace sysid {

struct CvResult {
  std::vector<double> grid;
  std::vector<double> scores;  // mean held-out prediction-error norm per grid value
  double best_lambda = 0.0;
  double best_score = 0.0;
};

/// Fold index ranges: k contiguous blocks of floor(N/k), the first N mod k
/// blocks one longer. Returns k+1 boundaries.
std::vector<std::size_t> fold_boundaries(std::size_t num_samples, std::size_t k);

/// Default grid 0, 0.1, ..., 20.
std::vector<double> default_lambda_grid();

/// k-fold cross-validation of the ridge parameter. For each lambda and fold
/// the model is fit on the complement and scored by the mean Euclidean norm
/// of x1 - theta_hat z0 over the held-out triples. A fold whose complement is
/// rank deficient at lambda = 0 scores +inf. Ties pick the smallest lambda.
///
/// `shuffle_seed` permutes the sample order before folding (off by default).
CvResult kfold_cv(const Dataset& data, std::span<const double> grid, std::size_t k,
                  std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// CSV with header lambda,score.
void write_cv_csv(std::ostream& os, const CvResult& cv);

}  // namespace sysid
