#include "sysid/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "sysid/estimator.hpp"
#include "sysid/format.hpp"

namespace sysid {

std::vector<std::size_t> fold_boundaries(std::size_t num_samples, std::size_t k) {
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  if (num_samples < k) {
    throw std::invalid_argument("kfold: N = " + std::to_string(num_samples) +
                                " is smaller than k = " + std::to_string(k));
  }
  std::vector<std::size_t> bounds(k + 1, 0);
  const std::size_t base = num_samples / k;
  const std::size_t extra = num_samples % k;
  for (std::size_t f = 0; f < k; ++f) bounds[f + 1] = bounds[f] + base + (f < extra ? 1 : 0);
  return bounds;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(201);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i) / 10.0;
  return grid;
}

CvResult kfold_cv(const Dataset& data, std::span<const double> grid, std::size_t k,
                  std::optional<std::uint64_t> shuffle_seed) {
  if (grid.empty()) throw std::invalid_argument("kfold: lambda grid is empty");
  for (double l : grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw std::invalid_argument("kfold: lambda values must be finite and >= 0");
    }
  }
  const std::size_t num = data.size();
  const auto bounds = fold_boundaries(num, k);

  const Batches all = assemble_batches(data);
  const std::size_t n = all.x.rows();
  const std::size_t d = all.z.rows();

  std::vector<std::size_t> order(num);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) std::shuffle(order.begin(), order.end(), std::mt19937_64(*shuffle_seed));

  // fold_mean[g][f]: mean held-out error norm for grid value g on fold f.
  std::vector<std::vector<double>> fold_mean(grid.size(), std::vector<double>(k, 0.0));
  Vector resid(n);
  for (std::size_t f = 0; f < k; ++f) {
    Matrix xzt(n, d), zzt(d, d);
    for (std::size_t pos = 0; pos < num; ++pos) {
      if (pos >= bounds[f] && pos < bounds[f + 1]) continue;
      const std::size_t i = order[pos];
      for (std::size_t a = 0; a < d; ++a) {
        const double za = all.z(a, i);
        for (std::size_t r = 0; r < n; ++r) xzt(r, a) += all.x(r, i) * za;
        for (std::size_t b = 0; b < d; ++b) zzt(a, b) += za * all.z(b, i);
      }
    }
    const std::size_t train_size = num - (bounds[f + 1] - bounds[f]);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      Estimate est;
      try {
        est = fit_from_moments(xzt, zzt, grid[g], train_size);
      } catch (const RankDeficientDesign&) {
        fold_mean[g][f] = std::numeric_limits<double>::infinity();
        continue;
      }
      double total = 0.0;
      for (std::size_t pos = bounds[f]; pos < bounds[f + 1]; ++pos) {
        const std::size_t i = order[pos];
        for (std::size_t r = 0; r < n; ++r) {
          double pred = 0.0;
          for (std::size_t a = 0; a < d; ++a) pred += est.theta_hat(r, a) * all.z(a, i);
          resid[r] = all.x(r, i) - pred;
        }
        total += norm2(resid);
      }
      fold_mean[g][f] = total / static_cast<double>(bounds[f + 1] - bounds[f]);
    }
  }

  CvResult out;
  out.grid.assign(grid.begin(), grid.end());
  out.scores.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double v : fold_mean[g]) s += v;
    out.scores[g] = s / static_cast<double>(k);
  }
  out.best_score = std::numeric_limits<double>::infinity();
  out.best_lambda = out.grid.front();
  bool found = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double s = out.scores[g];
    if (!found || s < out.best_score || (s == out.best_score && out.grid[g] < out.best_lambda)) {
      out.best_score = s;
      out.best_lambda = out.grid[g];
      found = true;
    }
  }
  return out;
}

void write_cv_csv(std::ostream& os, const CvResult& cv) {
  os << "lambda,score\n";
  for (std::size_t g = 0; g < cv.grid.size(); ++g) {
    os << format_double(cv.grid[g]) << ',' << format_double(cv.scores[g]) << '\n';
  }
}

}  // namespace sysid
