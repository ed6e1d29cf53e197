#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "sysid/acquisition.hpp"
#include "sysid/estimator.hpp"

using namespace sysid;

namespace {

AcquisitionConfig make_cfg(std::size_t N, double q, Vector m) {
  AcquisitionConfig cfg;
  cfg.num_experiments = N;
  cfg.q = q;
  cfg.m = std::move(m);
  return cfg;
}

Vector unit(std::size_t dim, std::size_t axis, double scale) {
  Vector e(dim, 0.0);
  e[axis] = scale;
  return e;
}

}  // namespace

TEST_CASE("plan_initializations hand traces") {
  SUBCASE("dim 3, N 6") {
    const auto plan = plan_initializations(make_cfg(6, 0.5, {0, 0, 0}), 3);
    REQUIRE(plan.size() == 6);
    CHECK(plan[0] == unit(3, 0, 0.5));
    CHECK(plan[1] == unit(3, 1, 0.5));
    CHECK(plan[2] == unit(3, 2, 0.5));
    CHECK(plan[3] == unit(3, 0, -0.5));
    CHECK(plan[4] == unit(3, 1, -0.5));
    CHECK(plan[5] == unit(3, 2, -0.5));
  }
  SUBCASE("offset center") {
    const auto plan = plan_initializations(make_cfg(2, 1.0, {0.2, 0.2, 0.2}), 3);
    REQUIRE(plan.size() == 2);
    CHECK(plan[0] == Vector{1.2, 0.2, 0.2});
    CHECK(plan[1] == Vector{0.2, 1.2, 0.2});
  }
  SUBCASE("dim 2 sign pattern") {
    const auto plan = plan_initializations(make_cfg(8, 1.0, {0, 0}), 2);
    const double signs[] = {1, 1, -1, -1, 1, 1, -1, -1};
    for (std::size_t i = 0; i < 8; ++i) CHECK(plan[i] == unit(2, i % 2, signs[i]));
  }
  SUBCASE("dim must be at least 2") {
    CHECK_THROWS_AS(plan_initializations(make_cfg(4, 1.0, {0}), 1), std::invalid_argument);
  }
}

TEST_CASE("assumption 2 is checked against the region") {
  AcquisitionConfig cfg = make_cfg(10, 0.5, {0, 0, 0});
  cfg.region = FeasibleRegion::box({-1, -1, -1}, {1, 1, 1});
  CHECK_NOTHROW(cfg.validate(3));
  cfg.region = FeasibleRegion::box({-1, -0.4, -1}, {1, 1, 1});
  try {
    plan_initializations(cfg, 3);
    FAIL("expected a region violation");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("(0, -0.5, 0)") != std::string::npos);
  }
  CHECK_THROWS_AS(FeasibleRegion::box({1, 0}, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(make_cfg(0, 1.0, {0, 0}).validate(2), std::invalid_argument);
  CHECK_THROWS_AS(make_cfg(4, 0.0, {0, 0}).validate(2), std::invalid_argument);
  CHECK_THROWS_AS(make_cfg(4, 1.0, {0, 0}).validate(3), std::invalid_argument);
}

TEST_CASE("design properties") {
  for (std::size_t dim : {2, 3, 5}) {
    for (double q : {0.1, 0.7, 1.0}) {
      Vector m(dim);
      for (std::size_t j = 0; j < dim; ++j) m[j] = 0.05 * static_cast<double>(j + 1) - 0.1;
      for (std::size_t mult : {1, 3, 10}) {
        const std::size_t N = 2 * dim * mult;
        CAPTURE(dim);
        CAPTURE(q);
        CAPTURE(N);
        const auto plan = plan_initializations(make_cfg(N, q, m), dim);
        // Sign cancellation: as many +q as -q offsets on every axis, so the
        // offsets sum to exactly zero.
        std::vector<int> balance(dim, 0);
        for (const auto& z : plan)
          for (std::size_t j = 0; j < dim; ++j) {
            if (z[j] > m[j]) ++balance[j];
            if (z[j] < m[j]) --balance[j];
          }
        for (int v : balance) CHECK(v == 0);
        Vector sum(dim, 0.0);
        for (const auto& z : plan_initializations(make_cfg(N, q, Vector(dim, 0.0)), dim))
          for (std::size_t j = 0; j < dim; ++j) sum[j] += z[j];
        for (double v : sum) CHECK(v == 0.0);
        // l1 budget.
        for (const auto& z : plan) {
          double off = 0.0;
          for (std::size_t j = 0; j < dim; ++j) off += std::abs(z[j] - m[j]);
          CHECK(off == doctest::Approx(q).epsilon(1e-15));
          CHECK(norm1(z) <= norm1(m) + q + 1e-15);
        }
        // Diagonal Gram for m = 0.
        const auto centered = plan_initializations(make_cfg(N, q, Vector(dim, 0.0)), dim);
        Matrix zzt(dim, dim);
        for (const auto& z : centered)
          for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = 0; b < dim; ++b) zzt(a, b) += z[a] * z[b];
        for (std::size_t a = 0; a < dim; ++a)
          for (std::size_t b = 0; b < dim; ++b) {
            const double expect = a == b ? static_cast<double>(N) * q * q / static_cast<double>(dim) : 0.0;
            CHECK(zzt(a, b) == doctest::Approx(expect).epsilon(1e-14));
          }
      }
    }
  }
  CHECK(plan_initializations(make_cfg(7, 0.3, {0.1, 0, 0}), 3) ==
        plan_initializations(make_cfg(7, 0.3, {0.1, 0, 0}), 3));
}

TEST_CASE("collect") {
  SUBCASE("noiseless linear system is exact") {
    const SystemSpec s = builtin("linear2x1").with_noise(NoiseConfig::none());
    RandomStream rng(1);
    const Dataset d = collect(s, make_cfg(12, 1.0, {0.1, -0.2, 0.3}), rng);
    REQUIRE(d.size() == 12);
    REQUIRE(d.ground_truth);
    const Batches b = assemble_batches(d);
    const Matrix tz = mat_mul(s.theta_true(), b.z);
    CHECK(b.x == tz);
    CHECK(max_abs(d.ground_truth->w) == 0.0);
    CHECK(max_abs(d.ground_truth->r) == 0.0);
  }
  SUBCASE("noiseless pendulum first column") {
    const SystemSpec s = builtin("pendulum").with_noise(NoiseConfig::none());
    RandomStream rng(1);
    const Dataset d = collect(s, make_cfg(6, 0.5, {0, 0, 0}), rng);
    CHECK(d.triples[0].x1[0] == 0.5);
    CHECK(d.triples[0].x1[1] == doctest::Approx(-0.98 * std::sin(0.5)).epsilon(1e-15));
    CHECK(d.source == DataSource::algorithm1);
  }
  SUBCASE("batch relation X = theta Z + W + R") {
    const SystemSpec s = builtin("pendulum");
    RandomStream rng(8);
    const Dataset d = collect(s, make_cfg(300, 0.9, {0.1, 0, 0}), rng);
    const Batches b = assemble_batches(d);
    const Matrix rebuilt = mat_mul(s.theta_true(), b.z) + d.ground_truth->w + d.ground_truth->r;
    CHECK(max_abs(rebuilt - b.x) <= 1e-10);
  }
  SUBCASE("perturbed initializations are recorded as realized") {
    const SystemSpec s = builtin("pendulum").with_noise(NoiseConfig::none());
    AcquisitionConfig cfg = make_cfg(9, 0.6, {0, 0, 0});
    cfg.init_perturbation_std = 0.1;
    RandomStream rng(17), replay(17);
    const Dataset d = collect(s, cfg, rng);
    const auto plan = plan_initializations(cfg, 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
      Vector z = plan[i];
      for (double& v : z) v += replay.normal(0.1);
      CHECK(d.triples[i].x0[0] == z[0]);
      CHECK(d.triples[i].x0[1] == z[1]);
      CHECK(d.triples[i].u0[0] == z[2]);
      CHECK(d.triples[i].x1 == s.evaluate(z));
    }
  }
  SUBCASE("equal seeds, equal datasets") {
    const SystemSpec s = builtin("pendulum");
    RandomStream a(5), b(5);
    const Dataset da = collect(s, make_cfg(40, 0.6, {0, 0, 0}), a);
    const Dataset db = collect(s, make_cfg(40, 0.6, {0, 0, 0}), b);
    for (std::size_t i = 0; i < 40; ++i) CHECK(da.triples[i].x1 == db.triples[i].x1);
  }
}

TEST_CASE("moment accumulation matches the dataset path") {
  const SystemSpec s = builtin("pendulum");
  AcquisitionConfig cfg = make_cfg(257, 0.9, {0.1, 0.05, 0});
  cfg.init_perturbation_std = 0.05;
  RandomStream a(3), b(3);
  const Dataset d = collect(s, cfg, a);
  const Moments direct = collect_moments(s, cfg, b);
  const Moments from_data = moments_of(d);
  CHECK(direct.count == 257);
  CHECK(direct.xzt == from_data.xzt);
  CHECK(direct.zzt == from_data.zzt);
  const Batches batches = assemble_batches(d);
  CHECK(max_abs(mul_transpose(batches.z, batches.z) - direct.zzt) <= 1e-12 * max_abs(direct.zzt));

  RandomStream c(4), e(4);
  const Dataset traj = collect_single_trajectory(s, 0.5, 500, c);
  const Moments tm = collect_single_trajectory_moments(s, 0.5, 500, e);
  CHECK(moments_of(traj).xzt == tm.xzt);
  CHECK(moments_of(traj).zzt == tm.zzt);
}

TEST_CASE("collect_single_trajectory") {
  SUBCASE("zero input keeps the pendulum at rest") {
    RandomStream rng(1);
    const Dataset d =
        collect_single_trajectory(builtin("pendulum").with_noise(NoiseConfig::none()), 0.0, 50, rng);
    REQUIRE(d.size() == 50);
    for (const auto& t : d.triples) {
      CHECK(t.x1 == Vector{0, 0});
      CHECK(t.x0 == Vector{0, 0});
      CHECK(t.u0 == Vector{0});
    }
    CHECK(d.source == DataSource::single_trajectory);
  }
  SUBCASE("states chain, linear system exact") {
    const SystemSpec s = builtin("linear2x1").with_noise(NoiseConfig::none());
    RandomStream rng(2);
    const Dataset d = collect_single_trajectory(s, 1.0, 30, rng);
    CHECK(d.triples[0].x0 == Vector{0, 0});
    for (std::size_t k = 0; k < d.size(); ++k) {
      if (k > 0) CHECK(d.triples[k].x0 == d.triples[k - 1].x1);
      const Vector z{d.triples[k].x0[0], d.triples[k].x0[1], d.triples[k].u0[0]};
      const Vector lin = mat_vec(s.theta_true(), z);
      CHECK(d.triples[k].x1[0] == doctest::Approx(lin[0]).epsilon(1e-14));
      CHECK(d.triples[k].x1[1] == doctest::Approx(lin[1]).epsilon(1e-14));
    }
  }
  SUBCASE("strong system diverges") {
    const SystemSpec s = builtin("strong");
    int diverged = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      RandomStream rng(seed);
      try {
        collect_single_trajectory(s, 1.0, 1000, rng);
      } catch (const TrajectoryDiverged& e) {
        ++diverged;
        CHECK(e.step_index() < 1000);
        CHECK(std::string(e.what()).find("diverged") != std::string::npos);
      }
    }
    CHECK(diverged >= 18);
  }
  SUBCASE("argument checks") {
    RandomStream rng(1);
    CHECK_THROWS_AS(collect_single_trajectory(builtin("pendulum"), -1.0, 10, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(collect_single_trajectory(builtin("pendulum"), 1.0, 0, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("dataset csv round trip") {
  const SystemSpec s = builtin("pendulum");
  RandomStream rng(21);
  const Dataset a = collect(s, make_cfg(12, 0.6, {0, 0, 0}), rng);
  const Dataset b = collect_single_trajectory(s, 0.5, 7, rng);
  std::stringstream ss;
  write_dataset_csv_header(ss, 2, 1);
  write_dataset_csv_rows(ss, a, 0);
  write_dataset_csv_rows(ss, b, 3);
  CHECK(ss.str().rfind("trial,i,x1_1,x1_2,x0_1,x0_2,u0_1\n", 0) == 0);
  const auto back = read_dataset_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].first == 0);
  CHECK(back[1].first == 3);
  REQUIRE(back[0].second.size() == 12);
  REQUIRE(back[1].second.size() == 7);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(back[0].second.triples[i].x1 == a.triples[i].x1);
    CHECK(back[0].second.triples[i].x0 == a.triples[i].x0);
    CHECK(back[0].second.triples[i].u0 == a.triples[i].u0);
  }
  for (std::size_t i = 0; i < 7; ++i) CHECK(back[1].second.triples[i].x1 == b.triples[i].x1);

  std::stringstream bad("trial,i,x1_1,x0_1,u0_1\n0,0,1,2\n");
  try {
    read_dataset_csv(bad);
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::stringstream bad_header("x,y\n");
  CHECK_THROWS_AS(read_dataset_csv(bad_header), std::invalid_argument);
}
