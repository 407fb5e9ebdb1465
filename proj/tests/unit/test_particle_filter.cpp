#include <doctest.h>

#include <cmath>
#include <vector>

#include "dualpf/benchmark_models.hpp"
#include "dualpf/oracle.hpp"
#include "dualpf/particle_filter.hpp"
#include "support/models.hpp"

using namespace dualpf;

namespace {

ParticleSet cloud_1d(std::initializer_list<double> xs, std::initializer_list<double> ws, Stage st = Stage::corrected) {
  ParticleSet p;
  p.positions.resize(1, static_cast<Eigen::Index>(xs.size()));
  p.weights.resize(static_cast<Eigen::Index>(ws.size()));
  Eigen::Index i = 0;
  for (double x : xs) p.positions(0, i++) = x;
  i = 0;
  for (double w : ws) p.weights[i++] = w;
  p.stage = st;
  return p;
}

}  // namespace

TEST_CASE("empirical mean") {
  CHECK(empirical_mean(cloud_1d({2.0}, {1.0}))[0] == doctest::Approx(2.0));
  CHECK(empirical_mean(cloud_1d({0.0, 4.0}, {0.5, 0.5}))[0] == doctest::Approx(2.0));
  CHECK(empirical_mean(cloud_1d({1.0, 2.0, 3.0}, {0.2, 0.3, 0.5}))[0] == doctest::Approx(2.3));
}

TEST_CASE("ParticleSet::check enforces the weight invariants") {
  CHECK_NOTHROW(cloud_1d({0.0, 1.0}, {0.5, 0.5}).check());
  CHECK_THROWS(cloud_1d({0.0, 1.0}, {0.5, 0.6}).check());
  CHECK_THROWS(cloud_1d({0.0, 1.0}, {-0.5, 1.5}).check());
}

TEST_CASE("correct: forced normalization arithmetic") {
  const ParticleSet p = cloud_1d({0.0, 1.0}, {0.5, 0.5}, Stage::predicted);
  Vector rho(2);
  rho << 0.2, 0.6;
  const ParticleSet c = correct_with(p, rho);
  CHECK(c.weights[0] == doctest::Approx(0.25));
  CHECK(c.weights[1] == doctest::Approx(0.75));
  CHECK(c.stage == Stage::corrected);
}

TEST_CASE("correct: constant likelihood leaves weights unchanged") {
  const ModelSpec s = testsupport::with_constant_likelihood(testsupport::random_walk(), 0.3);
  const ParticleSet p = cloud_1d({0.0, 1.0, 5.0}, {0.2, 0.3, 0.5}, Stage::predicted);
  const ParticleSet c = correct(p, s, Vector::Zero(1));
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(c.weights[i] == doctest::Approx(p.weights[i]));
}

TEST_CASE("correct: all-zero likelihood diverges") {
  ModelSpec s = testsupport::with_constant_likelihood(testsupport::random_walk(), 0.0);
  const ParticleSet p = cloud_1d({0.0, 1.0}, {0.5, 0.5}, Stage::predicted);
  CHECK_THROWS_AS(correct(p, s, Vector::Zero(1)), FilterDivergence);
}

TEST_CASE("corrected posterior mean matches the grid oracle, N = 1e4") {
  const LinearGaussian1DParams lp;
  const ModelSpec s = make_linear_gaussian_1d(lp);
  const Vector y = Vector::Constant(1, 1.7);
  const std::vector<GridAxis> axes{GridAxis::spanning(-16.0, 16.0, 3201)};
  const GridDistribution prior = GridDistribution::from_density(axes, s.initial_density);
  const double oracle_mean = conditional_mse(grid_correct(prior, s, y)).mean[0];

  Rng rng(4);
  const ParticleSet p = initialize(s, 10000, rng);
  const ParticleSet c = correct(p, s, y);
  const double m = empirical_mean(c)[0];
  double var = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) var += c.weights[i] * std::pow(c.positions(0, i) - m, 2);
  const double se = std::sqrt(var / effective_sample_size(c.weights));
  CHECK(std::abs(m - oracle_mean) < 3.0 * se);
}

TEST_CASE("resample: degenerate and uniform weights") {
  Rng rng(1);
  Vector w = Vector::Zero(5);
  w[0] = 1.0;
  for (auto scheme : {ResamplingScheme::systematic, ResamplingScheme::multinomial})
    for (auto i : resample_indices(w, scheme, rng)) CHECK(i == 0);

  const Vector u = Vector::Constant(6, 1.0 / 6.0);
  auto idx = resample_indices(u, ResamplingScheme::systematic, rng);
  std::sort(idx.begin(), idx.end());
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(idx[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("resample is unbiased for the weighted mean") {
  const ParticleSet p = cloud_1d({-2.0, 0.0, 1.0, 5.0}, {0.1, 0.4, 0.3, 0.2});
  const double target = empirical_mean(p)[0];
  double var = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i) var += p.weights[i] * std::pow(p.positions(0, i) - target, 2);
  FilterConfig cfg;
  Rng rng(8);
  for (auto scheme : {ResamplingScheme::systematic, ResamplingScheme::multinomial}) {
    cfg.resampling = scheme;
    const int reps = 1000;
    double sum = 0.0;
    for (int r = 0; r < reps; ++r) sum += empirical_mean(resample(p, cfg, rng))[0];
    const double diff = std::abs(sum / reps - target);
    // per-cloud spread at most sqrt(var / N), averaged over reps
    CHECK(diff < 3.0 * std::sqrt(var / 4.0) / std::sqrt(static_cast<double>(reps)));
  }
}

TEST_CASE("select: zero threshold accepts at once") {
  const ModelSpec s = testsupport::random_walk();
  Rng rng(3);
  const ParticleSet p = initialize(s, 100, rng);
  FilterConfig cfg;
  cfg.gamma_threshold = 0.0;
  const auto r = select(p, s, Vector::Zero(1), cfg, [&](Rng& g) { return initialize(s, 100, g); }, rng);
  CHECK(r.accepted);
  CHECK(r.redraw_count == 0);
}

TEST_CASE("select: unreachable threshold exhausts redraws and flags the result") {
  const ModelSpec s = testsupport::with_constant_likelihood(testsupport::random_walk(), 0.5);
  Rng rng(3);
  const ParticleSet p = initialize(s, 50, rng);
  FilterConfig cfg;
  cfg.gamma_threshold = 1.0;
  cfg.max_redraws = 7;
  const auto r = select(p, s, Vector::Zero(1), cfg, [&](Rng& g) { return initialize(s, 50, g); }, rng);
  CHECK_FALSE(r.accepted);
  CHECK(r.redraw_count == 7);
  CHECK(r.mean_likelihood == doctest::Approx(0.5));
}

TEST_CASE("select raises acceptance over the selection-free baseline") {
  // prior N(0,1), y far in the tail; a cloud passes when its mean likelihood is high
  const ModelSpec s = testsupport::random_walk(1.0, 0.25);
  const Vector y = Vector::Constant(1, 3.2);
  const std::size_t N = 20;
  FilterConfig sel;
  // median of the mean likelihood of a fresh cloud
  Rng probe(99);
  std::vector<double> mls;
  for (int i = 0; i < 2001; ++i) mls.push_back(mean_likelihood(initialize(s, N, probe), s, y));
  std::nth_element(mls.begin(), mls.begin() + 1000, mls.end());
  sel.gamma_threshold = mls[1000];
  sel.max_redraws = 3;

  Rng rng(5);
  int base = 0, with = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const ParticleSet p = initialize(s, N, rng);
    if (mean_likelihood(p, s, y) > sel.gamma_threshold) ++base;
    const auto r = select(p, s, y, sel, [&](Rng& g) { return initialize(s, N, g); }, rng);
    if (r.accepted) ++with;
  }
  const double pb = base / static_cast<double>(trials), pw = with / static_cast<double>(trials);
  CHECK(pb == doctest::Approx(0.5).epsilon(0.15));
  CHECK(pw > pb + 0.3);
}

TEST_CASE("filter_step: constant likelihood reduces to predict and resample") {
  const ModelSpec s = testsupport::with_constant_likelihood(testsupport::random_walk(0.01), 1.0);
  Rng rng(12);
  ParticleSet p = ParticleSet::uniform(Matrix::Constant(1, 5000, 2.0), Stage::corrected);
  FilterConfig cfg;
  cfg.particle_count = 5000;
  const auto r = filter_step(p, s, Vector::Constant(1, 0.5), Vector::Zero(1), cfg, rng);
  CHECK(empirical_mean(r.cloud)[0] == doctest::Approx(2.5).epsilon(0.01));
  CHECK(r.diagnostics.effective_sample_size == doctest::Approx(5000.0));
  CHECK(r.diagnostics.mean_predicted_likelihood == doctest::Approx(1.0));
}

TEST_CASE("filter_step: sharp observation pins the estimate to the truth") {
  const ModelSpec s = testsupport::random_walk(1.0, 1e-4);
  Rng rng(13);
  FilterConfig cfg;
  cfg.particle_count = 20000;
  auto st = filter_start(s, Vector::Constant(1, 0.3), cfg, rng);
  CHECK(std::abs(empirical_mean(st.cloud)[0] - 0.3) < 0.05);
  st = filter_step(st.cloud, s, Vector::Constant(1, 1.0), Vector::Constant(1, 1.1), cfg, rng);
  CHECK(std::abs(empirical_mean(st.cloud)[0] - 1.1) < 0.05);
  CHECK(st.diagnostics.effective_sample_size == doctest::Approx(20000.0));
}

TEST_CASE("filter_step is deterministic given the stream") {
  const ModelSpec s = make_linear_gaussian_1d({});
  FilterConfig cfg;
  cfg.particle_count = 5000;
  Rng a(44), b(44);
  const auto ra = filter_start(s, Vector::Constant(1, 1.0), cfg, a);
  const auto rb = filter_start(s, Vector::Constant(1, 1.0), cfg, b);
  CHECK(ra.cloud.positions == rb.cloud.positions);
}
