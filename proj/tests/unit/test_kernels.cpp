#include <doctest.h>

#include <cmath>

#include "dualpf/benchmark_models.hpp"
#include "dualpf/kernels.hpp"
#include "dualpf/tan_model.hpp"
#include "dualpf/terrain.hpp"
#include "support/models.hpp"

using namespace dualpf;

namespace {

TanModel tan_on(TerrainMap map, TanParams p = {}) {
  return build_tan_model(std::make_shared<TerrainMap>(std::move(map)), p);
}

}  // namespace

TEST_CASE("serial and parallel kernels agree bit for bit") {
  const TanModel m = tan_on(make_two_hill_terrain(TerrainFootprint{}, TwoHillSpec{}));
  const Eigen::Index n = 3 * kernels::kStreamChunk + 17;
  Matrix a(6, n), b(6, n);
  kernels::sample_initial_serial(m.spec, 9, a);
  kernels::sample_initial_parallel(m.spec, 9, b);
  CHECK(a == b);

  Vector u(3);
  u << 0.3, -0.2, 0.1;
  Matrix pa, pb;
  kernels::propagate_serial(m.spec, a, u, 21, pa);
  kernels::propagate_parallel(m.spec, a, u, 21, pb);
  CHECK(pa == pb);

  Matrix ma, mb;
  kernels::propagate_mean_serial(m.spec, a, u, ma);
  kernels::propagate_mean_parallel(m.spec, a, u, mb);
  CHECK(ma == mb);

  Vector y(4);
  m.spec.observation_mean(a.col(0), y);
  Vector la, lb;
  kernels::likelihoods_serial(m.spec, pa, y, la);
  kernels::likelihoods_parallel(m.spec, pa, y, lb);
  CHECK(la == lb);
}

TEST_CASE("grid transition: serial and parallel agree") {
  const ModelSpec s = make_linear_gaussian_1d({});
  Matrix nodes(1, 301);
  for (Eigen::Index i = 0; i < 301; ++i) nodes(0, i) = -15.0 + 0.1 * static_cast<double>(i);
  const Vector w = Vector::Constant(301, 1.0 / 301.0);
  Vector a, b;
  kernels::grid_transition_serial(s, nodes, w, nodes, s.zero_control(), a);
  kernels::grid_transition_parallel(s, nodes, w, nodes, s.zero_control(), b);
  CHECK(a == b);
}

TEST_CASE("zero-noise propagation shifts particles") {
  const ModelSpec s = testsupport::shift_model(1.0);
  Matrix from(1, 2);
  from << 0.0, 1.0;
  Matrix out;
  kernels::propagate_serial(s, from, s.zero_control(), 3, out);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 2.0);
}

TEST_CASE("TAN with Q = 0 integrates position by velocity") {
  TanParams p;
  p.Q.setZero();
  const TanModel m = tan_on(make_flat_terrain(TerrainFootprint{}), p);
  Matrix from(6, 1);
  from << 10.0, -4.0, 50.0, 1.5, -2.0, 0.5;
  Matrix out;
  kernels::propagate_serial(m.spec, from, m.spec.zero_control(), 1, out);
  CHECK(out(0, 0) == doctest::Approx(11.5));
  CHECK(out(1, 0) == doctest::Approx(-6.0));
  CHECK(out(2, 0) == doctest::Approx(50.5));
  CHECK(out.bottomRows(3) == from.bottomRows(3));
}

TEST_CASE("propagated variance from a Dirac matches the kernel variance") {
  const double q = 2.5;
  const ModelSpec s = testsupport::random_walk(q);
  const Eigen::Index n = 100000;
  const Matrix from = Matrix::Zero(1, n);
  Matrix out;
  kernels::propagate_parallel(s, from, s.zero_control(), 77, out);
  const double mean = out.mean();
  const double var = (out.array() - mean).square().sum() / static_cast<double>(n - 1);
  // sd of the sample variance of a Gaussian: q sqrt(2 / (n - 1))
  CHECK(std::abs(var - q) < 3.0 * q * std::sqrt(2.0 / static_cast<double>(n - 1)));
}

TEST_CASE("first_non_finite_column") {
  Matrix m = Matrix::Zero(2, 4);
  CHECK(kernels::first_non_finite_column(m) == -1);
  m(1, 2) = std::nan("");
  CHECK(kernels::first_non_finite_column(m) == 2);
}
