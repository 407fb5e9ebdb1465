#include "dualpf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>

#include <omp.h>

namespace dualpf::kernels {
namespace {

Eigen::Index chunk_count(Eigen::Index n) { return (n + kStreamChunk - 1) / kStreamChunk; }

// Exceptions must not escape an OpenMP region; keep the first one and rethrow after the join.
class ErrorSlot {
 public:
  template <class F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr error_;
};

void sample_initial_chunk(const ModelSpec& spec, std::uint64_t seed, Eigen::Index c, Matrix& out) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
  const Eigen::Index end = std::min(out.cols(), (c + 1) * kStreamChunk);
  for (Eigen::Index i = c * kStreamChunk; i < end; ++i) {
    auto col = out.col(i);
    spec.initial_sample(rng, col);
  }
}

void propagate_chunk(const ModelSpec& spec, const Matrix& from, VectorView control,
                     std::uint64_t seed, Eigen::Index c, Matrix& out) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
  const Eigen::Index end = std::min(from.cols(), (c + 1) * kStreamChunk);
  for (Eigen::Index i = c * kStreamChunk; i < end; ++i) {
    auto col = out.col(i);
    spec.transition_sample(from.col(i), control, rng, col);
  }
}

}  // namespace

void sample_initial_serial(const ModelSpec& spec, std::uint64_t seed, Matrix& out) {
  for (Eigen::Index c = 0; c < chunk_count(out.cols()); ++c) sample_initial_chunk(spec, seed, c, out);
}

void sample_initial_parallel(const ModelSpec& spec, std::uint64_t seed, Matrix& out) {
  const Eigen::Index chunks = chunk_count(out.cols());
  ErrorSlot errors;
#pragma omp parallel for schedule(static) if (chunks > 1)
  for (Eigen::Index c = 0; c < chunks; ++c)
    errors.run([&] { sample_initial_chunk(spec, seed, c, out); });
  errors.rethrow();
}

void propagate_serial(const ModelSpec& spec, const Matrix& from, VectorView control,
                      std::uint64_t seed, Matrix& out) {
  out.resize(from.rows(), from.cols());
  for (Eigen::Index c = 0; c < chunk_count(from.cols()); ++c)
    propagate_chunk(spec, from, control, seed, c, out);
}

void propagate_parallel(const ModelSpec& spec, const Matrix& from, VectorView control,
                        std::uint64_t seed, Matrix& out) {
  out.resize(from.rows(), from.cols());
  const Eigen::Index chunks = chunk_count(from.cols());
  ErrorSlot errors;
#pragma omp parallel for schedule(static) if (chunks > 1)
  for (Eigen::Index c = 0; c < chunks; ++c)
    errors.run([&] { propagate_chunk(spec, from, control, seed, c, out); });
  errors.rethrow();
}

void propagate_mean_serial(const ModelSpec& spec, const Matrix& from, VectorView control, Matrix& out) {
  out.resize(from.rows(), from.cols());
  for (Eigen::Index i = 0; i < from.cols(); ++i) {
    auto col = out.col(i);
    spec.transition_mean(from.col(i), control, col);
  }
}

void propagate_mean_parallel(const ModelSpec& spec, const Matrix& from, VectorView control, Matrix& out) {
  out.resize(from.rows(), from.cols());
  ErrorSlot errors;
#pragma omp parallel for schedule(static) if (from.cols() > kStreamChunk)
  for (Eigen::Index i = 0; i < from.cols(); ++i)
    errors.run([&] {
      auto col = out.col(i);
      spec.transition_mean(from.col(i), control, col);
    });
  errors.rethrow();
}

void likelihoods_serial(const ModelSpec& spec, const Matrix& positions, VectorView obs, Vector& out) {
  out.resize(positions.cols());
  for (Eigen::Index i = 0; i < positions.cols(); ++i) out[i] = spec.likelihood(obs, positions.col(i));
}

void likelihoods_parallel(const ModelSpec& spec, const Matrix& positions, VectorView obs, Vector& out) {
  out.resize(positions.cols());
  ErrorSlot errors;
#pragma omp parallel for schedule(static) if (positions.cols() > kStreamChunk)
  for (Eigen::Index i = 0; i < positions.cols(); ++i)
    errors.run([&] { out[i] = spec.likelihood(obs, positions.col(i)); });
  errors.rethrow();
}

void grid_transition_serial(const ModelSpec& spec, const Matrix& sources, const Vector& weights,
                            const Matrix& targets, VectorView control, Vector& out) {
  out.setZero(targets.cols());
  for (Eigen::Index t = 0; t < targets.cols(); ++t) {
    double acc = 0.0;
    for (Eigen::Index s = 0; s < sources.cols(); ++s)
      if (weights[s] > 0.0) acc += spec.transition_density(targets.col(t), sources.col(s), control) * weights[s];
    out[t] = acc;
  }
}

void grid_transition_parallel(const ModelSpec& spec, const Matrix& sources, const Vector& weights,
                              const Matrix& targets, VectorView control, Vector& out) {
  out.setZero(targets.cols());
  ErrorSlot errors;
#pragma omp parallel for schedule(dynamic, 16) if (targets.cols() * sources.cols() > 65536)
  for (Eigen::Index t = 0; t < targets.cols(); ++t)
    errors.run([&] {
      double acc = 0.0;
      for (Eigen::Index s = 0; s < sources.cols(); ++s)
        if (weights[s] > 0.0) acc += spec.transition_density(targets.col(t), sources.col(s), control) * weights[s];
      out[t] = acc;
    });
  errors.rethrow();
}

Eigen::Index first_non_finite_column(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.cols(); ++i)
    if (!m.col(i).allFinite()) return i;
  return -1;
}

}  // namespace dualpf::kernels
