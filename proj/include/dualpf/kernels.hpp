#pragma once

// Data-parallel inner loops of the filter and the grid oracle.
//
// Every kernel comes in a serial reference version and an OpenMP version.
// Random kernels draw from one stream per fixed-size chunk of particles, so
// the two versions produce bit-identical output for any thread count.

#include <cstdint>

#include "dualpf/model.hpp"

namespace dualpf::kernels {

/// Particles per random stream.
inline constexpr Eigen::Index kStreamChunk = 2048;

void sample_initial_serial(const ModelSpec& spec, std::uint64_t seed, Matrix& out);
void sample_initial_parallel(const ModelSpec& spec, std::uint64_t seed, Matrix& out);

/// out.col(i) ~ K(., from.col(i), control). `out` must already have the shape of `from`.
void propagate_serial(const ModelSpec& spec, const Matrix& from, VectorView control,
                      std::uint64_t seed, Matrix& out);
void propagate_parallel(const ModelSpec& spec, const Matrix& from, VectorView control,
                        std::uint64_t seed, Matrix& out);

/// Noise-free propagation through transition_mean.
void propagate_mean_serial(const ModelSpec& spec, const Matrix& from, VectorView control, Matrix& out);
void propagate_mean_parallel(const ModelSpec& spec, const Matrix& from, VectorView control, Matrix& out);

/// out[i] = rho(obs, positions.col(i)).
void likelihoods_serial(const ModelSpec& spec, const Matrix& positions, VectorView obs, Vector& out);
void likelihoods_parallel(const ModelSpec& spec, const Matrix& positions, VectorView obs, Vector& out);

/// Quadrature of the Chapman-Kolmogorov integral on a node set:
/// out[t] = sum_s K(targets.col(t), sources.col(s), control) * weights[s].
void grid_transition_serial(const ModelSpec& spec, const Matrix& sources, const Vector& weights,
                            const Matrix& targets, VectorView control, Vector& out);
void grid_transition_parallel(const ModelSpec& spec, const Matrix& sources, const Vector& weights,
                              const Matrix& targets, VectorView control, Vector& out);

/// Index of the first column holding a non-finite entry, or -1.
Eigen::Index first_non_finite_column(const Matrix& m);

}  // namespace dualpf::kernels
