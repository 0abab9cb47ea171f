#pragma once

#include <span>
#include <vector>

#include "wrflow/operator_core.hpp"
#include "wrflow/rng.hpp"

namespace wrflow::gen {

Vector random_unit_vector(Index dim, StreamRng& rng);

/// Haar-distributed unitary (QR of a complex Gaussian with phase correction).
Matrix random_unitary(Index dim, StreamRng& rng);

/// Orthogonal projection onto the column span of `basis` (orthonormalized).
Matrix projection_onto(const Matrix& basis);

/// G G* scaled to the given trace, G a dim x rank complex Gaussian.
Matrix random_psd(Index dim, Index rank, double trace, StreamRng& rng);

/// Projection onto a Haar-random subspace of the given rank.
Matrix random_subspace_projection(Index dim, Index rank, StreamRng& rng);

/// Coordinate blocks of near-equal size; sum is the identity. Needs m <= dim.
std::vector<Matrix> coordinate_split(Index dim, std::size_t m);

/// Columns of a random unitary partitioned into m blocks; sum is the identity.
std::vector<Matrix> random_subspace_split(Index dim, std::size_t m, StreamRng& rng);

/// Independent random projections of the given ranks, all orthogonal to a
/// shared random subspace of dimension `blind`.
std::vector<Matrix> random_unstructured(Index dim, std::span<const Index> ranks, Index blind, StreamRng& rng);

} // namespace wrflow::gen
