#include "wrflow/generators.hpp"

#include <cmath>
#include <string>

namespace wrflow::gen {

namespace {

Matrix gaussian(Index rows, Index cols, StreamRng& rng)
{
    Matrix g(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) {
            const double re = rng.normal();
            const double im = rng.normal();
            g(i, j) = Complex(re, im) * M_SQRT1_2;
        }
    return g;
}

Matrix orthonormal_columns(const Matrix& a)
{
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
    // Phase-fix against R's diagonal so the distribution is Haar.
    const Matrix r = qr.matrixQR().topLeftCorner(a.cols(), a.cols()).triangularView<Eigen::Upper>();
    for (Index j = 0; j < a.cols(); ++j) {
        const double mag = std::abs(r(j, j));
        if (mag > 0.0) q.col(j) *= r(j, j) / mag;
    }
    return q;
}

void require(bool ok, const std::string& what)
{
    if (!ok) throw Error(ErrorKind::InvalidConfig, what);
}

} // namespace

Vector random_unit_vector(Index dim, StreamRng& rng)
{
    Vector v = gaussian(dim, 1, rng).col(0);
    return v / v.norm();
}

Matrix random_unitary(Index dim, StreamRng& rng)
{
    return orthonormal_columns(gaussian(dim, dim, rng));
}

Matrix projection_onto(const Matrix& basis)
{
    if (basis.cols() == 0) return Matrix::Zero(basis.rows(), basis.rows());
    const Matrix q = orthonormal_columns(basis);
    return hermitian_part(q * q.adjoint());
}

Matrix random_psd(Index dim, Index rank, double trace, StreamRng& rng)
{
    require(rank >= 1 && rank <= dim, "random_psd rank must lie in [1, dim]");
    require(trace > 0.0, "random_psd trace must be positive");
    const Matrix g = gaussian(dim, rank, rng);
    Matrix r = hermitian_part(g * g.adjoint());
    r *= trace / r.trace().real();
    return r;
}

Matrix random_subspace_projection(Index dim, Index rank, StreamRng& rng)
{
    require(rank >= 0 && rank <= dim, "subspace rank must lie in [0, dim]");
    if (rank == 0) return Matrix::Zero(dim, dim);
    return projection_onto(gaussian(dim, rank, rng));
}

std::vector<Matrix> coordinate_split(Index dim, std::size_t m)
{
    require(m >= 1 && static_cast<Index>(m) <= dim, "coordinate_split needs 1 <= m <= dim");
    std::vector<Matrix> out;
    for (std::size_t j = 0; j < m; ++j) {
        const Index lo = static_cast<Index>(j) * dim / static_cast<Index>(m);
        const Index hi = static_cast<Index>(j + 1) * dim / static_cast<Index>(m);
        Matrix p = Matrix::Zero(dim, dim);
        for (Index i = lo; i < hi; ++i) p(i, i) = 1.0;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Matrix> random_subspace_split(Index dim, std::size_t m, StreamRng& rng)
{
    require(m >= 1 && static_cast<Index>(m) <= dim, "random_subspace_split needs 1 <= m <= dim");
    const Matrix u = random_unitary(dim, rng);
    std::vector<Matrix> out;
    for (std::size_t j = 0; j < m; ++j) {
        const Index lo = static_cast<Index>(j) * dim / static_cast<Index>(m);
        const Index hi = static_cast<Index>(j + 1) * dim / static_cast<Index>(m);
        const auto block = u.middleCols(lo, hi - lo);
        out.push_back(hermitian_part(block * block.adjoint()));
    }
    return out;
}

std::vector<Matrix> random_unstructured(Index dim, std::span<const Index> ranks, Index blind, StreamRng& rng)
{
    require(blind >= 0 && blind < dim, "blind dimension must lie in [0, dim)");
    const Matrix u = random_unitary(dim, rng);
    const auto visible = u.rightCols(dim - blind);
    std::vector<Matrix> out;
    for (Index r : ranks) {
        require(r >= 1 && r <= dim - blind, "projection rank must lie in [1, dim - blind]");
        const Matrix basis = visible * gaussian(dim - blind, r, rng);
        out.push_back(projection_onto(basis));
    }
    return out;
}

} // namespace wrflow::gen
