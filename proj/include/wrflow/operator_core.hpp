#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "wrflow/errors.hpp"

namespace wrflow {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

namespace tol {
inline constexpr double kHermitian = 1e-10;  // relative to Frobenius norm
inline constexpr double kProjection = 1e-10; // relative to Frobenius norm
inline constexpr double kPsd = 1e-10;        // relative to operator norm
inline constexpr double kRecon = 1e-8;
inline constexpr double kRank = 1e-12;
// Nonnegative eigenvalues at or below this fraction of the operator norm are
// eigensolver noise and are dropped from the square root.
inline constexpr double kSqrtDust = 1e-14;
} // namespace tol

/// A d x d complex matrix that is Hermitian within tolerance. The stored
/// matrix is the exact Hermitian part of the input.
class HermitianOperator {
public:
    HermitianOperator() = default;

    static HermitianOperator from_matrix(const Matrix& m, double tol = tol::kHermitian);
    static HermitianOperator from_real(const Eigen::MatrixXd& m, double tol = tol::kHermitian);
    static HermitianOperator zero(Index dim);
    static HermitianOperator identity(Index dim);

    const Matrix& matrix() const noexcept { return m_; }
    Index dim() const noexcept { return m_.rows(); }
    double trace() const { return m_.trace().real(); }

private:
    explicit HermitianOperator(Matrix m) : m_(std::move(m)) {}
    Matrix m_;
};

/// Positive semidefinite operator with its spectral data and principal
/// square root computed once at construction. Copies share the immutable
/// payload.
class PsdOperator {
public:
    PsdOperator() = default;

    const Matrix& matrix() const noexcept { return data_->matrix; }
    const Matrix& sqrt() const noexcept { return data_->sqrt; }
    /// Clamped eigenvalues, ascending.
    const Eigen::VectorXd& eigenvalues() const noexcept { return data_->eigenvalues; }
    const Matrix& eigenvectors() const noexcept { return data_->eigenvectors; }
    Index dim() const noexcept { return data_->matrix.rows(); }
    double trace() const noexcept { return data_->trace; }
    double norm() const noexcept { return data_->norm; }
    bool is_zero() const noexcept { return data_->norm == 0.0; }
    HermitianOperator hermitian() const { return HermitianOperator::from_matrix(data_->matrix); }

    friend PsdOperator validate_psd_relative(const HermitianOperator& m, double ref_norm, double tol);

private:
    struct Data {
        Matrix matrix;
        Matrix sqrt;
        Eigen::VectorXd eigenvalues;
        Matrix eigenvectors;
        double trace = 0.0;
        double norm = 0.0;
    };
    std::shared_ptr<const Data> data_;
};

PsdOperator validate_psd(const HermitianOperator& m, double tol = tol::kPsd);
PsdOperator validate_psd(const Matrix& m, double tol = tol::kPsd);
/// As validate_psd, with negative eigenvalues judged against max(|M|, ref_norm).
PsdOperator validate_psd_relative(const HermitianOperator& m, double ref_norm, double tol = tol::kPsd);

/// Checks P^2 = P and P = P* within tol (relative to max(1, |P|_F)).
HermitianOperator validate_projection(const Matrix& p, double tol = tol::kProjection);

/// R^{1/2} (I - P) R^{1/2}
PsdOperator wr_update(const PsdOperator& r, const HermitianOperator& p);

/// R^{1/2} P R^{1/2}
PsdOperator dissipated(const PsdOperator& r, const HermitianOperator& p);

struct SupportBasis {
    Matrix basis;              // orthonormal columns
    bool zero_operator = false; // set when R0 = 0; basis has no columns
};

/// Orthonormal basis of the closed range of R0^{1/2}: eigenvectors with
/// eigenvalue > rank_tol * lambda_max.
SupportBasis energy_support_basis(const PsdOperator& r0, double rank_tol = tol::kRank);

/// Smallest eigenvalue of B^* (sum_j P_j) B.
double leakage_alpha(std::span<const HermitianOperator> projections, const Matrix& h0);

/// Validated projections together with the energy support H0 of a root
/// operator and the leakage constant on it.
class ProjectionFamily {
public:
    ProjectionFamily() = default;

    static ProjectionFamily build(std::vector<HermitianOperator> projections, const PsdOperator& r0,
                                  double rank_tol = tol::kRank);
    static ProjectionFamily build(const std::vector<Matrix>& projections, const PsdOperator& r0,
                                  double rank_tol = tol::kRank);

    Index dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return projections_.size(); }
    const HermitianOperator& operator[](std::size_t i) const { return projections_.at(i); }
    const std::vector<HermitianOperator>& projections() const noexcept { return projections_; }
    double alpha() const noexcept { return alpha_; }
    /// Contraction factor 1 - alpha / m.
    double contraction() const noexcept { return 1.0 - alpha_ / static_cast<double>(projections_.size()); }
    const Matrix& h0_basis() const noexcept { return h0_; }
    /// sum_j P_j = I on H0 within 1e-10.
    bool splitting() const noexcept { return splitting_; }
    double splitting_defect() const noexcept { return splitting_defect_; }

private:
    Index dim_ = 0;
    std::vector<HermitianOperator> projections_;
    Matrix h0_;
    double alpha_ = 0.0;
    bool splitting_ = false;
    double splitting_defect_ = 0.0;
};

// Small numerical helpers shared by the other modules.
double min_eigenvalue(const Matrix& hermitian);
double max_abs_eigenvalue(const Matrix& hermitian);
/// Re <x, A x>
double quadratic_form(const Matrix& a, const Vector& x);
Matrix hermitian_part(const Matrix& m);

} // namespace wrflow
