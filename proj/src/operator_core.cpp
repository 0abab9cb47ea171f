#include "wrflow/operator_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace wrflow {

namespace {

std::string sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

} // namespace

const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NotPsd: return "NotPsd";
    case ErrorKind::NotProjection: return "NotProjection";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyBasis: return "EmptyBasis";
    case ErrorKind::EmptyWord: return "EmptyWord";
    case ErrorKind::InvalidLetter: return "InvalidLetter";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::ResidualKindNotBinary: return "ResidualKindNotBinary";
    case ErrorKind::InvalidMeasure: return "InvalidMeasure";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptySampleSet: return "EmptySampleSet";
    case ErrorKind::OperatorsNotRetained: return "OperatorsNotRetained";
    case ErrorKind::BranchNotExtinct: return "BranchNotExtinct";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

Matrix hermitian_part(const Matrix& m)
{
    return (m + m.adjoint()) * 0.5;
}

double min_eigenvalue(const Matrix& hermitian)
{
    if (hermitian.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(hermitian), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double max_abs_eigenvalue(const Matrix& hermitian)
{
    if (hermitian.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(hermitian), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double quadratic_form(const Matrix& a, const Vector& x)
{
    return x.dot(a * x).real();
}

// ---------------------------------------------------------------------------

HermitianOperator HermitianOperator::from_matrix(const Matrix& m, double tol)
{
    if (m.rows() != m.cols() || m.rows() == 0)
        throw Error(ErrorKind::DimensionMismatch, "operator must be square and nonempty, got " +
                                                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    const double scale = m.norm();
    const double skew = (m - m.adjoint()).norm();
    if (skew > tol * scale)
        throw Error(ErrorKind::NotHermitian, "|M - M*|_F = " + sci(skew) + " exceeds tolerance");
    return HermitianOperator(hermitian_part(m));
}

HermitianOperator HermitianOperator::from_real(const Eigen::MatrixXd& m, double tol)
{
    return from_matrix(m.cast<Complex>(), tol);
}

HermitianOperator HermitianOperator::zero(Index dim)
{
    return HermitianOperator(Matrix::Zero(dim, dim));
}

HermitianOperator HermitianOperator::identity(Index dim)
{
    return HermitianOperator(Matrix::Identity(dim, dim));
}

// ---------------------------------------------------------------------------

PsdOperator validate_psd(const HermitianOperator& m, double tol)
{
    return validate_psd_relative(m, 0.0, tol);
}

PsdOperator validate_psd_relative(const HermitianOperator& m, double ref_norm, double tol)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix());
    if (es.info() != Eigen::Success)
        throw Error(ErrorKind::NotPsd, "eigendecomposition failed");

    Eigen::VectorXd lambda = es.eigenvalues();
    const double norm = lambda.cwiseAbs().maxCoeff();
    // Subnormal entries carry no relative precision.
    const double floor = -std::max(tol * std::max(norm, ref_norm), std::numeric_limits<double>::min());
    if (lambda(0) < floor)
        throw Error(ErrorKind::NotPsd, "eigenvalue " + sci(lambda(0)) + " below " + sci(floor));
    const double dust = tol::kSqrtDust * norm;
    Eigen::VectorXd root(lambda.size());
    for (Index i = 0; i < lambda.size(); ++i) {
        lambda(i) = std::max(lambda(i), 0.0);
        root(i) = lambda(i) > dust ? std::sqrt(lambda(i)) : 0.0;
    }

    const Matrix& u = es.eigenvectors();
    auto data = std::make_shared<PsdOperator::Data>();
    data->matrix = m.matrix();
    data->sqrt = hermitian_part(u * root.asDiagonal() * u.adjoint());
    data->eigenvalues = std::move(lambda);
    data->eigenvectors = u;
    data->trace = data->eigenvalues.sum();
    data->norm = data->eigenvalues.size() ? data->eigenvalues.maxCoeff() : 0.0;

    PsdOperator out;
    out.data_ = std::move(data);
    return out;
}

PsdOperator validate_psd(const Matrix& m, double tol)
{
    return validate_psd(HermitianOperator::from_matrix(m), tol);
}

HermitianOperator validate_projection(const Matrix& p, double tol)
{
    if (p.rows() != p.cols() || p.rows() == 0)
        throw Error(ErrorKind::DimensionMismatch, "projection must be square and nonempty");
    const double scale = std::max(1.0, p.norm());
    const double skew = (p - p.adjoint()).norm();
    const double idem = (p * p - p).norm();
    if (skew > tol * scale || idem > tol * scale)
        throw Error(ErrorKind::NotProjection, "|P^2 - P|_F = " + sci(idem) +
                                                  ", |P - P*|_F = " + sci(skew));
    return HermitianOperator::from_matrix(p, tol);
}

namespace {

void require_same_dim(const PsdOperator& r, const HermitianOperator& p)
{
    if (r.dim() != p.dim())
        throw Error(ErrorKind::DimensionMismatch,
                    "operator dim " + std::to_string(r.dim()) + " vs projection dim " + std::to_string(p.dim()));
}

} // namespace

PsdOperator wr_update(const PsdOperator& r, const HermitianOperator& p)
{
    require_same_dim(r, p);
    const Matrix& s = r.sqrt();
    const Matrix complement = Matrix::Identity(r.dim(), r.dim()) - p.matrix();
    return validate_psd_relative(HermitianOperator::from_matrix(hermitian_part(s * complement * s)), r.norm());
}

PsdOperator dissipated(const PsdOperator& r, const HermitianOperator& p)
{
    require_same_dim(r, p);
    const Matrix& s = r.sqrt();
    return validate_psd_relative(HermitianOperator::from_matrix(hermitian_part(s * p.matrix() * s)), r.norm());
}

SupportBasis energy_support_basis(const PsdOperator& r0, double rank_tol)
{
    SupportBasis out;
    if (r0.is_zero()) {
        out.basis = Matrix(r0.dim(), 0);
        out.zero_operator = true;
        return out;
    }
    const auto& lambda = r0.eigenvalues();
    const double cut = rank_tol * r0.norm();
    std::vector<Index> keep;
    for (Index i = lambda.size() - 1; i >= 0; --i)
        if (lambda(i) > cut) keep.push_back(i);
    out.basis.resize(r0.dim(), static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
        out.basis.col(static_cast<Index>(c)) = r0.eigenvectors().col(keep[c]);
    return out;
}

double leakage_alpha(std::span<const HermitianOperator> projections, const Matrix& h0)
{
    if (h0.cols() == 0)
        throw Error(ErrorKind::EmptyBasis, "energy support is empty");
    Matrix total = Matrix::Zero(h0.rows(), h0.rows());
    for (const auto& p : projections) {
        if (p.dim() != h0.rows())
            throw Error(ErrorKind::DimensionMismatch, "projection and basis dimensions differ");
        total += p.matrix();
    }
    const Matrix compressed = h0.adjoint() * total * h0;
    const double alpha = min_eigenvalue(compressed);
    // Clip fp overshoot so 0 <= alpha <= m holds exactly.
    return std::clamp(alpha, 0.0, static_cast<double>(projections.size()));
}

ProjectionFamily ProjectionFamily::build(std::vector<HermitianOperator> projections, const PsdOperator& r0,
                                         double rank_tol)
{
    if (projections.empty())
        throw Error(ErrorKind::InvalidArgument, "projection family is empty");
    ProjectionFamily fam;
    fam.dim_ = r0.dim();
    for (auto& p : projections) {
        if (p.dim() != fam.dim_)
            throw Error(ErrorKind::DimensionMismatch, "projection dim differs from operator dim");
        validate_projection(p.matrix());
    }
    fam.projections_ = std::move(projections);

    SupportBasis support = energy_support_basis(r0, rank_tol);
    fam.h0_ = std::move(support.basis);
    if (support.zero_operator) {
        // Nothing to leak from: every statement about H0 is vacuous.
        fam.alpha_ = 0.0;
        fam.splitting_ = true;
        return fam;
    }
    fam.alpha_ = leakage_alpha(fam.projections_, fam.h0_);

    Matrix total = Matrix::Zero(fam.dim_, fam.dim_);
    for (const auto& p : fam.projections_) total += p.matrix();
    const Matrix residual = total * fam.h0_ - fam.h0_;
    fam.splitting_defect_ = residual.norm();
    fam.splitting_ = fam.splitting_defect_ <= 1e-10 * std::sqrt(static_cast<double>(fam.h0_.cols()));
    return fam;
}

ProjectionFamily ProjectionFamily::build(const std::vector<Matrix>& projections, const PsdOperator& r0,
                                         double rank_tol)
{
    std::vector<HermitianOperator> validated;
    validated.reserve(projections.size());
    for (const auto& p : projections) validated.push_back(validate_projection(p));
    return build(std::move(validated), r0, rank_tol);
}

} // namespace wrflow
