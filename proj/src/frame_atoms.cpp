#include "wrflow/frame_atoms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wrflow {

namespace {

void fix_phase(Vector& u)
{
    Index pivot = 0;
    u.cwiseAbs().maxCoeff(&pivot);
    const double mag = std::abs(u(pivot));
    if (mag > 0.0) u *= std::conj(u(pivot)) / mag;
    u(pivot) = Complex(u(pivot).real(), 0.0);
}

} // namespace

AtomExtraction extract_atoms(const PsdOperator& delta, std::size_t step, const Word& w, double atom_tol,
                             double trace_scale)
{
    AtomExtraction out;
    const double cut = atom_tol * trace_scale;
    const auto& lambda = delta.eigenvalues();
    std::size_t r = 0;
    for (Index i = lambda.size() - 1; i >= 0; --i) {
        if (lambda(i) <= cut || lambda(i) <= 0.0) {
            out.truncated_mass += lambda(i);
            continue;
        }
        Vector u = delta.eigenvectors().col(i);
        fix_phase(u);
        FrameAtom atom;
        atom.phi = std::sqrt(lambda(i)) * u;
        atom.step = step;
        atom.rank_index = ++r;
        atom.lambda = lambda(i);
        atom.source_word = w;
        out.atoms.push_back(std::move(atom));
    }
    return out;
}

AtomExtraction extract_atoms(const HermitianOperator& delta, std::size_t step, const Word& w, double atom_tol,
                             double trace_scale)
{
    return extract_atoms(validate_psd(delta), step, w, atom_tol, trace_scale);
}

AtomSystem branch_atoms(TreeCache& cache, const BranchSample& branch, double atom_tol, double stop_tol)
{
    if (!branch.retained_ops())
        throw Error(ErrorKind::OperatorsNotRetained, "branch was sampled without retain_ops");
    AtomSystem sys;
    sys.dim = cache.dim();
    sys.depth = branch.depth();
    sys.root = cache.root();
    sys.atom_tol = atom_tol;
    const double trace_scale = cache.root().trace();
    for (std::size_t k = 1; k <= branch.depth(); ++k) {
        auto step = extract_atoms(branch.dissipated_ops[k - 1], k, branch.letters.prefix(k), atom_tol, trace_scale);
        sys.truncated_mass += step.truncated_mass;
        for (auto& a : step.atoms) sys.atoms.push_back(std::move(a));
    }
    sys.residual_at_stop = cache.residual(branch.letters);
    sys.residual_trace_at_stop = sys.residual_at_stop.trace();
    sys.extinct = sys.residual_trace_at_stop <= stop_tol * trace_scale;
    return sys;
}

ParsevalDefect parseval_defect(const AtomSystem& system, const Vector& x, const PsdOperator& r0)
{
    if (x.size() != r0.dim() || r0.dim() != system.dim)
        throw Error(ErrorKind::DimensionMismatch, "probe, root and atom dimensions must agree");
    ParsevalDefect out;
    for (const auto& a : system.atoms) out.captured += std::norm(a.phi.dot(x));
    const double total = quadratic_form(r0.matrix(), x);
    const double tail = system.residual_at_stop.dim() ? quadratic_form(system.residual_at_stop.matrix(), x) : 0.0;
    out.with_residual = std::abs(out.captured + tail - total);
    out.pure = std::abs(out.captured - total);
    out.headline = system.extinct ? out.pure : out.with_residual;
    out.bound = tol::kRecon * static_cast<double>(system.depth) * std::abs(total) +
                system.truncated_mass * x.squaredNorm();
    return out;
}

PsdOperator frame_operator(const AtomSystem& system)
{
    Matrix s = Matrix::Zero(system.dim, system.dim);
    for (const auto& a : system.atoms) s.noalias() += a.phi * a.phi.adjoint();
    return validate_psd(HermitianOperator::from_matrix(hermitian_part(s)));
}

double frame_operator_defect(const AtomSystem& system)
{
    const Matrix diff = frame_operator(system).matrix() + system.residual_at_stop.matrix() - system.root.matrix();
    return diff.norm();
}

double span_defect(const AtomSystem& system, const Matrix& h0, double rank_tol)
{
    if (!system.extinct)
        throw Error(ErrorKind::BranchNotExtinct,
                    "residual trace " + std::to_string(system.residual_trace_at_stop) + " above stop tolerance");
    if (h0.rows() != system.dim)
        throw Error(ErrorKind::DimensionMismatch, "basis dimension differs from atom dimension");

    const SupportBasis atoms = energy_support_basis(frame_operator(system), rank_tol);
    const Matrix& q = atoms.basis;
    if (q.cols() != h0.cols()) return std::numbers::pi / 2.0;
    if (q.cols() == 0) return 0.0;

    // Equal dimensions: sin(theta_max) = |(I - H H*) Q|_2.
    const Matrix outside = q - h0 * (h0.adjoint() * q);
    Eigen::JacobiSVD<Matrix> svd(outside);
    const double s = std::min(1.0, svd.singularValues()(0));
    return std::asin(s);
}

} // namespace wrflow
