#pragma once

#include <vector>

#include "wrflow/branch_sampler.hpp"

namespace wrflow {

inline constexpr double kDefaultAtomTol = 1e-12;

/// phi = sqrt(lambda) u for one eigenpair of a step's dissipated operator.
struct FrameAtom {
    Vector phi;
    std::size_t step = 0;       // k >= 1
    std::size_t rank_index = 0; // 1-based, by descending eigenvalue within the step
    double lambda = 0.0;
    Word source_word;           // branch prefix of length k
};

struct AtomExtraction {
    std::vector<FrameAtom> atoms;
    double truncated_mass = 0.0; // sum of eigenvalues dropped by the threshold
};

/// One atom per eigenvalue above atom_tol * trace_scale, ordered by
/// descending eigenvalue. Eigenvector phase: largest-magnitude entry real
/// and positive.
AtomExtraction extract_atoms(const PsdOperator& delta, std::size_t step, const Word& w, double atom_tol,
                             double trace_scale);
AtomExtraction extract_atoms(const HermitianOperator& delta, std::size_t step, const Word& w, double atom_tol,
                             double trace_scale);

struct AtomSystem {
    std::vector<FrameAtom> atoms;
    Index dim = 0;
    std::size_t depth = 0;
    PsdOperator root;
    PsdOperator residual_at_stop;
    double residual_trace_at_stop = 0.0;
    double atom_tol = kDefaultAtomTol;
    double truncated_mass = 0.0;
    bool extinct = false; // residual trace <= stop_tol * tr R0
};

/// Atoms of every retained Delta_k along a sampled branch, in step order.
/// Throws OperatorsNotRetained when the branch kept no operators.
AtomSystem branch_atoms(TreeCache& cache, const BranchSample& branch, double atom_tol = kDefaultAtomTol,
                        double stop_tol = kDefaultStopTol);

struct ParsevalDefect {
    double captured = 0.0;      // sum |<x, phi>|^2
    double with_residual = 0.0; // |captured + <x, R_stop x> - <x, R0 x>|
    double pure = 0.0;          // |captured - <x, R0 x>|
    double headline = 0.0;      // pure on extinct branches, with_residual otherwise
    double bound = 0.0;         // (eps_recon * n + truncation) * <x, R0 x>
};

ParsevalDefect parseval_defect(const AtomSystem& system, const Vector& x, const PsdOperator& r0);

/// S = sum |phi><phi|
PsdOperator frame_operator(const AtomSystem& system);

/// |S + R_stop - R0|_F
double frame_operator_defect(const AtomSystem& system);

/// Largest principal angle (radians) between span(atoms) and span(h0).
/// Throws BranchNotExtinct unless the system is extinct.
double span_defect(const AtomSystem& system, const Matrix& h0, double rank_tol = 1e-8);

} // namespace wrflow
