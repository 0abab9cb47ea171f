#pragma once

#include <span>
#include <string>
#include <vector>

#include "wrflow/wr_tree.hpp"

namespace wrflow {

enum class MeasureKind {
    Energy,         // transitions proportional to <x, D_wj x>
    Trace,          // transitions proportional to tr D_wj
    ResidualBinary, // m = 2 splitting; cylinder weight <x, R_w x> / <x, R_0 x>
};

const char* to_string(MeasureKind kind) noexcept;
MeasureKind measure_kind_from_string(const std::string& name);

inline constexpr double kDefaultDeadTol = 1e-14;

struct MeasureSpec {
    MeasureKind kind = MeasureKind::Trace;
    Vector x;              // probe state; unused by the trace kind
    std::vector<double> q; // dead-node fallback; empty means uniform
    double dead_tol = kDefaultDeadTol;

    static MeasureSpec energy(Vector x, std::vector<double> q = {}, double dead_tol = kDefaultDeadTol);
    static MeasureSpec trace(std::vector<double> q = {}, double dead_tol = kDefaultDeadTol);
    static MeasureSpec residual_binary(Vector x, std::vector<double> q = {}, double dead_tol = kDefaultDeadTol);

    bool uses_state() const noexcept { return kind != MeasureKind::Trace; }

    /// Checks q, x and the kind against the cache's instance; fills a uniform
    /// q when absent. Throws InvalidMeasure, DimensionMismatch or
    /// ResidualKindNotBinary.
    void validate(const TreeCache& cache);

    /// <x, R x> for state kinds, tr R for the trace kind.
    double scale(const PsdOperator& r) const;
    /// Fallback probability for letter j (0-based), uniform when q is empty.
    double fallback(std::size_t j, std::size_t m) const;
};

struct TransitionDist {
    std::vector<double> probs;
    std::vector<double> raw_weights;
    bool alive = false;
};

TransitionDist transition(TreeCache& cache, const MeasureSpec& spec, const Word& w);

/// Energy/trace transition from precomputed [D_w1..D_wm]; root_scale is
/// spec.scale(R_0).
TransitionDist transition_from_dissipations(const MeasureSpec& spec, std::span<const PsdOperator> pieces,
                                            double root_scale);

/// nu([w]) for energy/trace kinds (product of transitions along the prefix
/// chain); mu_x([w]) in closed form for the residual kind.
double cylinder_weight(TreeCache& cache, const MeasureSpec& spec, const Word& w);

bool is_dead(TreeCache& cache, const MeasureSpec& spec, const Word& w);

/// max over |w| < depth of |nu([w]) - sum_j nu([wj])|, each weight evaluated
/// from its own prefix chain.
double cylinder_consistency_defect(TreeCache& cache, const MeasureSpec& spec, std::size_t depth);

struct BinaryConjugacyReport {
    double cross_identity = 0.0;   // max |R_w1 - D_w2|_F, |R_w2 - D_w1|_F over |w| < depth, / |R0|_F
    double residual_additivity = 0.0; // max |mu([w]) - mu([w1]) - mu([w2])|
    double conjugacy = 0.0;        // max |p_x(1|w) - mu([w2]) / mu([w])| over alive w
    std::size_t nodes_checked = 0;
};

/// Binary splitting identities to the given depth; spec supplies x and must
/// be the energy or residual kind.
BinaryConjugacyReport binary_conjugacy_check(TreeCache& cache, const MeasureSpec& spec, std::size_t depth);

} // namespace wrflow
