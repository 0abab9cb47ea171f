#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "wrflow/path_measures.hpp"

namespace wrflow {

enum class StopReason { DepthReached, ResidualBelowTol, DeadAbsorbed };
const char* to_string(StopReason reason) noexcept;

inline constexpr double kDefaultStopTol = 1e-12;

/// One sampled root-to-node path. Index k of energies/traces is the value
/// at depth k; index k-1 of the step vectors belongs to step k.
struct BranchSample {
    Word letters;
    MeasureKind kind = MeasureKind::Trace;
    std::vector<double> energies;     // M_k = <x, R_{w|k} x>; empty for the trace kind
    std::vector<double> traces;       // T_k = tr R_{w|k}
    std::vector<double> energy_steps; // A_k = <x, Delta_k x>
    std::vector<double> trace_steps;  // tr Delta_k
    std::vector<PsdOperator> dissipated_ops;
    std::uint64_t master_seed = 0;
    std::uint64_t stream = 0;
    StopReason stopped_reason = StopReason::DepthReached;
    double root_scale = 0.0;

    std::size_t depth() const noexcept { return letters.size(); }
    /// The scalar the measure is built on: energies for state kinds, traces otherwise.
    const std::vector<double>& values() const noexcept
    {
        return kind == MeasureKind::Trace ? traces : energies;
    }
    const std::vector<double>& step_values() const noexcept
    {
        return kind == MeasureKind::Trace ? trace_steps : energy_steps;
    }
    double final_residual() const { return values().back(); }
    bool retained_ops() const noexcept { return dissipated_ops.size() == letters.size(); }
};

struct SampleOptions {
    std::size_t max_depth = 64;
    double stop_tol = kDefaultStopTol; // relative to the root scale
    bool retain_ops = false;
};

/// Draws letters from the measure's transitions until max_depth or until the
/// residual scale drops to stop_tol * root scale. Deterministic in
/// (master_seed, stream).
BranchSample sample_branch(TreeCache& cache, const MeasureSpec& spec, const SampleOptions& opts,
                           std::uint64_t master_seed, std::uint64_t stream = 0);

/// Samples streams 0..n-1 on `threads` workers, each with a private cache.
/// The result does not depend on the thread count.
std::vector<BranchSample> sample_branches(const PsdOperator& root, const ProjectionFamily& family,
                                          const MeasureSpec& spec, const SampleOptions& opts,
                                          std::uint64_t master_seed, std::size_t n, unsigned threads = 1);

struct SampleCheck {
    double monotonicity_violation = 0.0; // max over k of value_{k+1} - value_k, relative to root
    double telescoping_defect = 0.0;     // |v_0 - v_n - sum steps| / v_0
};
SampleCheck check_sample(const BranchSample& sample);

// ---------------------------------------------------------------------------

struct LevelEntry {
    Word word;
    double probability = 0.0;
    double value = 0.0;
};

/// All m^n words of length n with cylinder weights and M_n (or T_n).
std::vector<LevelEntry> enumerate_level(TreeCache& cache, const MeasureSpec& spec, std::size_t n);

enum class ProfileMode { Exhaustive, MonteCarlo };
const char* to_string(ProfileMode mode) noexcept;

struct ProfileOptions {
    ProfileMode mode = ProfileMode::Exhaustive;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct LevelStats {
    std::size_t n = 0;
    double expected_value = 0.0;
    ProfileMode mode = ProfileMode::Exhaustive;
    std::size_t n_samples = 0;
    double std_error = 0.0;
    std::optional<double> bound; // c^n * root value; absent for the residual kind
};

/// E[M_n] (or E[T_n]) for n = 0..depth.
std::vector<LevelStats> expectation_profile(TreeCache& cache, const MeasureSpec& spec, std::size_t depth,
                                            const ProfileOptions& opts);

/// Monte Carlo level statistics from finished samples; values past a
/// sample's stopping depth are held at its final value.
std::vector<LevelStats> level_stats_from_samples(const std::vector<BranchSample>& samples, std::size_t depth,
                                                 std::optional<double> contraction);

/// True iff E[level n+1] <= c * E[level n] + slack at every level.
bool profile_contracts(const std::vector<LevelStats>& profile, double contraction, double slack);

struct SupermartingaleReport {
    double max_violation = 0.0;             // max_w sum_j p(j|w) v(wj) - v(w)
    double max_contraction_violation = 0.0; // max_w sum_j p(j|w) v(wj) - c v(w)
    std::size_t nodes_checked = 0;
    double root_scale = 0.0;
    double contraction = 1.0;
};

/// Exhaustive check over every word with |w| <= depth.
SupermartingaleReport conditional_supermartingale_check(TreeCache& cache, const MeasureSpec& spec,
                                                        std::size_t depth);

struct BalanceLevel {
    std::size_t n = 0;
    double expected_residual = 0.0;    // E[M_n]
    double expected_dissipation = 0.0; // E[A_n], zero at n = 0
    double tail_rhs = 0.0;             // E[M_depth] + sum_{k=n+1..depth} E[A_k]
    double tail_defect = 0.0;          // E[M_n] - tail_rhs
};

struct EnergyBalance {
    ProfileMode mode = ProfileMode::Exhaustive;
    std::size_t n_samples = 0;
    double root_energy = 0.0;
    double dissipated_total = 0.0;
    /// E[<x, R_inf x>] lies in [0, residual_upper].
    double residual_upper = 0.0;
    double defect = 0.0;
    std::vector<BalanceLevel> levels;
};

EnergyBalance energy_balance_report(TreeCache& cache, const MeasureSpec& spec, std::size_t depth,
                                    const ProfileOptions& opts);

struct ExtinctionSummary {
    std::size_t n_samples = 0;
    std::size_t extinct = 0;
    double extinct_fraction = 0.0;
    std::map<std::size_t, std::size_t> depth_histogram;
    std::vector<double> mean_level;     // padded sample mean of the value per level
    std::optional<double> rate_slope;   // least-squares slope of log mean_level
    std::optional<double> log_contraction;
    std::size_t fit_levels = 0;
};

ExtinctionSummary extinction_stats(const std::vector<BranchSample>& samples, double stop_tol,
                                   std::optional<double> contraction = std::nullopt);

} // namespace wrflow
