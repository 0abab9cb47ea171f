#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wrflow/branch_sampler.hpp"
#include "wrflow/frame_atoms.hpp"
#include "wrflow/matrix_io.hpp"

namespace wrflow {

struct R0Source {
    enum class Type { Explicit, Identity, IdentityOnSubspace, RandomPsd };
    Type type = Type::Identity;
    Matrix matrix;                     // explicit
    Matrix basis;                      // identity_on_subspace with a given basis
    Index rank = 0;                    // identity_on_subspace (random) / random_psd
    double trace = 1.0;                // random_psd
    std::optional<std::uint64_t> seed; // random sources
};

struct ProjectionSource {
    enum class Type { Explicit, CoordinateSplit, RandomSubspaceSplit, RandomUnstructured };
    Type type = Type::CoordinateSplit;
    std::vector<Matrix> matrices; // explicit
    std::size_t m = 2;
    std::vector<Index> ranks;     // random_unstructured
    Index blind = 0;              // random_unstructured: shared blind directions
    std::optional<std::uint64_t> seed;
};

struct MeasureConfig {
    MeasureKind kind = MeasureKind::Energy;
    std::optional<Vector> x; // absent: random unit vector from the master seed
    std::vector<double> q;   // absent: uniform
    double dead_tol = kDefaultDeadTol;
};

struct ScenarioConfig {
    Index dim = 2;
    R0Source r0;
    ProjectionSource projections;
    MeasureConfig measure;
    std::size_t depth = 4;                  // profile / enumeration depth
    std::optional<std::size_t> max_depth;   // sampling depth cap; defaults to depth
    double stop_tol = kDefaultStopTol;
    ProfileMode mode = ProfileMode::Exhaustive;
    std::size_t samples = 1000;
    std::uint64_t master_seed = 0;
    bool retain_ops = true;
    double atom_tol = kDefaultAtomTol;
    std::size_t probes = 100;
    std::size_t node_budget = kDefaultNodeBudget;

    static ScenarioConfig from_json(const io::Json& doc);
    io::Json to_json() const;

    /// Fills every seed, x and q that was left to defaults so the embedded
    /// config reproduces the run on its own.
    void resolve();
    /// Throws InvalidConfig for inconsistent settings.
    void validate() const;
    std::size_t sampling_depth() const { return max_depth.value_or(depth); }
};

struct Instance {
    PsdOperator r0;
    ProjectionFamily family;
    MeasureSpec spec;
    std::vector<std::string> warnings;
};

/// Builds and validates R0, the projections and the measure.
Instance generate_instance(const ScenarioConfig& cfg);

struct CheckResult {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct ReportBundle {
    std::string command;
    std::string run_id; // hash of the resolved config and command
    io::Json summary;
    std::map<std::string, std::string> files; // file name -> contents, summary.json included
    std::vector<CheckResult> checks;
    bool all_pass = true;
};

struct RunOptions {
    unsigned threads = 1; // never affects results
};

/// Commands: simulate, enumerate, frame, alpha, check.
ReportBundle run_scenario(ScenarioConfig cfg, const std::string& command, const RunOptions& opts = {});

/// Writes every file of the bundle to out_dir/<run_id>/ and returns that path.
std::string write_bundle(const ReportBundle& bundle, const std::string& out_dir);

// CSV renderers for the documented table layouts.
std::string levels_csv(const std::vector<LevelStats>& levels);
std::string samples_csv(const std::vector<BranchSample>& samples, std::size_t m);
std::string balance_csv(const EnergyBalance& balance);
io::Json frame_json(const AtomSystem& system, std::size_t m, std::uint64_t seed, const io::Json& verification);

} // namespace wrflow
