#include "wrflow/branch_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

#include "wrflow/rng.hpp"

namespace wrflow {

const char* to_string(StopReason reason) noexcept
{
    switch (reason) {
    case StopReason::DepthReached: return "depth_reached";
    case StopReason::ResidualBelowTol: return "residual_below_tol";
    case StopReason::DeadAbsorbed: return "dead_absorbed";
    }
    return "unknown";
}

const char* to_string(ProfileMode mode) noexcept
{
    return mode == ProfileMode::Exhaustive ? "exhaustive" : "monte_carlo";
}

namespace {

std::size_t draw_letter(const std::vector<double>& probs, double u)
{
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (probs[j] <= 0.0) continue;
        cum += probs[j];
        last_positive = j;
        if (u < cum) return j;
    }
    return last_positive;
}

std::optional<double> contraction_for(const MeasureSpec& spec, const ProjectionFamily& family)
{
    if (spec.kind == MeasureKind::ResidualBinary) return std::nullopt;
    return family.contraction();
}

} // namespace

BranchSample sample_branch(TreeCache& cache, const MeasureSpec& spec, const SampleOptions& opts,
                           std::uint64_t master_seed, std::uint64_t stream)
{
    if (opts.max_depth < 1)
        throw Error(ErrorKind::InvalidArgument, "max_depth must be at least 1");

    StreamRng rng(master_seed, stream);
    BranchSample out;
    out.kind = spec.kind;
    out.master_seed = master_seed;
    out.stream = stream;
    out.root_scale = spec.scale(cache.root());
    const double stop_at = opts.stop_tol * out.root_scale;

    PsdOperator current = cache.root();
    Word w;
    for (std::size_t k = 0;; ++k) {
        out.traces.push_back(current.trace());
        if (spec.uses_state()) out.energies.push_back(spec.scale(current));
        if (out.values().back() <= stop_at) {
            out.stopped_reason = StopReason::ResidualBelowTol;
            break;
        }

        std::vector<PsdOperator> pieces;
        TransitionDist dist;
        if (spec.kind == MeasureKind::ResidualBinary) {
            dist = transition(cache, spec, w);
        } else {
            pieces = child_dissipations(cache, w);
            dist = transition_from_dissipations(spec, pieces, out.root_scale);
        }
        if (k == opts.max_depth) {
            out.stopped_reason = dist.alive ? StopReason::DepthReached : StopReason::DeadAbsorbed;
            break;
        }

        const auto j = static_cast<Word::Letter>(draw_letter(dist.probs, rng.uniform()) + 1);
        const PsdOperator delta =
            pieces.empty() ? dissipated(current, cache.family()[j - 1u]) : pieces[j - 1u];
        w.push_back(j);
        current = cache.residual(w);

        out.trace_steps.push_back(delta.trace());
        if (spec.uses_state()) out.energy_steps.push_back(spec.scale(delta));
        if (opts.retain_ops) out.dissipated_ops.push_back(delta);
    }
    out.letters = std::move(w);
    return out;
}

std::vector<BranchSample> sample_branches(const PsdOperator& root, const ProjectionFamily& family,
                                          const MeasureSpec& spec, const SampleOptions& opts,
                                          std::uint64_t master_seed, std::size_t n, unsigned threads)
{
    std::vector<BranchSample> out(n);
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));

    auto work = [&](unsigned worker) {
        TreeCache cache(root, family, CachePolicy::PathLocal);
        for (std::size_t i = worker; i < n; i += threads) out[i] = sample_branch(cache, spec, opts, master_seed, i);
    };
    if (threads == 1) {
        work(0);
        return out;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                work(t);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

SampleCheck check_sample(const BranchSample& sample)
{
    SampleCheck check;
    const auto& v = sample.values();
    const auto& steps = sample.step_values();
    const double root = v.empty() ? 0.0 : v.front();
    const double scale = root > 0.0 ? root : 1.0;
    for (std::size_t k = 0; k + 1 < v.size(); ++k)
        check.monotonicity_violation = std::max(check.monotonicity_violation, (v[k + 1] - v[k]) / scale);
    const double dissipated = std::accumulate(steps.begin(), steps.end(), 0.0);
    check.telescoping_defect = v.empty() ? 0.0 : std::abs(v.front() - v.back() - dissipated) / scale;
    return check;
}

// ---------------------------------------------------------------------------
// Exhaustive depth-first traversal of the tree to a fixed depth.

namespace {

struct NodeView {
    const Word& word;
    double weight;
    double value;
    const TransitionDist* dist;                // null at leaves
    const std::vector<double>* child_values;   // null at leaves
    const std::vector<double>* child_dissipated; // spec.scale(D_wj); null at leaves
};

class TreeWalker {
public:
    using Visitor = std::function<void(const NodeView&)>;

    TreeWalker(TreeCache& cache, const MeasureSpec& spec, std::size_t depth, Visitor visit)
        : cache_(cache), spec_(spec), depth_(depth), visit_(std::move(visit)), root_scale_(spec.scale(cache.root()))
    {
    }

    void run()
    {
        Word w;
        descend(w, 1.0, cache_.root());
    }

private:
    double descend(Word& w, double weight, const PsdOperator& r)
    {
        const double value = spec_.scale(r);
        if (w.size() == depth_) {
            visit_(NodeView{w, weight, value, nullptr, nullptr, nullptr});
            return value;
        }
        const std::size_t m = cache_.m();
        std::vector<PsdOperator> pieces;
        pieces.reserve(m);
        for (std::size_t j = 0; j < m; ++j) pieces.push_back(dissipated(r, cache_.family()[j]));
        std::vector<double> child_dissipated(m);
        for (std::size_t j = 0; j < m; ++j) child_dissipated[j] = spec_.scale(pieces[j]);
        const TransitionDist dist = spec_.kind == MeasureKind::ResidualBinary
                                        ? transition(cache_, spec_, w)
                                        : transition_from_dissipations(spec_, pieces, root_scale_);

        std::vector<double> child_values(m);
        for (std::size_t j = 0; j < m; ++j) {
            w.push_back(static_cast<Word::Letter>(j + 1));
            const PsdOperator child = cache_.residual(w);
            child_values[j] = descend(w, weight * dist.probs[j], child);
            w.pop_back();
        }
        visit_(NodeView{w, weight, value, &dist, &child_values, &child_dissipated});
        return value;
    }

    TreeCache& cache_;
    const MeasureSpec& spec_;
    std::size_t depth_;
    Visitor visit_;
    double root_scale_;
};

} // namespace

std::vector<LevelEntry> enumerate_level(TreeCache& cache, const MeasureSpec& spec, std::size_t n)
{
    cache.require_level_budget(n);
    std::vector<LevelEntry> out;
    TreeWalker(cache, spec, n, [&](const NodeView& node) {
        if (node.word.size() == n) out.push_back(LevelEntry{node.word, node.weight, node.value});
    }).run();
    std::sort(out.begin(), out.end(), [](const LevelEntry& a, const LevelEntry& b) { return a.word < b.word; });
    return out;
}

std::vector<LevelStats> level_stats_from_samples(const std::vector<BranchSample>& samples, std::size_t depth,
                                                 std::optional<double> contraction)
{
    if (samples.empty())
        throw Error(ErrorKind::EmptySampleSet, "no samples to aggregate");
    const double root = samples.front().root_scale;
    const auto count = static_cast<double>(samples.size());
    std::vector<LevelStats> out;
    for (std::size_t n = 0; n <= depth; ++n) {
        // Welford: exact for constant columns, stable for long ones.
        double mean = 0.0, m2 = 0.0, k = 0.0;
        for (const auto& s : samples) {
            const double v = s.values()[std::min(n, s.values().size() - 1)];
            k += 1.0;
            const double delta = v - mean;
            mean += delta / k;
            m2 += delta * (v - mean);
        }
        LevelStats st;
        st.n = n;
        st.expected_value = mean;
        st.mode = ProfileMode::MonteCarlo;
        st.n_samples = samples.size();
        st.std_error = samples.size() > 1 ? std::sqrt(m2 / (count - 1.0) / count) : 0.0;
        if (contraction) st.bound = std::pow(*contraction, static_cast<double>(n)) * root;
        out.push_back(st);
    }
    return out;
}

std::vector<LevelStats> expectation_profile(TreeCache& cache, const MeasureSpec& spec, std::size_t depth,
                                            const ProfileOptions& opts)
{
    if (depth < 1)
        throw Error(ErrorKind::InvalidArgument, "profile depth must be at least 1");
    const auto contraction = contraction_for(spec, cache.family());

    if (opts.mode == ProfileMode::MonteCarlo) {
        if (opts.n_samples == 0)
            throw Error(ErrorKind::InvalidArgument, "Monte Carlo profile needs at least one sample");
        // No early stop: a path is only cut once its residual is exactly zero.
        const SampleOptions sample_opts{depth, 0.0, false};
        const auto samples =
            sample_branches(cache.root(), cache.family(), spec, sample_opts, opts.seed, opts.n_samples, opts.threads);
        return level_stats_from_samples(samples, depth, contraction);
    }

    cache.require_level_budget(depth);
    std::vector<double> sums(depth + 1, 0.0);
    TreeWalker(cache, spec, depth, [&](const NodeView& node) {
        sums[node.word.size()] += node.weight * node.value;
    }).run();

    const double root = spec.scale(cache.root());
    std::vector<LevelStats> out;
    for (std::size_t n = 0; n <= depth; ++n) {
        LevelStats st;
        st.n = n;
        st.expected_value = sums[n];
        st.mode = ProfileMode::Exhaustive;
        if (contraction) st.bound = std::pow(*contraction, static_cast<double>(n)) * root;
        out.push_back(st);
    }
    return out;
}

bool profile_contracts(const std::vector<LevelStats>& profile, double contraction, double slack)
{
    for (std::size_t n = 0; n + 1 < profile.size(); ++n)
        if (profile[n + 1].expected_value > contraction * profile[n].expected_value + slack) return false;
    return true;
}

SupermartingaleReport conditional_supermartingale_check(TreeCache& cache, const MeasureSpec& spec,
                                                        std::size_t depth)
{
    cache.require_level_budget(depth + 1);
    SupermartingaleReport report;
    report.root_scale = spec.scale(cache.root());
    report.contraction = contraction_for(spec, cache.family()).value_or(1.0);
    report.max_violation = -std::numeric_limits<double>::infinity();
    report.max_contraction_violation = -std::numeric_limits<double>::infinity();

    TreeWalker(cache, spec, depth + 1, [&](const NodeView& node) {
        if (!node.dist) return;
        double expected = 0.0;
        for (std::size_t j = 0; j < node.child_values->size(); ++j)
            expected += node.dist->probs[j] * (*node.child_values)[j];
        report.max_violation = std::max(report.max_violation, expected - node.value);
        report.max_contraction_violation =
            std::max(report.max_contraction_violation, expected - report.contraction * node.value);
        ++report.nodes_checked;
    }).run();
    return report;
}

EnergyBalance energy_balance_report(TreeCache& cache, const MeasureSpec& spec, std::size_t depth,
                                    const ProfileOptions& opts)
{
    if (spec.kind != MeasureKind::Energy)
        throw Error(ErrorKind::InvalidMeasure, "energy balance needs the energy measure");

    EnergyBalance out;
    out.mode = opts.mode;
    out.root_energy = spec.scale(cache.root());
    std::vector<double> residual(depth + 1, 0.0);
    std::vector<double> dissipation(depth + 1, 0.0);

    if (depth == 0) {
        residual[0] = out.root_energy;
    } else if (opts.mode == ProfileMode::MonteCarlo) {
        if (opts.n_samples == 0)
            throw Error(ErrorKind::InvalidArgument, "Monte Carlo balance needs at least one sample");
        const SampleOptions sample_opts{depth, 0.0, false};
        const auto samples =
            sample_branches(cache.root(), cache.family(), spec, sample_opts, opts.seed, opts.n_samples, opts.threads);
        out.n_samples = samples.size();
        for (const auto& s : samples) {
            for (std::size_t n = 0; n <= depth; ++n) {
                residual[n] += s.energies[std::min(n, s.energies.size() - 1)];
                if (n >= 1 && n - 1 < s.energy_steps.size()) dissipation[n] += s.energy_steps[n - 1];
            }
        }
        for (std::size_t n = 0; n <= depth; ++n) {
            residual[n] /= static_cast<double>(samples.size());
            dissipation[n] /= static_cast<double>(samples.size());
        }
    } else {
        cache.require_level_budget(depth);
        TreeWalker(cache, spec, depth, [&](const NodeView& node) {
            residual[node.word.size()] += node.weight * node.value;
            if (!node.dist) return;
            for (std::size_t j = 0; j < node.child_dissipated->size(); ++j)
                dissipation[node.word.size() + 1] += node.weight * node.dist->probs[j] * (*node.child_dissipated)[j];
        }).run();
    }

    out.dissipated_total = std::accumulate(dissipation.begin(), dissipation.end(), 0.0);
    out.residual_upper = residual[depth];
    out.defect = out.root_energy - out.dissipated_total - out.residual_upper;
    for (std::size_t n = 0; n <= depth; ++n) {
        BalanceLevel level;
        level.n = n;
        level.expected_residual = residual[n];
        level.expected_dissipation = dissipation[n];
        level.tail_rhs = residual[depth];
        for (std::size_t k = n + 1; k <= depth; ++k) level.tail_rhs += dissipation[k];
        level.tail_defect = residual[n] - level.tail_rhs;
        out.levels.push_back(level);
    }
    return out;
}

ExtinctionSummary extinction_stats(const std::vector<BranchSample>& samples, double stop_tol,
                                   std::optional<double> contraction)
{
    if (samples.empty())
        throw Error(ErrorKind::EmptySampleSet, "no samples to summarize");
    ExtinctionSummary out;
    out.n_samples = samples.size();
    std::size_t max_len = 0;
    for (const auto& s : samples) {
        if (s.final_residual() <= stop_tol * s.root_scale) ++out.extinct;
        ++out.depth_histogram[s.depth()];
        max_len = std::max(max_len, s.values().size());
    }
    out.extinct_fraction = static_cast<double>(out.extinct) / static_cast<double>(out.n_samples);

    out.mean_level.assign(max_len, 0.0);
    for (const auto& s : samples)
        for (std::size_t n = 0; n < max_len; ++n) out.mean_level[n] += s.values()[std::min(n, s.values().size() - 1)];
    for (double& v : out.mean_level) v /= static_cast<double>(out.n_samples);

    // Fit only levels resolvable above floating-point noise.
    const double root = samples.front().root_scale;
    const double floor = 1e3 * std::numeric_limits<double>::epsilon() * root;
    std::vector<double> xs, ys;
    for (std::size_t n = 0; n < max_len; ++n) {
        if (out.mean_level[n] > floor) {
            xs.push_back(static_cast<double>(n));
            ys.push_back(std::log(out.mean_level[n]));
        }
    }
    out.fit_levels = xs.size();
    if (xs.size() >= 2) {
        const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        out.rate_slope = sxy / sxx;
    }
    if (contraction && *contraction > 0.0) out.log_contraction = std::log(*contraction);
    return out;
}

} // namespace wrflow
