#include "wrflow/path_measures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace wrflow {

const char* to_string(MeasureKind kind) noexcept
{
    switch (kind) {
    case MeasureKind::Energy: return "energy";
    case MeasureKind::Trace: return "trace";
    case MeasureKind::ResidualBinary: return "residual_binary";
    }
    return "unknown";
}

MeasureKind measure_kind_from_string(const std::string& name)
{
    if (name == "energy") return MeasureKind::Energy;
    if (name == "trace") return MeasureKind::Trace;
    if (name == "residual_binary") return MeasureKind::ResidualBinary;
    throw Error(ErrorKind::InvalidMeasure, "unknown measure kind '" + name + "'");
}

MeasureSpec MeasureSpec::energy(Vector x, std::vector<double> q, double dead_tol)
{
    return MeasureSpec{MeasureKind::Energy, std::move(x), std::move(q), dead_tol};
}

MeasureSpec MeasureSpec::trace(std::vector<double> q, double dead_tol)
{
    return MeasureSpec{MeasureKind::Trace, Vector(), std::move(q), dead_tol};
}

MeasureSpec MeasureSpec::residual_binary(Vector x, std::vector<double> q, double dead_tol)
{
    return MeasureSpec{MeasureKind::ResidualBinary, std::move(x), std::move(q), dead_tol};
}

double MeasureSpec::scale(const PsdOperator& r) const
{
    if (!uses_state()) return r.trace();
    if (x.size() != r.dim())
        throw Error(ErrorKind::DimensionMismatch, "state vector dim differs from operator dim");
    return std::max(0.0, quadratic_form(r.matrix(), x));
}

double MeasureSpec::fallback(std::size_t j, std::size_t m) const
{
    return q.empty() ? 1.0 / static_cast<double>(m) : q[j];
}

void MeasureSpec::validate(const TreeCache& cache)
{
    const std::size_t m = cache.m();
    if (dead_tol < 0.0 || !std::isfinite(dead_tol))
        throw Error(ErrorKind::InvalidMeasure, "dead_tol must be a finite nonnegative number");
    if (q.empty()) q.assign(m, 1.0 / static_cast<double>(m));
    if (q.size() != m)
        throw Error(ErrorKind::InvalidMeasure, "fallback vector q needs " + std::to_string(m) + " entries");
    if (std::any_of(q.begin(), q.end(), [](double v) { return !(v >= 0.0); }))
        throw Error(ErrorKind::InvalidMeasure, "fallback vector q has a negative entry");
    const double total = std::accumulate(q.begin(), q.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12)
        throw Error(ErrorKind::InvalidMeasure, "fallback vector q must sum to 1");

    if (kind == MeasureKind::ResidualBinary) {
        if (m != 2)
            throw Error(ErrorKind::ResidualKindNotBinary, "residual measure needs exactly two projections");
        if (!cache.family().splitting())
            throw Error(ErrorKind::ResidualKindNotBinary, "residual measure needs P1 + P2 = I on H0");
    }
    if (uses_state()) {
        if (x.size() != cache.dim())
            throw Error(ErrorKind::DimensionMismatch, "state vector dim differs from operator dim");
        const double root = quadratic_form(cache.root().matrix(), x);
        if (!(root > dead_tol * cache.root().norm() * x.squaredNorm()))
            throw Error(ErrorKind::InvalidMeasure, "state carries no energy at the root: <x, R0 x> = " +
                                                       std::to_string(root));
    }
}

namespace {

void normalize_into(TransitionDist& dist, const MeasureSpec& spec, std::size_t m)
{
    dist.probs.assign(m, 0.0);
    if (dist.alive) {
        const double total = std::accumulate(dist.raw_weights.begin(), dist.raw_weights.end(), 0.0);
        for (std::size_t j = 0; j < m; ++j) dist.probs[j] = dist.raw_weights[j] / total;
    } else {
        for (std::size_t j = 0; j < m; ++j) dist.probs[j] = spec.fallback(j, m);
    }
}

} // namespace

TransitionDist transition(TreeCache& cache, const MeasureSpec& spec, const Word& w)
{
    const std::size_t m = cache.m();
    const double root_scale = spec.scale(cache.root());
    const double cut = spec.dead_tol * root_scale;

    TransitionDist dist;
    dist.raw_weights.assign(m, 0.0);
    if (spec.kind == MeasureKind::ResidualBinary) {
        if (m != 2)
            throw Error(ErrorKind::ResidualKindNotBinary, "residual measure needs exactly two projections");
        const PsdOperator r = cache.residual(w);
        for (std::size_t j = 0; j < m; ++j)
            dist.raw_weights[j] = spec.scale(cache.residual(w.child(static_cast<Word::Letter>(j + 1))));
        const double total = dist.raw_weights[0] + dist.raw_weights[1];
        dist.alive = spec.scale(r) > cut && total > 0.0;
        normalize_into(dist, spec, m);
        return dist;
    }
    const auto pieces = child_dissipations(cache, w);
    return transition_from_dissipations(spec, pieces, root_scale);
}

TransitionDist transition_from_dissipations(const MeasureSpec& spec, std::span<const PsdOperator> pieces,
                                            double root_scale)
{
    if (spec.kind == MeasureKind::ResidualBinary)
        throw Error(ErrorKind::InvalidMeasure, "residual measure transitions need child residuals");
    const std::size_t m = pieces.size();
    TransitionDist dist;
    dist.raw_weights.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) dist.raw_weights[j] = spec.scale(pieces[j]);
    const double total = std::accumulate(dist.raw_weights.begin(), dist.raw_weights.end(), 0.0);
    dist.alive = total > spec.dead_tol * root_scale;
    normalize_into(dist, spec, m);
    return dist;
}

double cylinder_weight(TreeCache& cache, const MeasureSpec& spec, const Word& w)
{
    w.validate(cache.m());
    if (spec.kind == MeasureKind::ResidualBinary) {
        if (cache.m() != 2)
            throw Error(ErrorKind::ResidualKindNotBinary, "residual measure needs exactly two projections");
        return spec.scale(cache.residual(w)) / spec.scale(cache.root());
    }
    double weight = 1.0;
    Word prefix;
    for (std::size_t k = 0; k < w.size() && weight != 0.0; ++k) {
        weight *= transition(cache, spec, prefix).probs[w[k] - 1u];
        prefix.push_back(w[k]);
    }
    return weight;
}

bool is_dead(TreeCache& cache, const MeasureSpec& spec, const Word& w)
{
    return !transition(cache, spec, w).alive;
}

} // namespace wrflow

namespace wrflow {

namespace {

class TransitionMemo {
public:
    TransitionMemo(TreeCache& cache, const MeasureSpec& spec) : cache_(cache), spec_(spec) {}

    const TransitionDist& at(const Word& w)
    {
        auto it = memo_.find(w);
        if (it == memo_.end()) it = memo_.emplace(w, transition(cache_, spec_, w)).first;
        return it->second;
    }

    double weight(const Word& w)
    {
        if (spec_.kind == MeasureKind::ResidualBinary) return cylinder_weight(cache_, spec_, w);
        double out = 1.0;
        for (std::size_t k = 0; k < w.size(); ++k) out *= at(w.prefix(k)).probs[w[k] - 1u];
        return out;
    }

private:
    TreeCache& cache_;
    const MeasureSpec& spec_;
    std::map<Word, TransitionDist> memo_;
};

} // namespace

double cylinder_consistency_defect(TreeCache& cache, const MeasureSpec& spec, std::size_t depth)
{
    if (depth == 0) return 0.0;
    cache.require_level_budget(depth);
    TransitionMemo memo(cache, spec);
    double worst = 0.0;
    std::vector<Word> frontier{Word{}};
    for (std::size_t level = 0; level < depth; ++level) {
        std::vector<Word> next;
        next.reserve(frontier.size() * cache.m());
        for (const Word& w : frontier) {
            const double parent = memo.weight(w);
            double children = 0.0;
            for (std::size_t j = 1; j <= cache.m(); ++j) {
                Word c = w.child(static_cast<Word::Letter>(j));
                children += memo.weight(c);
                next.push_back(std::move(c));
            }
            worst = std::max(worst, std::abs(parent - children));
        }
        frontier = std::move(next);
    }
    return worst;
}

BinaryConjugacyReport binary_conjugacy_check(TreeCache& cache, const MeasureSpec& spec, std::size_t depth)
{
    if (cache.m() != 2)
        throw Error(ErrorKind::ResidualKindNotBinary, "binary identities need exactly two projections");
    if (!spec.uses_state())
        throw Error(ErrorKind::InvalidMeasure, "binary identities need a state vector");
    cache.require_level_budget(depth);

    const MeasureSpec residual_spec = MeasureSpec::residual_binary(spec.x, spec.q, spec.dead_tol);
    const MeasureSpec energy_spec = MeasureSpec::energy(spec.x, spec.q, spec.dead_tol);
    const double root_norm = cache.root().matrix().norm();
    const double root_energy = energy_spec.scale(cache.root());

    BinaryConjugacyReport report;
    std::vector<Word> frontier{Word{}};
    for (std::size_t level = 0; level < depth; ++level) {
        std::vector<Word> next;
        for (const Word& w : frontier) {
            const PsdOperator r = cache.residual(w);
            const Word w1 = w.child(1), w2 = w.child(2);
            const PsdOperator d1 = dissipated(r, cache.family()[0]);
            const PsdOperator d2 = dissipated(r, cache.family()[1]);
            const PsdOperator r1 = cache.residual(w1);
            const PsdOperator r2 = cache.residual(w2);
            const double scale = root_norm > 0.0 ? root_norm : 1.0;
            report.cross_identity = std::max(report.cross_identity, (r1.matrix() - d2.matrix()).norm() / scale);
            report.cross_identity = std::max(report.cross_identity, (r2.matrix() - d1.matrix()).norm() / scale);

            const double mu = cylinder_weight(cache, residual_spec, w);
            const double mu1 = cylinder_weight(cache, residual_spec, w1);
            const double mu2 = cylinder_weight(cache, residual_spec, w2);
            report.residual_additivity = std::max(report.residual_additivity, std::abs(mu - mu1 - mu2));

            const TransitionDist nu = transition(cache, energy_spec, w);
            if (nu.alive && mu * root_energy > energy_spec.dead_tol * root_energy)
                report.conjugacy = std::max(report.conjugacy, std::abs(nu.probs[0] - mu2 / mu));
            ++report.nodes_checked;
            next.push_back(w1);
            next.push_back(w2);
        }
        frontier = std::move(next);
    }
    return report;
}

} // namespace wrflow
