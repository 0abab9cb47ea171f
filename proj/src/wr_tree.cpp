#include "wrflow/wr_tree.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace wrflow {

TreeCache::TreeCache(PsdOperator root, ProjectionFamily family, CachePolicy policy, std::size_t budget)
    : root_(std::move(root)), family_(std::move(family)), policy_(policy), budget_(budget)
{
    if (family_.dim() != root_.dim())
        throw Error(ErrorKind::DimensionMismatch, "projection family and root operator dimensions differ");
    path_.push_back(root_);
    if (policy_ == CachePolicy::Full) memo_.emplace(Word{}, root_);
}

std::size_t TreeCache::cached_nodes() const noexcept
{
    switch (policy_) {
    case CachePolicy::PathLocal: return path_.size();
    case CachePolicy::Full: return memo_.size();
    case CachePolicy::None: return 1;
    }
    return 0;
}

void TreeCache::require_level_budget(std::size_t depth) const
{
    double count = 1.0;
    for (std::size_t k = 0; k < depth; ++k) {
        count *= static_cast<double>(m());
        if (count > static_cast<double>(budget_))
            throw Error(ErrorKind::BudgetExceeded, std::to_string(m()) + "^" + std::to_string(depth) +
                                                       " nodes exceed budget " + std::to_string(budget_));
    }
}

PsdOperator TreeCache::residual(const Word& w)
{
    w.validate(m());
    switch (policy_) {
    case CachePolicy::PathLocal: return residual_path_local(w);
    case CachePolicy::Full: return residual_full(w);
    case CachePolicy::None: return residual_uncached(w);
    }
    return residual_uncached(w);
}

PsdOperator TreeCache::residual_path_local(const Word& w)
{
    std::size_t common = 0;
    while (common < active_.size() && common < w.size() && active_[common] == w[common]) ++common;
    while (active_.size() > common) {
        active_.pop_back();
        path_.pop_back();
    }
    if (w.size() + 1 > budget_)
        throw Error(ErrorKind::BudgetExceeded, "word length exceeds node budget");
    for (std::size_t k = common; k < w.size(); ++k) {
        path_.push_back(wr_update(path_.back(), family_[w[k] - 1u]));
        active_.push_back(w[k]);
    }
    return path_.back();
}

PsdOperator TreeCache::residual_full(const Word& w)
{
    if (auto it = memo_.find(w); it != memo_.end()) return it->second;
    // Walk down from the deepest cached ancestor.
    std::size_t k = w.size();
    PsdOperator current;
    while (true) {
        --k;
        if (auto it = memo_.find(w.prefix(k)); it != memo_.end()) {
            current = it->second;
            break;
        }
    }
    for (std::size_t i = k; i < w.size(); ++i) {
        if (memo_.size() >= budget_)
            throw Error(ErrorKind::BudgetExceeded, "full tree cache reached " + std::to_string(budget_) + " nodes");
        current = wr_update(current, family_[w[i] - 1u]);
        memo_.emplace(w.prefix(i + 1), current);
    }
    return current;
}

PsdOperator TreeCache::residual_uncached(const Word& w) const
{
    PsdOperator current = root_;
    for (std::size_t i = 0; i < w.size(); ++i) current = wr_update(current, family_[w[i] - 1u]);
    return current;
}

// ---------------------------------------------------------------------------

PsdOperator node_residual(TreeCache& cache, const Word& w)
{
    return cache.residual(w);
}

PsdOperator node_dissipation(TreeCache& cache, const Word& w)
{
    if (w.empty())
        throw Error(ErrorKind::EmptyWord, "the root carries no dissipated piece");
    w.validate(cache.m());
    const PsdOperator parent = cache.residual(w.parent());
    return dissipated(parent, cache.family()[w.last() - 1u]);
}

std::vector<PsdOperator> child_dissipations(TreeCache& cache, const Word& w)
{
    const PsdOperator r = cache.residual(w);
    std::vector<PsdOperator> out;
    out.reserve(cache.m());
    for (std::size_t j = 0; j < cache.m(); ++j) out.push_back(dissipated(r, cache.family()[j]));
    return out;
}

double branch_telescoping_defect(TreeCache& cache, const Word& w)
{
    w.validate(cache.m());
    Matrix acc = cache.root().matrix();
    for (std::size_t k = 1; k <= w.size(); ++k) acc -= node_dissipation(cache, w.prefix(k)).matrix();
    acc -= cache.residual(w).matrix();
    return acc.norm();
}

} // namespace wrflow
