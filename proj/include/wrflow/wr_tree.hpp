#pragma once

#include <map>
#include <vector>

#include "wrflow/operator_core.hpp"
#include "wrflow/word.hpp"

namespace wrflow {

inline constexpr std::size_t kDefaultNodeBudget = 2'000'000;

enum class CachePolicy {
    /// Keep only the ancestors of the most recently requested word.
    PathLocal,
    /// Keep every visited node, up to the node budget.
    Full,
    /// Recompute from the root on every request.
    None,
};

/// Memoized residuals R_w of the WR energy tree. Single-writer: give each
/// worker its own cache. Results never depend on the policy.
class TreeCache {
public:
    TreeCache(PsdOperator root, ProjectionFamily family, CachePolicy policy = CachePolicy::PathLocal,
              std::size_t budget = kDefaultNodeBudget);

    const PsdOperator& root() const noexcept { return root_; }
    const ProjectionFamily& family() const noexcept { return family_; }
    std::size_t m() const noexcept { return family_.size(); }
    Index dim() const noexcept { return root_.dim(); }
    std::size_t budget() const noexcept { return budget_; }
    CachePolicy policy() const noexcept { return policy_; }
    std::size_t cached_nodes() const noexcept;

    /// R_w. Throws BudgetExceeded when a Full cache would grow past budget.
    PsdOperator residual(const Word& w);

    /// Throws BudgetExceeded unless m^depth <= budget.
    void require_level_budget(std::size_t depth) const;

private:
    PsdOperator residual_path_local(const Word& w);
    PsdOperator residual_full(const Word& w);
    PsdOperator residual_uncached(const Word& w) const;

    PsdOperator root_;
    ProjectionFamily family_;
    CachePolicy policy_;
    std::size_t budget_;
    std::vector<PsdOperator> path_; // path_[k] = R_{active|k}
    Word active_;
    std::map<Word, PsdOperator> memo_;
};

PsdOperator node_residual(TreeCache& cache, const Word& w);

/// D_w = R_{w-}^{1/2} P_{last(w)} R_{w-}^{1/2}; throws EmptyWord for w = empty.
PsdOperator node_dissipation(TreeCache& cache, const Word& w);

/// [D_{w1}, ..., D_{wm}]
std::vector<PsdOperator> child_dissipations(TreeCache& cache, const Word& w);

/// |R_0 - R_{w} - sum_{k=1..n} D_{w|k}|_F
double branch_telescoping_defect(TreeCache& cache, const Word& w);

} // namespace wrflow
