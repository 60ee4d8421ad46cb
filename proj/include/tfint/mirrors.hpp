#pragma once

#include "tfint/series.hpp"
#include "tfint/transfer.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace tfint {

/// Random halves of the subject list, one pair per split.
struct SplitPlan {
    int n_splits = 25;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> first;
    std::vector<std::vector<std::size_t>> second;
};

/// Split k shuffles subject indices with stream (seed, k); the first
/// floor(n/2) go to the first half.
SplitPlan make_split_plan(std::size_t n_subjects, int n_splits, std::uint64_t seed);

/// Partial dependence of every taxon at each requested lag (J x lags).
///
/// For each training segment of `data` (target index tau, history strictly
/// before tau) the intervention path from tau - Q + 1 onward is replaced by
/// the scenario, and the forecast at horizon h + 1 is differenced between
/// the two scenarios. Scenarios need at least Q + max(lags) columns.
Matrix partial_dependence(const TransferModel& model, const InterventionSeriesSet& data,
                          const InterventionScenario& scenario_on,
                          const InterventionScenario& scenario_off, const std::vector<int>& lags);

/// sign(a*b) * (|a| + |b|) with sign(0) = 0.
Vector mirror_statistics(const Vector& pd1, const Vector& pd2);

/// #{M < -t} / max(1, #{M > t}).
double estimated_fdp(std::span<const double> mirrors, double t);

struct ThresholdResult {
    double threshold = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> selected;  // ascending indices with M > threshold
};

/// Smallest candidate t in {0} U {|M_j|} whose selection {M > t} is nonempty
/// and has estimated FDP <= q. No candidate: empty selection, t = +inf.
ThresholdResult fdp_threshold(std::span<const double> mirrors, double q);

struct MultiSplitResult {
    std::vector<double> inclusion_rates;
    double cutoff = 0.0;
    std::vector<std::size_t> selected;
};

/// Aggregates per-split selections over `n_units` units.
///
/// I_j = (1/n) sum_k 1{j in S_k} / max(1, |S_k|). The cutoff is the largest
/// value c in {0} U {I_j} with sum_{I_j <= c} I_j <= q (ties enter the prefix
/// together); units with I_j > c are selected.
MultiSplitResult multi_split_select(const std::vector<std::vector<std::size_t>>& selections,
                                    std::size_t n_units, double q);

/// Same, starting from per-split mirror vectors.
MultiSplitResult multi_split_select(const std::vector<Vector>& mirrors, double q);

struct SelectOptions {
    FitRecipe recipe;
    double q = 0.2;
    int n_splits = 25;
    std::vector<int> lags{0};
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

struct SplitMirrors {
    Matrix pd1;      // J x lags
    Matrix pd2;
    Matrix mirrors;
    ThresholdResult pooled;   // over units u = lag_index * J + taxon
};

struct MirrorReport {
    std::vector<std::string> taxa_names;
    std::vector<int> lags;
    double q = 0.2;
    SplitPlan plan;
    std::vector<SplitMirrors> splits;
    MultiSplitResult pooled;              // units u = lag_index * J + taxon
    std::vector<MultiSplitResult> per_lag;  // units = taxa, one entry per lag

    std::size_t n_taxa() const { return taxa_names.size(); }
    bool unit_selected(std::size_t taxon, std::size_t lag_index) const;
    /// Taxa selected at any lag (pooled mode).
    std::vector<std::size_t> selected_taxa() const;
    /// Taxa whose unit at lags[lag_index] is selected (pooled mode).
    std::vector<std::size_t> selected_taxa_at(std::size_t lag_index) const;
};

/// Mirror-statistic selection of intervention-affected taxa. Normalizes the
/// counts per recipe once, then for every split fits one model per half and
/// forms mirrors from the two halves' partial dependences.
MirrorReport select_taxa(const InterventionSeriesSet& set, const InterventionScenario& scenario_on,
                         const InterventionScenario& scenario_off, const SelectOptions& options);

/// Tables for export: mirrors (split, taxon, lag, pd1, pd2, m) and
/// selection (taxon, lag, inclusion_rate, selected).
Table mirrors_table(const MirrorReport& report);
Table selection_table(const MirrorReport& report);
Table per_lag_selection_table(const MirrorReport& report);

}  // namespace tfint
