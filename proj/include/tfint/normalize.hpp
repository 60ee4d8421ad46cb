#pragma once

#include "tfint/series.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace tfint {

enum class NormalizeMode { none, size_factor, size_factor_asinh };

std::string_view to_string(NormalizeMode mode);
/// Accepts the CLI spellings none | sf | sf-asinh.
NormalizeMode normalize_mode_from_string(std::string_view s);

/// Which taxa form the size-factor reference.
///
/// all_positive: taxa with a zero anywhere are left out (errors if none
/// remain). positive_counts: every taxon with some positive count enters
/// with log mean sum(log x > 0) / n_samples, and factors are rescaled to a
/// geometric mean of 1; usable on sparse data.
enum class SizeFactorReference { all_positive, positive_counts };

std::string_view to_string(SizeFactorReference r);
/// all-positive | poscounts
SizeFactorReference size_factor_reference_from_string(std::string_view s);

/// Median-of-ratios size factors.
///
/// `factors[i][t]` belongs to subject i, observed column t. Taxa with a zero
/// in any pooled sample get a non-finite reference and are skipped.
struct SizeFactors {
    std::vector<std::vector<double>> factors;
    std::vector<double> reference_log_means;  // per taxon, -inf when excluded
};

SizeFactors size_factors_median_ratios(const InterventionSeriesSet& set);
SizeFactors size_factors_positive_counts(const InterventionSeriesSet& set);

/// Factors for new samples against a previously estimated reference. Zero
/// counts are left out of each sample's median.
SizeFactors size_factors_with_reference(const InterventionSeriesSet& set,
                                        const std::vector<double>& reference_log_means);

/// asinh(x) = ln(x + sqrt(x^2 + 1)).
double asinh_transform(double x);

/// Divides each column by its factor and optionally applies asinh.
InterventionSeriesSet apply_size_factors(const InterventionSeriesSet& set, const SizeFactors& sf,
                                         NormalizeMode mode);

/// Pooled estimate + application in one step. `none` returns the input unchanged.
InterventionSeriesSet apply_normalization(const InterventionSeriesSet& set, NormalizeMode mode,
                                          SizeFactors* estimated = nullptr,
                                          SizeFactorReference reference = SizeFactorReference::all_positive);

/// (sample, factor) rows using the dataset sample naming.
Table size_factor_table(const InterventionSeriesSet& set, const SizeFactors& sf);

}  // namespace tfint
