#include "tfint/normalize.hpp"

#include "tfint/csv_io.hpp"
#include "tfint/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tfint {

std::string_view to_string(NormalizeMode mode) {
    switch (mode) {
    case NormalizeMode::none: return "none";
    case NormalizeMode::size_factor: return "sf";
    case NormalizeMode::size_factor_asinh: return "sf-asinh";
    }
    return "none";
}

NormalizeMode normalize_mode_from_string(std::string_view s) {
    if (s == "none") return NormalizeMode::none;
    if (s == "sf" || s == "size_factor") return NormalizeMode::size_factor;
    if (s == "sf-asinh" || s == "size_factor_asinh") return NormalizeMode::size_factor_asinh;
    throw ValidationError("bad_normalize", "unknown normalization '" + std::string(s) + "'");
}

std::string_view to_string(SizeFactorReference r) {
    return r == SizeFactorReference::all_positive ? "all-positive" : "poscounts";
}

SizeFactorReference size_factor_reference_from_string(std::string_view s) {
    if (s == "all-positive") return SizeFactorReference::all_positive;
    if (s == "poscounts") return SizeFactorReference::positive_counts;
    throw ValidationError("bad_sf_reference", "unknown size-factor reference '" + std::string(s) + "'");
}

namespace {

double median_in_place(std::vector<double>& v) {
    const auto n = v.size();
    const auto mid = v.begin() + static_cast<long>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) {
        return *mid;
    }
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return (lo + hi) / 2.0;
}

void require_counts(const InterventionSeriesSet& set) {
    if (set.scale_tag != ScaleTag::counts) {
        throw ValidationError("already_normalized",
                              "data are already on the '" + std::string(to_string(set.scale_tag)) +
                                  "' scale; size factors need counts");
    }
}

}  // namespace

SizeFactors size_factors_median_ratios(const InterventionSeriesSet& set) {
    require_counts(set);
    const std::size_t J = set.n_taxa();
    std::vector<double> log_sum(J, 0.0);
    std::vector<bool> positive(J, true);
    std::size_t n_samples = 0;
    for (const auto& s : set.subjects) {
        for (Eigen::Index t = 0; t < s.abundances.cols(); ++t) {
            ++n_samples;
            for (std::size_t j = 0; j < J; ++j) {
                const double c = s.abundances(static_cast<Eigen::Index>(j), t);
                if (c > 0) {
                    log_sum[j] += std::log(c);
                } else {
                    positive[j] = false;
                }
            }
        }
    }
    std::vector<double> ref(J, -std::numeric_limits<double>::infinity());
    bool any = false;
    for (std::size_t j = 0; j < J; ++j) {
        if (positive[j] && n_samples > 0) {
            ref[j] = log_sum[j] / static_cast<double>(n_samples);
            any = true;
        }
    }
    if (!any) {
        throw DataError("no_positive_taxon",
                        "every taxon has a zero count in some sample; filter sparse taxa or use the poscounts reference");
    }
    return size_factors_with_reference(set, ref);
}

SizeFactors size_factors_positive_counts(const InterventionSeriesSet& set) {
    require_counts(set);
    const std::size_t J = set.n_taxa();
    std::vector<double> log_sum(J, 0.0);
    std::vector<bool> seen(J, false);
    std::size_t n_samples = 0;
    for (const auto& s : set.subjects) {
        for (Eigen::Index t = 0; t < s.abundances.cols(); ++t) {
            ++n_samples;
            for (std::size_t j = 0; j < J; ++j) {
                const double c = s.abundances(static_cast<Eigen::Index>(j), t);
                if (c > 0) {
                    log_sum[j] += std::log(c);
                    seen[j] = true;
                }
            }
        }
    }
    std::vector<double> ref(J, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < J; ++j) {
        if (seen[j]) ref[j] = log_sum[j] / static_cast<double>(n_samples);
    }
    auto sf = size_factors_with_reference(set, ref);
    double mean_log = 0.0;
    for (const auto& row : sf.factors)
        for (double f : row) mean_log += std::log(f);
    mean_log /= static_cast<double>(n_samples);
    // shifting the reference keeps later size_factors_with_reference calls consistent
    for (auto& r : ref)
        if (std::isfinite(r)) r += mean_log;
    return size_factors_with_reference(set, ref);
}

SizeFactors size_factors_with_reference(const InterventionSeriesSet& set,
                                        const std::vector<double>& reference_log_means) {
    require_counts(set);
    if (reference_log_means.size() != set.n_taxa()) {
        throw ValidationError("reference_mismatch", "reference has the wrong number of taxa");
    }
    SizeFactors sf;
    sf.reference_log_means = reference_log_means;
    std::vector<double> ratios;
    for (const auto& s : set.subjects) {
        std::vector<double> col_factors;
        for (Eigen::Index t = 0; t < s.abundances.cols(); ++t) {
            ratios.clear();
            for (std::size_t j = 0; j < set.n_taxa(); ++j) {
                const double c = s.abundances(static_cast<Eigen::Index>(j), t);
                const double r = reference_log_means[j];
                if (std::isfinite(r) && c > 0) {
                    ratios.push_back(std::log(c) - r);
                }
            }
            if (ratios.empty()) {
                throw DataError("empty_sample", "sample '" + s.subject_id + "_" + std::to_string(t) +
                                                    "' has no positive counts among reference taxa");
            }
            col_factors.push_back(std::exp(median_in_place(ratios)));
        }
        sf.factors.push_back(std::move(col_factors));
    }
    return sf;
}

double asinh_transform(double x) { return std::log(x + std::sqrt(x * x + 1.0)); }

InterventionSeriesSet apply_size_factors(const InterventionSeriesSet& set, const SizeFactors& sf,
                                         NormalizeMode mode) {
    if (mode == NormalizeMode::none) {
        return set;
    }
    require_counts(set);
    if (sf.factors.size() != set.subjects.size()) {
        throw ValidationError("factor_mismatch", "size factors do not match the subjects");
    }
    InterventionSeriesSet out = set;
    for (std::size_t i = 0; i < out.subjects.size(); ++i) {
        auto& y = out.subjects[i].abundances;
        if (sf.factors[i].size() != static_cast<std::size_t>(y.cols())) {
            throw ValidationError("factor_mismatch", "size factors do not match subject columns");
        }
        for (Eigen::Index t = 0; t < y.cols(); ++t) {
            y.col(t) /= sf.factors[i][static_cast<std::size_t>(t)];
        }
        if (mode == NormalizeMode::size_factor_asinh) {
            y = y.unaryExpr([](double x) { return asinh_transform(x); });
        }
    }
    out.scale_tag = mode == NormalizeMode::size_factor ? ScaleTag::normalized : ScaleTag::normalized_asinh;
    return out;
}

InterventionSeriesSet apply_normalization(const InterventionSeriesSet& set, NormalizeMode mode,
                                          SizeFactors* estimated, SizeFactorReference reference) {
    if (mode == NormalizeMode::none) {
        return set;
    }
    auto sf = reference == SizeFactorReference::all_positive ? size_factors_median_ratios(set)
                                                             : size_factors_positive_counts(set);
    auto out = apply_size_factors(set, sf, mode);
    if (estimated) {
        *estimated = std::move(sf);
    }
    return out;
}

Table size_factor_table(const InterventionSeriesSet& set, const SizeFactors& sf) {
    Table t;
    t.header = {"sample", "factor"};
    for (std::size_t i = 0; i < set.subjects.size(); ++i) {
        for (std::size_t k = 0; k < sf.factors.at(i).size(); ++k) {
            t.rows.push_back({set.subjects[i].subject_id + "_" + std::to_string(k), format_double(sf.factors[i][k])});
        }
    }
    return t;
}

}  // namespace tfint
