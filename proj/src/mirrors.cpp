#include "tfint/mirrors.hpp"

#include "tfint/csv_io.hpp"
#include "tfint/error.hpp"
#include "tfint/parallel.hpp"
#include "tfint/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tfint {

SplitPlan make_split_plan(std::size_t n_subjects, int n_splits, std::uint64_t seed) {
    if (n_splits < 1) {
        throw ValidationError("bad_splits", "need at least one split");
    }
    SplitPlan plan;
    plan.n_splits = n_splits;
    plan.seed = seed;
    for (int k = 0; k < n_splits; ++k) {
        std::vector<std::size_t> idx(n_subjects);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng rng = make_stream(seed, {static_cast<std::uint64_t>(k)});
        shuffle(idx.begin(), idx.end(), rng);
        const auto half = static_cast<long>(n_subjects / 2);
        std::vector<std::size_t> a(idx.begin(), idx.begin() + half);
        std::vector<std::size_t> b(idx.begin() + half, idx.end());
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        plan.first.push_back(std::move(a));
        plan.second.push_back(std::move(b));
    }
    return plan;
}

Matrix partial_dependence(const TransferModel& model, const InterventionSeriesSet& data,
                          const InterventionScenario& scenario_on,
                          const InterventionScenario& scenario_off, const std::vector<int>& lags) {
    if (lags.empty()) {
        throw ValidationError("bad_lag", "need at least one lag");
    }
    int max_lag = 0;
    for (int h : lags) {
        if (h < 0) throw ValidationError("bad_lag", "lags must be >= 0");
        max_lag = std::max(max_lag, h);
    }
    const Eigen::Index L = model.Q + max_lag;
    const auto D = static_cast<Eigen::Index>(model.intervention_names.size());
    for (const auto* sc : {&scenario_on, &scenario_off}) {
        if (sc->values.rows() != D) {
            throw ValidationError("shape_mismatch", "scenario '" + sc->label + "' has the wrong number of channels");
        }
        if (sc->values.cols() < L) {
            throw ValidationError("scenario_too_short", "scenario '" + sc->label + "' needs at least Q + max lag = " +
                                                            std::to_string(L) + " columns");
        }
    }
    if (data.subjects.empty()) {
        throw ValidationError("empty_split", "partial dependence over an empty subject set");
    }

    const int H = max_lag + 1;
    const auto J = static_cast<Eigen::Index>(model.n_taxa());
    Matrix total = Matrix::Zero(J, H);
    std::size_t n_segments = 0;
    for (const auto& s : data.subjects) {
        for (auto target : segment_targets(s.n_observed(), model.P)) {
            const auto tau = static_cast<Eigen::Index>(target);
            const Eigen::Index start = tau - model.Q + 1;
            const Eigen::Index width = std::max<Eigen::Index>(tau + H, start + L);
            Matrix w_on = Matrix::Zero(D, width);
            const Eigen::Index keep = std::min<Eigen::Index>(std::max<Eigen::Index>(start, 0), s.interventions.cols());
            w_on.leftCols(keep) = s.interventions.leftCols(keep);
            Matrix w_off = w_on;
            for (Eigen::Index c = std::max<Eigen::Index>(start, 0); c < start + L; ++c) {
                w_on.col(c) = scenario_on.values.col(c - start);
                w_off.col(c) = scenario_off.values.col(c - start);
            }
            const Matrix history = s.abundances.leftCols(tau);
            total += forecast(model, history, w_on, s.covariates, H) - forecast(model, history, w_off, s.covariates, H);
            ++n_segments;
        }
    }
    if (n_segments == 0) {
        throw ValidationError("empty_split", "no segments available for partial dependence");
    }
    Matrix out(J, static_cast<Eigen::Index>(lags.size()));
    for (std::size_t k = 0; k < lags.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = total.col(lags[k]) / static_cast<double>(n_segments);
    }
    return out;
}

Vector mirror_statistics(const Vector& pd1, const Vector& pd2) {
    if (pd1.size() != pd2.size()) {
        throw ValidationError("shape_mismatch", "partial dependence vectors differ in length");
    }
    Vector m(pd1.size());
    for (Eigen::Index j = 0; j < m.size(); ++j) {
        const double sign = (pd1(j) == 0.0 || pd2(j) == 0.0) ? 0.0 : (std::signbit(pd1(j)) == std::signbit(pd2(j)) ? 1.0 : -1.0);
        m(j) = sign * (std::abs(pd1(j)) + std::abs(pd2(j)));
    }
    return m;
}

double estimated_fdp(std::span<const double> mirrors, double t) {
    std::size_t pos = 0, neg = 0;
    for (double m : mirrors) {
        if (m > t) ++pos;
        if (m < -t) ++neg;
    }
    return static_cast<double>(neg) / static_cast<double>(std::max<std::size_t>(1, pos));
}

ThresholdResult fdp_threshold(std::span<const double> mirrors, double q) {
    if (!(q > 0.0 && q < 1.0)) {
        throw ValidationError("bad_q", "target FDR q must lie in (0, 1)");
    }
    std::vector<double> positive, negative, candidates{0.0};
    for (double m : mirrors) {
        if (m > 0) positive.push_back(m);
        if (m < 0) negative.push_back(-m);
        candidates.push_back(std::abs(m));
    }
    std::sort(positive.begin(), positive.end());
    std::sort(negative.begin(), negative.end());
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    ThresholdResult out;
    for (double t : candidates) {
        const auto pos = static_cast<std::size_t>(positive.end() - std::upper_bound(positive.begin(), positive.end(), t));
        const auto neg = static_cast<std::size_t>(negative.end() - std::upper_bound(negative.begin(), negative.end(), t));
        if (pos == 0) break;
        if (static_cast<double>(neg) / static_cast<double>(pos) <= q) {
            out.threshold = t;
            for (std::size_t j = 0; j < mirrors.size(); ++j) {
                if (mirrors[j] > t) out.selected.push_back(j);
            }
            break;
        }
    }
    return out;
}

MultiSplitResult multi_split_select(const std::vector<std::vector<std::size_t>>& selections,
                                    std::size_t n_units, double q) {
    if (selections.size() < 2) {
        throw ValidationError("bad_splits", "multi-split aggregation needs at least 2 splits");
    }
    MultiSplitResult out;
    out.inclusion_rates.assign(n_units, 0.0);
    for (const auto& sel : selections) {
        const double weight = 1.0 / static_cast<double>(std::max<std::size_t>(1, sel.size()));
        for (auto j : sel) {
            if (j >= n_units) throw ValidationError("bad_unit", "selected unit out of range");
            out.inclusion_rates[j] += weight;
        }
    }
    for (auto& r : out.inclusion_rates) r /= static_cast<double>(selections.size());

    std::vector<double> sorted = out.inclusion_rates;
    std::sort(sorted.begin(), sorted.end());
    constexpr double slack = 1e-12;
    double cutoff = 0.0;
    double prefix = 0.0;
    for (std::size_t k = 0; k < sorted.size();) {
        std::size_t e = k;
        double group = 0.0;
        while (e < sorted.size() && sorted[e] == sorted[k]) {
            group += sorted[e];
            ++e;
        }
        if (prefix + group > q + slack) break;
        prefix += group;
        cutoff = std::max(cutoff, sorted[k]);
        k = e;
    }
    out.cutoff = cutoff;
    for (std::size_t j = 0; j < n_units; ++j) {
        if (out.inclusion_rates[j] > cutoff) out.selected.push_back(j);
    }
    return out;
}

MultiSplitResult multi_split_select(const std::vector<Vector>& mirrors, double q) {
    if (mirrors.empty()) {
        throw ValidationError("bad_splits", "no splits");
    }
    std::vector<std::vector<std::size_t>> selections;
    for (const auto& m : mirrors) {
        selections.push_back(fdp_threshold(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())), q).selected);
    }
    return multi_split_select(selections, static_cast<std::size_t>(mirrors.front().size()), q);
}

bool MirrorReport::unit_selected(std::size_t taxon, std::size_t lag_index) const {
    const std::size_t u = lag_index * n_taxa() + taxon;
    return std::binary_search(pooled.selected.begin(), pooled.selected.end(), u);
}

std::vector<std::size_t> MirrorReport::selected_taxa() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n_taxa(); ++j) {
        for (std::size_t l = 0; l < lags.size(); ++l) {
            if (unit_selected(j, l)) {
                out.push_back(j);
                break;
            }
        }
    }
    return out;
}

std::vector<std::size_t> MirrorReport::selected_taxa_at(std::size_t lag_index) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n_taxa(); ++j) {
        if (unit_selected(j, lag_index)) out.push_back(j);
    }
    return out;
}

namespace {
Vector pooled_units(const Matrix& m) {
    // column-major storage gives u = lag_index * J + taxon
    return Eigen::Map<const Vector>(m.data(), m.size());
}
}  // namespace

MirrorReport select_taxa(const InterventionSeriesSet& set, const InterventionScenario& scenario_on,
                         const InterventionScenario& scenario_off, const SelectOptions& options) {
    if (set.subjects.size() < 4) {
        throw ValidationError("too_few_subjects", "mirror selection needs at least 4 subjects");
    }
    if (options.n_splits < 2) {
        throw ValidationError("bad_splits", "mirror selection needs at least 2 splits");
    }
    if (!(options.q > 0.0 && options.q < 1.0)) {
        throw ValidationError("bad_q", "target FDR q must lie in (0, 1)");
    }
    const auto scaled = apply_normalization(set, options.recipe.normalize, nullptr, options.recipe.sf_reference);

    MirrorReport report;
    report.taxa_names = set.taxa_names;
    report.lags = options.lags;
    report.q = options.q;
    report.plan = make_split_plan(set.subjects.size(), options.n_splits, options.seed);
    report.splits.resize(static_cast<std::size_t>(options.n_splits));

    const auto n_splits = static_cast<std::size_t>(options.n_splits);
    parallel_for(
        n_splits,
        [&](std::size_t k) {
            auto fit_half = [&](const std::vector<std::size_t>& idx, std::uint64_t half) {
                const auto data = scaled.select_subjects(idx);
                gbrt::BoostConfig boost = options.recipe.boost;
                boost.seed = mix64(boost.seed ^ mix64(options.seed + 2 * k + half));
                auto model = fit_transfer(data, options.recipe.P, options.recipe.Q, boost, 1);
                return partial_dependence(model, data, scenario_on, scenario_off, options.lags);
            };
            SplitMirrors sm;
            sm.pd1 = fit_half(report.plan.first[k], 0);
            sm.pd2 = fit_half(report.plan.second[k], 1);
            sm.mirrors.resize(sm.pd1.rows(), sm.pd1.cols());
            for (Eigen::Index l = 0; l < sm.pd1.cols(); ++l) {
                sm.mirrors.col(l) = mirror_statistics(sm.pd1.col(l), sm.pd2.col(l));
            }
            const Vector units = pooled_units(sm.mirrors);
            sm.pooled = fdp_threshold(std::span<const double>(units.data(), static_cast<std::size_t>(units.size())), options.q);
            report.splits[k] = std::move(sm);
        },
        options.threads);

    std::vector<std::vector<std::size_t>> pooled_sel;
    for (const auto& sm : report.splits) pooled_sel.push_back(sm.pooled.selected);
    report.pooled = multi_split_select(pooled_sel, set.n_taxa() * options.lags.size(), options.q);

    for (std::size_t l = 0; l < options.lags.size(); ++l) {
        std::vector<Vector> per_split;
        for (const auto& sm : report.splits) per_split.push_back(sm.mirrors.col(static_cast<Eigen::Index>(l)));
        report.per_lag.push_back(multi_split_select(per_split, options.q));
    }
    return report;
}

Table mirrors_table(const MirrorReport& report) {
    Table t;
    t.header = {"split", "taxon", "lag", "pd1", "pd2", "m"};
    for (std::size_t k = 0; k < report.splits.size(); ++k) {
        const auto& sm = report.splits[k];
        for (std::size_t l = 0; l < report.lags.size(); ++l) {
            for (std::size_t j = 0; j < report.n_taxa(); ++j) {
                const auto r = static_cast<Eigen::Index>(j);
                const auto c = static_cast<Eigen::Index>(l);
                t.rows.push_back({std::to_string(k + 1), report.taxa_names[j], std::to_string(report.lags[l]),
                                  format_double(sm.pd1(r, c)), format_double(sm.pd2(r, c)),
                                  format_double(sm.mirrors(r, c))});
            }
        }
    }
    return t;
}

Table selection_table(const MirrorReport& report) {
    Table t;
    t.header = {"taxon", "lag", "inclusion_rate", "selected"};
    for (std::size_t l = 0; l < report.lags.size(); ++l) {
        for (std::size_t j = 0; j < report.n_taxa(); ++j) {
            const std::size_t u = l * report.n_taxa() + j;
            t.rows.push_back({report.taxa_names[j], std::to_string(report.lags[l]),
                              format_double(report.pooled.inclusion_rates[u]), report.unit_selected(j, l) ? "1" : "0"});
        }
    }
    return t;
}

Table per_lag_selection_table(const MirrorReport& report) {
    Table t;
    t.header = {"taxon", "lag", "inclusion_rate", "selected"};
    for (std::size_t l = 0; l < report.lags.size(); ++l) {
        const auto& res = report.per_lag[l];
        for (std::size_t j = 0; j < report.n_taxa(); ++j) {
            const bool sel = std::binary_search(res.selected.begin(), res.selected.end(), j);
            t.rows.push_back({report.taxa_names[j], std::to_string(report.lags[l]),
                              format_double(res.inclusion_rates[j]), sel ? "1" : "0"});
        }
    }
    return t;
}

}  // namespace tfint
