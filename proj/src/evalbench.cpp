#include "tfint/evalbench.hpp"

#include "tfint/csv_io.hpp"
#include "tfint/error.hpp"
#include "tfint/parallel.hpp"
#include "tfint/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace tfint {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t hash_id(const std::string& id, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : id) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(h ^ mix64(seed));
}

}  // namespace

Matrix carry_forward(const Matrix& history, int H) {
    if (history.cols() == 0) {
        throw ValidationError("empty_history", "carry_forward needs at least one observed column");
    }
    return history.col(history.cols() - 1).replicate(1, H);
}

Matrix global_mean(const Vector& taxon_means, int H) {
    if (taxon_means.size() == 0) {
        throw ValidationError("empty_history", "global_mean needs per-taxon training means");
    }
    return taxon_means.replicate(1, H);
}

Vector training_means(const InterventionSeriesSet& train) {
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(train.n_taxa()));
    std::size_t n = 0;
    for (const auto& s : train.subjects) {
        sum += s.abundances.rowwise().sum();
        n += s.n_observed();
    }
    if (n == 0) {
        throw ValidationError("empty_history", "global_mean needs at least one observed column");
    }
    return sum / static_cast<double>(n);
}

std::vector<int> assign_folds(const std::vector<std::string>& subject_ids, int K, std::uint64_t seed) {
    if (K < 2) {
        throw ValidationError("bad_folds", "need at least 2 folds");
    }
    if (subject_ids.size() < static_cast<std::size_t>(K)) {
        throw ValidationError("bad_folds", "fewer subjects than folds");
    }
    std::vector<std::size_t> idx(subject_ids.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<std::uint64_t> h(subject_ids.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = hash_id(subject_ids[i], seed);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return h[a] != h[b] ? h[a] < h[b] : subject_ids[a] < subject_ids[b];
    });
    std::vector<int> fold(subject_ids.size());
    for (std::size_t r = 0; r < idx.size(); ++r) fold[idx[r]] = static_cast<int>(r % static_cast<std::size_t>(K));
    return fold;
}

std::vector<HoldoutCase> make_holdout_cases(const InterventionSeriesSet& set,
                                            const std::vector<std::size_t>& subjects, int P, int H) {
    std::vector<HoldoutCase> cases;
    for (auto i : subjects) {
        const auto& s = set.subjects.at(i);
        const auto onset = first_intervention(s);
        if (!onset) {
            throw DataError("no_intervention", "holdout subject '" + s.subject_id + "' has no intervention");
        }
        if (*onset < static_cast<std::size_t>(P)) {
            throw DataError("short_history", "holdout subject '" + s.subject_id + "' has fewer than P timepoints before its intervention");
        }
        if (*onset + static_cast<std::size_t>(H) >= s.n_observed()) {
            throw DataError("short_future", "holdout subject '" + s.subject_id + "' has fewer than H observed timepoints after its intervention");
        }
        const auto cut = static_cast<Eigen::Index>(*onset + 1);
        HoldoutCase c;
        c.subject = i;
        c.anchor = *onset;
        c.revealed.subject_id = s.subject_id;
        c.revealed.times = s.times;
        c.revealed.abundances = s.abundances.leftCols(cut);
        c.revealed.interventions = s.interventions;
        c.revealed.covariates = s.covariates;
        c.truth = s.abundances.middleCols(cut, H);
        cases.push_back(std::move(c));
    }
    return cases;
}

std::vector<double> forecast_errors(const std::vector<HoldoutCase>& cases, const Forecaster& forecaster, int H) {
    std::vector<double> errors;
    for (const auto& c : cases) {
        const Matrix f = forecaster(c, H);
        if (f.rows() != c.truth.rows() || f.cols() != H) {
            throw ValidationError("shape_mismatch", "forecaster returned the wrong shape");
        }
        for (Eigen::Index h = 0; h < H; ++h)
            for (Eigen::Index j = 0; j < f.rows(); ++j) errors.push_back(std::abs(c.truth(j, h) - f(j, h)));
    }
    return errors;
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double truncated_mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const auto q = quartiles(values);
    const double limit = q[2] + 3.0 * (q[2] - q[0]);
    double s = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (v <= limit) {
            s += v;
            ++n;
        }
    }
    return n ? s / static_cast<double>(n) : 0.0;
}

std::vector<double> EvalReport::mae(const std::string& method, bool truncated) const {
    std::vector<double> out;
    for (const auto& f : folds) {
        if (f.method == method) out.push_back(truncated ? f.mae_truncated : f.mae);
    }
    return out;
}

EvalReport cv_forecast_eval(const InterventionSeriesSet& counts, const FitRecipe& recipe, const CvOptions& options) {
    counts.validate();
    if (options.H < 1) {
        throw ValidationError("bad_horizon", "horizon must be >= 1");
    }
    const auto start = Clock::now();
    std::vector<std::string> ids;
    for (const auto& s : counts.subjects) ids.push_back(s.subject_id);

    EvalReport report;
    report.config = options.config;
    report.normalization = recipe.normalize;
    report.K = options.K;
    report.H = options.H;
    report.fold_of = assign_folds(ids, options.K, options.seed);

    std::vector<std::size_t> all(counts.subjects.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    make_holdout_cases(counts, all, recipe.P, options.H);

    const auto K = static_cast<std::size_t>(options.K);
    std::vector<std::vector<FoldResult>> per_fold(K);
    std::vector<ScaleTag> scales(K);
    parallel_for(
        K,
        [&](std::size_t k) {
            std::vector<std::size_t> train, test;
            for (std::size_t i = 0; i < counts.subjects.size(); ++i) {
                (report.fold_of[i] == static_cast<int>(k) ? test : train).push_back(i);
            }
            const auto fold = static_cast<int>(k);
            const auto t0 = Clock::now();
            const auto train_counts = counts.select_subjects(train);
            const auto model = fit_recipe(train_counts, recipe, 1);
            const auto holdout = to_model_scale(model, counts.select_subjects(test));
            std::vector<std::size_t> local(test.size());
            std::iota(local.begin(), local.end(), std::size_t{0});
            const auto cases = make_holdout_cases(holdout, local, recipe.P, options.H);
            const auto transfer_err = forecast_errors(
                cases,
                [&](const HoldoutCase& c, int H) {
                    return forecast(model, c.revealed.abundances, c.revealed.interventions, c.revealed.covariates, H);
                },
                options.H);
            const double transfer_sec = seconds_since(t0);

            const auto t1 = Clock::now();
            const auto carry_err = forecast_errors(
                cases, [](const HoldoutCase& c, int H) { return carry_forward(c.revealed.abundances, H); }, options.H);
            const double carry_sec = seconds_since(t1);

            const auto t2 = Clock::now();
            const Vector means = training_means(to_model_scale(model, train_counts));
            const auto mean_err =
                forecast_errors(cases, [&](const HoldoutCase&, int H) { return global_mean(means, H); }, options.H);
            const double mean_sec = seconds_since(t2);

            auto row = [&](const char* method, const std::vector<double>& err, double sec) {
                return FoldResult{fold, method, mean_of(err), truncated_mean(err), cases.size(), sec};
            };
            per_fold[k] = {row("transfer", transfer_err, transfer_sec), row("carry_forward", carry_err, carry_sec),
                           row("global_mean", mean_err, mean_sec)};
            scales[k] = model.scale_tag;
        },
        options.threads);

    report.scale = scales.front();
    for (auto& rows : per_fold)
        for (auto& r : rows) report.folds.push_back(std::move(r));
    report.stage_seconds.emplace_back("cv_forecast_eval", seconds_since(start));
    return report;
}

std::vector<double> relative_advantage(const EvalReport& report, const std::string& method,
                                       const std::string& baseline, bool truncated) {
    const auto m = report.mae(method, truncated);
    const auto b = report.mae(baseline, truncated);
    if (m.size() != b.size() || m.empty()) {
        throw ValidationError("missing_method", "report lacks '" + method + "' or '" + baseline + "'");
    }
    std::vector<double> out;
    for (std::size_t k = 0; k < m.size(); ++k) out.push_back(b[k] > 0 ? (b[k] - m[k]) / b[k] : 0.0);
    return out;
}

double advantage_gap(const EvalReport& a, const EvalReport& b, const std::string& method, const std::string& baseline) {
    if (a.scale != b.scale) {
        throw ValidationError("cross_scale", "MAE on scale '" + std::string(to_string(a.scale)) +
                                                 "' is not comparable with scale '" + std::string(to_string(b.scale)) +
                                                 "'");
    }
    return mean_of(relative_advantage(a, method, baseline)) - mean_of(relative_advantage(b, method, baseline));
}

InferenceResult inference_eval(const std::vector<std::size_t>& selected, const std::set<std::size_t>& nonnull, int lag) {
    std::set<std::size_t> sel(selected.begin(), selected.end());
    std::size_t hits = 0;
    for (auto j : sel) hits += nonnull.count(j);
    InferenceResult r;
    r.lag = lag;
    r.fdp = static_cast<double>(sel.size() - hits) / static_cast<double>(std::max<std::size_t>(1, sel.size()));
    r.power = nonnull.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(nonnull.size());
    return r;
}

InferenceResult inference_eval(const std::vector<std::size_t>& selected, const sim::NonnullSets& truth, int h) {
    if (h < 0 || static_cast<std::size_t>(h) >= truth.nonnull.size()) {
        throw ValidationError("bad_lag", "truth does not cover lag " + std::to_string(h));
    }
    return inference_eval(selected, truth.nonnull[static_cast<std::size_t>(h)], h);
}

Table eval_table(const std::vector<EvalReport>& reports) {
    Table t;
    t.header = {"config", "fold", "method", "normalization", "mae", "mae_truncated", "seconds"};
    for (const auto& r : reports) {
        for (const auto& f : r.folds) {
            t.rows.push_back({r.config, std::to_string(f.fold), f.method, std::string(to_string(r.normalization)),
                              format_double(f.mae), format_double(f.mae_truncated), format_double(f.seconds)});
        }
    }
    return t;
}

Table inference_table(const std::vector<InferenceResult>& rows) {
    Table t;
    t.header = {"config", "lag", "fdp", "power", "q", "seed"};
    for (const auto& r : rows) {
        t.rows.push_back({r.config, std::to_string(r.lag), format_double(r.fdp), format_double(r.power), format_double(r.q),
                          std::to_string(r.seed)});
    }
    return t;
}

}  // namespace tfint
