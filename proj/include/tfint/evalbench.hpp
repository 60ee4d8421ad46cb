#pragma once

#include "tfint/series.hpp"
#include "tfint/simgen.hpp"
#include "tfint/transfer.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tfint {

/// Repeats the last history column H times.
Matrix carry_forward(const Matrix& history, int H);

/// Repeats each taxon's mean H times.
Matrix global_mean(const Vector& taxon_means, int H);

/// Per-taxon mean over every observed column of every subject.
Vector training_means(const InterventionSeriesSet& train);

/// Fold index per subject: subjects ordered by a seeded hash of their id,
/// then dealt round-robin.
std::vector<int> assign_folds(const std::vector<std::string>& subject_ids, int K, std::uint64_t seed);

/// One holdout subject cut at its first intervention onset t*.
/// `revealed` holds abundances 0..t* and the full intervention path; `truth`
/// holds abundances t*+1 .. t*+H.
struct HoldoutCase {
    std::size_t subject = 0;
    std::size_t anchor = 0;
    SubjectSeries revealed;
    Matrix truth;
};

/// Throws DataError when a subject has no intervention, fewer than P
/// pre-intervention timepoints, or fewer than H observed columns after t*.
std::vector<HoldoutCase> make_holdout_cases(const InterventionSeriesSet& set,
                                            const std::vector<std::size_t>& subjects, int P, int H);

using Forecaster = std::function<Matrix(const HoldoutCase&, int H)>;

/// Absolute errors of `forecaster` over all taxa, horizons and cases.
std::vector<double> forecast_errors(const std::vector<HoldoutCase>& cases, const Forecaster& forecaster, int H);

double mean_of(const std::vector<double>& values);

/// Mean after dropping values above Q3 + 3 IQR (median-of-halves quartiles).
double truncated_mean(const std::vector<double>& values);

struct FoldResult {
    int fold = 0;
    std::string method;
    double mae = 0.0;
    double mae_truncated = 0.0;
    std::size_t n_holdout = 0;
    double seconds = 0.0;
};

struct InferenceResult {
    std::string config;
    int lag = 0;
    double fdp = 0.0;
    double power = 0.0;
    double q = 0.0;
    std::uint64_t seed = 0;
};

struct EvalReport {
    std::string config;
    NormalizeMode normalization = NormalizeMode::none;
    ScaleTag scale = ScaleTag::counts;
    int K = 4;
    int H = 5;
    std::vector<int> fold_of;  // per subject
    std::vector<FoldResult> folds;
    std::vector<InferenceResult> inference;
    std::vector<std::pair<std::string, double>> stage_seconds;

    /// MAE of `method` per fold, in fold order.
    std::vector<double> mae(const std::string& method, bool truncated = false) const;
};

struct CvOptions {
    int K = 4;
    int H = 5;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string config = "default";
};

/// K-fold forecasting evaluation of the transfer model against carry_forward
/// and global_mean. Normalization is estimated on the training folds and
/// the training reference is applied to holdouts; MAE is on the model scale.
EvalReport cv_forecast_eval(const InterventionSeriesSet& counts, const FitRecipe& recipe,
                            const CvOptions& options = {});

/// Per-fold relative advantage (mae_baseline - mae_method) / mae_baseline.
std::vector<double> relative_advantage(const EvalReport& report, const std::string& method,
                                       const std::string& baseline, bool truncated = false);

/// Mean relative advantage of `method` in `a` minus that in `b`; refuses
/// reports whose MAE scales differ.
double advantage_gap(const EvalReport& a, const EvalReport& b, const std::string& method,
                     const std::string& baseline);

/// FDP = |J0 n S| / max(1, |S|); Power = |J1 n S| / |J1| (0 when J1 empty).
InferenceResult inference_eval(const std::vector<std::size_t>& selected, const std::set<std::size_t>& nonnull,
                               int lag = 0);
InferenceResult inference_eval(const std::vector<std::size_t>& selected, const sim::NonnullSets& truth, int h);

/// eval.csv: config, fold, method, normalization, mae, mae_truncated, seconds.
Table eval_table(const std::vector<EvalReport>& reports);
/// inference_eval.csv: config, lag, fdp, power, q, seed.
Table inference_table(const std::vector<InferenceResult>& rows);

}  // namespace tfint
