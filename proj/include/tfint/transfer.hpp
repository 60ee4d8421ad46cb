#pragma once

#include "tfint/gbrt.hpp"
#include "tfint/normalize.hpp"
#include "tfint/series.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace tfint {

/// Everything needed to turn a counts-scale set into a fitted model.
struct FitRecipe {
    int P = 2;
    int Q = 2;
    gbrt::BoostConfig boost;
    NormalizeMode normalize = NormalizeMode::none;
    SizeFactorReference sf_reference = SizeFactorReference::all_positive;
};

/// One boosted ensemble per taxon on the shared lagged design (see Design).
struct TransferModel {
    int P = 1;
    int Q = 1;
    std::vector<gbrt::TreeEnsemble> ensembles;
    std::vector<std::string> taxa_names;
    std::vector<std::string> intervention_names;
    std::vector<std::string> covariate_names;
    ScaleTag scale_tag = ScaleTag::counts;
    NormalizeMode normalization = NormalizeMode::none;
    /// Pooled size-factor reference of the training data (empty for none).
    std::vector<double> reference_log_means;

    std::size_t n_taxa() const { return ensembles.size(); }
    std::size_t feature_width() const;
};

/// Fits J ensembles on build_design(set, P, Q) with subjects ordered by id.
/// Taxon j uses seed boost.seed ^ j so results do not depend on the thread
/// schedule or on the input subject order.
TransferModel fit_transfer(const InterventionSeriesSet& set, int P, int Q,
                           const gbrt::BoostConfig& boost, unsigned threads = 0);

/// Normalizes a counts-scale set per recipe, then fits. The model keeps the
/// size-factor reference so new data can be mapped onto its scale.
TransferModel fit_recipe(const InterventionSeriesSet& counts, const FitRecipe& recipe,
                         unsigned threads = 0);

/// Maps counts-scale data onto a model's training scale using its stored
/// reference. Data already on that scale pass through.
InterventionSeriesSet to_model_scale(const TransferModel& model, const InterventionSeriesSet& set);

/// Recursive forecast of H steps past the last history column.
///
/// `history` is J x T0 (T0 >= P). `interventions` covers times 0 ..
/// T0 + H - 1 and supplies both the observed lags and the future path.
/// Intermediate predictions are fed back unrounded.
Matrix forecast(const TransferModel& model, const Matrix& history, const Matrix& interventions,
                const Vector& covariates, int H);

/// A hypothetical intervention path: D x H values.
struct InterventionScenario {
    Matrix values;
    std::string label;
};

/// Forecast continuing `history` (its observed abundances) under `scenario`.
/// Intervention lags before the scenario come from the subject's observed path.
Matrix forecast(const TransferModel& model, const SubjectSeries& history,
                const InterventionScenario& scenario, int H);

/// Fills unobserved abundance columns (those present only in the
/// intervention path) with forecasts.
InterventionSeriesSet predict_fill(const TransferModel& model, const InterventionSeriesSet& set);

/// Step scenarios: for every start (1-based) and length, the named channels
/// are 1 on columns start .. start+length-1 of a D x L matrix, 0 elsewhere.
std::vector<InterventionScenario> steps(const std::vector<std::string>& intervention_names,
                                        const std::vector<std::string>& active_channels,
                                        const std::vector<int>& starts,
                                        const std::vector<int>& lengths, int L);

/// Per-subject forecast difference scenario_a - scenario_b (J x H each).
///
/// The forecast starts at the anchor: history is the abundances strictly
/// before it and scenario column 0 is the anchor time. The default anchor
/// is each subject's first intervention onset.
std::vector<Matrix> counterfactual_difference(const TransferModel& model,
                                              const InterventionSeriesSet& set,
                                              const InterventionScenario& scenario_a,
                                              const InterventionScenario& scenario_b, int H,
                                              const std::optional<std::vector<std::size_t>>& anchors = std::nullopt,
                                              unsigned threads = 0);

struct QuartileSummary {
    Matrix median;  // J x H
    Matrix q1;
    Matrix q3;
};

/// Quartiles across subjects, median-of-halves rule: Q1 and Q3 are the
/// medians of the lower and upper halves, the middle value excluded for odd n.
QuartileSummary counterfactual_summary(const std::vector<Matrix>& differences);

/// Median-of-halves quartiles of one sample: {q1, median, q3}.
std::array<double, 3> quartiles(std::vector<double> values);

/// Elementwise max(x, 0); for reporting counts-scale forecasts only.
Matrix clamp_nonnegative(const Matrix& m);

inline constexpr int kModelFormatVersion = 1;
nlohmann::json to_json(const TransferModel& model);
TransferModel transfer_model_from_json(const nlohmann::json& j);

}  // namespace tfint
