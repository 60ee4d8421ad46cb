#include "tfint/transfer.hpp"

#include "tfint/error.hpp"
#include "tfint/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tfint {

namespace {

std::vector<std::size_t> id_order(const InterventionSeriesSet& set) {
    std::vector<std::size_t> order(set.subjects.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return set.subjects[a].subject_id < set.subjects[b].subject_id;
    });
    return order;
}

}  // namespace

std::size_t TransferModel::feature_width() const {
    return tfint::feature_width(taxa_names.size(), intervention_names.size(), covariate_names.size(), P, Q);
}

TransferModel fit_transfer(const InterventionSeriesSet& set, int P, int Q,
                           const gbrt::BoostConfig& boost, unsigned threads) {
    boost.validate();
    if (set.n_taxa() == 0) {
        throw ValidationError("no_taxa", "cannot fit a model without taxa");
    }
    set.validate();
    const auto order = id_order(set);
    const bool sorted = std::is_sorted(order.begin(), order.end());
    const Design design = sorted ? build_design(set, P, Q) : build_design(set.select_subjects(order), P, Q);
    const gbrt::PresortedFeatures presorted(design.features);

    TransferModel model;
    model.P = P;
    model.Q = Q;
    model.taxa_names = set.taxa_names;
    model.intervention_names = set.intervention_names;
    model.covariate_names = set.covariate_names;
    model.scale_tag = set.scale_tag;
    model.ensembles.resize(set.n_taxa());
    parallel_for(
        set.n_taxa(),
        [&](std::size_t j) {
            gbrt::BoostConfig cfg = boost;
            cfg.seed = boost.seed ^ static_cast<std::uint64_t>(j);
            const Vector target = design.targets.col(static_cast<Eigen::Index>(j));
            model.ensembles[j] = gbrt::fit(presorted, target, cfg);
        },
        threads);
    return model;
}

TransferModel fit_recipe(const InterventionSeriesSet& counts, const FitRecipe& recipe, unsigned threads) {
    // canonical subject order makes the fit independent of input order
    const auto order = id_order(counts);
    const bool sorted = std::is_sorted(order.begin(), order.end());
    SizeFactors sf;
    const auto scaled = apply_normalization(sorted ? counts : counts.select_subjects(order), recipe.normalize, &sf,
                                            recipe.sf_reference);
    TransferModel model = fit_transfer(scaled, recipe.P, recipe.Q, recipe.boost, threads);
    model.normalization = recipe.normalize;
    if (recipe.normalize != NormalizeMode::none) {
        model.reference_log_means = sf.reference_log_means;
    }
    return model;
}

InterventionSeriesSet to_model_scale(const TransferModel& model, const InterventionSeriesSet& set) {
    if (set.scale_tag == model.scale_tag) {
        return set;
    }
    if (set.scale_tag != ScaleTag::counts || model.normalization == NormalizeMode::none) {
        throw ValidationError("scale_mismatch", "data on scale '" + std::string(to_string(set.scale_tag)) +
                                                    "' cannot be mapped to model scale '" +
                                                    std::string(to_string(model.scale_tag)) + "'");
    }
    const auto sf = size_factors_with_reference(set, model.reference_log_means);
    return apply_size_factors(set, sf, model.normalization);
}

Matrix forecast(const TransferModel& model, const Matrix& history, const Matrix& interventions,
                const Vector& covariates, int H) {
    const auto J = static_cast<Eigen::Index>(model.n_taxa());
    const Eigen::Index T0 = history.cols();
    if (history.rows() != J) {
        throw ValidationError("shape_mismatch", "history has the wrong number of taxa");
    }
    if (T0 < model.P) {
        throw ValidationError("history_too_short", "history shorter than the abundance lag order P");
    }
    if (H < 0) {
        throw ValidationError("bad_horizon", "horizon must be nonnegative");
    }
    if (interventions.rows() != static_cast<Eigen::Index>(model.intervention_names.size()) ||
        covariates.size() != static_cast<Eigen::Index>(model.covariate_names.size())) {
        throw ValidationError("shape_mismatch", "interventions or covariates do not match the model");
    }
    if (interventions.cols() < T0 + H) {
        throw ValidationError("scenario_too_short", "intervention path does not cover the forecast horizon");
    }

    Matrix path(J, T0 + H);
    path.leftCols(T0) = history;
    std::vector<double> features(model.feature_width());
    for (int h = 1; h <= H; ++h) {
        const auto target = static_cast<std::size_t>(T0 - 1 + h);
        fill_features([&](std::size_t k) { return path.col(static_cast<Eigen::Index>(k)); }, interventions,
                      covariates, target, model.P, model.Q, features.data());
        for (Eigen::Index j = 0; j < J; ++j) {
            path(j, static_cast<Eigen::Index>(target)) =
                model.ensembles[static_cast<std::size_t>(j)].predict_row(features.data());
        }
    }
    return path.rightCols(H);
}

Matrix forecast(const TransferModel& model, const SubjectSeries& history,
                const InterventionScenario& scenario, int H) {
    const auto T0 = static_cast<Eigen::Index>(history.n_observed());
    if (scenario.values.cols() < H) {
        throw ValidationError("scenario_too_short", "scenario '" + scenario.label + "' shorter than horizon");
    }
    if (scenario.values.rows() != history.interventions.rows()) {
        throw ValidationError("shape_mismatch", "scenario has the wrong number of channels");
    }
    Matrix w(history.interventions.rows(), T0 + H);
    w.leftCols(T0) = history.interventions.leftCols(T0);
    w.rightCols(H) = scenario.values.leftCols(H);
    return forecast(model, history.abundances, w, history.covariates, H);
}

InterventionSeriesSet predict_fill(const TransferModel& model, const InterventionSeriesSet& set) {
    InterventionSeriesSet out = set;
    for (auto& s : out.subjects) {
        const auto T0 = static_cast<Eigen::Index>(s.n_observed());
        const auto T = static_cast<Eigen::Index>(s.n_times());
        if (T0 == T) continue;
        const Matrix filled = forecast(model, s.abundances, s.interventions, s.covariates, static_cast<int>(T - T0));
        Matrix y(s.abundances.rows(), T);
        y.leftCols(T0) = s.abundances;
        y.rightCols(T - T0) = filled;
        s.abundances = std::move(y);
    }
    return out;
}

std::vector<InterventionScenario> steps(const std::vector<std::string>& intervention_names,
                                        const std::vector<std::string>& active_channels,
                                        const std::vector<int>& starts,
                                        const std::vector<int>& lengths, int L) {
    if (L < 1) {
        throw ValidationError("bad_window", "scenario window L must be >= 1");
    }
    std::vector<Eigen::Index> rows;
    for (const auto& name : active_channels) {
        auto it = std::find(intervention_names.begin(), intervention_names.end(), name);
        if (it == intervention_names.end()) {
            throw ValidationError("unknown_channel", "unknown intervention channel '" + name + "'");
        }
        rows.push_back(static_cast<Eigen::Index>(it - intervention_names.begin()));
    }
    std::vector<InterventionScenario> out;
    for (int start : starts) {
        for (int len : lengths) {
            if (start < 1 || len < 0 || start + len - 1 > L) {
                throw ValidationError("step_exceeds_window",
                                      "step start " + std::to_string(start) + " length " + std::to_string(len) +
                                          " does not fit in window " + std::to_string(L));
            }
            InterventionScenario sc;
            sc.values = Matrix::Zero(static_cast<Eigen::Index>(intervention_names.size()), L);
            for (auto r : rows) {
                sc.values.row(r).segment(start - 1, len).setOnes();
            }
            sc.label = "start" + std::to_string(start) + "_len" + std::to_string(len);
            out.push_back(std::move(sc));
        }
    }
    return out;
}

std::vector<Matrix> counterfactual_difference(const TransferModel& model, const InterventionSeriesSet& set,
                                              const InterventionScenario& scenario_a,
                                              const InterventionScenario& scenario_b, int H,
                                              const std::optional<std::vector<std::size_t>>& anchors,
                                              unsigned threads) {
    if (scenario_a.values.cols() < H || scenario_b.values.cols() < H) {
        throw ValidationError("scenario_too_short", "scenarios must cover the horizon");
    }
    if (anchors && anchors->size() != set.subjects.size()) {
        throw ValidationError("bad_anchors", "need one anchor per subject");
    }
    std::vector<std::size_t> anchor(set.subjects.size());
    for (std::size_t i = 0; i < set.subjects.size(); ++i) {
        const auto& s = set.subjects[i];
        if (anchors) {
            anchor[i] = (*anchors)[i];
        } else {
            auto onset = first_intervention(s);
            if (!onset) {
                throw ValidationError("no_intervention", "subject '" + s.subject_id + "' has no intervention onset");
            }
            anchor[i] = *onset;
        }
        if (anchor[i] < static_cast<std::size_t>(model.P) || anchor[i] > s.n_observed()) {
            throw ValidationError("insufficient_history", "subject '" + s.subject_id +
                                                              "' has fewer than P observations before its anchor");
        }
    }

    std::vector<Matrix> out(set.subjects.size());
    parallel_for(
        set.subjects.size(),
        [&](std::size_t i) {
            const auto& s = set.subjects[i];
            const auto T0 = static_cast<Eigen::Index>(anchor[i]);
            const Matrix history = s.abundances.leftCols(T0);
            Matrix wa(s.interventions.rows(), T0 + H);
            wa.leftCols(T0) = s.interventions.leftCols(T0);
            Matrix wb = wa;
            wa.rightCols(H) = scenario_a.values.leftCols(H);
            wb.rightCols(H) = scenario_b.values.leftCols(H);
            out[i] = forecast(model, history, wa, s.covariates, H) - forecast(model, history, wb, s.covariates, H);
        },
        threads);
    return out;
}

std::array<double, 3> quartiles(std::vector<double> v) {
    if (v.empty()) {
        throw ValidationError("empty_sample", "quartiles need at least one value");
    }
    std::sort(v.begin(), v.end());
    auto median_of = [](const double* first, std::size_t n) {
        return n % 2 == 1 ? first[n / 2] : (first[n / 2 - 1] + first[n / 2]) / 2.0;
    };
    const std::size_t n = v.size();
    const double med = median_of(v.data(), n);
    if (n == 1) {
        return {med, med, med};
    }
    const std::size_t half = n / 2;
    return {median_of(v.data(), half), med, median_of(v.data() + (n - half), half)};
}

QuartileSummary counterfactual_summary(const std::vector<Matrix>& differences) {
    if (differences.empty()) {
        throw ValidationError("no_subjects", "summary needs at least one subject");
    }
    const auto J = differences.front().rows();
    const auto H = differences.front().cols();
    QuartileSummary out{Matrix(J, H), Matrix(J, H), Matrix(J, H)};
    std::vector<double> values(differences.size());
    for (Eigen::Index j = 0; j < J; ++j) {
        for (Eigen::Index h = 0; h < H; ++h) {
            for (std::size_t i = 0; i < differences.size(); ++i) {
                values[i] = differences[i](j, h);
            }
            const auto q = quartiles(values);
            out.q1(j, h) = q[0];
            out.median(j, h) = q[1];
            out.q3(j, h) = q[2];
        }
    }
    return out;
}

Matrix clamp_nonnegative(const Matrix& m) { return m.cwiseMax(0.0); }

nlohmann::json to_json(const TransferModel& m) {
    nlohmann::json ens = nlohmann::json::array();
    for (const auto& e : m.ensembles) {
        ens.push_back(gbrt::to_json(e));
    }
    nlohmann::json ref = nlohmann::json::array();
    for (double r : m.reference_log_means) {
        ref.push_back(std::isfinite(r) ? nlohmann::json(r) : nlohmann::json(nullptr));
    }
    return {{"format", "tfint-transfer"},
            {"version", kModelFormatVersion},
            {"P", m.P},
            {"Q", m.Q},
            {"taxa", m.taxa_names},
            {"interventions", m.intervention_names},
            {"covariates", m.covariate_names},
            {"scale", std::string(to_string(m.scale_tag))},
            {"normalization", std::string(to_string(m.normalization))},
            {"reference_log_means", std::move(ref)},
            {"ensembles", std::move(ens)}};
}

TransferModel transfer_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "tfint-transfer" || j.value("version", 0) != kModelFormatVersion) {
        throw DataError("bad_model_version", "not a supported transfer model document");
    }
    TransferModel m;
    m.P = j.at("P").get<int>();
    m.Q = j.at("Q").get<int>();
    m.taxa_names = j.at("taxa").get<std::vector<std::string>>();
    m.intervention_names = j.at("interventions").get<std::vector<std::string>>();
    m.covariate_names = j.at("covariates").get<std::vector<std::string>>();
    m.scale_tag = scale_tag_from_string(j.at("scale").get<std::string>());
    m.normalization = normalize_mode_from_string(j.at("normalization").get<std::string>());
    for (const auto& r : j.at("reference_log_means")) {
        m.reference_log_means.push_back(r.is_null() ? -std::numeric_limits<double>::infinity() : r.get<double>());
    }
    for (const auto& e : j.at("ensembles")) {
        m.ensembles.push_back(gbrt::ensemble_from_json(e));
    }
    if (m.ensembles.size() != m.taxa_names.size()) {
        throw DataError("bad_model", "ensemble count does not match taxa");
    }
    for (const auto& e : m.ensembles) {
        if (e.n_features != m.feature_width()) {
            throw DataError("bad_model", "ensemble width does not match P, Q and names");
        }
    }
    return m;
}

}  // namespace tfint
