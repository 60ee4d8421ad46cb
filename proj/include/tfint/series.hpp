#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tfint {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Which transformation the abundances currently carry.
enum class ScaleTag { counts, normalized, normalized_asinh };

std::string_view to_string(ScaleTag tag);
ScaleTag scale_tag_from_string(std::string_view s);

/// One subject's aligned abundance / intervention series.
///
/// `times` and `interventions` always span the full grid. `abundances` may
/// cover only a leading prefix of it (see subset_values); the remaining
/// columns are the ones a forecast fills in.
struct SubjectSeries {
    std::string subject_id;
    std::vector<double> times;   // strictly increasing, size T
    Matrix abundances;           // J x T_obs, T_obs <= T
    Matrix interventions;        // D x T
    Vector covariates;           // S

    std::size_t n_times() const { return times.size(); }
    std::size_t n_observed() const { return static_cast<std::size_t>(abundances.cols()); }
    std::size_t n_taxa() const { return static_cast<std::size_t>(abundances.rows()); }
    std::size_t n_channels() const { return static_cast<std::size_t>(interventions.rows()); }
};

/// A set of subjects sharing taxon, channel and covariate orderings.
struct InterventionSeriesSet {
    std::vector<SubjectSeries> subjects;
    std::vector<std::string> taxa_names;
    std::vector<std::string> intervention_names;
    std::vector<std::string> covariate_names;
    ScaleTag scale_tag = ScaleTag::counts;

    std::size_t n_taxa() const { return taxa_names.size(); }
    std::size_t n_channels() const { return intervention_names.size(); }
    std::size_t n_covariates() const { return covariate_names.size(); }

    /// Throws DataError when any container invariant is violated.
    void validate() const;

    /// Copy holding only the listed subjects, in the given order.
    InterventionSeriesSet select_subjects(const std::vector<std::size_t>& indices) const;
};

/// Plain string table as read from a CSV file.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Builds a set from the four tabular inputs.
///
/// reads: first column taxon name, remaining header cells sample ids.
/// samples: sample,subject,time. interventions: sample,<channel>...
/// subjects: subject,<covariate>... Columns are sorted by time per subject.
InterventionSeriesSet ingest(const Table& reads, const Table& interventions,
                             const Table& samples, const Table& subjects);

enum class InterpolationMethod { linear };

/// Resamples every subject onto t_min, t_min + delta, ... <= t_max.
InterventionSeriesSet interpolate(const InterventionSeriesSet& set, double delta,
                                  InterpolationMethod method = InterpolationMethod::linear);

/// Supervised design for one-step-ahead training.
///
/// Feature layout per row (width P*J + Q*D + S):
///   y_t, y_{t-1}, ..., y_{t-P+1}          (J values each, most recent first)
///   w_{t+1}, w_t, ..., w_{t-Q+2}          (D values each, most recent first)
///   z                                      (S values)
/// Intervention indices before 0 are clamped to column 0.
struct Design {
    RowMatrix features;              // rows x F
    Matrix targets;                  // rows x J, y_{t+1}
    std::vector<std::size_t> subject_index;
    std::vector<std::size_t> target_index;  // t + 1
};

std::size_t feature_width(std::size_t J, std::size_t D, std::size_t S, int P, int Q);

/// Target indices for one subject: T-1, T-1-P, ... while >= P.
std::vector<std::size_t> segment_targets(std::size_t n_observed, int P);

/// Writes the feature vector for predicting time `target` into `out`.
/// `abundance_at(k)` must return column k (k < target) of the abundance history.
template <typename AbundanceAt>
void fill_features(AbundanceAt&& abundance_at, const Matrix& interventions,
                   const Vector& covariates, std::size_t target, int P, int Q,
                   double* out) {
    std::size_t pos = 0;
    for (int lag = 1; lag <= P; ++lag) {
        const auto col = abundance_at(target - static_cast<std::size_t>(lag));
        for (Eigen::Index j = 0; j < col.size(); ++j) {
            out[pos++] = col(j);
        }
    }
    for (int lag = 0; lag < Q; ++lag) {
        const auto k = static_cast<long>(target) - lag;
        const Eigen::Index c = k < 0 ? 0 : static_cast<Eigen::Index>(k);
        for (Eigen::Index d = 0; d < interventions.rows(); ++d) {
            out[pos++] = interventions(d, c);
        }
    }
    for (Eigen::Index s = 0; s < covariates.size(); ++s) {
        out[pos++] = covariates(s);
    }
}

Design build_design(const InterventionSeriesSet& set, int P, int Q);

struct TrainingSegment {
    std::vector<double> features;
    std::size_t target_taxon = 0;
    double target_value = 0.0;
    std::string subject_id;
    std::size_t target_time_index = 0;
};

/// One segment per (retained target time, taxon); see Design for the layout.
std::vector<TrainingSegment> extract_segments(const InterventionSeriesSet& set, int P, int Q);

/// Keeps abundances at a contiguous ascending run of indices [a, b]; times
/// and interventions are kept from a to the end of the grid.
InterventionSeriesSet subset_values(const InterventionSeriesSet& set,
                                    const std::vector<std::size_t>& time_indices);

/// First column with any nonzero intervention, if any.
std::optional<std::size_t> first_intervention(const SubjectSeries& s);

}  // namespace tfint
