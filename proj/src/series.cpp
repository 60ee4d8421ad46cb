#include "tfint/series.hpp"

#include "tfint/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

namespace tfint {

std::string_view to_string(ScaleTag tag) {
    switch (tag) {
    case ScaleTag::counts: return "counts";
    case ScaleTag::normalized: return "normalized";
    case ScaleTag::normalized_asinh: return "normalized_asinh";
    }
    return "counts";
}

ScaleTag scale_tag_from_string(std::string_view s) {
    if (s == "counts") return ScaleTag::counts;
    if (s == "normalized") return ScaleTag::normalized;
    if (s == "normalized_asinh") return ScaleTag::normalized_asinh;
    throw ValidationError("bad_scale_tag", "unknown scale tag '" + std::string(s) + "'");
}

void InterventionSeriesSet::validate() const {
    const auto J = static_cast<Eigen::Index>(n_taxa());
    const auto D = static_cast<Eigen::Index>(n_channels());
    const auto S = static_cast<Eigen::Index>(n_covariates());
    for (const auto& s : subjects) {
        const auto& id = s.subject_id;
        if (s.abundances.rows() != J || s.interventions.rows() != D || s.covariates.size() != S) {
            throw DataError("shape_mismatch", "subject '" + id + "' has inconsistent J, D or S");
        }
        if (static_cast<std::size_t>(s.interventions.cols()) != s.times.size() ||
            s.n_observed() > s.times.size()) {
            throw DataError("shape_mismatch", "subject '" + id + "' has inconsistent time columns");
        }
        for (std::size_t k = 1; k < s.times.size(); ++k) {
            if (!(s.times[k] > s.times[k - 1])) {
                throw DataError("unsorted_times", "subject '" + id + "' times not strictly increasing");
            }
        }
        if (!s.abundances.allFinite() || !s.interventions.allFinite() || !s.covariates.allFinite()) {
            throw DataError("non_finite", "subject '" + id + "' contains non-finite values");
        }
        if (scale_tag == ScaleTag::counts && s.abundances.size() > 0 && s.abundances.minCoeff() < 0) {
            throw DataError("negative_count", "subject '" + id + "' has negative counts");
        }
    }
}

InterventionSeriesSet InterventionSeriesSet::select_subjects(
    const std::vector<std::size_t>& indices) const {
    InterventionSeriesSet out;
    out.taxa_names = taxa_names;
    out.intervention_names = intervention_names;
    out.covariate_names = covariate_names;
    out.scale_tag = scale_tag;
    out.subjects.reserve(indices.size());
    for (auto i : indices) {
        out.subjects.push_back(subjects.at(i));
    }
    return out;
}

namespace {

double parse_number(const std::string& cell, const std::string& context) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last) {
        throw DataError("non_numeric", "non-numeric cell '" + cell + "' in " + context);
    }
    return value;
}

void require_columns(const Table& t, std::size_t n, const std::string& name) {
    if (t.header.size() < n) {
        throw DataError("bad_header", name + " needs at least " + std::to_string(n) + " columns");
    }
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) {
            throw DataError("ragged_row", name + " row '" + (row.empty() ? "" : row[0]) +
                                              "' has " + std::to_string(row.size()) +
                                              " cells, expected " + std::to_string(t.header.size()));
        }
    }
}

}  // namespace

InterventionSeriesSet ingest(const Table& reads, const Table& interventions,
                             const Table& samples, const Table& subjects) {
    require_columns(reads, 1, "reads");
    require_columns(samples, 3, "samples");
    require_columns(interventions, 1, "interventions");
    require_columns(subjects, 1, "subjects");

    InterventionSeriesSet set;
    set.scale_tag = ScaleTag::counts;
    const std::size_t J = reads.rows.size();
    for (const auto& row : reads.rows) {
        set.taxa_names.push_back(row[0]);
    }
    set.intervention_names.assign(interventions.header.begin() + 1, interventions.header.end());
    set.covariate_names.assign(subjects.header.begin() + 1, subjects.header.end());
    const std::size_t D = set.intervention_names.size();
    const std::size_t S = set.covariate_names.size();

    std::unordered_map<std::string, std::size_t> read_col;
    for (std::size_t c = 1; c < reads.header.size(); ++c) {
        if (!read_col.emplace(reads.header[c], c).second) {
            throw DataError("duplicate_sample", "sample '" + reads.header[c] + "' repeated in reads");
        }
    }
    std::unordered_map<std::string, std::size_t> w_row;
    for (std::size_t r = 0; r < interventions.rows.size(); ++r) {
        const auto& id = interventions.rows[r][0];
        if (!read_col.count(id)) {
            throw DataError("unknown_sample", "interventions reference unknown sample '" + id + "'");
        }
        if (!w_row.emplace(id, r).second) {
            throw DataError("duplicate_sample", "sample '" + id + "' repeated in interventions");
        }
    }
    std::unordered_map<std::string, std::size_t> z_row;
    for (std::size_t r = 0; r < subjects.rows.size(); ++r) {
        z_row.emplace(subjects.rows[r][0], r);
    }

    struct Entry {
        double time;
        std::string sample;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Entry>> by_subject;
    std::set<std::string> seen_samples;
    for (const auto& row : samples.rows) {
        const auto& sample = row[0];
        const auto& subject = row[1];
        if (!read_col.count(sample)) {
            throw DataError("unknown_sample", "sample '" + sample + "' not present in reads");
        }
        if (!w_row.count(sample)) {
            throw DataError("unknown_sample", "sample '" + sample + "' not present in interventions");
        }
        if (!seen_samples.insert(sample).second) {
            throw DataError("duplicate_sample", "sample '" + sample + "' repeated in samples");
        }
        if (!by_subject.count(subject)) {
            order.push_back(subject);
        }
        by_subject[subject].push_back({parse_number(row[2], "samples time of '" + sample + "'"), sample});
    }
    for (const auto& [sample, col] : read_col) {
        if (!seen_samples.count(sample)) {
            throw DataError("unknown_sample", "reads sample '" + sample + "' missing from samples");
        }
    }

    for (const auto& subject : order) {
        auto entries = by_subject[subject];
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.time < b.time; });
        for (std::size_t k = 1; k < entries.size(); ++k) {
            if (entries[k].time == entries[k - 1].time) {
                throw DataError("duplicate_time", "subject '" + subject + "' has duplicate time at sample '" +
                                                      entries[k].sample + "'");
            }
        }
        auto zi = z_row.find(subject);
        if (zi == z_row.end()) {
            throw DataError("unknown_subject", "subject '" + subject + "' missing from subjects table");
        }

        SubjectSeries s;
        s.subject_id = subject;
        const auto T = static_cast<Eigen::Index>(entries.size());
        s.abundances.resize(static_cast<Eigen::Index>(J), T);
        s.interventions.resize(static_cast<Eigen::Index>(D), T);
        s.covariates.resize(static_cast<Eigen::Index>(S));
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto& e = entries[static_cast<std::size_t>(t)];
            s.times.push_back(e.time);
            const auto c = read_col[e.sample];
            for (std::size_t j = 0; j < J; ++j) {
                s.abundances(static_cast<Eigen::Index>(j), t) =
                    parse_number(reads.rows[j][c], "reads '" + e.sample + "'/'" + reads.rows[j][0] + "'");
            }
            const auto& wr = interventions.rows[w_row[e.sample]];
            for (std::size_t d = 0; d < D; ++d) {
                s.interventions(static_cast<Eigen::Index>(d), t) =
                    parse_number(wr[d + 1], "interventions '" + e.sample + "'");
            }
        }
        const auto& zr = subjects.rows[zi->second];
        for (std::size_t k = 0; k < S; ++k) {
            s.covariates(static_cast<Eigen::Index>(k)) = parse_number(zr[k + 1], "subjects '" + subject + "'");
        }
        set.subjects.push_back(std::move(s));
    }
    set.validate();
    return set;
}

InterventionSeriesSet interpolate(const InterventionSeriesSet& set, double delta,
                                  InterpolationMethod) {
    if (!(delta > 0) || !std::isfinite(delta)) {
        throw ValidationError("bad_delta", "interpolation delta must be positive");
    }
    InterventionSeriesSet out = set;
    for (auto& s : out.subjects) {
        if (s.times.size() < 2) {
            throw ValidationError("too_few_timepoints",
                                  "subject '" + s.subject_id + "' has fewer than 2 timepoints");
        }
        if (s.n_observed() != s.n_times()) {
            throw ValidationError("partial_abundances",
                                  "subject '" + s.subject_id + "' has unobserved abundance columns");
        }
        const double t0 = s.times.front();
        const double t1 = s.times.back();
        const double snap = 1e-9 * delta;
        std::vector<double> grid;
        for (std::size_t k = 0;; ++k) {
            double g = t0 + static_cast<double>(k) * delta;
            if (g > t1 + snap) break;
            grid.push_back(std::min(g, t1));
        }

        const auto G = static_cast<Eigen::Index>(grid.size());
        Matrix y(s.abundances.rows(), G);
        Matrix w(s.interventions.rows(), G);
        std::size_t seg = 0;
        for (Eigen::Index g = 0; g < G; ++g) {
            double t = grid[static_cast<std::size_t>(g)];
            while (seg + 2 < s.times.size() && s.times[seg + 1] <= t + snap) {
                ++seg;
            }
            const double ta = s.times[seg];
            const double tb = s.times[seg + 1];
            const auto a = static_cast<Eigen::Index>(seg);
            if (std::abs(t - ta) <= snap) {
                grid[static_cast<std::size_t>(g)] = ta;
                y.col(g) = s.abundances.col(a);
                w.col(g) = s.interventions.col(a);
            } else if (std::abs(t - tb) <= snap) {
                grid[static_cast<std::size_t>(g)] = tb;
                y.col(g) = s.abundances.col(a + 1);
                w.col(g) = s.interventions.col(a + 1);
            } else {
                const double frac = (t - ta) / (tb - ta);
                y.col(g) = s.abundances.col(a) + frac * (s.abundances.col(a + 1) - s.abundances.col(a));
                w.col(g) = s.interventions.col(a) + frac * (s.interventions.col(a + 1) - s.interventions.col(a));
            }
        }
        s.times = std::move(grid);
        s.abundances = std::move(y);
        s.interventions = std::move(w);
    }
    return out;
}

std::size_t feature_width(std::size_t J, std::size_t D, std::size_t S, int P, int Q) {
    return static_cast<std::size_t>(P) * J + static_cast<std::size_t>(Q) * D + S;
}

std::vector<std::size_t> segment_targets(std::size_t n_observed, int P) {
    std::vector<std::size_t> out;
    const auto step = static_cast<std::size_t>(P);
    if (n_observed < step + 1) {
        return out;
    }
    for (std::size_t t = n_observed - 1;; t -= step) {
        out.push_back(t);
        if (t < 2 * step) break;
    }
    return out;
}

Design build_design(const InterventionSeriesSet& set, int P, int Q) {
    if (P < 1 || Q < 1) {
        throw ValidationError("bad_lags", "P and Q must be at least 1");
    }
    const std::size_t J = set.n_taxa();
    const std::size_t F = feature_width(J, set.n_channels(), set.n_covariates(), P, Q);
    std::size_t rows = 0;
    for (const auto& s : set.subjects) {
        if (s.n_observed() < static_cast<std::size_t>(P) + 1) {
            throw ValidationError("series_too_short", "subject '" + s.subject_id + "' has fewer than P+1 observed timepoints");
        }
        rows += segment_targets(s.n_observed(), P).size();
    }

    Design d;
    d.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(F));
    d.targets.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(J));
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < set.subjects.size(); ++i) {
        const auto& s = set.subjects[i];
        for (auto target : segment_targets(s.n_observed(), P)) {
            fill_features([&](std::size_t k) { return s.abundances.col(static_cast<Eigen::Index>(k)); },
                          s.interventions, s.covariates, target, P, Q, d.features.row(r).data());
            d.targets.row(r) = s.abundances.col(static_cast<Eigen::Index>(target)).transpose();
            d.subject_index.push_back(i);
            d.target_index.push_back(target);
            ++r;
        }
    }
    return d;
}

std::vector<TrainingSegment> extract_segments(const InterventionSeriesSet& set, int P, int Q) {
    const Design d = build_design(set, P, Q);
    std::vector<TrainingSegment> out;
    out.reserve(static_cast<std::size_t>(d.features.rows()) * set.n_taxa());
    for (Eigen::Index r = 0; r < d.features.rows(); ++r) {
        std::vector<double> features(d.features.row(r).data(), d.features.row(r).data() + d.features.cols());
        for (std::size_t j = 0; j < set.n_taxa(); ++j) {
            TrainingSegment seg;
            seg.features = features;
            seg.target_taxon = j;
            seg.target_value = d.targets(r, static_cast<Eigen::Index>(j));
            seg.subject_id = set.subjects[d.subject_index[static_cast<std::size_t>(r)]].subject_id;
            seg.target_time_index = d.target_index[static_cast<std::size_t>(r)];
            out.push_back(std::move(seg));
        }
    }
    return out;
}

InterventionSeriesSet subset_values(const InterventionSeriesSet& set,
                                    const std::vector<std::size_t>& time_indices) {
    if (time_indices.empty()) {
        throw ValidationError("empty_indices", "subset_values needs at least one index");
    }
    for (std::size_t k = 1; k < time_indices.size(); ++k) {
        if (time_indices[k] != time_indices[k - 1] + 1) {
            throw ValidationError("noncontiguous_indices", "subset_values indices must be contiguous and ascending");
        }
    }
    const std::size_t first = time_indices.front();
    const std::size_t last = time_indices.back();
    InterventionSeriesSet out = set;
    for (auto& s : out.subjects) {
        if (last >= s.n_observed()) {
            throw ValidationError("index_out_of_range", "index " + std::to_string(last) +
                                                           " out of range for subject '" + s.subject_id + "'");
        }
        const auto a = static_cast<Eigen::Index>(first);
        const auto n = static_cast<Eigen::Index>(last - first + 1);
        const auto rest = static_cast<Eigen::Index>(s.n_times() - first);
        s.abundances = Matrix(s.abundances.middleCols(a, n));
        s.interventions = Matrix(s.interventions.middleCols(a, rest));
        s.times.erase(s.times.begin(), s.times.begin() + static_cast<long>(first));
    }
    return out;
}

std::optional<std::size_t> first_intervention(const SubjectSeries& s) {
    for (Eigen::Index t = 0; t < s.interventions.cols(); ++t) {
        if ((s.interventions.col(t).array() != 0.0).any()) {
            return static_cast<std::size_t>(t);
        }
    }
    return std::nullopt;
}

}  // namespace tfint
