#pragma once

#include "tfint/series.hpp"

#include <string>
#include <vector>

namespace testing_util {

using tfint::Matrix;

inline tfint::SubjectSeries subject(const std::string& id, const Matrix& y, const Matrix& w, double z = 0.0) {
    tfint::SubjectSeries s;
    s.subject_id = id;
    for (Eigen::Index t = 0; t < w.cols(); ++t) s.times.push_back(static_cast<double>(t));
    s.abundances = y;
    s.interventions = w;
    s.covariates = tfint::Vector::Constant(1, z);
    return s;
}

inline tfint::InterventionSeriesSet make_set(std::vector<tfint::SubjectSeries> subjects) {
    tfint::InterventionSeriesSet set;
    const auto J = subjects.front().abundances.rows();
    const auto D = subjects.front().interventions.rows();
    for (Eigen::Index j = 0; j < J; ++j) set.taxa_names.push_back("t" + std::to_string(j));
    for (Eigen::Index d = 0; d < D; ++d) set.intervention_names.push_back("w" + std::to_string(d));
    set.covariate_names = {"z"};
    set.subjects = std::move(subjects);
    return set;
}

inline Matrix row(std::initializer_list<double> v) {
    Matrix m(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) m(0, k++) = x;
    return m;
}

}  // namespace testing_util
