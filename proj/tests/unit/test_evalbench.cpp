#include "helpers.hpp"
#include "tfint/error.hpp"
#include "tfint/evalbench.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace tfint;
using testing_util::make_set;
using testing_util::row;
using testing_util::subject;

namespace {

InterventionSeriesSet ramp_set() {
    std::vector<SubjectSeries> subjects;
    for (int i = 0; i < 4; ++i) {
        Matrix y(2, 10);
        for (Eigen::Index t = 0; t < 10; ++t) {
            y(0, t) = static_cast<double>(t + i);
            y(1, t) = 2.0 * static_cast<double>(t) - i;
        }
        Matrix w = Matrix::Zero(1, 10);
        w(0, 3 + i) = 1.0;
        subjects.push_back(subject("s" + std::to_string(i), y, w));
    }
    return make_set(subjects);
}

sim::SimResult tiny_sim() {
    sim::SimConfig c;
    c.J = 6;
    c.n_subjects = 8;
    c.T = 15;
    c.seed = 21;
    return sim::simulate(c, 1);
}

FitRecipe tiny_recipe() {
    FitRecipe r;
    r.P = 2;
    r.Q = 2;
    r.boost.n_rounds = 10;
    r.normalize = NormalizeMode::size_factor_asinh;
    r.sf_reference = SizeFactorReference::positive_counts;
    return r;
}

}  // namespace

TEST_CASE("holdout cases reveal abundances only up to onset") {
    const auto set = ramp_set();
    const auto cases = make_holdout_cases(set, {0, 1, 2, 3}, 2, 3);
    REQUIRE(cases.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(cases[i].anchor == 3 + i);
        CHECK(cases[i].revealed.abundances.cols() == static_cast<Eigen::Index>(4 + i));
        CHECK(cases[i].revealed.interventions.cols() == 10);
        CHECK(cases[i].truth == set.subjects[i].abundances.middleCols(static_cast<Eigen::Index>(4 + i), 3));
    }
}

TEST_CASE("oracle, off-by-one and carry-forward errors") {
    const auto set = ramp_set();
    const auto cases = make_holdout_cases(set, {0, 1, 2, 3}, 2, 3);
    const auto oracle = forecast_errors(cases, [](const HoldoutCase& c, int) { return c.truth; }, 3);
    CHECK(oracle.size() == 4 * 2 * 3);
    CHECK(mean_of(oracle) == 0.0);
    const auto shifted = forecast_errors(
        cases, [](const HoldoutCase& c, int) { return Matrix((c.truth.array() + 1.0).matrix()); }, 3);
    CHECK(mean_of(shifted) == 1.0);

    Matrix y = Matrix::Constant(2, 10, 4.0);
    Matrix w = Matrix::Zero(1, 10);
    w(0, 4) = 1;
    const auto flat = make_set({subject("a", y, w), subject("b", y, w)});
    const auto flat_cases = make_holdout_cases(flat, {0, 1}, 2, 5);
    CHECK(mean_of(forecast_errors(
              flat_cases, [](const HoldoutCase& c, int H) { return carry_forward(c.revealed.abundances, H); }, 5)) ==
          0.0);
    CHECK_THROWS_AS(
        forecast_errors(flat_cases, [](const HoldoutCase&, int) { return Matrix(Matrix::Zero(1, 1)); }, 5),
        ValidationError);
}

TEST_CASE("holdout errors") {
    auto set = ramp_set();
    set.subjects[1].interventions.setZero();
    CHECK_THROWS_AS(make_holdout_cases(set, {1}, 2, 3), DataError);
    try {
        make_holdout_cases(set, {1}, 2, 3);
    } catch (const DataError& e) {
        CHECK(e.code() == "no_intervention");
    }
    CHECK_THROWS_AS(make_holdout_cases(ramp_set(), {0}, 4, 3), DataError);
    CHECK_THROWS_AS(make_holdout_cases(ramp_set(), {3}, 2, 4), DataError);
}

TEST_CASE("baselines") {
    Matrix h(2, 3);
    h << 9, 8, 3, 0, 5, 1;
    const Matrix cf = carry_forward(h, 4);
    CHECK(cf.cols() == 4);
    for (Eigen::Index k = 0; k < 4; ++k) {
        CHECK(cf(0, k) == 3.0);
        CHECK(cf(1, k) == 1.0);
    }
    CHECK(carry_forward(h, 4) == cf);
    CHECK_THROWS_AS(carry_forward(Matrix(2, 0), 1), ValidationError);

    Vector m(2);
    m << 1.5, -2;
    const Matrix gm = global_mean(m, 3);
    CHECK(gm.row(0).isConstant(1.5));
    CHECK(gm.row(1).isConstant(-2.0));
    CHECK_THROWS_AS(global_mean(Vector(), 3), ValidationError);

    const auto set = ramp_set();
    const auto train = set.select_subjects({0, 1});
    const Vector means = training_means(train);
    CHECK(means(0) == doctest::Approx((4.5 + 5.5) / 2));
    CHECK(means(1) == doctest::Approx((9.0 + 8.0) / 2));
}

TEST_CASE("folds partition subjects deterministically") {
    std::vector<std::string> ids;
    for (int i = 0; i < 23; ++i) ids.push_back("subj" + std::to_string(i));
    const auto f = assign_folds(ids, 4, 9);
    CHECK(f == assign_folds(ids, 4, 9));
    std::vector<int> sizes(4, 0);
    for (int k : f) {
        REQUIRE(k >= 0);
        REQUIRE(k < 4);
        ++sizes[static_cast<std::size_t>(k)];
    }
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);

    auto reversed = ids;
    std::reverse(reversed.begin(), reversed.end());
    const auto fr = assign_folds(reversed, 4, 9);
    for (std::size_t i = 0; i < ids.size(); ++i) CHECK(fr[ids.size() - 1 - i] == f[i]);
    CHECK(assign_folds(ids, 4, 10) != f);
    CHECK_THROWS_AS(assign_folds(ids, 1, 0), ValidationError);
    CHECK_THROWS_AS(assign_folds({"a", "b"}, 3, 0), ValidationError);
}

TEST_CASE("inference scoring") {
    const std::set<std::size_t> nonnull{0, 1, 2, 3};
    auto r = inference_eval({0, 1, 2, 3}, nonnull);
    CHECK(r.fdp == 0.0);
    CHECK(r.power == 1.0);
    r = inference_eval({}, nonnull);
    CHECK(r.fdp == 0.0);
    CHECK(r.power == 0.0);
    r = inference_eval({7, 2}, nonnull);
    CHECK(r.fdp == 0.5);
    CHECK(r.power == 0.25);
    CHECK(inference_eval({5}, std::set<std::size_t>{}).power == 0.0);

    std::vector<std::size_t> sel{9, 11};
    double last = inference_eval(sel, nonnull).power;
    for (std::size_t j : nonnull) {
        sel.push_back(j);
        const double p = inference_eval(sel, nonnull).power;
        CHECK(p >= last);
        last = p;
    }

    sim::SimTruth t;
    t.A = Matrix::Zero(3, 3);
    t.A_p = {Matrix::Zero(3, 3)};
    t.B = {Matrix::Zero(3, 1)};
    t.B[0](1, 0) = 1.0;
    const auto sets = sim::nonnull_sets(t, 1);
    r = inference_eval({1, 2}, sets, 0);
    CHECK(r.fdp == 0.5);
    CHECK(r.power == 1.0);
    CHECK(r.lag == 0);
    CHECK_THROWS_AS(inference_eval({1}, sets, 2), ValidationError);
}

TEST_CASE("quartile truncation drops only far outliers") {
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(truncated_mean(v) == mean_of(v));
    v.push_back(1000);
    CHECK(truncated_mean(v) == doctest::Approx(4.5));
    CHECK(mean_of(v) > 100);
}

TEST_CASE("cross-validated evaluation") {
    const auto sim = tiny_sim();
    CvOptions opt;
    opt.K = 4;
    opt.H = 3;
    opt.seed = 2;
    opt.threads = 2;
    const auto rep = cv_forecast_eval(sim.data, tiny_recipe(), opt);
    CHECK(rep.scale == ScaleTag::normalized_asinh);
    CHECK(rep.folds.size() == 12);
    std::size_t holdouts = 0;
    for (const auto& f : rep.folds) {
        CHECK(f.mae >= 0.0);
        CHECK(f.mae_truncated <= f.mae + 1e-12);
        if (f.method == "transfer") holdouts += f.n_holdout;
    }
    CHECK(holdouts == sim.data.subjects.size());
    CHECK(rep.mae("transfer").size() == 4);
    CHECK(relative_advantage(rep, "transfer", "carry_forward").size() == 4);

    auto permuted = sim.data;
    std::reverse(permuted.subjects.begin(), permuted.subjects.end());
    opt.threads = 1;
    const auto rep2 = cv_forecast_eval(permuted, tiny_recipe(), opt);
    for (const char* m : {"transfer", "carry_forward", "global_mean"}) {
        const auto a = rep.mae(m), b = rep2.mae(m);
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-12 * (1 + a[k]));
    }

    CHECK(std::abs(advantage_gap(rep, rep2, "transfer", "carry_forward")) < 1e-12);
    auto counts_recipe = tiny_recipe();
    counts_recipe.normalize = NormalizeMode::none;
    const auto rep_counts = cv_forecast_eval(sim.data, counts_recipe, opt);
    CHECK(rep_counts.scale == ScaleTag::counts);
    CHECK_THROWS_AS(advantage_gap(rep, rep_counts, "transfer", "carry_forward"), ValidationError);

    const auto table = eval_table({rep});
    CHECK(table.rows.size() == 12);
}
