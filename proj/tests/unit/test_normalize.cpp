#include "helpers.hpp"

#include "tfint/error.hpp"
#include "tfint/normalize.hpp"

#include <doctest.h>

#include <cmath>

using namespace tfint;
using testing_util::make_set;
using testing_util::subject;

namespace {

InterventionSeriesSet pair_set() {
    Matrix y(3, 2);
    y << 2, 1, 4, 2, 6, 3;  // sample A = [2,4,6], sample B = [1,2,3]
    return make_set({subject("s", y, Matrix::Zero(1, 2))});
}

}  // namespace

TEST_CASE("median of ratios on the [2,4,6] / [1,2,3] pair") {
    const auto sf = size_factors_median_ratios(pair_set());
    // geometric means sqrt(2), 2 sqrt(2), 3 sqrt(2): every ratio of A is sqrt 2
    CHECK(std::abs(sf.factors[0][0] - std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(sf.factors[0][1] - 1.0 / std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(sf.factors[0][0] * sf.factors[0][1] - 1.0) < 1e-12);
}

TEST_CASE("constant ratio c gives factors (sqrt c, 1/sqrt c)") {
    for (double c : {3.0, 10.0, 0.25}) {
        Matrix y(4, 2);
        y << 5 * c, 5, 1 * c, 1, 8 * c, 8, 2 * c, 2;
        const auto sf = size_factors_median_ratios(make_set({subject("s", y, Matrix::Zero(1, 2))}));
        CHECK(sf.factors[0][0] == doctest::Approx(std::sqrt(c)).epsilon(1e-12));
        CHECK(sf.factors[0][1] == doctest::Approx(1 / std::sqrt(c)).epsilon(1e-12));
    }
}

TEST_CASE("identical samples give unit factors") {
    Matrix y(3, 4);
    for (int t = 0; t < 4; ++t) y.col(t) << 7, 1, 300;
    const auto sf = size_factors_median_ratios(make_set({subject("a", y, Matrix::Zero(1, 4)), subject("b", y, Matrix::Zero(1, 4))}));
    for (const auto& r : sf.factors)
        for (double f : r) CHECK(std::abs(f - 1.0) < 1e-12);
}

TEST_CASE("taxa with zeros leave the reference but are still normalized") {
    Matrix y(3, 2);
    y << 2, 1, 4, 2, 0, 5;
    const auto set = make_set({subject("s", y, Matrix::Zero(1, 2))});
    SizeFactors sf;
    const auto out = apply_normalization(set, NormalizeMode::size_factor, &sf);
    CHECK(std::isinf(sf.reference_log_means[2]));
    CHECK(sf.factors[0][0] == doctest::Approx(std::sqrt(2.0)));
    CHECK(out.subjects[0].abundances(2, 1) == doctest::Approx(5 * std::sqrt(2.0)));
    CHECK(out.scale_tag == ScaleTag::normalized);
}

TEST_CASE("no all-positive taxon is an error pointing at filtering") {
    Matrix y(2, 2);
    y << 0, 1, 3, 0;
    const auto set = make_set({subject("s", y, Matrix::Zero(1, 2))});
    try {
        size_factors_median_ratios(set);
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(e.code() == "no_positive_taxon");
        CHECK(std::string(e.what()).find("filter") != std::string::npos);
    }
    // the positive-counts reference still works and has geometric mean one
    const auto sf = size_factors_positive_counts(set);
    CHECK(sf.factors[0][0] * sf.factors[0][1] == doctest::Approx(1.0));
}

TEST_CASE("positive-counts reference matches median of ratios when nothing is zero") {
    Matrix y(3, 3);
    y << 2, 1, 5, 4, 2, 1, 6, 3, 9;
    const auto set = make_set({subject("s", y, Matrix::Zero(1, 3))});
    const auto a = size_factors_median_ratios(set);
    const auto b = size_factors_positive_counts(set);
    double gm = 0;
    for (double f : a.factors[0]) gm += std::log(f);
    gm = std::exp(gm / 3);
    for (int t = 0; t < 3; ++t) CHECK(b.factors[0][static_cast<std::size_t>(t)] == doctest::Approx(a.factors[0][static_cast<std::size_t>(t)] / gm).epsilon(1e-12));
    // the stored reference reproduces the factors on the same data
    const auto again = size_factors_with_reference(set, b.reference_log_means);
    for (int t = 0; t < 3; ++t) CHECK(again.factors[0][static_cast<std::size_t>(t)] == b.factors[0][static_cast<std::size_t>(t)]);
}

TEST_CASE("asinh closed form and monotonicity") {
    CHECK(asinh_transform(0.0) == 0.0);
    CHECK(asinh_transform(1.0) == doctest::Approx(0.881374).epsilon(1e-6));
    CHECK(asinh_transform(1.0) == doctest::Approx(std::log(1 + std::sqrt(2.0))).epsilon(1e-15));
    double prev = -1;
    for (double x = 0; x < 1e6; x = x * 1.7 + 0.3) {
        const double v = asinh_transform(x);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("mode none is the identity; double normalization refused") {
    const auto set = pair_set();
    const auto same = apply_normalization(set, NormalizeMode::none);
    CHECK(same.subjects[0].abundances == set.subjects[0].abundances);
    CHECK(same.scale_tag == ScaleTag::counts);
    const auto once = apply_normalization(set, NormalizeMode::size_factor_asinh);
    CHECK(once.scale_tag == ScaleTag::normalized_asinh);
    try {
        apply_normalization(once, NormalizeMode::size_factor);
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(e.code() == "already_normalized");
    }
}

TEST_CASE("multiplying factors back recovers counts") {
    Matrix y(4, 5);
    y << 3, 8, 1, 9, 4, 10, 40, 7, 22, 13, 5, 5, 5, 5, 6, 100, 900, 250, 80, 60;
    const auto set = make_set({subject("s", y, Matrix::Zero(1, 5))});
    SizeFactors sf;
    const auto out = apply_normalization(set, NormalizeMode::size_factor, &sf);
    for (Eigen::Index t = 0; t < 5; ++t)
        for (Eigen::Index j = 0; j < 4; ++j) {
            const double back = out.subjects[0].abundances(j, t) * sf.factors[0][static_cast<std::size_t>(t)];
            CHECK(std::abs(back - y(j, t)) <= 1e-12 * y(j, t));
        }
    const auto table = size_factor_table(set, sf);
    CHECK(table.rows.size() == 5);
    CHECK(table.header == std::vector<std::string>{"sample", "factor"});
}

TEST_CASE("mode spellings") {
    CHECK(normalize_mode_from_string("sf-asinh") == NormalizeMode::size_factor_asinh);
    CHECK(to_string(NormalizeMode::size_factor) == "sf");
    CHECK_THROWS_AS(normalize_mode_from_string("log"), ValidationError);
    CHECK(size_factor_reference_from_string("poscounts") == SizeFactorReference::positive_counts);
}
