#include "helpers.hpp"

#include "tfint/csv_io.hpp"
#include "tfint/error.hpp"
#include "tfint/series.hpp"

#include <doctest.h>

#include <filesystem>

using namespace tfint;
using testing_util::make_set;
using testing_util::row;
using testing_util::subject;

namespace {

std::string code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

struct Tables {
    Table reads, interventions, samples, subjects;
};

Tables two_by_three() {
    Tables t;
    t.reads.header = {"taxon", "a3", "a1", "a2", "b1", "b2", "b3"};
    for (int j = 0; j < 4; ++j) {
        std::vector<std::string> r{"tax" + std::to_string(j)};
        for (int c = 0; c < 6; ++c) r.push_back(std::to_string(10 * j + c));
        t.reads.rows.push_back(r);
    }
    t.interventions.header = {"sample", "diet"};
    t.samples.header = {"sample", "subject", "time"};
    const std::vector<std::pair<std::string, std::string>> meta = {
        {"a3", "3"}, {"a1", "1"}, {"a2", "2"}, {"b1", "1"}, {"b2", "2"}, {"b3", "3"}};
    for (const auto& [s, time] : meta) {
        t.interventions.rows.push_back({s, time == "2" ? "1" : "0"});
        t.samples.rows.push_back({s, s.substr(0, 1), time});
    }
    t.subjects.header = {"subject", "age"};
    t.subjects.rows = {{"a", "1.5"}, {"b", "2.5"}};
    return t;
}

}  // namespace

TEST_CASE("ingest reshapes and sorts by time") {
    auto t = two_by_three();
    const auto set = ingest(t.reads, t.interventions, t.samples, t.subjects);
    REQUIRE(set.subjects.size() == 2);
    CHECK(set.n_taxa() == 4);
    CHECK(set.n_channels() == 1);
    CHECK(set.scale_tag == ScaleTag::counts);
    const auto& a = set.subjects[0];
    CHECK(a.subject_id == "a");
    CHECK(a.times == std::vector<double>{1, 2, 3});
    // column a1 is reads column 1, a2 column 2, a3 column 0
    CHECK(a.abundances(2, 0) == 21);
    CHECK(a.abundances(2, 1) == 22);
    CHECK(a.abundances(2, 2) == 20);
    CHECK(a.interventions(0, 1) == 1);
    CHECK(a.covariates(0) == 1.5);
}

TEST_CASE("ingest errors name the offending identifier") {
    auto t = two_by_three();
    t.samples.rows.push_back({"zz", "a", "4"});
    t.interventions.rows.push_back({"zz", "0"});
    try {
        ingest(t.reads, t.interventions, t.samples, t.subjects);
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(e.code() == "unknown_sample");
        CHECK(std::string(e.what()).find("zz") != std::string::npos);
    }

    t = two_by_three();
    t.samples.rows[1][2] = "3";
    CHECK(code_of([&] { ingest(t.reads, t.interventions, t.samples, t.subjects); }) == "duplicate_time");

    t = two_by_three();
    t.reads.rows[0][2] = "abc";
    CHECK(code_of([&] { ingest(t.reads, t.interventions, t.samples, t.subjects); }) == "non_numeric");

    t = two_by_three();
    t.reads.rows[1].pop_back();
    CHECK(code_of([&] { ingest(t.reads, t.interventions, t.samples, t.subjects); }) == "ragged_row");
}

TEST_CASE("interpolate linear midpoint and fractional interventions") {
    SubjectSeries s;
    s.subject_id = "s";
    s.times = {0, 2};
    s.abundances = row({0, 4});
    s.interventions = row({0, 1});
    s.covariates = Vector::Zero(1);
    auto set = make_set({s});
    const auto out = interpolate(set, 1.0);
    const auto& r = out.subjects[0];
    CHECK(r.times == std::vector<double>{0, 1, 2});
    CHECK(r.abundances(0, 0) == 0);
    CHECK(r.abundances(0, 1) == 2);
    CHECK(r.abundances(0, 2) == 4);
    CHECK(r.interventions(0, 1) == 0.5);
}

TEST_CASE("interpolate is the identity on a matching uniform grid") {
    auto set = make_set({subject("s", row({3, 1, 4, 1, 5}), row({0, 0, 1, 1, 0}))});
    const auto out = interpolate(set, 1.0);
    CHECK(out.subjects[0].times == set.subjects[0].times);
    CHECK(out.subjects[0].abundances == set.subjects[0].abundances);
    CHECK(out.subjects[0].interventions == set.subjects[0].interventions);
    const auto twice = interpolate(out, 1.0);
    CHECK(twice.subjects[0].abundances == out.subjects[0].abundances);
}

TEST_CASE("interpolate reproduces knots and rejects bad input") {
    SubjectSeries s;
    s.subject_id = "s";
    s.times = {0, 1.5, 4};
    s.abundances = row({1, 7, 2});
    s.interventions = row({0, 1, 0});
    s.covariates = Vector::Zero(1);
    auto set = make_set({s});
    const auto out = interpolate(set, 0.5);
    CHECK(out.subjects[0].times.back() == 4.0);
    CHECK(out.subjects[0].abundances(0, 3) == 7);  // t = 1.5
    CHECK(out.subjects[0].abundances(0, 8) == 2);

    CHECK(code_of([&] { interpolate(set, 0.0); }) == "bad_delta");
    s.times = {0};
    s.abundances = row({1});
    s.interventions = row({0});
    CHECK(code_of([&] { interpolate(make_set({s}), 1.0); }) == "too_few_timepoints");
}

TEST_CASE("feature layout: lags most recent first, then w_{t+1}.., then z") {
    Matrix y(2, 4);
    y << 1, 2, 3, 4, 10, 20, 30, 40;
    const auto s = subject("s", y, row({0.5, 0.25, 0.125, 1}), 9.0);
    std::vector<double> f(feature_width(2, 1, 1, 2, 2));
    REQUIRE(f.size() == 2 * 2 + 2 * 1 + 1);
    fill_features([&](std::size_t k) { return s.abundances.col(static_cast<Eigen::Index>(k)); }, s.interventions,
                  s.covariates, 3, 2, 2, f.data());
    CHECK(f == std::vector<double>{3, 30, 2, 20, 1, 0.125, 9});
    // intervention lags before time 0 clamp to column 0
    std::vector<double> g(feature_width(2, 1, 1, 2, 4));
    fill_features([&](std::size_t k) { return s.abundances.col(static_cast<Eigen::Index>(k)); }, s.interventions,
                  s.covariates, 2, 2, 4, g.data());
    CHECK(g == std::vector<double>{2, 20, 1, 10, 0.125, 0.25, 0.5, 0.5, 9});
}

TEST_CASE("segments walk backward and do not overlap") {
    CHECK(segment_targets(10, 3) == std::vector<std::size_t>{9, 6, 3});
    CHECK(segment_targets(4, 3) == std::vector<std::size_t>{3});
    CHECK(segment_targets(3, 3).empty());
    Matrix y = Matrix::Random(3, 12);
    auto set = make_set({subject("a", y, Matrix::Zero(1, 12)), subject("b", y, Matrix::Zero(1, 12))});
    const auto segs = extract_segments(set, 2, 2);
    const auto d = build_design(set, 2, 2);
    CHECK(segs.size() == static_cast<std::size_t>(d.features.rows()) * 3);
    for (std::size_t a = 0; a < d.target_index.size(); ++a)
        for (std::size_t b = a + 1; b < d.target_index.size(); ++b)
            if (d.subject_index[a] == d.subject_index[b]) {
                const auto diff = d.target_index[a] > d.target_index[b] ? d.target_index[a] - d.target_index[b]
                                                                        : d.target_index[b] - d.target_index[a];
                CHECK(diff >= 2);
            }
    for (const auto& seg : segs) {
        const auto r = static_cast<Eigen::Index>(&seg - segs.data()) / 3;
        CHECK(seg.target_value == d.targets(r, static_cast<Eigen::Index>(seg.target_taxon)));
    }
}

TEST_CASE("build_design rejects series shorter than P+1") {
    auto set = make_set({subject("a", Matrix::Ones(1, 2), Matrix::Zero(1, 2))});
    CHECK(code_of([&] { build_design(set, 2, 1); }) == "series_too_short");
}

TEST_CASE("subset_values keeps a contiguous prefix of abundances") {
    Matrix y(1, 5);
    y << 1, 2, 3, 4, 5;
    auto set = make_set({subject("a", y, row({0, 0, 1, 0, 0}))});
    const auto sub = subset_values(set, {1, 2});
    CHECK(sub.subjects[0].abundances.cols() == 2);
    CHECK(sub.subjects[0].abundances(0, 0) == 2);
    CHECK(sub.subjects[0].interventions.cols() == 4);
    CHECK(code_of([&] { subset_values(set, {1, 3}); }) == "noncontiguous_indices");
    CHECK(first_intervention(set.subjects[0]) == std::optional<std::size_t>(2));
}

TEST_CASE("dataset CSV round trip is bit exact") {
    Matrix y(2, 3);
    y << 1, 0, 12345678901, 7, 8, 9;
    auto s = subject("a", y, row({0.1, 1.0 / 3.0, 0}), 0.7);
    auto set = make_set({s, subject("b", y * 2, row({1, 0, 0}), -1e-300)});
    const auto dir = std::filesystem::temp_directory_path() / "tfint_series_roundtrip";
    std::filesystem::remove_all(dir);
    write_dataset(set, dir);
    const auto back = read_dataset(dir);
    REQUIRE(back.subjects.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.subjects[i].abundances == set.subjects[i].abundances);
        CHECK(back.subjects[i].interventions == set.subjects[i].interventions);
        CHECK(back.subjects[i].covariates == set.subjects[i].covariates);
        CHECK(back.subjects[i].times == set.subjects[i].times);
    }
    CHECK(back.taxa_names == set.taxa_names);
    std::filesystem::remove_all(dir);
}

TEST_CASE("csv parser handles quotes") {
    const auto t = parse_csv("a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][0] == "x,y");
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(format_double(0.1) == "0.10000000000000001");
}
