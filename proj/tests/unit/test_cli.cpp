#include "tfint/cli.hpp"
#include "tfint/csv_io.hpp"
#include "tfint/mirrors.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace tfint;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("tfint_cli_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

void write_sim_config(const std::string& path) {
    write_file_atomic(path, R"({"J": 8, "n_subjects": 10, "T": 16, "seed": 4})");
}

const std::vector<std::string> kFast{"--rounds", "10", "--normalize", "sf-asinh", "--sf-reference", "poscounts"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("simulate, fit and predict") {
    TempDir tmp;
    write_sim_config(tmp / "sim.json");
    auto r = cli({"simulate", "--config", tmp / "sim.json", "--out", tmp / "data"});
    REQUIRE(r.code == 0);
    for (const char* f : {"reads.csv", "samples.csv", "interventions.csv", "subjects.csv", "dataset.json", "truth.json", "run.json"})
        CHECK(fs::exists(tmp.path / "data" / f));
    const auto manifest = nlohmann::json::parse(read_file(tmp / "data/run.json"));
    CHECK(manifest["seeds"]["seed"] == 4);
    CHECK(manifest["subcommand"] == "simulate");

    r = cli(concat({"--seed", "3", "fit", "--data", tmp / "data", "--out", tmp / "model"}, kFast));
    REQUIRE(r.code == 0);
    CHECK(fs::exists(tmp.path / "model/size_factors.csv"));
    r = cli({"predict", "--model", tmp / "model/model.json", "--data", tmp / "data", "--out", tmp / "pred", "--horizon", "3"});
    REQUIRE(r.code == 0);
    const auto t = read_csv(tmp / "pred/forecasts.csv");
    CHECK(t.header == std::vector<std::string>{"subject", "taxon", "horizon", "time", "value"});
    CHECK(t.rows.size() == 10u * 8u * 3u);
}

TEST_CASE("select matches the library and replays bitwise") {
    TempDir tmp;
    write_sim_config(tmp / "sim.json");
    REQUIRE(cli({"simulate", "--config", tmp / "sim.json", "--out", tmp / "data"}).code == 0);
    const std::vector<std::string> sel{"select", "--data", tmp / "data", "--splits", "4", "--lags", "0,1"};
    REQUIRE(cli(concat(concat({"--seed", "9", "--threads", "1"}, sel), concat({"--out", tmp / "s1"}, kFast))).code == 0);
    REQUIRE(cli(concat(concat({"--seed", "9", "--threads", "3"}, sel), concat({"--out", tmp / "s3"}, kFast))).code == 0);
    CHECK(read_file(tmp / "s1/selection.csv") == read_file(tmp / "s3/selection.csv"));
    CHECK(read_file(tmp / "s1/mirrors.csv") == read_file(tmp / "s3/mirrors.csv"));

    SelectOptions opt;
    opt.recipe.P = 2;
    opt.recipe.Q = 2;
    opt.recipe.normalize = NormalizeMode::size_factor_asinh;
    opt.recipe.sf_reference = SizeFactorReference::positive_counts;
    opt.recipe.boost.n_rounds = 10;
    opt.recipe.boost.seed = 9;
    opt.n_splits = 4;
    opt.lags = {0, 1};
    opt.seed = 9;
    const auto data = read_dataset(tmp / "data");
    const auto report = select_taxa(data, InterventionScenario{Matrix::Ones(1, 3), "on"},
                                    InterventionScenario{Matrix::Zero(1, 3), "off"}, opt);
    CHECK(to_csv(selection_table(report)) == read_file(tmp / "s1/selection.csv"));

    REQUIRE(cli({"replay", "--manifest", tmp / "s1/run.json", "--out", tmp / "again"}).code == 0);
    CHECK(read_file(tmp / "again/selection.csv") == read_file(tmp / "s1/selection.csv"));
    CHECK(read_file(tmp / "again/selection_per_lag.csv") == read_file(tmp / "s1/selection_per_lag.csv"));
}

TEST_CASE("generated seeds are recorded") {
    TempDir tmp;
    write_sim_config(tmp / "sim.json");
    REQUIRE(cli({"simulate", "--config", tmp / "sim.json", "--out", tmp / "data"}).code == 0);
    REQUIRE(cli({"fit", "--data", tmp / "data", "--out", tmp / "m1", "--rounds", "5"}).code == 0);
    const auto manifest = nlohmann::json::parse(read_file(tmp / "m1/run.json"));
    const auto args = manifest["args"].get<std::vector<std::string>>();
    REQUIRE(args.size() > 2);
    CHECK(args[0] == "--seed");
    CHECK(args[1] == std::to_string(manifest["seeds"]["seed"].get<std::uint64_t>()));
    REQUIRE(cli({"replay", "--manifest", tmp / "m1/run.json", "--out", tmp / "m2"}).code == 0);
    CHECK(read_file(tmp / "m1/model.json") == read_file(tmp / "m2/model.json"));
}

TEST_CASE("error contract") {
    TempDir tmp;
    auto r = cli({"fit", "--data", tmp / "missing", "--out", tmp / "x"});
    CHECK(r.code == 3);
    r = cli({"fit", "--bogus"});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error code=bad_arguments exit=2 ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    write_sim_config(tmp / "sim.json");
    REQUIRE(cli({"simulate", "--config", tmp / "sim.json", "--out", tmp / "data"}).code == 0);
    auto set = read_dataset(tmp / "data");
    set.scale_tag = ScaleTag::normalized;
    write_dataset(set, tmp / "norm");
    r = cli({"fit", "--data", tmp / "norm", "--out", tmp / "m", "--normalize", "sf"});
    CHECK(r.code == 2);
    CHECK(r.err.find("code=already_normalized") != std::string::npos);

    write_file_atomic(tmp / "bad.json", R"({"J": 10, "nonsense": 1})");
    CHECK(cli({"simulate", "--config", tmp / "bad.json", "--out", tmp / "d2"}).code == 2);
    CHECK(cli({"--version"}).code == 0);
}

TEST_CASE("binary exit codes and single-line errors") {
    const char* bin = std::getenv("TFINT_BIN");
    if (!bin) return;
    TempDir tmp;
    auto status = [&](const std::string& args) {
        const std::string cmd = std::string(bin) + " " + args + " 2> " + (tmp / "err.txt");
        const int s = std::system(cmd.c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status("fit --nope") == 2);
    auto err = read_file(tmp / "err.txt");
    CHECK(std::count(err.begin(), err.end(), '\n') == 1);
    CHECK(status("fit --data " + (tmp / "none") + " --out " + (tmp / "o")) == 3);
    err = read_file(tmp / "err.txt");
    CHECK(err.rfind("error code=", 0) == 0);
    CHECK(std::count(err.begin(), err.end(), '\n') == 1);
    CHECK(status("--help > /dev/null") == 0);
}
