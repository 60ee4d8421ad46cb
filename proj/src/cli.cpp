#include "tfint/cli.hpp"

#include "tfint/csv_io.hpp"
#include "tfint/error.hpp"
#include "tfint/evalbench.hpp"
#include "tfint/mirrors.hpp"
#include "tfint/normalize.hpp"
#include "tfint/parallel.hpp"
#include "tfint/simgen.hpp"
#include "tfint/transfer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace tfint {

namespace {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level() {
    const char* env = std::getenv("TFINT_LOG_LEVEL");
    const std::string v = env ? env : "warn";
    if (v == "error") return LogLevel::error;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
}

struct Logger {
    std::ostream& err;
    LogLevel level = log_level();

    void info(const std::string& msg) const {
        if (level >= LogLevel::info) err << "[info] " << msg << '\n';
    }
    void debug(const std::string& msg) const {
        if (level >= LogLevel::debug) err << "[debug] " << msg << '\n';
    }
};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += (c == '\n' || c == '\r') ? ' ' : c;
    }
    return out;
}

std::uint64_t generated_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json read_json(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw DataError("bad_json", p.string() + ": " + e.what());
    }
}

void write_json(const fs::path& p, const json& j) { write_file_atomic(p, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw ValidationError("bad_output", "cannot create directory " + p.string() + ": " + ec.message());
}

void require_exists(const fs::path& p) {
    if (!fs::exists(p)) throw DataError("missing_path", "path does not exist: " + p.string());
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

struct Manifest {
    std::string subcommand;
    std::vector<std::string> args;
    json config = json::object();
    json seeds = json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

void write_manifest(const fs::path& out_dir, const Manifest& m, double wall) {
    json j = {{"tool", "tfint"},
              {"version", kToolVersion},
              {"subcommand", m.subcommand},
              {"args", m.args},
              {"config", m.config},
              {"seeds", m.seeds},
              {"inputs", m.inputs},
              {"outputs", m.outputs},
              {"finished_utc", utc_now()},
              {"wall_seconds", wall}};
    write_json(out_dir / "run.json", j);
}

struct BoostFlags {
    int rounds = gbrt::BoostConfig{}.n_rounds;
    double learning_rate = gbrt::BoostConfig{}.learning_rate;
    int max_depth = gbrt::BoostConfig{}.max_depth;
    int min_leaf = gbrt::BoostConfig{}.min_samples_leaf;
    double subsample = gbrt::BoostConfig{}.subsample_rows;

    void add(CLI::App* app) {
        app->add_option("--rounds", rounds, "boosting rounds")->capture_default_str();
        app->add_option("--learning-rate", learning_rate, "shrinkage in (0,1]")->capture_default_str();
        app->add_option("--max-depth", max_depth, "tree depth")->capture_default_str();
        app->add_option("--min-leaf", min_leaf, "minimum rows per leaf")->capture_default_str();
        app->add_option("--subsample", subsample, "row subsampling fraction in (0,1]")->capture_default_str();
    }
    gbrt::BoostConfig config(std::uint64_t seed) const {
        gbrt::BoostConfig c;
        c.n_rounds = rounds;
        c.learning_rate = learning_rate;
        c.max_depth = max_depth;
        c.min_samples_leaf = min_leaf;
        c.subsample_rows = subsample;
        c.seed = seed;
        c.validate();
        return c;
    }
    std::vector<std::string> args() const {
        return {"--rounds", std::to_string(rounds), "--learning-rate", format_double(learning_rate),
                "--max-depth", std::to_string(max_depth), "--min-leaf", std::to_string(min_leaf),
                "--subsample", format_double(subsample)};
    }
};

struct RecipeFlags {
    int p = 2;
    int q = 2;
    std::string normalize = "none";
    std::string sf_reference = "all-positive";
    BoostFlags boost;

    void add(CLI::App* app) {
        app->add_option("--p", p, "abundance lag order P")->capture_default_str();
        app->add_option("--q", q, "intervention lag order Q")->capture_default_str();
        app->add_option("--normalize", normalize, "none | sf | sf-asinh")->capture_default_str();
        app->add_option("--sf-reference", sf_reference, "all-positive | poscounts")->capture_default_str();
        boost.add(app);
    }
    FitRecipe recipe(std::uint64_t seed) const {
        if (p < 1 || q < 1) throw ValidationError("bad_lag_order", "--p and --q must be >= 1");
        FitRecipe r;
        r.P = p;
        r.Q = q;
        r.normalize = normalize_mode_from_string(normalize);
        r.sf_reference = size_factor_reference_from_string(sf_reference);
        r.boost = boost.config(seed);
        return r;
    }
    std::vector<std::string> args() const {
        std::vector<std::string> a{"--p", std::to_string(p), "--q", std::to_string(q), "--normalize", normalize,
                                   "--sf-reference", sf_reference};
        const auto b = boost.args();
        a.insert(a.end(), b.begin(), b.end());
        return a;
    }
    json to_json(std::uint64_t seed) const {
        const auto r = recipe(seed);
        return {{"P", r.P}, {"Q", r.Q}, {"normalize", normalize}, {"sf_reference", sf_reference},
                {"boost", gbrt::to_json(r.boost)}};
    }
};

InterventionSeriesSet load_data(const fs::path& dir) {
    require_exists(dir);
    auto set = read_dataset(dir);
    set.validate();
    return set;
}

std::pair<InterventionScenario, InterventionScenario> load_scenarios(const std::string& path,
                                                                       const std::vector<std::string>& channels,
                                                                       int length) {
    const auto D = static_cast<Eigen::Index>(channels.size());
    if (path.empty()) {
        return {InterventionScenario{Matrix::Ones(D, length), "on"}, InterventionScenario{Matrix::Zero(D, length), "off"}};
    }
    const json j = read_json(path);
    auto parse = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_object()) {
            throw ValidationError("bad_scenario", std::string("scenario file needs an object '") + key + "'");
        }
        const auto& obj = j[key];
        Eigen::Index width = -1;
        for (const auto& c : channels) {
            if (!obj.contains(c)) throw ValidationError("bad_scenario", "scenario '" + std::string(key) + "' lacks channel '" + c + "'");
            const auto n = static_cast<Eigen::Index>(obj[c].size());
            if (width >= 0 && n != width) throw ValidationError("bad_scenario", "scenario channels differ in length");
            width = n;
        }
        Matrix m(D, std::max<Eigen::Index>(width, 0));
        for (Eigen::Index d = 0; d < D; ++d)
            for (Eigen::Index t = 0; t < m.cols(); ++t) m(d, t) = obj[channels[static_cast<std::size_t>(d)]][static_cast<std::size_t>(t)].get<double>();
        return InterventionScenario{m, key};
    };
    return {parse("on"), parse("off")};
}

struct Context {
    std::ostream& out;
    std::ostream& err;
    Logger log;
    std::uint64_t seed = 0;
    bool seed_given = false;
    unsigned threads = 0;
};

std::uint64_t resolve_seed(Context& ctx) {
    if (!ctx.seed_given) {
        ctx.seed = generated_seed();
        ctx.log.info("generated seed " + std::to_string(ctx.seed));
    }
    return ctx.seed;
}

std::vector<std::string> common_args(const Context& ctx) {
    return {"--seed", std::to_string(ctx.seed), "--threads", std::to_string(ctx.threads)};
}

// ---- subcommands ---------------------------------------------------------

struct SimulateCmd {
    std::string config_path;
    std::string out_dir;

    void run(Context& ctx, Manifest& m) {
        json j = json::object();
        if (!config_path.empty()) {
            require_exists(config_path);
            j = read_json(config_path);
        }
        auto cfg = sim::sim_config_from_json(j);
        if (ctx.seed_given || !j.contains("seed")) cfg.seed = resolve_seed(ctx);
        ctx.seed = cfg.seed;
        ctx.seed_given = true;
        ensure_dir(out_dir);
        const auto result = sim::simulate(cfg, ctx.threads);
        write_dataset(result.data, out_dir);
        auto truth = sim::to_json(result.truth);
        truth["config"] = sim::to_json(cfg);
        write_json(fs::path(out_dir) / "truth.json", truth);

        m.config = sim::to_json(cfg);
        m.seeds = {{"seed", cfg.seed}};
        m.args = {"simulate", "--out", out_dir};
        if (!config_path.empty()) {
            m.args.push_back("--config");
            m.args.push_back(config_path);
            m.inputs.push_back(config_path);
        }
        m.outputs = {"reads.csv", "samples.csv", "interventions.csv", "subjects.csv", "dataset.json", "truth.json"};
    }
};

struct FitCmd {
    std::string data_dir;
    std::string out_dir;
    RecipeFlags recipe;

    void run(Context& ctx, Manifest& m) {
        const auto seed = resolve_seed(ctx);
        const auto r = recipe.recipe(seed);
        const auto data = load_data(data_dir);
        ensure_dir(out_dir);
        SizeFactors sf;
        if (r.normalize != NormalizeMode::none) {
            apply_normalization(data, r.normalize, &sf, r.sf_reference);
            write_csv(fs::path(out_dir) / "size_factors.csv", size_factor_table(data, sf));
            m.outputs.push_back("size_factors.csv");
        }
        const auto model = fit_recipe(data, r, ctx.threads);
        write_json(fs::path(out_dir) / "model.json", to_json(model));
        m.outputs.push_back("model.json");
        m.config = recipe.to_json(seed);
        m.seeds = {{"seed", seed}};
        m.inputs = {data_dir};
        m.args = {"fit", "--data", data_dir, "--out", out_dir};
        const auto a = recipe.args();
        m.args.insert(m.args.end(), a.begin(), a.end());
    }
};

struct PredictCmd {
    std::string model_path;
    std::string data_dir;
    std::string out_dir;
    int horizon = 5;
    std::string anchor = "onset";

    void run(Context& ctx, Manifest& m) {
        require_exists(model_path);
        const auto model = transfer_model_from_json(read_json(model_path));
        const auto data = to_model_scale(model, load_data(data_dir));
        if (horizon < 1) throw ValidationError("bad_horizon", "--horizon must be >= 1");
        if (anchor != "onset" && anchor != "last") throw ValidationError("bad_anchor", "--anchor must be onset or last");
        if (data.taxa_names != model.taxa_names || data.intervention_names != model.intervention_names) {
            throw DataError("schema_mismatch", "data taxa or channels differ from the model's");
        }
        ensure_dir(out_dir);
        Table t;
        t.header = {"subject", "taxon", "horizon", "time", "value"};
        for (const auto& s : data.subjects) {
            std::size_t cut = s.n_observed();
            if (anchor == "onset") {
                const auto onset = first_intervention(s);
                if (!onset) throw DataError("no_intervention", "subject '" + s.subject_id + "' has no intervention");
                cut = *onset + 1;
                if (cut > s.n_observed()) throw DataError("short_history", "subject '" + s.subject_id + "' is not observed at its onset");
            }
            if (cut + static_cast<std::size_t>(horizon) > s.n_times()) {
                throw DataError("short_interventions", "subject '" + s.subject_id + "' lacks intervention values for the horizon");
            }
            const Matrix history = s.abundances.leftCols(static_cast<Eigen::Index>(cut));
            const Matrix f = forecast(model, history, s.interventions, s.covariates, horizon);
            for (std::size_t j = 0; j < data.n_taxa(); ++j) {
                for (int h = 0; h < horizon; ++h) {
                    t.rows.push_back({s.subject_id, data.taxa_names[j], std::to_string(h + 1),
                                      format_double(s.times[cut + static_cast<std::size_t>(h)]),
                                      format_double(f(static_cast<Eigen::Index>(j), h))});
                }
            }
        }
        write_csv(fs::path(out_dir) / "forecasts.csv", t);
        m.config = {{"horizon", horizon}, {"anchor", anchor}, {"scale", to_string(model.scale_tag)}};
        m.inputs = {model_path, data_dir};
        m.outputs = {"forecasts.csv"};
        m.seeds = {{"seed", ctx.seed}};
        m.args = {"predict", "--model", model_path, "--data", data_dir, "--out", out_dir,
                  "--horizon", std::to_string(horizon), "--anchor", anchor};
    }
};

struct SelectCmd {
    std::string data_dir;
    std::string out_dir;
    RecipeFlags recipe;
    double q_fdr = 0.2;
    int splits = 25;
    std::vector<int> lags{0};
    std::string scenario_path;

    void run(Context& ctx, Manifest& m) {
        const auto seed = resolve_seed(ctx);
        SelectOptions opt;
        opt.recipe = recipe.recipe(seed);
        opt.q = q_fdr;
        opt.n_splits = splits;
        opt.lags = lags;
        opt.seed = seed;
        opt.threads = ctx.threads;
        const auto data = load_data(data_dir);
        int max_lag = 0;
        for (int h : lags) max_lag = std::max(max_lag, h);
        const auto [on, off] = load_scenarios(scenario_path, data.intervention_names, recipe.q + max_lag);
        ensure_dir(out_dir);
        const auto report = select_taxa(data, on, off, opt);
        write_csv(fs::path(out_dir) / "mirrors.csv", mirrors_table(report));
        write_csv(fs::path(out_dir) / "selection.csv", selection_table(report));
        write_csv(fs::path(out_dir) / "selection_per_lag.csv", per_lag_selection_table(report));
        m.config = recipe.to_json(seed);
        m.config["q_fdr"] = q_fdr;
        m.config["splits"] = splits;
        m.config["lags"] = lags;
        m.config["scenario"] = scenario_path.empty() ? json("default-step") : json(scenario_path);
        m.seeds = {{"seed", seed}};
        m.inputs = {data_dir};
        if (!scenario_path.empty()) m.inputs.push_back(scenario_path);
        m.outputs = {"mirrors.csv", "selection.csv", "selection_per_lag.csv"};
        m.args = {"select", "--data", data_dir, "--out", out_dir, "--q-fdr", format_double(q_fdr),
                  "--splits", std::to_string(splits), "--lags", join_ints(lags)};
        if (!scenario_path.empty()) {
            m.args.push_back("--scenario");
            m.args.push_back(scenario_path);
        }
        const auto a = recipe.args();
        m.args.insert(m.args.end(), a.begin(), a.end());
        ctx.log.info(std::to_string(report.pooled.selected.size()) + " units selected");
    }
};

struct BenchmarkCmd {
    std::string grid_path;
    std::string out_dir;

    void run(Context& ctx, Manifest& m) {
        require_exists(grid_path);
        const json grid = read_json(grid_path);
        const auto seed = resolve_seed(ctx);
        if (!grid.contains("configs") || !grid["configs"].is_array() || grid["configs"].empty()) {
            throw ValidationError("bad_grid", "grid needs a nonempty 'configs' array");
        }
        const int folds = grid.value("folds", 4);
        const int horizon = grid.value("horizon", 5);
        ensure_dir(out_dir);
        std::vector<EvalReport> reports;
        std::vector<InferenceResult> inference;
        for (std::size_t c = 0; c < grid["configs"].size(); ++c) {
            const auto& entry = grid["configs"][c];
            const std::string name = entry.value("name", "config" + std::to_string(c + 1));
            json sim_json = entry.value("sim", json::object());
            auto cfg = sim::sim_config_from_json(sim_json);
            if (!sim_json.contains("seed")) cfg.seed = mix64(seed + c);
            ctx.log.info("benchmark config " + name);
            const auto data = sim::simulate(cfg, ctx.threads);

            FitRecipe base;
            base.P = entry.value("P", 2);
            base.Q = entry.value("Q", 2);
            base.sf_reference = size_factor_reference_from_string(entry.value("sf_reference", std::string("poscounts")));
            base.boost = gbrt::boost_config_from_json(entry.value("boost", json::object()));
            base.boost.seed = cfg.seed;
            base.boost.validate();
            const auto modes = entry.value("normalize", std::vector<std::string>{"sf-asinh"});
            for (const auto& mode : modes) {
                FitRecipe r = base;
                r.normalize = normalize_mode_from_string(mode);
                CvOptions o;
                o.K = folds;
                o.H = horizon;
                o.seed = cfg.seed;
                o.threads = ctx.threads;
                o.config = name;
                reports.push_back(cv_forecast_eval(data.data, r, o));
            }
            if (entry.value("select", false)) {
                SelectOptions opt;
                opt.recipe = base;
                opt.recipe.normalize = normalize_mode_from_string(entry.value("select_normalize", modes.front()));
                opt.q = entry.value("q_fdr", 0.2);
                opt.n_splits = entry.value("splits", 25);
                opt.lags = entry.value("lags", std::vector<int>{0});
                opt.seed = cfg.seed;
                opt.threads = ctx.threads;
                int max_lag = 0;
                for (int h : opt.lags) max_lag = std::max(max_lag, h);
                const auto [on, off] = load_scenarios("", data.data.intervention_names, base.Q + max_lag);
                const auto report = select_taxa(data.data, on, off, opt);
                const auto truth = sim::nonnull_sets(data.truth, max_lag);
                for (std::size_t l = 0; l < opt.lags.size(); ++l) {
                    auto r = inference_eval(report.selected_taxa_at(l), truth, opt.lags[l]);
                    r.config = name;
                    r.q = opt.q;
                    r.seed = cfg.seed;
                    inference.push_back(r);
                }
            }
        }
        write_csv(fs::path(out_dir) / "eval.csv", eval_table(reports));
        m.outputs = {"eval.csv"};
        if (!inference.empty()) {
            write_csv(fs::path(out_dir) / "inference_eval.csv", inference_table(inference));
            m.outputs.push_back("inference_eval.csv");
        }
        m.config = grid;
        m.seeds = {{"seed", seed}};
        m.inputs = {grid_path};
        m.args = {"benchmark", "--grid", grid_path, "--out", out_dir};
    }
};

struct InterpolateCmd {
    std::string data_dir;
    std::string out_dir;
    double delta = 1.0;

    void run(Context& ctx, Manifest& m) {
        const auto data = load_data(data_dir);
        ensure_dir(out_dir);
        write_dataset(interpolate(data, delta), out_dir);
        m.config = {{"delta", delta}, {"method", "linear"}};
        m.seeds = {{"seed", ctx.seed}};
        m.inputs = {data_dir};
        m.outputs = {"reads.csv", "samples.csv", "interventions.csv", "subjects.csv", "dataset.json"};
        m.args = {"interpolate", "--data", data_dir, "--out", out_dir, "--delta", format_double(delta)};
    }
};

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

struct ReplayCmd {
    std::string manifest_path;
    std::string out_dir;

    int run(std::ostream& out, std::ostream& err, int depth) {
        if (depth > 0) throw ValidationError("bad_manifest", "a replay manifest cannot replay another replay");
        require_exists(manifest_path);
        const json j = read_json(manifest_path);
        if (!j.contains("args") || !j["args"].is_array()) {
            throw ValidationError("bad_manifest", "manifest lacks an 'args' array");
        }
        auto args = j["args"].get<std::vector<std::string>>();
        if (!out_dir.empty()) {
            for (std::size_t i = 0; i + 1 < args.size(); ++i)
                if (args[i] == "--out") args[i + 1] = out_dir;
        }
        return dispatch(args, out, err, depth + 1);
    }
};

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
    CLI::App app{"Nonlinear intervention time-series modeling with mirror-statistic selection", "tfint"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    Context ctx{out, err, Logger{err}};
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    app.add_option("--seed", seed, "random seed (generated and recorded when omitted)");
    app.add_option("--threads", threads, "worker threads (0 = all cores)");

    SimulateCmd simulate;
    auto* c_sim = app.add_subcommand("simulate", "simulate a dataset and its ground truth");
    c_sim->add_option("--config", simulate.config_path, "simulation config JSON");
    c_sim->add_option("--out", simulate.out_dir, "output directory")->required();

    FitCmd fit;
    auto* c_fit = app.add_subcommand("fit", "fit a transfer model");
    c_fit->add_option("--data", fit.data_dir, "dataset directory")->required();
    c_fit->add_option("--out", fit.out_dir, "output directory")->required();
    fit.recipe.add(c_fit);

    PredictCmd predict;
    auto* c_pred = app.add_subcommand("predict", "forecast with a fitted model");
    c_pred->add_option("--model", predict.model_path, "model.json")->required();
    c_pred->add_option("--data", predict.data_dir, "dataset directory")->required();
    c_pred->add_option("--out", predict.out_dir, "output directory")->required();
    c_pred->add_option("--horizon", predict.horizon, "forecast horizon H")->capture_default_str();
    c_pred->add_option("--anchor", predict.anchor, "onset | last")->capture_default_str();

    SelectCmd select;
    auto* c_sel = app.add_subcommand("select", "mirror-statistic selection of affected taxa");
    c_sel->add_option("--data", select.data_dir, "dataset directory")->required();
    c_sel->add_option("--out", select.out_dir, "output directory")->required();
    c_sel->add_option("--q-fdr", select.q_fdr, "target FDR")->capture_default_str();
    c_sel->add_option("--splits", select.splits, "number of data splits")->capture_default_str();
    c_sel->add_option("--lags", select.lags, "comma-separated lags")->delimiter(',')->capture_default_str();
    c_sel->add_option("--scenario", select.scenario_path, "scenario JSON {\"on\":{ch:[...]},\"off\":{...}}");
    select.recipe.add(c_sel);

    BenchmarkCmd bench;
    auto* c_bench = app.add_subcommand("benchmark", "simulate, cross-validate and score a config grid");
    c_bench->add_option("--grid", bench.grid_path, "grid JSON")->required();
    c_bench->add_option("--out", bench.out_dir, "output directory")->required();

    InterpolateCmd interp;
    auto* c_int = app.add_subcommand("interpolate", "resample onto a uniform grid");
    c_int->add_option("--data", interp.data_dir, "dataset directory")->required();
    c_int->add_option("--out", interp.out_dir, "output directory")->required();
    c_int->add_option("--delta", interp.delta, "grid step")->capture_default_str();

    ReplayCmd replay;
    auto* c_rep = app.add_subcommand("replay", "re-run a recorded manifest");
    c_rep->add_option("--manifest", replay.manifest_path, "run.json")->required();
    c_rep->add_option("--out", replay.out_dir, "override the output directory");

    std::vector<const char*> argv{"tfint"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        throw ValidationError("bad_arguments", e.what());
    }

    if (c_rep->parsed()) return replay.run(out, err, depth);

    ctx.threads = threads;
    set_default_threads(threads);
    if (seed) {
        ctx.seed = *seed;
        ctx.seed_given = true;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Manifest m;
    std::string out_dir;
    if (c_sim->parsed()) {
        m.subcommand = "simulate";
        out_dir = simulate.out_dir;
        simulate.run(ctx, m);
    } else if (c_fit->parsed()) {
        m.subcommand = "fit";
        out_dir = fit.out_dir;
        fit.run(ctx, m);
    } else if (c_pred->parsed()) {
        m.subcommand = "predict";
        out_dir = predict.out_dir;
        predict.run(ctx, m);
    } else if (c_sel->parsed()) {
        m.subcommand = "select";
        out_dir = select.out_dir;
        select.run(ctx, m);
    } else if (c_bench->parsed()) {
        m.subcommand = "benchmark";
        out_dir = bench.out_dir;
        bench.run(ctx, m);
    } else if (c_int->parsed()) {
        m.subcommand = "interpolate";
        out_dir = interp.out_dir;
        interp.run(ctx, m);
    }
    const auto common = common_args(ctx);
    m.args.insert(m.args.begin(), common.begin(), common.end());
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out_dir, m, wall);
    ctx.log.info(m.subcommand + " finished in " + format_double(wall) + " s");
    out << fs::path(out_dir).string() << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto fail = [&](const std::string& code, int exit_code, const std::string& msg) {
        err << "error code=" << code << " exit=" << exit_code << " message=\"" << escape(msg) << "\"\n";
        return exit_code;
    };
    try {
        return dispatch(args, out, err, 0);
    } catch (const ValidationError& e) {
        return fail(e.code(), 2, e.what());
    } catch (const DataError& e) {
        return fail(e.code(), 3, e.what());
    } catch (const Error& e) {
        return fail(e.code(), 4, e.what());
    } catch (const std::exception& e) {
        return fail("internal", 4, e.what());
    }
}

}  // namespace tfint
