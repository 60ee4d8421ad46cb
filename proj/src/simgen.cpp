#include "tfint/simgen.hpp"

#include "tfint/error.hpp"
#include "tfint/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cstdio>
#include <random>

namespace tfint::sim {

void SimConfig::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("bad_sim_config", what); };
    if (J < 1) fail("J must be >= 1");
    if (n_subjects < 1) fail("n_subjects must be >= 1");
    if (P_true < 1 || Q_true < 1) fail("P_true and Q_true must be >= 1");
    if (T < P_true + 1 || T < 3) fail("T must exceed P_true and be at least 3");
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) fail("pi0 must lie in [0, 1]");
    if (!(b >= 0.0)) fail("b must be >= 0");
    if (!(p_c >= 0.0 && p_c <= 1.0) || !(p_A >= 0.0 && p_A <= 1.0)) fail("probabilities must lie in [0, 1]");
    if (rank_K < 1) fail("rank_K must be >= 1");
    if (!(sigma_eps >= 0.0) || !(sigma_z >= 0.0) || !(sigma_A >= 0.0) || !(theta_init_sd >= 0.0))
        fail("standard deviations must be >= 0");
    if (!(nb_alpha > 0.0) || !(nb_lambda > 0.0)) fail("dispersion prior parameters must be positive");
    if (intervention_L < 1) fail("intervention_L must be >= 1");
}

nlohmann::json to_json(const SimConfig& c) {
    return {{"J", c.J},
            {"n_subjects", c.n_subjects},
            {"T", c.T},
            {"P_true", c.P_true},
            {"Q_true", c.Q_true},
            {"pi0", c.pi0},
            {"b", c.b},
            {"p_c", c.p_c},
            {"p_A", c.p_A},
            {"rank_K", c.rank_K},
            {"sigma_eps", c.sigma_eps},
            {"sigma_z", c.sigma_z},
            {"sigma_A", c.sigma_A},
            {"nb_alpha", c.nb_alpha},
            {"nb_lambda", c.nb_lambda},
            {"intervention_L", c.intervention_L},
            {"theta_init_mean", c.theta_init_mean},
            {"theta_init_sd", c.theta_init_sd},
            {"seed", c.seed}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
    SimConfig c;
    const auto known = to_json(c);
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ValidationError("bad_sim_config", "unknown simulation key '" + key + "'");
        }
    }
    c.J = j.value("J", c.J);
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.T = j.value("T", c.T);
    c.P_true = j.value("P_true", c.P_true);
    c.Q_true = j.value("Q_true", c.Q_true);
    c.pi0 = j.value("pi0", c.pi0);
    c.b = j.value("b", c.b);
    c.p_c = j.value("p_c", c.p_c);
    c.p_A = j.value("p_A", c.p_A);
    c.rank_K = j.value("rank_K", c.rank_K);
    c.sigma_eps = j.value("sigma_eps", c.sigma_eps);
    c.sigma_z = j.value("sigma_z", c.sigma_z);
    c.sigma_A = j.value("sigma_A", c.sigma_A);
    c.nb_alpha = j.value("nb_alpha", c.nb_alpha);
    c.nb_lambda = j.value("nb_lambda", c.nb_lambda);
    c.intervention_L = j.value("intervention_L", c.intervention_L);
    c.theta_init_mean = j.value("theta_init_mean", c.theta_init_mean);
    c.theta_init_sd = j.value("theta_init_sd", c.theta_init_sd);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

double normal(Rng& rng, double mean, double sd) {
    if (sd == 0.0) return mean;
    std::normal_distribution<double> dist(mean, sd);
    return dist(rng);
}

double bounded_effect(Rng& rng, double b) {
    const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    return sign * (b + b * uniform01(rng));
}

std::string padded(const char* prefix, std::size_t k, std::size_t n) {
    const int width = static_cast<int>(std::to_string(n).size());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, k);
    return buf;
}

}  // namespace

nlohmann::json to_json(const SimTruth& t) {
    nlohmann::json B = nlohmann::json::array(), C = nlohmann::json::array(), Ap = nlohmann::json::array();
    for (const auto& m : t.B) B.push_back(matrix_json(m));
    for (const auto& m : t.C) C.push_back(matrix_json(m));
    for (const auto& m : t.A_p) Ap.push_back(matrix_json(m));
    return {{"A", matrix_json(t.A)},
            {"A_p", std::move(Ap)},
            {"B", std::move(B)},
            {"C", std::move(C)},
            {"nonnull", t.nonnull},
            {"null", t.null},
            {"c_row_zeroed", t.c_row_zeroed},
            {"baseline", std::vector<double>(t.baseline.data(), t.baseline.data() + t.baseline.size())},
            {"window_start", t.window_start},
            {"window_length", t.window_length},
            {"z", t.z},
            {"dispersion", matrix_json(t.dispersion)}};
}

double sample_negative_binomial(Rng& rng, double mean, double dispersion) {
    if (mean <= 0.0) return 0.0;
    std::gamma_distribution<double> gamma(dispersion, mean / dispersion);
    const double rate = gamma(rng);
    if (rate <= 0.0) return 0.0;
    std::poisson_distribution<long long> poisson(rate);
    return static_cast<double>(poisson(rng));
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

SimResult simulate(const SimConfig& cfg, unsigned threads) {
    cfg.validate();
    const auto J = static_cast<Eigen::Index>(cfg.J);
    const auto T = static_cast<Eigen::Index>(cfg.T);
    const auto J0 = static_cast<std::size_t>(std::floor(cfg.pi0 * cfg.J));
    const std::size_t J1 = static_cast<std::size_t>(cfg.J) - J0;

    SimTruth truth;
    Rng global = make_stream(cfg.seed, {0});

    for (int k = 0; k < cfg.Q_true; ++k) {
        Matrix B = Matrix::Zero(J, 1);
        for (std::size_t j = 0; j < J1; ++j) B(static_cast<Eigen::Index>(j), 0) = bounded_effect(global, cfg.b);
        truth.B.push_back(std::move(B));
    }
    for (int k = 0; k < cfg.Q_true; ++k) {
        Matrix C = Matrix::Zero(J, 1);
        std::vector<bool> zeroed(static_cast<std::size_t>(cfg.J), true);
        for (std::size_t j = 0; j < J1; ++j) {
            const double value = bounded_effect(global, cfg.b);
            if (uniform01(global) >= cfg.p_c) {
                C(static_cast<Eigen::Index>(j), 0) = value;
                zeroed[j] = false;
            }
        }
        truth.C.push_back(std::move(C));
        truth.c_row_zeroed.push_back(std::move(zeroed));
    }

    Matrix factors(J, cfg.rank_K);
    for (Eigen::Index r = 0; r < factors.rows(); ++r)
        for (Eigen::Index c = 0; c < factors.cols(); ++c) factors(r, c) = normal(global, 0.0, cfg.sigma_A);
    Matrix A = factors * factors.transpose();
    for (Eigen::Index r = 0; r < J; ++r)
        for (Eigen::Index c = 0; c < J; ++c)
            if (uniform01(global) < cfg.p_A) A(r, c) = 0.0;
    const double norm = spectral_norm(A);
    if (norm > 0.0) A /= norm;
    truth.A = A;
    for (int p = 0; p < cfg.P_true; ++p) truth.A_p.push_back(A / static_cast<double>(cfg.P_true));

    truth.baseline.resize(J);
    for (Eigen::Index j = 0; j < J; ++j) truth.baseline(j) = normal(global, cfg.theta_init_mean, cfg.theta_init_sd);
    for (std::size_t j = 0; j < static_cast<std::size_t>(cfg.J); ++j) {
        (j < J1 && cfg.b > 0.0 ? truth.nonnull : truth.null).push_back(j);
    }

    const auto n = static_cast<std::size_t>(cfg.n_subjects);
    truth.window_start.resize(n);
    truth.window_length.resize(n);
    truth.z.resize(n);
    truth.dispersion.resize(static_cast<Eigen::Index>(n), J);

    SimResult result;
    auto& set = result.data;
    set.scale_tag = ScaleTag::counts;
    for (Eigen::Index j = 0; j < J; ++j) set.taxa_names.push_back(padded("tax", static_cast<std::size_t>(j + 1), static_cast<std::size_t>(J)));
    set.intervention_names = {"D1"};
    set.covariate_names = {"z1"};
    set.subjects.resize(n);

    const auto lo = static_cast<std::int64_t>((cfg.T + 2) / 3);
    const auto hi = static_cast<std::int64_t>((2 * cfg.T) / 3);
    parallel_for(
        n,
        [&](std::size_t i) {
            Rng rng = make_stream(cfg.seed, {1, static_cast<std::uint64_t>(i)});
            const double z = normal(rng, 0.0, cfg.sigma_z);
            std::gamma_distribution<double> gamma(cfg.nb_alpha, 1.0 / cfg.nb_lambda);
            Vector phi(J);
            for (Eigen::Index j = 0; j < J; ++j) phi(j) = gamma(rng);
            const auto start = static_cast<std::size_t>(uniform_int(rng, lo, hi));
            const auto len = static_cast<std::size_t>(uniform_int(rng, cfg.intervention_L, 2 * cfg.intervention_L));
            const std::size_t kept = std::min(len, static_cast<std::size_t>(cfg.T) - start);

            Matrix w = Matrix::Zero(1, T);
            for (std::size_t t = start; t < start + kept; ++t) w(0, static_cast<Eigen::Index>(t)) = 1.0;

            Matrix delta = Matrix::Zero(J, T);
            Matrix y(J, T);
            for (Eigen::Index t = 0; t < T; ++t) {
                Vector d(J);
                for (Eigen::Index j = 0; j < J; ++j) d(j) = normal(rng, 0.0, cfg.sigma_eps);
                if (t >= cfg.P_true) {
                    for (int p = 1; p <= cfg.P_true; ++p) d += truth.A_p[static_cast<std::size_t>(p - 1)] * delta.col(t - p);
                }
                for (int k = 0; k < cfg.Q_true; ++k) {
                    const Eigen::Index src = t - 1 - k;
                    if (src < 0 || w(0, src) == 0.0) continue;
                    d += (truth.B[static_cast<std::size_t>(k)].col(0) + z * truth.C[static_cast<std::size_t>(k)].col(0)) * w(0, src);
                }
                delta.col(t) = d;
                for (Eigen::Index j = 0; j < J; ++j) {
                    y(j, t) = sample_negative_binomial(rng, std::exp(truth.baseline(j) + d(j)), phi(j));
                }
            }

            SubjectSeries s;
            s.subject_id = padded("S", i + 1, n);
            for (Eigen::Index t = 0; t < T; ++t) s.times.push_back(static_cast<double>(t));
            s.abundances = std::move(y);
            s.interventions = std::move(w);
            s.covariates = Vector::Constant(1, z);
            set.subjects[i] = std::move(s);
            truth.window_start[i] = start;
            truth.window_length[i] = kept;
            truth.z[i] = z;
            truth.dispersion.row(static_cast<Eigen::Index>(i)) = phi.transpose();
        },
        threads);

    result.truth = std::move(truth);
    return result;
}

NonnullSets nonnull_sets(const SimTruth& truth, int h_max) {
    if (h_max < 0) {
        throw ValidationError("bad_lag", "h_max must be >= 0");
    }
    const auto J = static_cast<std::size_t>(truth.A.rows());
    const int P = static_cast<int>(truth.A_p.size());
    const int Q = static_cast<int>(truth.B.size());
    NonnullSets out;
    for (int h = 0; h <= h_max; ++h) {
        std::set<std::size_t> nonnull;
        if (h < Q) {
            const auto& B = truth.B[static_cast<std::size_t>(h)];
            for (std::size_t j = 0; j < J; ++j) {
                if ((B.row(static_cast<Eigen::Index>(j)).array() != 0.0).any()) nonnull.insert(j);
            }
        }
        for (int p = 1; p <= std::min(h, P); ++p) {
            const auto& Ap = truth.A_p[static_cast<std::size_t>(p - 1)];
            const auto& source = out.nonnull[static_cast<std::size_t>(h - p)];
            for (std::size_t j = 0; j < J; ++j) {
                for (auto k : source) {
                    if (Ap(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) != 0.0) {
                        nonnull.insert(j);
                        break;
                    }
                }
            }
        }
        std::set<std::size_t> null;
        for (std::size_t j = 0; j < J; ++j) {
            if (!nonnull.count(j)) null.insert(j);
        }
        out.nonnull.push_back(std::move(nonnull));
        out.null.push_back(std::move(null));
    }
    return out;
}

}  // namespace tfint::sim
