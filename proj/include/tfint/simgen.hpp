#pragma once

#include "tfint/rng.hpp"
#include "tfint/series.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

namespace tfint::sim {

/// Negative-binomial VAR generator settings. D = S = 1.
struct SimConfig {
    int J = 100;
    int n_subjects = 50;
    int T = 30;
    int P_true = 3;
    int Q_true = 3;
    double pi0 = 0.4;       // null fraction
    double b = 1.0;         // signal strength
    double p_c = 0.2;
    double p_A = 0.4;
    int rank_K = 5;
    double sigma_eps = 0.1;
    double sigma_z = 1.0;
    double sigma_A = 1.0;
    double nb_alpha = 2.0;   // dispersion ~ Gamma(shape alpha, rate lambda)
    double nb_lambda = 0.5;
    int intervention_L = 5;
    double theta_init_mean = std::log(10.0);
    double theta_init_sd = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const SimConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
SimConfig sim_config_from_json(const nlohmann::json& j);

/// Ground truth of one simulated dataset.
///
/// B[k] and C[k] (J x 1) multiply w_{t-1-k}: lag k = 0 is the effect on the
/// next timepoint. A_p[p-1] multiplies the deviation at t-p.
struct SimTruth {
    Matrix A;                   // spectrally normalized, ||A||_2 = 1
    std::vector<Matrix> A_p;    // A / P_true per lag
    std::vector<Matrix> B;
    std::vector<Matrix> C;
    std::vector<std::size_t> nonnull;   // J1: rows of B nonzero
    std::vector<std::size_t> null;      // J0
    std::vector<std::vector<bool>> c_row_zeroed;  // [k][j] interaction removed
    Vector baseline;                    // per-taxon mean log abundance
    std::vector<std::size_t> window_start;
    std::vector<std::size_t> window_length;  // after truncation at T
    std::vector<double> z;
    Matrix dispersion;                  // n_subjects x J
};

nlohmann::json to_json(const SimTruth& t);

struct SimResult {
    InterventionSeriesSet data;
    SimTruth truth;
};

/// Draws A, B, C, baselines from stream (seed, global) and each subject from
/// stream (seed, subject index):
///   theta_t = baseline + delta_t
///   delta_t = sum_p A_p delta_{t-p} + sum_k (B_k + C_k z) w_{t-1-k} + eps_t
///   y_tj ~ NB(mean exp(theta_tj), dispersion phi_ij), var = mu + mu^2/phi.
SimResult simulate(const SimConfig& config, unsigned threads = 0);

/// Gamma-Poisson negative binomial draw with the above parameterization.
double sample_negative_binomial(Rng& rng, double mean, double dispersion);

/// Largest singular value.
double spectral_norm(const Matrix& m);

/// J1(h) for h = 0..h_max:
///   J1(h) = {j : A_p[j, k] != 0 for some p <= min(h, P_true), k in J1(h-p)}
///           U {j : B_h row j nonzero},  B_h = 0 for h >= Q_true.
struct NonnullSets {
    std::vector<std::set<std::size_t>> nonnull;  // index h
    std::vector<std::set<std::size_t>> null;
};
NonnullSets nonnull_sets(const SimTruth& truth, int h_max);

}  // namespace tfint::sim
