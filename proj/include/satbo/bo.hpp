#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "satbo/dpll.hpp"
#include "satbo/rng.hpp"

namespace satbo::bo {

// A solution viewed as a point of the unit cube, tagged with its coverage.
struct Observation {
    std::vector<double> point;
    double value = 0.0;
};

struct BoParams {
    double l_init = 0.8;
    double l_min = 0.0078125;  // 0.5^7
    double l_max = 1.0;        // growth cap; a wider box than the cube buys nothing
    int tau_succ = 3;
    int tau_fail = 3;
    int num_candidates = 512;
    int fit_iters = 50;
    std::uint64_t seed = 0;
};

// Gaussian process with constant (zero, after standardization) mean and a
// squared-exponential kernel with per-dimension lengthscales. Values are
// z-scored inside fit(); predictions live in the standardized space.
class GpModel {
public:
    struct Prediction {
        double mean = 0.0;
        double variance = 0.0;
    };

    struct FitOptions {
        int iters = 50;
        // Noise variance on the standardized values: fixed when >= 0,
        // otherwise learned with a floor.
        double noise_variance = -1.0;
        const GpModel* warm_start = nullptr;
    };

    static GpModel fit(const std::vector<std::vector<double>>& X,
                       const std::vector<double>& y, const FitOptions& opt);
    static GpModel fit(const std::vector<std::vector<double>>& X,
                       const std::vector<double>& y);

    Prediction predict(const std::vector<double>& x) const;
    double unstandardize(double z) const { return y_mean_ + z * y_std_; }

    // One joint posterior draw over the candidate points (Thompson sample),
    // in the standardized space.
    std::vector<double> sample_joint(const std::vector<std::vector<double>>& candidates,
                                     Rng& rng) const;

    int dim() const { return dim_; }
    const std::vector<double>& lengthscales() const { return lengthscales_; }
    double signal_variance() const { return signal_variance_; }
    double noise_variance() const { return noise_variance_; }

private:
    int dim_ = 0;
    std::vector<double> lengthscales_;
    double signal_variance_ = 1.0;
    double noise_variance_ = 1e-4;
    double y_mean_ = 0.0;
    double y_std_ = 1.0;
    std::vector<std::vector<double>> X_;
    std::vector<double> y_;       // standardized
    std::vector<double> chol_;    // row-major lower Cholesky factor of K
    std::vector<double> alpha_;   // K^-1 y
};

// Trust-region state threaded through one optimization run. Observations are
// deduplicated on identical points, keeping the best value.
struct BoState {
    std::vector<Observation> observations;
    double tr_length = 0.8;
    int success_count = 0;
    int failure_count = 0;
    double best_value = 0.0;
    std::vector<double> best_point;
    std::vector<double> l_trace;  // tr_length after init and after each update
    BoParams params;
    Rng rng{0};
    GpModel surrogate;      // warm-start cache for the next fit
    bool surrogate_ready = false;
};

std::vector<double> point_of(const cnf::Assignment& s);

// Seeds the state with the first round: L = l_init, counters zeroed,
// incumbent = best observation. Throws on empty or mismatched input.
BoState init_ci(const dpll::SampleSet& S, const std::vector<double>& f,
                const BoParams& params = {});

// Next weight vector: Thompson sampling from the fitted surrogate over
// uniform candidates in the box of side tr_length around the incumbent,
// clipped to the cube; the winner is clamped to [0.01, 0.99] entrywise.
// Degenerate states (fewer than two distinct values) fall back to a uniform
// draw from the same box.
dpll::WeightVector suggest_prefer(BoState& state);

// Folds a round into the state: appends observations, then counts the round
// as a success (strict improvement of best_value) or failure. After tau_succ
// consecutive successes L doubles (capped at l_max); after tau_fail
// consecutive failures L halves (floored at l_min); either resize resets
// both counters. An empty round counts as a failure.
void update_ci(BoState& state, const dpll::SampleSet& S, const std::vector<double>& f);

// The outer loop runs while the trust region is wider than l_min.
bool tr_sufficient(const BoState& state);

nlohmann::json state_to_json(const BoState& state);

}  // namespace satbo::bo
