#pragma once

// The measure-change engine.  A TransformPair packages a Q-side model whose
// coordinate is a nonnegative martingale absorbed at zero, the Radon-Nikodym
// martingale h (h_0 = 1), a numerator martingale f, and (when available) the
// direct R-side law of N = f/h.  P-side expectations of N are then evaluated
// from Q-side paths only:  E^P[N_t] = E^Q[f_t 1{tau_0 > t}].

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "slm/core.hpp"
#include "slm/rng.hpp"
#include "slm/sde.hpp"

namespace slm::ht {

using PathFunctional = std::function<double(const AbsorbedPath&, std::size_t)>;

struct TransformPair {
    sde::ProcessModel q_model;                  // simulated under Q
    PathFunctional f;                           // numerator Q-martingale
    PathFunctional h;                           // RN derivative, h(path, 0) = 1
    std::optional<sde::ProcessModel> r_model;   // direct law of N under R
    PathFunctional r_value;                     // N_t evaluated on r_model paths
    double t_max = std::numeric_limits<double>::infinity();

    // Grid index of the first time h vanishes, when it does.
    std::optional<std::size_t> tau0_index(const AbsorbedPath& p) const {
        return p.absorption_index;
    }
};

// The canonical pair: Q = BM from x0 absorbed at zero, h = B/x0, f = 1;
// under P the coordinate is BES(3) and N = x0/B is the inverse Bessel.
TransformPair inverse_bessel_pair(double x0 = 1.0);

// True-martingale control: Q = GBM, h = S, N under R is again a GBM law.
TransformPair gbm_pair(double sigma = 1.0);

// Replace the numerator martingale (f = h gives N = 1).
TransformPair with_numerator(TransformPair pair, PathFunctional f);

struct PayoffTransform {
    std::function<double(double)> h_payoff;  // payoff on (0, inf)
    std::function<double(double)> g;         // g(x) = x h(1/x), x > 0
    double eta = 0.0;                        // lim_{x->0+} g(x)
    bool eta_finite = true;

    double g_bar(double x) const { return x > 0.0 ? g(x) : eta; }
};

// Builds g and estimates eta from the smallest probe points by linear
// extrapolation with an agreement check.  Monotone blow-up is flagged as
// eta_finite = false; failure to stabilize throws DiagnosticsError.
PayoffTransform payoff_transform(std::function<double(double)> h_payoff,
                                 std::span<const double> probe_grid);

MCEstimate p_expectation_of_N(const TransformPair& pair, double t, std::size_t n_paths,
                              RandomSource src, std::size_t n_steps = 8,
                              unsigned workers = 0);

struct DualResult {
    MCEstimate lhs;  // E^R[h(X_t)] simulated directly under R
    MCEstimate rhs;  // E^Q[g_bar(X_t)] - eta Q(tau_0 <= t) from Q-side paths
};

DualResult dual_expectation(const TransformPair& pair, const PayoffTransform& transform,
                            double t, std::size_t n_paths, RandomSource src,
                            std::size_t n_steps = 8, unsigned workers = 0);

// defect(t) = X_0 - E^R[X_t] = Q(tau_0 <= t), one estimate per report time,
// all from a single Q-side ensemble.
std::vector<std::pair<double, MCEstimate>> martingale_defect(
    const TransformPair& pair, std::span<const double> t_list, std::size_t n_paths,
    RandomSource src, unsigned workers = 0);

// "Strict on horizon T" iff defect(T) > 3 stderr.
bool strict_on_horizon(const std::vector<std::pair<double, MCEstimate>>& defects);

// Barrier-stopped call prices E[(S_{T ∧ T_n} - K)^+] for each barrier n,
// with within-step crossings decided by a Brownian-bridge correction
// (exact in log space for GBM, radial-part approximation for the inverse
// Bessel).  Supports the InverseBes3 and Gbm families.
std::vector<std::pair<double, MCEstimate>> madan_yor_price(
    const sde::ProcessModel& model, double strike, double maturity,
    std::span<const double> barriers, std::size_t n_paths, RandomSource src,
    std::size_t n_steps = 512, unsigned workers = 0);

// Plain terminal price E[payoff(S_T)].
MCEstimate terminal_price(const sde::ProcessModel& model,
                          const std::function<double(double)>& payoff, double maturity,
                          std::size_t n_paths, RandomSource src, unsigned workers = 0);

}  // namespace slm::ht
