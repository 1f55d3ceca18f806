#pragma once

// The three example families as executable experiments: size-biased sampling
// of BESQ^0 paths (spine decomposition on the P side), Dyson/Vandermonde
// ratios, and planar Brownian motion conditioned to exit the unit disc
// through a boundary arc.

#include <array>
#include <span>
#include <vector>

#include "slm/core.hpp"
#include "slm/rng.hpp"

namespace slm::experiments {

// Boundary arc of the unit disc, angles in radians, 0 <= lo < hi <= 2 pi.
struct DiscArc {
    double theta_lo = 0.0;
    double theta_hi = 0.0;

    DiscArc(double lo, double hi);
    double length() const { return theta_hi - theta_lo; }
    bool contains(double angle) const;  // angle normalized mod 2 pi
    bool disjoint_from(const DiscArc& other) const;
};

struct SizeBiasedConfig {
    std::size_t n = 2;       // number of coordinates, >= 2
    double z = 1.0;          // common start, > 0
    TimeGrid t_grid;         // report grid starting at 0

    void validate() const;
};

// Q-side check of the ratio martingale M_t = Z_t(c) / (Z_t(1)+...+Z_t(n)) for
// n independent BESQ^0 coordinates (coordinate c is 0-based and addresses the
// per-coordinate substreams, so relabelling reuses identical draws).  When
// the total sum has been absorbed, M is frozen at its last value on the grid
// before absorption; from equal starts a first-step joint absorption freezes
// it at exactly 1/n.
std::vector<std::pair<double, MCEstimate>> ratio_martingale_check(
    const SizeBiasedConfig& cfg, std::size_t n_paths, RandomSource src,
    unsigned workers = 0, std::size_t coordinate = 0);

struct SizeBiasedRow {
    double t = 0.0;
    MCEstimate n_stat;  // zeta^2 / Z(1)
    MCEstimate u_stat;  // Z(2) zeta / Z(1)
    MCEstimate v_stat;  // (zeta / Z(1)) prod_{i>=2} Z(i)
    MCEstimate m_stat;  // zeta prod_{i>=2} Z(i)
};

// P-side expectations of the four statistics under the size-biased law,
// evaluated exactly through the change of measure on Q-side paths (the
// bounded ratio martingale n Z(1)/zeta is the Radon-Nikodym derivative, so
// each statistic reduces to a numerator martingale killed when Z(1) dies).
std::vector<SizeBiasedRow> size_biased_expectations(const SizeBiasedConfig& cfg,
                                                    std::size_t n_paths, RandomSource src,
                                                    unsigned workers = 0);

// prod_{i<j} (x_j - x_i); empty product (n <= 1) is 1.
double vandermonde(std::span<const double> x);

// E[Delta_m(lambda_t) / Delta_n(lambda_t)] along the grid for Dyson motion
// started from a strictly increasing vector (1 <= m < n <= 8).
std::vector<std::pair<double, MCEstimate>> dyson_ratio_expectation(
    std::size_t m, std::size_t n, std::span<const double> start, const TimeGrid& t_grid,
    std::size_t n_paths, RandomSource src, unsigned workers = 0);

// Companion mode: E[|A_t^{-1}(n, i)|] for the Vandermonde matrix of the
// eigenvalues, entries by the cofactor formula with Vandermonde minors.
// Result: one row per grid time, n estimates per row.
std::vector<std::vector<MCEstimate>> dyson_inverse_entries(
    std::size_t n, std::span<const double> start, const TimeGrid& t_grid,
    std::size_t n_paths, RandomSource src, unsigned workers = 0);

// Q-side control: E[Delta_n(W_t)] for a plain n-dimensional BM.
std::vector<std::pair<double, MCEstimate>> bm_vandermonde_mean(
    std::span<const double> start, const TimeGrid& t_grid, std::size_t n_paths,
    RandomSource src, unsigned workers = 0);

// Harmonic measure of the arc seen from x0, |x0| < 1: Poisson kernel
// integral by adaptive quadrature to ~1e-10.
double disc_harmonic_measure(std::array<double, 2> x0, const DiscArc& arc);

// Planar BM in the unit disc absorbed at the boundary, half-space bridge
// correction per step (dt <= 1e-3): frequency of exits through the arc.
MCEstimate disc_exit_frequency(std::array<double, 2> x0, const DiscArc& arc,
                               std::size_t n_paths, RandomSource src,
                               double dt = 1e-3, unsigned workers = 0);

struct ConditionedExit {
    MCEstimate via_rejection;  // E^Q[N_t | X_tau in B1]
    MCEstimate via_change_of_measure;  // E^Q[f_t 1{tau_0 > t}] / v(x0)
    double acceptance_rate = 0.0;
};

// E^P[N_t] for BM conditioned to exit through B1, with u the indicator of a
// disjoint arc; two independent estimators of the same quantity.
ConditionedExit conditioned_exit_expectation(std::array<double, 2> x0, const DiscArc& b1,
                                             const DiscArc& u_arc, double t,
                                             std::size_t n_paths, RandomSource src,
                                             double dt = 1e-3, unsigned workers = 0);

}  // namespace slm::experiments
