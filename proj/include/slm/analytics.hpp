#pragma once

// Closed forms for Brownian motion absorbed at zero and the inverse-Bessel
// call term structure h(t) = E[(1/X_t - K)^+], its time derivative and the
// threshold past which the K > 1/2 term structure decreases, plus the
// BES(3)-from-zero scaling identity as a two-sided Monte Carlo check.

#include <vector>

#include "slm/core.hpp"
#include "slm/rng.hpp"

namespace slm::analytics {

double normal_cdf(double x);
double normal_pdf(double x);

// Sub-probability transition density of BM absorbed at zero, by the method
// of images: p_t(x0, y) = phi_t(y - x0) - phi_t(y + x0).
double absorbed_bm_density(double t, double x0, double y);

// Density of the first hitting time of zero for BM started at x0.
double hitting_density(double t, double x0);

// h(t) = E[(1/X_t - K)^+] for BES(3) started at 1, in closed form.
double inv_bessel_call(double t, double strike);

// Same quantity by adaptive quadrature against absorbed_bm_density; the two
// routes must agree to ~1e-7 (cross-validated in the tests).
double inv_bessel_call_quad(double t, double strike, double tol = 1e-8);

double inv_bessel_call_deriv(double t, double strike);

// (K log((2K+1)/(2K-1)))^{-1}; the derivative is negative for all t at or
// beyond this point.  Throws std::domain_error for K <= 1/2 (the
// always-decreasing regime).
double decrease_threshold(double strike);

struct CallTermStructure {
    double strike = 0.0;
    TimeGrid t_grid;
    std::vector<double> values;
    std::vector<double> derivative;
};

CallTermStructure call_term_structure(double strike, TimeGrid t_grid);

struct ScalingCheck {
    MCEstimate lhs;            // E(1/X_u - K)^+
    MCEstimate rhs;            // c^{-1/2} E(1/X_t - sqrt(c) K)^+, c = u/t
    MCEstimate unscaled_at_t;  // E(1/X_t - K)^+, for the strict comparison
};

// Both sides of the scaling identity for BES(3) started at zero, estimated
// from a common path ensemble sampled at times t and u.
ScalingCheck bes3_from_zero_scaling_check(double t, double u, double strike,
                                          std::size_t n_paths, RandomSource src,
                                          unsigned workers = 0);

}  // namespace slm::analytics
