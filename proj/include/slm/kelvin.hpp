#pragma once

// Kelvin transform K[u](y) = |y|^{2-d} u(y/|y|^2) for d >= 3, its commutation
// with the Laplacian checked by finite differences, and the conformal
// inversion identity for d-dimensional BM absorbed on a sphere, verified by
// reweighting the P-side paths.

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "slm/core.hpp"
#include "slm/rng.hpp"

namespace slm::kelvin {

struct ScalarField {
    std::function<double(std::span<const double>)> eval;
    int d = 3;
    std::function<bool(std::span<const double>)> guard;  // defaults to x != 0

    double operator()(std::span<const double> x) const { return eval(x); }
    bool valid_at(std::span<const double> x) const;
};

ScalarField make_field(int d, std::function<double(std::span<const double>)> eval,
                       std::function<bool(std::span<const double>)> guard = {});

// x -> x / |x|^2; involution.
std::vector<double> invert_point(std::span<const double> x);

ScalarField kelvin_transform(const ScalarField& u);

// | FD-Laplacian of K[u] at y  -  K[|x|^4 FD-Laplacian of u] at y |, both
// Laplacians centered 2d+1-point stencils with step h.  O(h^2) for smooth u.
double laplacian_commutation_residual(const ScalarField& u, std::span<const double> y,
                                      double h);

struct ConformalCheck {
    MCEstimate lhs;  // |x0|^{2-d} E^P[U(X_{t ∧ tau})]
    MCEstimate rhs;  // E^P[phi(X_t) |Y_t|^{2-d} U(Y_t/|Y_t|^2)], Y = X/|X|^2
};

// d = 3 Monte Carlo check of the change-of-measure identity; X is a 3-D BM
// from x0 absorbed on the sphere of radius r < 1 around the origin, and the
// Q-side is computed by reweighting the same paths with
// phi = |X_{t ∧ tau}|^{2-d} / |x0|^{2-d}.
ConformalCheck conformal_inversion_check(double r, std::array<double, 3> x0,
                                         const std::function<double(std::span<const double>)>& u,
                                         double u_bound, double t, std::size_t n_paths,
                                         RandomSource src, double dt = 1e-3,
                                         unsigned workers = 0);

struct ConformalDiagnostics {
    std::vector<double> t_list;
    // reweighted inverted coordinates E^P[phi_t Y_t(i)]: one row per t
    std::vector<std::array<MCEstimate, 3>> coord_means;
    // reweighted covariation estimates over [0, max t]
    std::array<std::array<MCEstimate, 3>, 3> covariation;
};

ConformalDiagnostics conformal_martingale_diagnostics(double r, std::array<double, 3> x0,
                                                      std::span<const double> t_list,
                                                      std::size_t n_paths, RandomSource src,
                                                      double dt = 1e-3, unsigned workers = 0);

}  // namespace slm::kelvin
