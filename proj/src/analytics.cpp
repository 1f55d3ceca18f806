#include "slm/analytics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "slm/quadrature.hpp"
#include "slm/sde.hpp"

namespace slm::analytics {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;
}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

double absorbed_bm_density(double t, double x0, double y) {
    if (!(t > 0.0) || !(x0 > 0.0) || !(y > 0.0))
        throw std::invalid_argument("absorbed_bm_density: t, x0, y must be positive");
    const double rt = std::sqrt(t);
    return (normal_pdf((y - x0) / rt) - normal_pdf((y + x0) / rt)) / rt;
}

double hitting_density(double t, double x0) {
    if (!(t > 0.0) || !(x0 > 0.0))
        throw std::invalid_argument("hitting_density: t and x0 must be positive");
    return x0 / std::sqrt(2.0 * kPi * t * t * t) * std::exp(-x0 * x0 / (2.0 * t));
}

// h(t) = int_0^{1/K} (1 - K y) p_t(1, y) dy, reduced to normal CDF terms:
//   (1-K)[Phi(b-) - Phi(-a)] - (1+K)[Phi(b+) - Phi(a)] + K t [phi_t(b-1) - phi_t(b+1)]
// with a = 1/sqrt(t), b = 1/K, b± = (b ± 1)/sqrt(t).
double inv_bessel_call(double t, double strike) {
    if (!(t > 0.0)) throw std::invalid_argument("inv_bessel_call: t must be positive");
    if (strike < 0.0) throw std::invalid_argument("inv_bessel_call: strike must be >= 0");
    const double rt = std::sqrt(t);
    if (strike == 0.0) return 2.0 * normal_cdf(1.0 / rt) - 1.0;
    const double b = 1.0 / strike;
    const double a = 1.0 / rt;
    const double bm = (b - 1.0) / rt;
    const double bp = (b + 1.0) / rt;
    const double h = (1.0 - strike) * (normal_cdf(bm) - normal_cdf(-a)) -
                     (1.0 + strike) * (normal_cdf(bp) - normal_cdf(a)) +
                     strike * t * (normal_pdf(bm) - normal_pdf(bp)) / rt;
    return h > 0.0 ? h : 0.0;
}

double inv_bessel_call_quad(double t, double strike, double tol) {
    if (!(t > 0.0)) throw std::invalid_argument("inv_bessel_call_quad: t must be positive");
    if (strike < 0.0) throw std::invalid_argument("inv_bessel_call_quad: strike must be >= 0");
    const double cutoff = 1.0 + 14.0 * std::sqrt(t);
    const double upper = strike > 0.0 ? std::min(1.0 / strike, cutoff) : cutoff;
    auto f = [t, strike](double y) {
        return (1.0 - strike * y) * absorbed_bm_density(t, 1.0, y);
    };
    return integrate(f, 0.0, upper, tol);
}

double inv_bessel_call_deriv(double t, double strike) {
    if (!(t > 0.0) || !(strike > 0.0))
        throw std::invalid_argument("inv_bessel_call_deriv: t and strike must be positive");
    const double im = 1.0 - 1.0 / strike;
    const double ip = 1.0 + 1.0 / strike;
    const double local_time_term = strike / (2.0 * std::sqrt(2.0 * kPi * t)) *
                                   (std::exp(-im * im / (2.0 * t)) - std::exp(-ip * ip / (2.0 * t)));
    const double hitting_term = std::exp(-1.0 / (2.0 * t)) / std::sqrt(2.0 * kPi * t * t * t);
    return local_time_term - hitting_term;
}

double decrease_threshold(double strike) {
    if (!(strike > 0.5))
        throw std::domain_error("decrease_threshold: requires K > 1/2 (term structure is "
                                "strictly decreasing for all t when K <= 1/2)");
    return 1.0 / (strike * std::log((2.0 * strike + 1.0) / (2.0 * strike - 1.0)));
}

CallTermStructure call_term_structure(double strike, TimeGrid t_grid) {
    if (strike < 0.0) throw std::invalid_argument("call_term_structure: strike must be >= 0");
    if (t_grid.times.empty() || !(t_grid.times.front() > 0.0))
        throw std::invalid_argument("call_term_structure: t grid must be positive");
    CallTermStructure ts;
    ts.strike = strike;
    ts.values.reserve(t_grid.size());
    ts.derivative.reserve(t_grid.size());
    for (double t : t_grid.times) {
        ts.values.push_back(inv_bessel_call(t, strike));
        // K = 0 reduces to d/dt [2 Phi(1/sqrt(t)) - 1] = -hitting_density(t, 1)
        ts.derivative.push_back(strike > 0.0 ? inv_bessel_call_deriv(t, strike)
                                             : -hitting_density(t, 1.0));
    }
    ts.t_grid = std::move(t_grid);
    return ts;
}

ScalingCheck bes3_from_zero_scaling_check(double t, double u, double strike,
                                          std::size_t n_paths, RandomSource src,
                                          unsigned workers) {
    if (!(t > 0.0) || !(u > t)) throw std::invalid_argument("scaling check: need 0 < t < u");
    if (strike < 0.0) throw std::invalid_argument("scaling check: strike must be >= 0");
    if (n_paths == 0) throw std::invalid_argument("scaling check: n_paths must be positive");

    const double c = u / t;
    const double rc = std::sqrt(c);
    const double times[2] = {t, u};
    std::vector<double> lhs(n_paths), rhs(n_paths), plain(n_paths);
    const auto model = sde::ProcessModel::bes3(0.0);
    const auto grid = report_grid(times);
    sde::mc_paths(model, grid, n_paths, src, workers,
                  [&](std::size_t i, const AbsorbedPath& p) {
                      const double inv_t = 1.0 / p.scalar(1);
                      const double inv_u = 1.0 / p.scalar(2);
                      lhs[i] = std::max(inv_u - strike, 0.0);
                      rhs[i] = std::max(inv_t - rc * strike, 0.0) / rc;
                      plain[i] = std::max(inv_t - strike, 0.0);
                  });
    ScalingCheck out;
    out.lhs = mc_reduce(lhs, src.seed());
    out.rhs = mc_reduce(rhs, src.seed());
    out.unscaled_at_t = mc_reduce(plain, src.seed());
    return out;
}

}  // namespace slm::analytics
