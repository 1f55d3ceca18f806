#include "slm/htransform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slm::ht {

namespace {

GridPtr horizon_grid(double t, std::size_t n_steps) {
    if (!(t > 0.0)) throw std::invalid_argument("horizon must be positive");
    return share(make_grid(t, std::max<std::size_t>(1, n_steps)));
}

void check_horizon(const TransformPair& pair, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("t must be positive");
    if (t > pair.t_max) throw std::invalid_argument("t exceeds the pair's simulated horizon");
}

}  // namespace

TransformPair inverse_bessel_pair(double x0) {
    if (!(x0 > 0.0)) throw std::invalid_argument("inverse_bessel_pair: x0 must be positive");
    TransformPair pair;
    pair.q_model = sde::ProcessModel::bm_absorbed(x0);
    pair.f = [](const AbsorbedPath&, std::size_t) { return 1.0; };
    pair.h = [x0](const AbsorbedPath& p, std::size_t k) { return p.scalar(k) / x0; };
    pair.r_model = sde::ProcessModel::bes3(x0);
    pair.r_value = [x0](const AbsorbedPath& p, std::size_t k) { return x0 / p.scalar(k); };
    return pair;
}

TransformPair gbm_pair(double sigma) {
    TransformPair pair;
    pair.q_model = sde::ProcessModel::gbm(1.0, sigma);
    pair.f = [](const AbsorbedPath&, std::size_t) { return 1.0; };
    pair.h = [](const AbsorbedPath& p, std::size_t k) { return p.scalar(k); };
    // 1/X under the changed measure is again a GBM martingale law
    pair.r_model = sde::ProcessModel::gbm(1.0, sigma);
    pair.r_value = [](const AbsorbedPath& p, std::size_t k) { return p.scalar(k); };
    return pair;
}

TransformPair with_numerator(TransformPair pair, PathFunctional f) {
    pair.f = std::move(f);
    return pair;
}

PayoffTransform payoff_transform(std::function<double(double)> h_payoff,
                                 std::span<const double> probe_grid) {
    if (probe_grid.size() < 4)
        throw std::invalid_argument("payoff_transform: need at least 4 probe points");
    std::vector<double> probes(probe_grid.begin(), probe_grid.end());
    std::sort(probes.begin(), probes.end());
    if (!(probes.front() > 0.0))
        throw std::invalid_argument("payoff_transform: probe points must be positive");

    PayoffTransform tr;
    tr.h_payoff = h_payoff;
    tr.g = [h_payoff](double x) { return x * h_payoff(1.0 / x); };

    for (double x : probes)
        if (!std::isfinite(tr.g(x)))
            throw std::invalid_argument("payoff_transform: payoff not finite on the probe grid");

    const double g0 = tr.g(probes[0]);
    const double g1 = tr.g(probes[1]);
    const double g2 = tr.g(probes[2]);
    const double g3 = tr.g(probes[3]);

    // monotone blow-up toward 0+ means eta = +infinity
    const double tail_scale = std::abs(tr.g(probes.back())) + 1.0;
    if (g0 > g1 && g1 > g2 && g2 > g3 && g0 > 100.0 * tail_scale) {
        tr.eta = std::numeric_limits<double>::infinity();
        tr.eta_finite = false;
        return tr;
    }

    auto extrapolate = [](double xa, double ga, double xb, double gb) {
        return ga - xa * (gb - ga) / (xb - xa);
    };
    const double e01 = extrapolate(probes[0], g0, probes[1], g1);
    const double e12 = extrapolate(probes[1], g1, probes[2], g2);
    const double e23 = extrapolate(probes[2], g2, probes[3], g3);
    const double scale = std::max({1.0, std::abs(e01), std::abs(e12)});
    if (std::abs(e01 - e12) > 1e-3 * scale || std::abs(e12 - e23) > 1e-2 * scale)
        throw DiagnosticsError("payoff_transform: eta undetermined (limit estimates did not stabilize)");
    tr.eta = e01;
    return tr;
}

MCEstimate p_expectation_of_N(const TransformPair& pair, double t, std::size_t n_paths,
                              RandomSource src, std::size_t n_steps, unsigned workers) {
    check_horizon(pair, t);
    const auto grid = horizon_grid(t, n_steps);
    const std::size_t kt = grid->size() - 1;
    std::vector<double> vals(n_paths);
    sde::mc_paths(pair.q_model, grid, n_paths, src, workers,
                  [&](std::size_t i, const AbsorbedPath& p) {
                      const auto tau = pair.tau0_index(p);
                      const bool alive = !(tau.has_value() && *tau <= kt);
                      vals[i] = alive ? pair.f(p, kt) : 0.0;
                  });
    return mc_reduce(vals, src.seed());
}

DualResult dual_expectation(const TransformPair& pair, const PayoffTransform& transform,
                            double t, std::size_t n_paths, RandomSource src,
                            std::size_t n_steps, unsigned workers) {
    check_horizon(pair, t);
    if (!transform.eta_finite)
        throw std::invalid_argument("dual_expectation: unsupported payoff (eta is infinite)");
    if (!pair.r_model.has_value() || !pair.r_value)
        throw std::invalid_argument("dual_expectation: pair has no direct R-side model");

    const auto grid = horizon_grid(t, n_steps);
    const std::size_t kt = grid->size() - 1;

    std::vector<double> lhs(n_paths), rhs(n_paths);
    sde::mc_paths(*pair.r_model, grid, n_paths, src, workers,
                  [&](std::size_t i, const AbsorbedPath& p) {
                      lhs[i] = transform.h_payoff(pair.r_value(p, kt));
                  });
    sde::mc_paths(pair.q_model, grid, n_paths, src.substream(kStreamLane), workers,
                  [&](std::size_t i, const AbsorbedPath& p) {
                      const auto tau = pair.tau0_index(p);
                      const bool dead = tau.has_value() && *tau <= kt;
                      rhs[i] = transform.g_bar(pair.h(p, kt)) - (dead ? transform.eta : 0.0);
                  });
    DualResult out;
    out.lhs = mc_reduce(lhs, src.seed());
    out.rhs = mc_reduce(rhs, src.seed());
    return out;
}

std::vector<std::pair<double, MCEstimate>> martingale_defect(
    const TransformPair& pair, std::span<const double> t_list, std::size_t n_paths,
    RandomSource src, unsigned workers) {
    if (t_list.empty()) throw std::invalid_argument("martingale_defect: empty t list");
    for (double t : t_list) check_horizon(pair, t);
    const auto grid = report_grid(t_list);
    std::vector<std::vector<double>> dead(t_list.size(), std::vector<double>(n_paths));
    sde::mc_paths(pair.q_model, grid, n_paths, src, workers,
                  [&](std::size_t i, const AbsorbedPath& p) {
                      const auto tau = pair.tau0_index(p);
                      for (std::size_t k = 0; k < t_list.size(); ++k)
                          dead[k][i] = (tau.has_value() && *tau <= k + 1) ? 1.0 : 0.0;
                  });
    std::vector<std::pair<double, MCEstimate>> out;
    out.reserve(t_list.size());
    for (std::size_t k = 0; k < t_list.size(); ++k)
        out.emplace_back(t_list[k], mc_reduce(dead[k], src.seed()));
    return out;
}

bool strict_on_horizon(const std::vector<std::pair<double, MCEstimate>>& defects) {
    if (defects.empty()) return false;
    const MCEstimate& last = defects.back().second;
    return last.mean > 3.0 * last.se;
}

std::vector<std::pair<double, MCEstimate>> madan_yor_price(
    const sde::ProcessModel& model, double strike, double maturity,
    std::span<const double> barriers, std::size_t n_paths, RandomSource src,
    std::size_t n_steps, unsigned workers) {
    using Family = sde::ProcessModel::Family;
    model.validate();
    if (model.family != Family::InverseBes3 && model.family != Family::Gbm)
        throw std::invalid_argument("madan_yor_price: supported models are inverse-bes3 and gbm");
    if (!(strike > 0.0) || !(maturity > 0.0))
        throw std::invalid_argument("madan_yor_price: strike and maturity must be positive");
    if (barriers.empty()) throw std::invalid_argument("madan_yor_price: no barriers");
    const double s0 = model.family == Family::InverseBes3 ? 1.0 / model.x0 : model.x0;
    std::vector<double> bars(barriers.begin(), barriers.end());
    for (std::size_t m = 0; m < bars.size(); ++m) {
        if (!(bars[m] > s0) || !(bars[m] > strike))
            throw std::invalid_argument("madan_yor_price: barriers must exceed S0 and the strike");
        if (m > 0 && !(bars[m] > bars[m - 1]))
            throw std::invalid_argument("madan_yor_price: barriers must be increasing");
    }

    const bool log_bridge = model.family == Family::Gbm;
    const double sig2 = model.sigma * model.sigma;
    const auto grid = share(make_grid(maturity, n_steps));
    const std::size_t n_bar = bars.size();
    std::vector<std::vector<double>> payoff(n_bar, std::vector<double>(n_paths));

    sde::mc_paths(model, grid, n_paths, src, workers, [&](std::size_t i, const AbsorbedPath& p) {
        RandomSource aux = src.substream(kStreamLane + i);  // bridge coin flips
        std::vector<char> crossed(n_bar, 0);
        std::size_t n_crossed = 0;
        for (std::size_t k = 1; k < p.n_times() && n_crossed < n_bar; ++k) {
            const double dt = grid->times[k] - grid->times[k - 1];
            const double s_prev = p.scalar(k - 1);
            const double s_next = p.scalar(k);
            // one uniform per step, shared across barriers: crossing events
            // stay monotone in the barrier level
            double u = -1.0;
            for (std::size_t m = 0; m < n_bar; ++m) {
                if (crossed[m]) continue;
                bool hit = s_prev >= bars[m] || s_next >= bars[m];
                if (!hit) {
                    double pc;
                    if (log_bridge) {
                        const double a = std::log(bars[m] / s_prev);
                        const double b = std::log(bars[m] / s_next);
                        pc = std::exp(-2.0 * a * b / (sig2 * dt));
                    } else {
                        // inverse Bessel: S >= n iff the radial part X <= 1/n
                        const double a = 1.0 / s_prev - 1.0 / bars[m];
                        const double b = 1.0 / s_next - 1.0 / bars[m];
                        pc = std::exp(-2.0 * a * b / dt);
                    }
                    if (u < 0.0) u = aux.uniform01();
                    hit = u < pc;
                }
                if (hit) {
                    crossed[m] = 1;
                    ++n_crossed;
                    payoff[m][i] = bars[m] - strike;  // stopped exactly at the level
                }
            }
        }
        const double terminal = std::max(p.scalar(p.n_times() - 1) - strike, 0.0);
        for (std::size_t m = 0; m < n_bar; ++m)
            if (!crossed[m]) payoff[m][i] = terminal;
    });

    std::vector<std::pair<double, MCEstimate>> out;
    out.reserve(n_bar);
    for (std::size_t m = 0; m < n_bar; ++m)
        out.emplace_back(bars[m], mc_reduce(payoff[m], src.seed()));
    return out;
}

MCEstimate terminal_price(const sde::ProcessModel& model,
                          const std::function<double(double)>& payoff, double maturity,
                          std::size_t n_paths, RandomSource src, unsigned workers) {
    const double ts[1] = {maturity};
    const auto rows = sde::sample_scalar_at(model, payoff, ts, n_paths, src, workers);
    return mc_reduce(rows[0], src.seed());
}

}  // namespace slm::ht
