#include "slm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "slm/quadrature.hpp"
#include "slm/sde.hpp"

namespace slm::experiments {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

DiscArc::DiscArc(double lo, double hi) : theta_lo(lo), theta_hi(hi) {
    require(lo >= 0.0 && hi <= kTwoPi + 1e-15 && lo < hi, "DiscArc: need 0 <= lo < hi <= 2 pi");
}

bool DiscArc::contains(double angle) const {
    double a = std::fmod(angle, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a >= theta_lo && a <= theta_hi;
}

bool DiscArc::disjoint_from(const DiscArc& other) const {
    return theta_hi <= other.theta_lo || other.theta_hi <= theta_lo;
}

void SizeBiasedConfig::validate() const {
    require(n >= 2, "SizeBiasedConfig: n must be >= 2");
    require(z > 0.0, "SizeBiasedConfig: z must be positive");
    require(!t_grid.times.empty() && t_grid.times.front() == 0.0,
            "SizeBiasedConfig: t_grid must start at 0");
}

std::vector<std::pair<double, MCEstimate>> ratio_martingale_check(
    const SizeBiasedConfig& cfg, std::size_t n_paths, RandomSource src, unsigned workers,
    std::size_t coordinate) {
    cfg.validate();
    require(coordinate < cfg.n, "ratio_martingale_check: coordinate out of range");
    const auto grid = share(cfg.t_grid);
    const std::size_t n_t = grid->size();
    std::vector<std::vector<double>> ratio(n_t, std::vector<double>(n_paths));

    parallel_for_paths(n_paths, workers, [&](std::size_t i) {
        std::vector<AbsorbedPath> z(cfg.n);
        for (std::size_t c = 0; c < cfg.n; ++c) {
            RandomSource stream = src.substream(i * cfg.n + c);
            z[c] = sde::simulate_besq(0, cfg.z, grid, stream);
        }
        double frozen = 1.0 / static_cast<double>(cfg.n);
        for (std::size_t k = 0; k < n_t; ++k) {
            double zeta = 0.0;
            for (std::size_t c = 0; c < cfg.n; ++c) zeta += z[c].scalar(k);
            if (zeta > 0.0) frozen = z[coordinate].scalar(k) / zeta;
            ratio[k][i] = frozen;
        }
    });

    std::vector<std::pair<double, MCEstimate>> out;
    out.reserve(n_t);
    for (std::size_t k = 0; k < n_t; ++k)
        out.emplace_back(grid->times[k], mc_reduce(ratio[k], src.seed()));
    return out;
}

std::vector<SizeBiasedRow> size_biased_expectations(const SizeBiasedConfig& cfg,
                                                    std::size_t n_paths, RandomSource src,
                                                    unsigned workers) {
    cfg.validate();
    const auto grid = share(cfg.t_grid);
    const std::size_t n_t = grid->size();
    std::vector<std::vector<double>> nv(n_t, std::vector<double>(n_paths));
    std::vector<std::vector<double>> uv(n_t, std::vector<double>(n_paths));
    std::vector<std::vector<double>> vv(n_t, std::vector<double>(n_paths));
    std::vector<std::vector<double>> mv(n_t, std::vector<double>(n_paths));

    // P-side expectations through the change of measure: with the ratio
    // martingale h = n Z(1)/zeta as Radon-Nikodym derivative,
    // E^P[G_t] = E^Q[h_t G_t], and each statistic collapses to its numerator
    // Q-martingale killed when Z(1) dies:
    //   h N = n zeta,  h U = n Z(2),  h V = n prod_{i>=2} Z(i),
    //   h M = n prod_i Z(i).
    const double n_coord = static_cast<double>(cfg.n);
    parallel_for_paths(n_paths, workers, [&](std::size_t i) {
        std::vector<AbsorbedPath> z(cfg.n);
        for (std::size_t c = 0; c < cfg.n; ++c) {
            RandomSource stream = src.substream(i * cfg.n + c);
            z[c] = sde::simulate_besq(0, cfg.z, grid, stream);
        }
        for (std::size_t k = 0; k < n_t; ++k) {
            const double z1 = z[0].scalar(k);
            const double alive = z1 > 0.0 ? 1.0 : 0.0;
            double zeta = z1;
            double prod_rest = 1.0;
            for (std::size_t c = 1; c < cfg.n; ++c) {
                zeta += z[c].scalar(k);
                prod_rest *= z[c].scalar(k);
            }
            nv[k][i] = n_coord * zeta * alive;
            uv[k][i] = n_coord * z[1].scalar(k) * alive;
            vv[k][i] = n_coord * prod_rest * alive;
            mv[k][i] = n_coord * z1 * prod_rest;
        }
    });

    std::vector<SizeBiasedRow> rows(n_t);
    for (std::size_t k = 0; k < n_t; ++k) {
        rows[k].t = grid->times[k];
        rows[k].n_stat = mc_reduce(nv[k], src.seed());
        rows[k].u_stat = mc_reduce(uv[k], src.seed());
        rows[k].v_stat = mc_reduce(vv[k], src.seed());
        rows[k].m_stat = mc_reduce(mv[k], src.seed());
    }
    return rows;
}

double vandermonde(std::span<const double> x) {
    double prod = 1.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) prod *= x[j] - x[i];
    return prod;
}

namespace {

GridPtr dyson_grid(const TimeGrid& t_grid) {
    require(!t_grid.times.empty() && t_grid.times.front() == 0.0,
            "dyson experiments: t_grid must start at 0");
    return share(t_grid);
}

}  // namespace

std::vector<std::pair<double, MCEstimate>> dyson_ratio_expectation(
    std::size_t m, std::size_t n, std::span<const double> start, const TimeGrid& t_grid,
    std::size_t n_paths, RandomSource src, unsigned workers) {
    require(m >= 1 && m < n && n <= 8, "dyson_ratio_expectation: need 1 <= m < n <= 8");
    require(start.size() == n, "dyson_ratio_expectation: start size mismatch");
    const auto grid = dyson_grid(t_grid);
    const std::size_t n_t = grid->size();
    std::vector<std::vector<double>> vals(n_t, std::vector<double>(n_paths));
    sde::mc_paths(sde::ProcessModel::dyson({start.begin(), start.end()}), grid, n_paths, src,
                  workers, [&](std::size_t i, const AbsorbedPath& p) {
                      for (std::size_t k = 0; k < n_t; ++k) {
                          const auto lam = p.value(k);
                          vals[k][i] = vandermonde(lam.subspan(0, m)) / vandermonde(lam);
                      }
                  });
    std::vector<std::pair<double, MCEstimate>> out;
    out.reserve(n_t);
    for (std::size_t k = 0; k < n_t; ++k)
        out.emplace_back(grid->times[k], mc_reduce(vals[k], src.seed()));
    return out;
}

std::vector<std::vector<MCEstimate>> dyson_inverse_entries(
    std::size_t n, std::span<const double> start, const TimeGrid& t_grid,
    std::size_t n_paths, RandomSource src, unsigned workers) {
    require(n >= 2 && n <= 8, "dyson_inverse_entries: need 2 <= n <= 8");
    require(start.size() == n, "dyson_inverse_entries: start size mismatch");
    const auto grid = dyson_grid(t_grid);
    const std::size_t n_t = grid->size();
    std::vector<std::vector<std::vector<double>>> vals(
        n_t, std::vector<std::vector<double>>(n, std::vector<double>(n_paths)));
    sde::mc_paths(sde::ProcessModel::dyson({start.begin(), start.end()}), grid, n_paths, src,
                  workers, [&](std::size_t i, const AbsorbedPath& p) {
                      std::vector<double> minor(n - 1);
                      for (std::size_t k = 0; k < n_t; ++k) {
                          const auto lam = p.value(k);
                          const double full = vandermonde(lam);
                          for (std::size_t r = 0; r < n; ++r) {
                              std::size_t w = 0;
                              for (std::size_t c = 0; c < n; ++c)
                                  if (c != r) minor[w++] = lam[c];
                              // |A^{-1}(n, r)| = Delta_{n-1}(lambda w/o r) / Delta_n
                              vals[k][r][i] = vandermonde(minor) / full;
                          }
                      }
                  });
    std::vector<std::vector<MCEstimate>> out(n_t, std::vector<MCEstimate>(n));
    for (std::size_t k = 0; k < n_t; ++k)
        for (std::size_t r = 0; r < n; ++r) out[k][r] = mc_reduce(vals[k][r], src.seed());
    return out;
}

std::vector<std::pair<double, MCEstimate>> bm_vandermonde_mean(
    std::span<const double> start, const TimeGrid& t_grid, std::size_t n_paths,
    RandomSource src, unsigned workers) {
    require(start.size() >= 2, "bm_vandermonde_mean: need n >= 2");
    const auto grid = dyson_grid(t_grid);
    const std::size_t n_t = grid->size();
    std::vector<std::vector<double>> vals(n_t, std::vector<double>(n_paths));
    sde::mc_paths(sde::ProcessModel::bm_free({start.begin(), start.end()}), grid, n_paths, src,
                  workers, [&](std::size_t i, const AbsorbedPath& p) {
                      for (std::size_t k = 0; k < n_t; ++k) vals[k][i] = vandermonde(p.value(k));
                  });
    std::vector<std::pair<double, MCEstimate>> out;
    out.reserve(n_t);
    for (std::size_t k = 0; k < n_t; ++k)
        out.emplace_back(grid->times[k], mc_reduce(vals[k], src.seed()));
    return out;
}

double disc_harmonic_measure(std::array<double, 2> x0, const DiscArc& arc) {
    const double rho2 = x0[0] * x0[0] + x0[1] * x0[1];
    if (!(rho2 < 1.0)) throw std::invalid_argument("disc_harmonic_measure: need |x0| < 1");
    const double psi = std::atan2(x0[1], x0[0]);
    auto kernel = [&](double theta) {
        const double dx = std::cos(theta) - x0[0];
        const double dy = std::sin(theta) - x0[1];
        return (1.0 - rho2) / (kTwoPi * (dx * dx + dy * dy));
    };
    // split at the kernel peak (theta = psi mod 2 pi) when it lies inside
    std::vector<double> knots{arc.theta_lo, arc.theta_hi};
    for (double peak : {psi, psi + kTwoPi, psi - kTwoPi})
        if (peak > arc.theta_lo && peak < arc.theta_hi) knots.push_back(peak);
    std::sort(knots.begin(), knots.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k)
        total += integrate(kernel, knots[k], knots[k + 1], 1e-11);
    return std::clamp(total, 0.0, 1.0);
}

namespace {

struct DiscPathState {
    std::array<double, 2> x;
    bool absorbed = false;
    std::array<double, 2> exit_point{};
};

// One step of length dt; absorption decided by the endpoint test or the
// half-space bridge correction on the distance to the circle.
void disc_step(DiscPathState& st, double dt, RandomSource& src) {
    const double sdt = std::sqrt(dt);
    const std::array<double, 2> prev = st.x;
    std::array<double, 2> next = {prev[0] + sdt * src.gaussian(), prev[1] + sdt * src.gaussian()};
    const double r_prev = std::sqrt(prev[0] * prev[0] + prev[1] * prev[1]);
    const double r_next = std::sqrt(next[0] * next[0] + next[1] * next[1]);
    if (r_next >= 1.0) {
        // exit point: intersection ray of the step segment with the circle
        const double ax = prev[0], ay = prev[1];
        const double dx = next[0] - ax, dy = next[1] - ay;
        const double a = dx * dx + dy * dy;
        const double b = 2.0 * (ax * dx + ay * dy);
        const double c = ax * ax + ay * ay - 1.0;
        const double s = (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
        st.exit_point = {ax + s * dx, ay + s * dy};
        st.absorbed = true;
        return;
    }
    const double d0 = 1.0 - r_prev;
    const double d1 = 1.0 - r_next;
    if (src.uniform01() < std::exp(-2.0 * d0 * d1 / dt)) {
        // bridge crossing: project the step midpoint to the boundary
        const double mx = 0.5 * (prev[0] + next[0]);
        const double my = 0.5 * (prev[1] + next[1]);
        const double mr = std::sqrt(mx * mx + my * my);
        st.exit_point = mr > 0.0 ? std::array<double, 2>{mx / mr, my / mr}
                                 : std::array<double, 2>{1.0, 0.0};
        st.absorbed = true;
        return;
    }
    st.x = next;
}

struct DiscOutcome {
    std::array<double, 2> x_at_t{};
    bool inside_at_t = false;
    bool exited = false;
    std::array<double, 2> exit_point{};
    bool exited_by_t = false;
};

// Simulate to t_report (uniform steps <= dt), then, if requested, continue
// until absorption or t_horizon.
DiscOutcome run_disc_path(std::array<double, 2> x0, double t_report, double dt,
                          double t_horizon, bool to_absorption, RandomSource& src) {
    DiscPathState st{x0};
    DiscOutcome out;
    if (t_report > 0.0) {
        const std::size_t n1 = static_cast<std::size_t>(std::ceil(t_report / dt));
        const double dt1 = t_report / static_cast<double>(n1);
        for (std::size_t k = 0; k < n1 && !st.absorbed; ++k) disc_step(st, dt1, src);
    }
    out.x_at_t = st.absorbed ? st.exit_point : st.x;
    out.inside_at_t = !st.absorbed;
    out.exited_by_t = st.absorbed;
    if (st.absorbed) {
        out.exited = true;
        out.exit_point = st.exit_point;
        return out;
    }
    if (to_absorption) {
        double now = t_report;
        while (!st.absorbed && now < t_horizon) {
            disc_step(st, dt, src);
            now += dt;
        }
        if (!st.absorbed)
            throw DiagnosticsError("disc path not absorbed within the horizon");
        out.exited = true;
        out.exit_point = st.exit_point;
    }
    return out;
}

double angle_of(const std::array<double, 2>& p) {
    double a = std::atan2(p[1], p[0]);
    if (a < 0.0) a += kTwoPi;
    return a;
}

}  // namespace

MCEstimate disc_exit_frequency(std::array<double, 2> x0, const DiscArc& arc,
                               std::size_t n_paths, RandomSource src, double dt,
                               unsigned workers) {
    if (!(x0[0] * x0[0] + x0[1] * x0[1] < 1.0))
        throw std::invalid_argument("disc_exit_frequency: need |x0| < 1");
    require(dt > 0.0 && dt <= 1e-3, "disc_exit_frequency: need 0 < dt <= 1e-3");
    std::vector<double> hit(n_paths);
    parallel_for_paths(n_paths, workers, [&](std::size_t i) {
        RandomSource stream = src.substream(i);
        const auto o = run_disc_path(x0, 0.0, dt, 50.0, true, stream);
        hit[i] = arc.contains(angle_of(o.exit_point)) ? 1.0 : 0.0;
    });
    return mc_reduce(hit, src.seed());
}

ConditionedExit conditioned_exit_expectation(std::array<double, 2> x0, const DiscArc& b1,
                                             const DiscArc& u_arc, double t,
                                             std::size_t n_paths, RandomSource src,
                                             double dt, unsigned workers) {
    if (!(x0[0] * x0[0] + x0[1] * x0[1] < 1.0))
        throw std::invalid_argument("conditioned_exit_expectation: need |x0| < 1");
    require(b1.disjoint_from(u_arc), "conditioned_exit_expectation: arcs must be disjoint");
    require(t > 0.0, "conditioned_exit_expectation: t must be positive");
    require(dt > 0.0 && dt <= 1e-3, "conditioned_exit_expectation: need 0 < dt <= 1e-3");

    const double v0 = disc_harmonic_measure(x0, b1);
    if (!(v0 > 0.0)) throw DiagnosticsError("conditioned_exit_expectation: v(x0) vanishes");
    const double horizon = t + 40.0;

    // estimator B: Q-side paths to time t only (change-of-measure route)
    std::vector<double> cm_vals(n_paths);
    parallel_for_paths(n_paths, workers, [&](std::size_t i) {
        RandomSource stream = src.substream(kStreamLane + i);
        const auto o = run_disc_path(x0, t, dt, horizon, false, stream);
        cm_vals[i] = o.inside_at_t ? disc_harmonic_measure(o.x_at_t, u_arc) / v0 : 0.0;
    });

    // estimator A: rejection on the exit arc; trials are consumed in blocks
    // and accepted values kept in trial order, so the worker count is moot
    const std::size_t max_trials = 64 * n_paths;
    std::vector<double> accepted;
    accepted.reserve(n_paths);
    std::size_t trials_done = 0;
    const std::size_t block = std::max<std::size_t>(1024, n_paths / 4);
    std::vector<double> val(block);
    std::vector<char> ok(block);
    while (accepted.size() < n_paths && trials_done < max_trials) {
        const std::size_t todo = std::min(block, max_trials - trials_done);
        parallel_for_paths(todo, workers, [&](std::size_t j) {
            RandomSource stream = src.substream(trials_done + j);
            const auto o = run_disc_path(x0, t, dt, horizon, true, stream);
            if (!b1.contains(angle_of(o.exit_point))) {
                ok[j] = 0;
                return;
            }
            ok[j] = 1;
            if (o.inside_at_t) {
                const double f = disc_harmonic_measure(o.x_at_t, u_arc);
                const double v = disc_harmonic_measure(o.x_at_t, b1);
                val[j] = f / v;
            } else {
                val[j] = 0.0;  // accepted exits land on B1, where u vanishes
            }
        });
        for (std::size_t j = 0; j < todo && accepted.size() < n_paths; ++j)
            if (ok[j]) accepted.push_back(val[j]);
        trials_done += todo;
    }
    if (accepted.size() < n_paths)
        throw DiagnosticsError("conditioned_exit_expectation: acceptance budget exhausted");

    ConditionedExit out;
    out.via_rejection = mc_reduce(accepted, src.seed());
    out.via_change_of_measure = mc_reduce(cm_vals, src.seed());
    out.acceptance_rate =
        static_cast<double>(accepted.size()) / static_cast<double>(trials_done);
    return out;
}

}  // namespace slm::experiments
