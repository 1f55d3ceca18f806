// Acceptance suite: one criterion per line, PASS/FAIL verdicts at the stated
// tolerances, exit code = number of failed criteria.

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "slm/analytics.hpp"
#include "slm/experiments.hpp"
#include "slm/htransform.hpp"
#include "slm/kelvin.hpp"
#include "slm/sde.hpp"

#ifndef SLM_CLI_PATH
#define SLM_CLI_PATH ""
#endif

namespace {

using slm::MCEstimate;
using slm::RandomSource;

constexpr std::size_t kPaths = 100000;

struct Harness {
    int failures = 0;
    std::vector<std::string> notes;

    void report(int index, const std::string& name, bool pass, const std::string& detail) {
        std::printf("[%s] criterion %d: %s  %s\n", pass ? "PASS" : "FAIL", index,
                    name.c_str(), detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
};

double jse(const MCEstimate& a, const MCEstimate& b) {
    return std::sqrt(a.se * a.se + b.se * b.se);
}

bool within3(const MCEstimate& e, double target) {
    return std::abs(e.mean - target) <= 3.0 * e.se;
}

bool agree3(const MCEstimate& a, const MCEstimate& b) {
    return std::abs(a.mean - b.mean) <= 3.0 * jse(a, b);
}

// a < b conclusively
bool strictly_below(const MCEstimate& a, const MCEstimate& b) {
    return b.mean - a.mean > 3.0 * jse(a, b);
}

std::string fmt2(double a, double b) {
    std::ostringstream ss;
    ss << a << " vs " << b;
    return ss.str();
}

// ------------------------------------------------------------ criterion 1

void criterion_defect_law(Harness& h) {
    const double ts[3] = {0.25, 1.0, 4.0};
    auto rows = slm::sde::sample_scalar_at(slm::sde::ProcessModel::inverse_bes3(1.0),
                                           [](double s) { return s; }, ts, kPaths,
                                           RandomSource(9001));
    bool pass = true;
    std::ostringstream detail;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto est = slm::mc_reduce(rows[k], 9001);
        const double target = 2.0 * slm::analytics::normal_cdf(1.0 / std::sqrt(ts[k])) - 1.0;
        pass = pass && within3(est, target);
        detail << "t=" << ts[k] << ":" << est.mean << "/" << target << " ";
    }
    h.report(1, "martingale-defect law E[1/X_t] = 2 Phi(1/sqrt(t)) - 1", pass, detail.str());
}

// ------------------------------------------------------------ criterion 2

void criterion_decreasing_regime(Harness& h) {
    bool pass = true;
    for (double strike : {0.1, 0.25, 0.5})
        for (int i = 0; i < 50; ++i) {
            const double t = 1e-3 * std::pow(1e6, i / 49.0);
            pass = pass && slm::analytics::inv_bessel_call_deriv(t, strike) < 0.0;
        }

    // common-path finite differences in maturity must come out negative
    const double ts[3] = {0.5, 1.0, 2.0};
    auto rows = slm::sde::sample_scalar_at(slm::sde::ProcessModel::bes3(1.0),
                                           [](double x) { return std::max(1.0 / x - 0.25, 0.0); },
                                           ts, kPaths, RandomSource(9002));
    std::ostringstream detail;
    for (std::size_t k = 1; k < 3; ++k) {
        std::vector<double> diff(kPaths);
        for (std::size_t i = 0; i < kPaths; ++i) diff[i] = rows[k][i] - rows[k - 1][i];
        const auto d = slm::mc_reduce(diff, 9002);
        pass = pass && (d.mean < 0.0) && (std::abs(d.mean) > 3.0 * d.se);
        detail << "dE[" << ts[k - 1] << "->" << ts[k] << "]=" << d.mean << " ";
    }
    h.report(2, "K <= 1/2: derivative negative on the log grid, MC sign agrees", pass,
             detail.str());
}

// ------------------------------------------------------------ criterion 3

void criterion_threshold_regime(Harness& h) {
    const double strike = 0.6;
    const double thr = slm::analytics::decrease_threshold(strike);
    const double formula = 1.0 / (strike * std::log((2.0 * strike + 1.0) / (2.0 * strike - 1.0)));
    bool pass = std::abs(thr - formula) <= 1e-12;
    pass = pass && slm::analytics::inv_bessel_call_deriv(0.05, strike) > 0.0;
    for (int i = 0; i < 50; ++i) {
        const double t = thr * std::pow(100.0, i / 49.0);
        pass = pass && slm::analytics::inv_bessel_call_deriv(t, strike) < 0.0;
    }
    h.report(3, "K = 0.6: increasing near zero, decreasing past the threshold", pass,
             "threshold=" + std::to_string(thr));
}

// ------------------------------------------------------------ criterion 4

void criterion_duality(Harness& h) {
    const auto pair = slm::ht::inverse_bessel_pair();
    std::vector<double> probes;
    for (int i = 0; i < 32; ++i) probes.push_back(1e-9 * std::pow(1e9, i / 31.0));

    struct Payoff {
        const char* name;
        std::function<double(double)> fn;
    };
    const std::vector<Payoff> payoffs{
        {"(x-0.5)+", [](double x) { return std::max(x - 0.5, 0.0); }},
        {"(2-x)+", [](double x) { return std::max(2.0 - x, 0.0); }},
        {"sqrt", [](double x) { return std::sqrt(x); }},
    };
    bool pass = true;
    std::ostringstream detail;
    std::uint64_t seed = 9004;
    for (const auto& p : payoffs) {
        const auto tr = slm::ht::payoff_transform(p.fn, probes);
        for (double t : {0.25, 1.0}) {
            const auto res = slm::ht::dual_expectation(pair, tr, t, kPaths,
                                                       RandomSource(seed++));
            const bool ok = agree3(res.lhs, res.rhs);
            pass = pass && ok;
            if (!ok) detail << p.name << "@t=" << t << " " << fmt2(res.lhs.mean, res.rhs.mean);
        }
    }
    h.report(4, "payoff-transform duality for (x-0.5)+, (2-x)+, sqrt", pass, detail.str());
}

// ------------------------------------------------------------ criterion 5

void criterion_scaling(Harness& h) {
    const auto chk = slm::analytics::bes3_from_zero_scaling_check(1.0, 4.0, 0.5, kPaths,
                                                                  RandomSource(9005));
    const bool identity = agree3(chk.lhs, chk.rhs);
    const bool monotone = strictly_below(chk.lhs, chk.unscaled_at_t);
    h.report(5, "BES(3)-from-zero scaling identity and strict monotonicity",
             identity && monotone,
             "lhs=" + std::to_string(chk.lhs.mean) + " rhs=" + std::to_string(chk.rhs.mean) +
                 " unscaled_t=" + std::to_string(chk.unscaled_at_t.mean));
}

// ------------------------------------------------------------ criterion 6

void criterion_size_biased(Harness& h) {
    slm::TimeGrid grid;
    grid.times = {0.0, 0.25, 0.5, 1.0};
    slm::experiments::SizeBiasedConfig cfg{2, 1.0, grid};
    const auto rows = slm::experiments::size_biased_expectations(cfg, kPaths,
                                                                 RandomSource(9106));
    bool pass = true;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        pass = pass && within3(rows[k].m_stat, rows[0].m_stat.mean);
        pass = pass && strictly_below(rows[k].n_stat, rows[k - 1].n_stat);
        pass = pass && strictly_below(rows[k].u_stat, rows[k - 1].u_stat);
        pass = pass && strictly_below(rows[k].v_stat, rows[k - 1].v_stat);
    }
    const auto ratio = slm::experiments::ratio_martingale_check(cfg, kPaths,
                                                                RandomSource(9107));
    for (const auto& [t, est] : ratio) pass = pass && within3(est, 0.5);
    h.report(6, "size-biased suite: M constant, N/U/V strictly decreasing, ratio 1/n", pass,
             "M(1)=" + std::to_string(rows.back().m_stat.mean) +
                 " N(1)=" + std::to_string(rows.back().n_stat.mean));
}

// ------------------------------------------------------------ criterion 7

void criterion_dyson(Harness& h) {
    const std::vector<double> start{-1.0, 0.0, 1.0};
    slm::TimeGrid grid;
    grid.times = {0.0, 0.1, 0.5, 1.0};

    const auto control = slm::experiments::bm_vandermonde_mean(start, grid, kPaths,
                                                               RandomSource(9008));
    bool pass = true;
    for (const auto& [t, est] : control) pass = pass && within3(est, 2.0);

    const auto ratio = slm::experiments::dyson_ratio_expectation(2, 3, start, grid, kPaths,
                                                                 RandomSource(9009));
    for (std::size_t k = 2; k < ratio.size(); ++k)
        pass = pass && strictly_below(ratio[k].second, ratio[k - 1].second);

    // ordering on every path at every grid time
    bool ordered = true;
    slm::sde::mc_paths(slm::sde::ProcessModel::dyson(start), slm::share(grid), kPaths,
                       RandomSource(9010), 0, [&](std::size_t, const slm::AbsorbedPath& p) {
                           for (std::size_t k = 0; k < p.n_times(); ++k) {
                               const auto lam = p.value(k);
                               if (!(lam[0] < lam[1] && lam[1] < lam[2])) ordered = false;
                           }
                       });
    pass = pass && ordered;
    h.report(7, "Dyson suite: control martingale, decreasing ratio, strict ordering", pass,
             "ratio(0.1)=" + std::to_string(ratio[1].second.mean) +
                 " ratio(1)=" + std::to_string(ratio[3].second.mean));
}

// ------------------------------------------------------------ criterion 8

void criterion_conditioned_exit(Harness& h) {
    const std::array<double, 2> origin{0.0, 0.0};
    const slm::experiments::DiscArc b1(0.0, std::numbers::pi);
    const slm::experiments::DiscArc u_arc(std::numbers::pi + 0.2,
                                          2.0 * std::numbers::pi - 0.2);
    const auto res = slm::experiments::conditioned_exit_expectation(
        origin, b1, u_arc, 0.3, kPaths, RandomSource(9011), 1e-3);
    bool pass = agree3(res.via_rejection, res.via_change_of_measure);

    std::vector<MCEstimate> seq;
    std::uint64_t seed = 9012;
    for (double t : {0.1, 0.5, 2.0}) {
        const auto r = slm::experiments::conditioned_exit_expectation(
            origin, b1, u_arc, t, kPaths / 2, RandomSource(seed++), 1e-3);
        seq.push_back(r.via_change_of_measure);
    }
    pass = pass && strictly_below(seq[1], seq[0]) && strictly_below(seq[2], seq[1]);

    const std::array<double, 2> x0{0.5, 0.0};
    const slm::experiments::DiscArc quarter(0.0, 0.5 * std::numbers::pi);
    const auto freq = slm::experiments::disc_exit_frequency(x0, quarter, kPaths / 2,
                                                            RandomSource(9015), 1e-3);
    pass = pass && within3(freq, slm::experiments::disc_harmonic_measure(x0, quarter));

    h.report(8, "conditioned-exit suite: estimator agreement, decrease, harmonic measure",
             pass,
             "rejection=" + std::to_string(res.via_rejection.mean) +
                 " change_of_measure=" + std::to_string(res.via_change_of_measure.mean));
}

// ------------------------------------------------------------ criterion 9

void criterion_kelvin(Harness& h) {
    using slm::kelvin::make_field;
    bool pass = true;

    // involution on a random cloud
    RandomSource src(9016);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> p{src.gaussian(), src.gaussian(), src.gaussian()};
        const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        if (n < 0.1) continue;
        const auto q = slm::kelvin::invert_point(slm::kelvin::invert_point(p));
        for (int c = 0; c < 3; ++c)
            pass = pass && std::abs(q[c] -
                                    p[c]) <= 1e-12;
    }

    // commutation order over the five-function set
    const std::vector<slm::kelvin::ScalarField> fields{
        make_field(3, [](std::span<const double>) { return 1.0; }),
        make_field(3, [](std::span<const double> x) { return x[0]; }),
        make_field(3, [](std::span<const double> x) { return x[0] * x[1]; }),
        make_field(3, [](std::span<const double> x) {
            return x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        }),
        make_field(3, [](std::span<const double> x) {
            const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            return r2 * r2;
        }),
    };
    const double y[3] = {0.9, -0.45, 0.62};
    for (const auto& u : fields) {
        std::vector<double> res;
        for (double hh : {1e-2, 5e-3, 2.5e-3})
            res.push_back(slm::kelvin::laplacian_commutation_residual(u, {y, 3}, hh));
        for (std::size_t k = 1; k < res.size(); ++k)
            pass = pass && std::log2(res[k - 1] / res[k]) >= 1.9;
    }

    // change-of-measure identity and the reweighted coordinate martingale
    const std::array<double, 3> x0{1.0, 0.0, 0.0};
    const auto chk = slm::kelvin::conformal_inversion_check(
        0.5, x0,
        [](std::span<const double> x) {
            return std::min(std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]), 5.0);
        },
        5.0, 0.5, kPaths, RandomSource(9017), 1e-3);
    pass = pass && agree3(chk.lhs, chk.rhs);

    const double ts[3] = {0.25, 0.5, 1.0};
    const auto diag = slm::kelvin::conformal_martingale_diagnostics(0.5, x0, ts, kPaths / 2,
                                                                    RandomSource(9018), 1e-3);
    for (std::size_t k = 0; k < diag.coord_means.size(); ++k)
        for (int a = 0; a < 3; ++a)
            pass = pass && within3(diag.coord_means[k][a],
                                   a == 0 ? 1.0 : 0.0);

    h.report(9, "Kelvin suite: involution, commutation order, inversion identity", pass,
             "lhs=" + std::to_string(chk.lhs.mean) + " rhs=" + std::to_string(chk.rhs.mean));
}

// ----------------------------------------------------------- criterion 10

void criterion_pricing(Harness& h) {
    const auto model = slm::sde::ProcessModel::inverse_bes3(1.0);

    // put price nondecreasing in maturity
    const double ts[3] = {0.25, 1.0, 4.0};
    auto put_rows = slm::sde::sample_scalar_at(
        model, [](double s) { return std::max(1.0 - s, 0.0); }, ts, kPaths,
        RandomSource(9019));
    std::vector<MCEstimate> put;
    for (auto& r : put_rows) put.push_back(slm::mc_reduce(r, 9019));
    bool pass = true;
    for (std::size_t k = 1; k < put.size(); ++k)
        pass = pass && (put[k].mean - put[k - 1].mean > -3.0 * jse(put[k], put[k - 1]));

    // call with K = 0.6: higher at t = 0.1 than at t = 5
    const double cts[2] = {0.1, 5.0};
    auto call_rows = slm::sde::sample_scalar_at(
        model, [](double s) { return std::max(s - 0.6, 0.0); }, cts, kPaths,
        RandomSource(9020));
    const auto call_early = slm::mc_reduce(call_rows[0], 9020);
    const auto call_late = slm::mc_reduce(call_rows[1], 9020);
    pass = pass && strictly_below(call_late, call_early);

    // Madan-Yor sequence: nondecreasing, top barrier above the plain price
    const double bars[6] = {2, 4, 8, 16, 32, 64};
    const auto prices = slm::ht::madan_yor_price(model, 0.5, 1.0, bars, kPaths,
                                                 RandomSource(9021));
    for (std::size_t m = 1; m < prices.size(); ++m)
        pass = pass && (prices[m].second.mean - prices[m - 1].second.mean >
                        -3.0 * jse(prices[m].second, prices[m - 1].second));
    const auto plain = slm::ht::terminal_price(
        model, [](double s) { return std::max(s - 0.5, 0.0); }, 1.0, kPaths,
        RandomSource(9022));
    pass = pass && strictly_below(plain, prices.back().second);

    h.report(10, "pricing: put nondecreasing, call decreases, Madan-Yor premium", pass,
             "call(0.1)=" + std::to_string(call_early.mean) +
                 " call(5)=" + std::to_string(call_late.mean) +
                 " MY(64)=" + std::to_string(prices.back().second.mean) +
                 " plain=" + std::to_string(plain.mean));
}

// ----------------------------------------------------------- criterion 11

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void criterion_determinism(Harness& h) {
    const std::string cli = SLM_CLI_PATH;
    if (cli.empty()) {
        h.report(11, "determinism across workers", false, "CLI path not configured");
        return;
    }
    bool pass = true;
    std::ostringstream detail;
    const std::vector<std::pair<std::string, std::string>> runs{
        {"defect", "defect --model inverse-bes3 --x0 1 --t 0.25,1,4 --paths 100000 --seed 7"},
        {"sizebias", "examples size-biased --n 2 --z 1 --t 0.25,0.5,1 --paths 50000 --seed 7"},
        {"duality", "verify duality --payoff put --strike 2 --t 1 --paths 50000 --seed 7"},
    };
    for (const auto& [name, args] : runs) {
        const std::string o1 = "/tmp/slm_acc_" + name + "_w1.csv";
        const std::string o4 = "/tmp/slm_acc_" + name + "_w4.csv";
        const std::string c1 = cli + " " + args + " --workers 1 --out " + o1 + " >/dev/null 2>&1";
        const std::string c4 = cli + " " + args + " --workers 4 --out " + o4 + " >/dev/null 2>&1";
        if (std::system(c1.c_str()) != 0 || std::system(c4.c_str()) != 0) {
            pass = false;
            detail << name << ":run-failed ";
            continue;
        }
        const auto b1 = slurp(o1);
        if (b1.empty() || b1 != slurp(o4)) {
            pass = false;
            detail << name << ":bytes-differ ";
        }
    }
    h.report(11, "determinism: identical seed, different --workers, identical CSV", pass,
             detail.str());
}

}  // namespace

int main() {
    Harness h;
    criterion_defect_law(h);
    criterion_decreasing_regime(h);
    criterion_threshold_regime(h);
    criterion_duality(h);
    criterion_scaling(h);
    criterion_size_biased(h);
    criterion_dyson(h);
    criterion_conditioned_exit(h);
    criterion_kelvin(h);
    criterion_pricing(h);
    criterion_determinism(h);
    std::printf("%d/11 criteria passed\n", 11 - h.failures);
    return h.failures;
}
