#include "doctest.h"

#include <cmath>

#include "slm/analytics.hpp"
#include "slm/htransform.hpp"
#include "test_helpers.hpp"

using namespace slm;
using namespace slm::ht;
using testutil::agree_3se;
using testutil::below_3se;
using testutil::within_3se;

namespace {

std::vector<double> probe_points() {
    std::vector<double> p;
    for (int i = 0; i < 32; ++i) p.push_back(1e-9 * std::pow(1e9, i / 31.0));
    return p;
}

}  // namespace

TEST_CASE("payoff_transform: calls, puts, sqrt, identity, cap") {
    const auto probes = probe_points();

    auto call1 = payoff_transform([](double x) { return std::max(x - 1.0, 0.0); }, probes);
    CHECK(std::abs(call1.eta - 1.0) < 1e-6);
    for (double x : {0.2, 0.5, 0.9})
        CHECK(call1.g(x) == doctest::Approx(1.0 - x).epsilon(1e-12));
    CHECK(call1.g(2.0) == 0.0);

    auto root = payoff_transform([](double x) { return std::sqrt(x); }, probes);
    CHECK(std::abs(root.eta) < 1e-3);
    for (double x : {0.25, 1.0, 4.0})
        CHECK(root.g(x) == doctest::Approx(std::sqrt(x)).epsilon(1e-12));

    auto put2 = payoff_transform([](double x) { return std::max(2.0 - x, 0.0); }, probes);
    CHECK(std::abs(put2.eta) < 1e-6);
    CHECK(put2.g(1.0) == doctest::Approx(1.0));   // (2x-1)^+
    CHECK(put2.g(0.25) == 0.0);

    auto ident = payoff_transform([](double x) { return x; }, probes);
    CHECK(std::abs(ident.eta - 1.0) < 1e-9);

    auto cap = payoff_transform([](double x) { return std::min(x, 2.0); }, probes);
    CHECK(std::abs(cap.eta) < 1e-6);

    // g(x) = x h(1/x) pointwise on a fixed spot grid
    for (const auto& tr : {call1, root, put2, ident, cap})
        for (double x : {0.1, 0.37, 1.0, 2.5, 10.0})
            CHECK(tr.g(x) == doctest::Approx(x * tr.h_payoff(1.0 / x)).epsilon(1e-12));
}

TEST_CASE("payoff_transform: divergence and instability handling") {
    const auto probes = probe_points();
    auto quad = payoff_transform([](double x) { return x * x; }, probes);  // g = 1/x
    CHECK(!quad.eta_finite);
    const auto pair = inverse_bessel_pair();
    CHECK_THROWS_AS(dual_expectation(pair, quad, 1.0, 100, RandomSource(1)),
                    std::invalid_argument);

    // g oscillates near zero: h(x) = 1 + sin^2(x) gives g = x + x sin^2(1/x)...
    // use h(x) = x (1 + sin(x)^2) so g(x) = 1 + sin(1/x)^2
    CHECK_THROWS_AS(payoff_transform(
                        [](double x) { return x * (1.0 + std::sin(x) * std::sin(x)); }, probes),
                    DiagnosticsError);

    CHECK_THROWS_AS(payoff_transform([](double x) { return 1.0 / (x - x); }, probes),
                    std::invalid_argument);  // not finite on the probes
}

TEST_CASE("p_expectation_of_N: survival probability and the f = h control") {
    const auto pair = inverse_bessel_pair();
    const auto est = p_expectation_of_N(pair, 1.0, 100000, RandomSource(501));
    CHECK(within_3se(est, 2.0 * analytics::normal_cdf(1.0 / std::sqrt(1.0)) - 1.0));

    const auto mart = with_numerator(pair, pair.h);  // N = 1
    for (double t : {0.25, 1.0, 4.0}) {
        const auto m = p_expectation_of_N(mart, t, 100000, RandomSource(502));
        CHECK(within_3se(m, 1.0));
    }
}

TEST_CASE("p_expectation_of_N: strict decrease when f survives past tau0") {
    const auto pair = inverse_bessel_pair();
    const auto a = p_expectation_of_N(pair, 0.25, 100000, RandomSource(503));
    const auto b = p_expectation_of_N(pair, 1.0, 100000, RandomSource(504));
    const auto c = p_expectation_of_N(pair, 4.0, 100000, RandomSource(505));
    CHECK(below_3se(b, a));
    CHECK(below_3se(c, b));
}

TEST_CASE("p_expectation_of_N: horizon guard") {
    auto pair = inverse_bessel_pair();
    pair.t_max = 2.0;
    CHECK_NOTHROW(p_expectation_of_N(pair, 1.0, 100, RandomSource(1)));
    CHECK_THROWS_AS(p_expectation_of_N(pair, 3.0, 100, RandomSource(1)),
                    std::invalid_argument);
}

TEST_CASE("dual_expectation: call payoff against the closed form") {
    const auto pair = inverse_bessel_pair();
    const auto tr = payoff_transform([](double x) { return std::max(x - 0.5, 0.0); },
                                     probe_points());
    const auto res = dual_expectation(pair, tr, 1.0, 100000, RandomSource(506));
    CHECK(agree_3se(res.lhs, res.rhs));
    const double cf = analytics::inv_bessel_call(1.0, 0.5);
    CHECK(within_3se(res.lhs, cf));
    CHECK(within_3se(res.rhs, cf));
}

TEST_CASE("dual_expectation: symmetric sqrt payoff, eta = 0") {
    const auto pair = inverse_bessel_pair();
    const auto tr = payoff_transform([](double x) { return std::sqrt(x); }, probe_points());
    for (double t : {0.25, 1.0}) {
        const auto res = dual_expectation(pair, tr, t, 100000, RandomSource(507));
        CHECK(agree_3se(res.lhs, res.rhs));
    }
}

TEST_CASE("dual_expectation: linear payoff reproduces the supermartingale gap") {
    const auto pair = inverse_bessel_pair();
    const auto tr = payoff_transform([](double x) { return x; }, probe_points());
    const auto res = dual_expectation(pair, tr, 1.0, 100000, RandomSource(508));
    CHECK(agree_3se(res.lhs, res.rhs));
    CHECK(within_3se(res.rhs, 2.0 * analytics::normal_cdf(1.0) - 1.0));  // Q(tau0 > 1)
    CHECK(1.0 - res.lhs.mean > 3.0 * res.lhs.se);  // strictly below the start value
}

TEST_CASE("duality holds across the sublinear convex test set") {
    const auto pair = inverse_bessel_pair();
    const auto probes = probe_points();
    const std::vector<std::function<double(double)>> payoffs{
        [](double x) { return std::max(0.5 - x, 0.0); },
        [](double x) { return std::max(1.0 - x, 0.0); },
        [](double x) { return std::max(2.0 - x, 0.0); },
        [](double x) { return std::sqrt(x); },
        [](double x) { return std::min(x, 2.0); },
    };
    std::uint64_t seed = 510;
    for (const auto& h : payoffs) {
        const auto tr = payoff_transform(h, probes);
        CHECK(std::abs(tr.eta) < 1e-3);
        for (double t : {0.25, 1.0}) {
            const auto res = dual_expectation(pair, tr, t, 50000, RandomSource(seed++));
            CHECK(agree_3se(res.lhs, res.rhs));
        }
    }
}

TEST_CASE("submartingale and supermartingale directions on the R side") {
    // sublinear convex payoffs applied to the inverse Bessel: nondecreasing
    const double ts[3] = {0.25, 1.0, 4.0};
    auto rows = sde::sample_scalar_at(sde::ProcessModel::inverse_bes3(1.0),
                                      [](double s) { return std::max(1.0 - s, 0.0); }, ts,
                                      100000, RandomSource(511));
    std::vector<MCEstimate> put;
    for (auto& r : rows) put.push_back(mc_reduce(r, 511));
    CHECK(put[1].mean - put[0].mean > -3.0 * testutil::joint_se(put[0], put[1]));
    CHECK(put[2].mean - put[1].mean > -3.0 * testutil::joint_se(put[1], put[2]));

    // the coordinate itself: strictly decreasing mean
    auto raw = sde::sample_scalar_at(sde::ProcessModel::inverse_bes3(1.0),
                                     [](double s) { return s; }, ts, 100000, RandomSource(512));
    std::vector<MCEstimate> mean;
    for (auto& r : raw) mean.push_back(mc_reduce(r, 512));
    CHECK(below_3se(mean[1], mean[0]));
    CHECK(below_3se(mean[2], mean[1]));
}

TEST_CASE("martingale_defect: closed form, monotone, classification") {
    const auto pair = inverse_bessel_pair();
    const double ts[3] = {0.25, 1.0, 4.0};
    const auto defects = martingale_defect(pair, ts, 100000, RandomSource(513));
    REQUIRE(defects.size() == 3);
    for (const auto& [t, est] : defects)
        CHECK(within_3se(est, 2.0 * analytics::normal_cdf(-1.0 / std::sqrt(t))));
    CHECK(defects[0].second.mean <= defects[1].second.mean);
    CHECK(defects[1].second.mean <= defects[2].second.mean);
    CHECK(strict_on_horizon(defects));
    CHECK(defects[1].second.mean ==
          doctest::Approx(2.0 * analytics::normal_cdf(-1.0)).epsilon(0.02));

    const auto gbm = gbm_pair(1.0);
    const auto gd = martingale_defect(gbm, ts, 20000, RandomSource(514));
    for (const auto& [t, est] : gd) CHECK(est.mean == 0.0);
    CHECK(!strict_on_horizon(gd));
}

TEST_CASE("madan_yor_price: monotone barriers and the bubble premium") {
    const auto model = sde::ProcessModel::inverse_bes3(1.0);
    const double bars[6] = {2, 4, 8, 16, 32, 64};
    const auto prices = madan_yor_price(model, 0.5, 1.0, bars, 100000, RandomSource(515));
    REQUIRE(prices.size() == 6);
    for (std::size_t m = 1; m < prices.size(); ++m)
        CHECK(prices[m].second.mean - prices[m - 1].second.mean >
              -3.0 * testutil::joint_se(prices[m].second, prices[m - 1].second));

    const auto plain = terminal_price(model, [](double s) { return std::max(s - 0.5, 0.0); },
                                      1.0, 100000, RandomSource(516));
    CHECK(below_3se(plain, prices.back().second));
    CHECK(within_3se(plain, analytics::inv_bessel_call(1.0, 0.5)));

    // true martingale: the stopped price converges to the plain price
    const auto gbm = sde::ProcessModel::gbm(1.0, 1.0);
    const double gbars[2] = {16, 64};
    const auto gp = madan_yor_price(gbm, 1.0, 1.0, gbars, 100000, RandomSource(517));
    const auto gplain = terminal_price(gbm, [](double s) { return std::max(s - 1.0, 0.0); },
                                       1.0, 100000, RandomSource(518));
    CHECK(agree_3se(gp.back().second, gplain));

    CHECK_THROWS_AS(madan_yor_price(model, 0.5, 1.0, std::vector<double>{0.4}, 100,
                                    RandomSource(1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(madan_yor_price(sde::ProcessModel::bes3(1.0), 0.5, 1.0,
                                    std::vector<double>{2.0}, 100, RandomSource(1)),
                    std::invalid_argument);
}
