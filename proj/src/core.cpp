#include "slm/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace slm {

TimeGrid make_grid(double t_end, std::size_t n_steps) {
    if (!(t_end > 0.0)) throw std::invalid_argument("make_grid: t_end must be positive");
    if (n_steps == 0) throw std::invalid_argument("make_grid: n_steps must be >= 1");
    TimeGrid g;
    g.times.resize(n_steps + 1);
    const double n = static_cast<double>(n_steps);
    for (std::size_t k = 0; k <= n_steps; ++k)
        g.times[k] = t_end * (static_cast<double>(k) / n);
    g.step = t_end / n;
    return g;
}

TimeGrid grid_from_times(std::vector<double> times) {
    if (times.empty()) throw std::invalid_argument("grid_from_times: empty grid");
    if (times.front() < 0.0) throw std::invalid_argument("grid_from_times: times must be nonnegative");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1]))
            throw std::invalid_argument("grid_from_times: times must be strictly increasing");
    TimeGrid g;
    g.times = std::move(times);
    if (g.times.size() >= 2) {
        const double d = (g.times.back() - g.times.front()) / static_cast<double>(g.times.size() - 1);
        const double tol = 1e-12 * std::max(1.0, std::abs(g.times.back()));
        bool uniform = true;
        for (std::size_t k = 1; k < g.times.size(); ++k)
            if (std::abs(g.times[k] - g.times[k - 1] - d) > tol) { uniform = false; break; }
        if (uniform) g.step = d;
    }
    return g;
}

GridPtr share(TimeGrid g) { return std::make_shared<const TimeGrid>(std::move(g)); }

GridPtr report_grid(std::span<const double> ts) {
    std::vector<double> times;
    times.reserve(ts.size() + 1);
    times.push_back(0.0);
    for (double t : ts) {
        if (!(t > 0.0)) throw std::invalid_argument("report_grid: report times must be positive");
        times.push_back(t);
    }
    return share(grid_from_times(std::move(times)));
}

namespace {

constexpr std::size_t kBlock = 1024;

double sum_linear(const double* p, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
}

}  // namespace

double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n <= kBlock) return sum_linear(v.data(), n);
    const std::size_t nb = (n + kBlock - 1) / kBlock;
    std::vector<double> acc(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t lo = b * kBlock;
        acc[b] = sum_linear(v.data() + lo, std::min(kBlock, n - lo));
    }
    for (std::size_t w = 1; w < nb; w *= 2)
        for (std::size_t i = 0; i + w < nb; i += 2 * w)
            acc[i] += acc[i + w];
    return acc[0];
}

MCEstimate mc_reduce(std::span<const double> values, std::uint64_t seed) {
    if (values.empty()) throw std::invalid_argument("mc_reduce: empty sample");
    const std::size_t n = values.size();
    MCEstimate e;
    e.n_paths = n;
    e.seed = seed;
    e.mean = pairwise_sum(values) / static_cast<double>(n);
    if (n == 1) return e;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - e.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    e.se = std::sqrt(var / static_cast<double>(n));
    return e;
}

unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void parallel_for_paths(std::size_t n, unsigned workers,
                        const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    const unsigned w = static_cast<unsigned>(
        std::min<std::size_t>(resolve_workers(workers), n));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    const std::size_t chunk = std::max<std::size_t>(1, std::min<std::size_t>(256, n / (4 * w) + 1));
    auto run = [&] {
        try {
            for (;;) {
                const std::size_t lo = next.fetch_add(chunk);
                if (lo >= n) return;
                const std::size_t hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) body(i);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lk(error_mu);
            if (!error) error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace slm
