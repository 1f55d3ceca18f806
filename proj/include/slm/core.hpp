#pragma once

// Shared Monte Carlo plumbing: time grids, absorbed paths, the deterministic
// pairwise reduction and the path-parallel driver.  Everything here is
// immutable after construction and safe to share across workers.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace slm {

// Numerical-diagnostics failure; the CLI maps this to exit code 2.
class DiagnosticsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Strictly increasing sampling times, times[0] >= 0.  `step` is set iff the
// spacing is uniform to within 1e-12.
struct TimeGrid {
    std::vector<double> times;
    std::optional<double> step;

    std::size_t size() const { return times.size(); }
    double operator[](std::size_t k) const { return times[k]; }
    double t_end() const { return times.back(); }
};

// Uniform grid 0 = t_0 < ... < t_n = t_end with step t_end/n_steps.
// The endpoint is exact: times[n] == t_end.
TimeGrid make_grid(double t_end, std::size_t n_steps);

// Validates an explicit list of times; detects a uniform step.
TimeGrid grid_from_times(std::vector<double> times);

using GridPtr = std::shared_ptr<const TimeGrid>;

GridPtr share(TimeGrid g);

// Grid {0} ∪ ts for a list of positive, strictly increasing report times.
GridPtr report_grid(std::span<const double> ts);

struct MCEstimate {
    double mean = 0.0;
    double se = 0.0;  // sample standard deviation / sqrt(n_paths)
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;
};

// Fixed-order pairwise-tree summation, block size 1024.  The result depends
// only on the value order, never on how paths were partitioned across
// workers.
double pairwise_sum(std::span<const double> values);

MCEstimate mc_reduce(std::span<const double> values, std::uint64_t seed);

// A sampled trajectory plus its absorption record.  Once absorbed, the state
// is frozen: value(j) == absorption_state for all j >= absorption_index.
struct AbsorbedPath {
    GridPtr grid;
    int dim = 1;
    std::vector<double> data;  // dim * grid->size(), time-major
    std::optional<std::size_t> absorption_index;
    std::vector<double> absorption_state;

    std::size_t n_times() const { return grid->size(); }
    double scalar(std::size_t k) const { return data[k * static_cast<std::size_t>(dim)]; }
    std::span<const double> value(std::size_t k) const {
        return {data.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    bool absorbed_by(std::size_t k) const {
        return absorption_index.has_value() && *absorption_index <= k;
    }
};

unsigned resolve_workers(unsigned requested);

// Runs body(i) for i in [0, n) on `workers` threads (0 = hardware count).
// Work is addressed by index, so results must be written into index-addressed
// slots; with that convention the output is identical for any worker count.
void parallel_for_paths(std::size_t n, unsigned workers,
                        const std::function<void(std::size_t)>& body);

// Stream-id lane spacing for operations that need several independent
// sub-ensembles (e.g. the two sides of a duality check): lane k starts at
// stream_id + k * kStreamLane, paths within a lane use consecutive ids.
inline constexpr std::uint64_t kStreamLane = std::uint64_t{1} << 40;

}  // namespace slm
