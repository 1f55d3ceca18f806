#pragma once

// Simulators, exact in law at the grid times, for every process family used
// in the toolkit: Brownian motion absorbed at zero (bridge-corrected), BES(3)
// as a 3-D norm, squared Bessel by its noncentral chi-square transition,
// geometric BM, Dyson eigenvalues via Hermitian matrix increments, and the
// spliced GBM / inverse-Bessel bubble.

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "slm/core.hpp"
#include "slm/rng.hpp"

namespace slm::sde {

struct ProcessModel {
    enum class Family {
        BmAbsorbedAtZero,
        BmFree,
        Bes3,
        InverseBes3,
        Besq,
        Gbm,
        Dyson,
        SplicedBubble,
    };

    Family family = Family::Bes3;
    double x0 = 1.0;                // scalar start (GBM: s0, BESQ: z)
    double sigma = 1.0;             // GBM volatility
    int besq_dim = 0;               // delta in {0, 4}
    std::vector<double> start_vec;  // Dyson / free BM start

    static ProcessModel bm_absorbed(double x0);
    static ProcessModel bm_free(std::vector<double> start);
    static ProcessModel bes3(double x0);
    static ProcessModel inverse_bes3(double x0);
    static ProcessModel besq(int delta, double z);
    static ProcessModel gbm(double s0, double sigma = 1.0);
    static ProcessModel dyson(std::vector<double> start);
    static ProcessModel spliced_bubble(double s0);

    int dimension() const;
    void validate() const;
};

AbsorbedPath simulate_absorbed_bm(double x0, const GridPtr& grid, RandomSource& src);
AbsorbedPath simulate_bes3(double x0, const GridPtr& grid, RandomSource& src);
AbsorbedPath simulate_inverse_bes3(double x0, const GridPtr& grid, RandomSource& src);
AbsorbedPath simulate_besq(int delta, double z, const GridPtr& grid, RandomSource& src);
AbsorbedPath simulate_gbm(double s0, double sigma, const GridPtr& grid, RandomSource& src);
AbsorbedPath simulate_bm_free(std::span<const double> start, const GridPtr& grid,
                              RandomSource& src);
AbsorbedPath simulate_dyson(std::span<const double> start, const GridPtr& grid,
                            RandomSource& src);
AbsorbedPath simulate_spliced_bubble(const GridPtr& grid, RandomSource& src, double s0);

AbsorbedPath simulate(const ProcessModel& model, const GridPtr& grid, RandomSource& src);

// Ascending eigenvalues of an n x n Hermitian matrix (row-major, 1 <= n <= 8)
// by cyclic Jacobi rotations.
std::vector<double> hermitian_eigenvalues(std::span<const std::complex<double>> a, int n);

// Path-parallel Monte Carlo driver.  consume(i, path) is invoked once per
// path; path i always uses substream src.substream(i), so results are
// independent of the worker count as long as consume writes to
// index-addressed slots.
void mc_paths(const ProcessModel& model, const GridPtr& grid, std::size_t n_paths,
              const RandomSource& src, unsigned workers,
              const std::function<void(std::size_t, const AbsorbedPath&)>& consume);

// fn applied to the scalar path value at each report time, one row per
// report time, one column per path (common paths across times).
std::vector<std::vector<double>> sample_scalar_at(
    const ProcessModel& model, const std::function<double(double)>& fn,
    std::span<const double> t_list, std::size_t n_paths, const RandomSource& src,
    unsigned workers = 0);

}  // namespace slm::sde
