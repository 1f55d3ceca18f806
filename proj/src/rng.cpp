#include "slm/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace slm {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

RandomSource::RandomSource(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id) {
    const std::uint64_t k = splitmix64(seed);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

std::uint32_t RandomSource::next_u32() {
    if (idx_ == 4) {
        buf_ = philox4x32_10({static_cast<std::uint32_t>(stream_),
                              static_cast<std::uint32_t>(stream_ >> 32),
                              static_cast<std::uint32_t>(block_),
                              static_cast<std::uint32_t>(block_ >> 32)},
                             key_);
        ++block_;
        idx_ = 0;
    }
    return buf_[idx_++];
}

std::uint64_t RandomSource::next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
}

double RandomSource::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

double RandomSource::gaussian() { return detail::inverse_normal_cdf(uniform01()); }

double standard_gaussian(RandomSource& src) { return src.gaussian(); }

namespace detail {

// Acklam's rational approximation followed by one Halley step against erfc;
// absolute error is at the few-ulp level across (0,1).
double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inverse_normal_cdf: p outside (0,1)");

    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace detail

namespace {

std::int64_t poisson_small(RandomSource& src, double mean) {
    const double u = src.uniform01();
    double p = std::exp(-mean);
    double c = p;
    std::int64_t k = 0;
    while (u > c && k < 4096) {
        ++k;
        p *= mean / static_cast<double>(k);
        c += p;
    }
    return k;
}

// Hormann's PTRS transformed-rejection sampler, valid for mean >= 10.
std::int64_t poisson_ptrs(RandomSource& src, double mean) {
    const double smu = std::sqrt(mean);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
        const double u = src.uniform01() - 0.5;
        const double v = src.uniform01();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        const double k = kf;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_mean - mean - std::lgamma(k + 1.0))
            return static_cast<std::int64_t>(kf);
    }
}

}  // namespace

std::int64_t poisson_sample(RandomSource& src, double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson_sample: mean must be >= 0");
    if (mean == 0.0) return 0;
    return mean < 10.0 ? poisson_small(src, mean) : poisson_ptrs(src, mean);
}

double gamma_sample(RandomSource& src, double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw std::invalid_argument("gamma_sample: shape and scale must be positive");
    if (shape < 1.0) {
        // boost: G(a) = G(a+1) * U^(1/a)
        const double u = src.uniform01();
        return gamma_sample(src, shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = src.gaussian();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = src.uniform01();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

double chi_square_sample(RandomSource& src, double dof) {
    if (dof < 0.0) throw std::invalid_argument("chi_square_sample: dof must be >= 0");
    if (dof == 0.0) return 0.0;
    return gamma_sample(src, 0.5 * dof, 2.0);
}

}  // namespace slm
