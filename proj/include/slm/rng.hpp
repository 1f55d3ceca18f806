#pragma once

// Counter-based random source: Philox4x32-10 keyed by the 64-bit seed, with
// the 64-bit stream id and a running block counter in the counter words.
// The output sequence is a pure function of (seed, stream_id); distinct
// stream ids give independent streams, so path k simply uses substream(k).
//
// Gaussian draws go through the inverse normal CDF: exactly one uniform per
// draw, which keeps substreams aligned no matter which scheme consumes them.

#include <array>
#include <cstdint>

namespace slm {

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    RandomSource substream(std::uint64_t offset) const {
        return RandomSource(seed_, stream_ + offset);
    }

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    double uniform01();  // strictly inside (0,1), 53-bit resolution
    double gaussian();

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> buf_{};
    unsigned idx_ = 4;
};

double standard_gaussian(RandomSource& src);

// Exact discrete/positive samplers used by the squared-Bessel transitions.
// Draw counts vary per call; use only within a single per-path stream.
std::int64_t poisson_sample(RandomSource& src, double mean);
double gamma_sample(RandomSource& src, double shape, double scale);
double chi_square_sample(RandomSource& src, double dof);

namespace detail {
double inverse_normal_cdf(double p);
}

}  // namespace slm
