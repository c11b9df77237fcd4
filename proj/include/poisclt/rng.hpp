#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace poisclt {

/// Philox4x32-10 block function: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream.
///
/// Every draw is a pure function of (seed, stream, substream, counter): the
/// seed is the Philox key, the 128-bit counter block is laid out as
/// {counter_lo, counter_hi, substream, stream}. Distinct (stream, substream)
/// pairs therefore never share a counter block, so up to 2^32 substreams per
/// stream are collision-free by construction.
///
/// Satisfies UniformRandomBitGenerator so it can drive std::shuffle, but all
/// distribution sampling is done by the member functions below for
/// cross-platform reproducibility.
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream() = default;
    explicit RandomStream(std::uint64_t seed, std::uint32_t stream = 0,
                          std::uint32_t substream = 0)
        : seed_(seed), stream_(stream), substream_(substream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint32_t stream_id() const { return stream_; }
    std::uint32_t substream_id() const { return substream_; }
    std::uint64_t counter() const { return counter_; }

    /// Fresh stream with the same seed and stream id, counter reset.
    RandomStream substream(std::uint32_t id) const { return RandomStream(seed_, stream_, id); }
    /// Fresh stream on a different stream id (substream 0).
    RandomStream stream(std::uint32_t id) const { return RandomStream(seed_, id, 0); }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next_u64(); }

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal();
    double exponential(double rate = 1.0);
    std::uint64_t poisson(double mean);

private:
    std::uint64_t seed_ = 0;
    std::uint32_t stream_ = 0;
    std::uint32_t substream_ = 0;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace poisclt
