#pragma once

#include <cstdint>

namespace uip {

/// Philox4x32-10 counter-based generator. A draw is a pure function of
/// (seed, stream, counter), so per-path substreams keyed by path index give
/// bit-reproducible simulations independent of scheduling.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    /// k-th uniform in (0,1) of this substream (53-bit mantissa, never 0 or 1).
    double uniform(std::uint64_t k) const;

    /// k-th standard normal of this substream (inverse-CDF transform).
    double normal(std::uint64_t k) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
};

/// Lower-tail quantile of the standard normal (Wichura's AS 241, ~1e-15).
double normal_quantile(double p);

} // namespace uip
