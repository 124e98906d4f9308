#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace stoch_align {

/// SplitMix64 finalizer; used only to derive independent engine seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the stream owned by one replication.
constexpr std::uint64_t replication_seed(std::uint64_t master, std::uint64_t replication) {
    return mix_seed(mix_seed(master) ^ mix_seed(replication + 0x5851f42d4c957f2dULL));
}

/// A seeded Gaussian source. Not thread-safe; each worker owns its streams.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    static RngStream for_replication(std::uint64_t master, std::uint64_t replication) {
        return RngStream(replication_seed(master, replication));
    }

    /// Draw from N(0, sd^2). sd == 0 returns exactly 0 but still consumes a
    /// draw, so the stream layout does not depend on the noise level.
    double gaussian(double sd) { return sd * normal_(engine_); }

    double standard_normal() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_;
};

}  // namespace stoch_align
