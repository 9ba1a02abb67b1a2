#pragma once

#include <cstdint>
#include <limits>

namespace ctrlrand {

/// Purpose tags separating the independent streams of one path.
enum class StreamTag : std::uint64_t {
    regime = 1,
    brownian = 2,
    oracle = 3,
    validation = 4,
};

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// SplitMix64 stream whose starting state is keyed by (seed, path, tag), so any
/// path can be regenerated independently of how others were scheduled.
class PathRng {
public:
    using result_type = std::uint64_t;

    PathRng(std::uint64_t seed, std::uint64_t path, StreamTag tag)
        : state_(splitmix64_mix(seed ^ splitmix64_mix(
              path * 0x9e3779b97f4a7c15ULL ^ splitmix64_mix(static_cast<std::uint64_t>(tag)))))
    {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64_mix(state_);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

} // namespace ctrlrand
