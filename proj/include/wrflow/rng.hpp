#pragma once

#include <cstdint>
#include <random>

namespace wrflow {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Random stream number `stream` of a master seed. Streams depend only on
/// (master, stream), never on scheduling.
class StreamRng {
public:
    StreamRng(std::uint64_t master, std::uint64_t stream)
        : engine_(splitmix64(master ^ splitmix64(stream + 0x632BE59BD9B4E019ull)))
    {
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() { return normal_(engine_); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace wrflow
