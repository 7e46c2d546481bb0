#ifndef MISCORR_RANDOM_HPP
#define MISCORR_RANDOM_HPP

// Every independent stream (chain, bootstrap replicate, simulation) is a
// pure function of (master seed, stream id), so results do not depend on
// scheduling or worker count.

#include <cstdint>
#include <random>

namespace miscorr
{

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x6d697363u};
    return Rng(seq);
}

inline double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Rng& rng)
{
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli_draw(Rng& rng, double p)
{
    return uniform01(rng) < p;
}

} // namespace miscorr

#endif
