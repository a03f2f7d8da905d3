#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace rdars {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a path of indices
/// (trial, scheme, ...). Pure function, so per-trial generators do not depend on
/// which worker runs them.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path)
{
    std::uint64_t s = splitmix64(base);
    for (auto p : path)
        s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path)
{
    return Rng(derive_seed(base, path));
}

/// Zero-mean circularly-symmetric complex Gaussian with unit variance.
inline std::complex<double> complex_normal(Rng& rng)
{
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

inline double uniform_phase(Rng& rng)
{
    std::uniform_real_distribution<double> ud(0.0, 2.0 * 3.14159265358979323846);
    return ud(rng);
}

} // namespace rdars
