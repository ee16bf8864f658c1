#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace dynloss {

// SplitMix64 finalizer. Used to derive independent stream seeds from a base
// seed; the derivation chain is part of the reproducibility contract, so it
// must not change between releases.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive a stream seed from a base seed and a list of indices,
/// e.g. mix_seed(base, {t_index, a_index, replicate}).
inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> idx) {
    std::uint64_t s = splitmix64(base);
    for (std::uint64_t i : idx) {
        s = splitmix64(s ^ splitmix64(i + 0x632be59bd9b4e019ULL));
    }
    return s;
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t idx) {
    return mix_seed(base, {idx});
}

// Deterministic standard-normal stream: Box-Muller over mt19937_64 output.
// std::normal_distribution is implementation-defined, so it would not give
// byte-identical runs across standard libraries; this does.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log is finite; u2 in [0,1)
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dynloss
