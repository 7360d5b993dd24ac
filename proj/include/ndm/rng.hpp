#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace ndm {

// Deterministic random stream: mt19937_64 plus an explicit Box-Muller
// transform, so the draw sequence does not depend on the standard
// library's distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // unbiased uniform integer in [0, n)
    uint64_t uniform_below(uint64_t n) {
        const uint64_t threshold = (~uint64_t{0} - n + 1) % n;  // 2^64 mod n
        for (;;) {
            uint64_t r = gen_();
            if (r >= threshold) {
                return r % n;
            }
        }
    }

    // standard normal (Box-Muller, no cached spare)
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Eigen::VectorXd normal_vec(int n) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) {
            v[i] = normal();
        }
        return v;
    }

private:
    std::mt19937_64 gen_;
};

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
}  // namespace detail

// Stable sub-stream derivation; tag keeps independent consumers from
// colliding on the same master seed.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    return detail::splitmix64(detail::splitmix64(base ^ h) + index);
}

}  // namespace ndm
