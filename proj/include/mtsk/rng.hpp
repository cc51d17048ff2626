#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mtsk {

// Derives independent stream seeds from (seed, stream ids). Every stochastic
// operation in the library seeds its own Rng this way, so results depend only
// on the inputs and the seed, never on call order or thread scheduling.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0, std::uint64_t d = 0) {
    auto mix = [](std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    std::uint64_t s = a;
    std::uint64_t h = mix(s);
    s ^= b + 0x9e3779b97f4a7c15ull;
    h ^= mix(s);
    s ^= c + 0xbf58476d1ce4e5b9ull;
    h ^= mix(s);
    s ^= d + 0x94d049bb133111ebull;
    h ^= mix(s);
    return h;
}

// mt19937_64 with hand-rolled sampling. The standard distributions are
// implementation-defined, so we draw from the raw stream directly; output is
// identical on every platform for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform in [0, n), unbiased via masked rejection
    std::size_t index(std::size_t n) {
        if (n <= 1) return 0;
        std::uint64_t mask = ~0ull >> __builtin_clzll(static_cast<std::uint64_t>(n - 1));
        for (;;) {
            std::uint64_t v = raw() & mask;
            if (v < n) return static_cast<std::size_t>(v);
        }
    }

    // uniform integer in [lo, hi], inclusive
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo) + 1));
    }

    // standard normal via Box-Muller, one spare cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), returned sorted ascending
    std::vector<int> sample_indices(std::size_t n, std::size_t k);

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline std::vector<int> Rng::sample_indices(std::size_t n, std::size_t k) {
    std::vector<int> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<int>(i);
    // partial Fisher-Yates: first k slots become the sample
    for (std::size_t i = 0; i < k && i < n; ++i) {
        std::size_t j = i + index(n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k < n ? k : n);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace mtsk
