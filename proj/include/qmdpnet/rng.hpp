#ifndef QMDPNET_RNG_HPP
#define QMDPNET_RNG_HPP

#include <cstdint>
#include <vector>

namespace qmdpnet {

// Deterministic 64-bit generator (splitmix64 stream). Every randomized
// component takes an explicit Rng or seed; there is no global state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), n > 0; rejection sampling keeps it unbiased
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    int next_int(int n) { return static_cast<int>(next_below(static_cast<std::uint64_t>(n))); }

    bool next_bool(double p) { return next_double() < p; }

    // uniform in [lo, hi)
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // index sampled from an unnormalized nonnegative weight vector
    int next_weighted(const std::vector<double>& weights);

    // k distinct values from [0, n) in random order
    std::vector<int> sample_without_replacement(int n, int k);

private:
    std::uint64_t state_;
};

// Child seed for worker `index` of a master seed. Documented split so that
// parallel generation is independent of scheduling.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
    Rng r(master ^ (0x85ebca6b0f4a7c15ULL + index * 0xc2b2ae3d27d4eb4fULL));
    r.next_u64();
    return r.next_u64();
}

// FNV-1a over raw bytes; used for determinism checks and report checksums.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace qmdpnet

#endif
