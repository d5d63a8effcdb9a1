#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sml {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

/// Seed for a named sub-stream of a root seed. Streams with different tags or
/// counters are statistically independent, so e.g. evaluation draws never
/// perturb training draws.
std::uint64_t substream_seed(std::uint64_t root, std::string_view tag, std::uint64_t counter = 0);

/// Deterministic random stream. All draw helpers are pinned here (no
/// implementation-defined stdlib distributions) so byte-identical replay
/// across runs only depends on the seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint32_t below(std::uint32_t n);

    /// Uniform real in [0, 1).
    double real01();

    /// Uniform real in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

    /// Standard normal via Box-Muller; consumes exactly two draws per call.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(static_cast<std::uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices drawn uniformly from [0, n) without replacement,
    /// in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 eng_;
};

} // namespace sml
