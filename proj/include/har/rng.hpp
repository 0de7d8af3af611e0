#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace har {

// Portable seeded random stream.
//
// Bits come from MT19937-64 (std::mt19937_64), whose output sequence is fixed
// by the C++ standard. All conversions to real numbers, bounded integers and
// normal deviates are implemented here rather than through <random>
// distributions, whose algorithms differ between standard libraries. The
// same seed therefore yields the same stream on every conforming platform.
//
//   uniform():  (bits >> 11) * 2^-53, in [0, 1)
//   below(n):   rejection sampling on the top bits, unbiased
//   normal():   Box-Muller, consuming two uniforms per pair of deviates
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    std::size_t below(std::size_t n);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

// SplitMix64 finalizer over (base, stream). Used to derive independent
// sub-seeds (initialization, shuffling, dropout, ensemble members) from one
// master seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Named streams for derive_seed.
namespace seed_stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kDropout = 3;
inline constexpr std::uint64_t kSampling = 4;
inline constexpr std::uint64_t kEnsemble = 5;
inline constexpr std::uint64_t kSynthetic = 6;
}  // namespace seed_stream

}  // namespace har
