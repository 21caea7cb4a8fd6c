#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace micekit {

/// Deterministic random stream with explicit substream derivation.
///
/// Every stochastic routine in the toolkit receives one of these by
/// reference; nothing draws from hidden global state. Substreams are
/// derived by folding 64-bit keys into the master seed with splitmix64,
/// so a chain (or a group within a stratified run) can be recomputed in
/// isolation: stream(seed, {k1, k2}) depends on nothing else.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    /// Fold `keys` into `master` (splitmix64 per key) and seed a stream
    /// with the result. The documented splitting rule for chains is
    /// substream(seed, {CHAIN_TAG, chain_index}); stratified runs derive
    /// a per-group seed first, see mice.hpp.
    static RngStream substream(std::uint64_t master,
                               std::initializer_list<std::uint64_t> keys);

    static std::uint64_t mix(std::uint64_t master,
                             std::initializer_list<std::uint64_t> keys);

    /// Uniform draw strictly inside (0, 1).
    double uniform01();

    /// Uniform integer in [0, n). Rejection-sampled, unbiased. n >= 1.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Standard normal via the AS241 inverse CDF applied to uniform01().
    double normal();

    /// Gamma(shape, scale=1), shape > 0. Marsaglia-Tsang squeeze method.
    double gamma(double shape);

    /// Chi-square with df > 0 degrees of freedom.
    double chisq(double df);

    bool bernoulli(double p) { return uniform01() < p; }

    std::uint64_t next_u64() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

} // namespace micekit
