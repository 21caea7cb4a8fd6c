#include "micekit/rng.hpp"

#include "micekit/error.hpp"
#include "micekit/stats.hpp"

#include <cmath>

namespace micekit {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t RngStream::mix(std::uint64_t master,
                             std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
    return h;
}

RngStream RngStream::substream(std::uint64_t master,
                               std::initializer_list<std::uint64_t> keys) {
    return RngStream(mix(master, keys));
}

double RngStream::uniform01() {
    // 53 random bits, shifted into (0,1) so the inverse normal CDF never
    // sees an endpoint.
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
    if (n == 0) throw ComputeError("uniform_index: empty support");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return x % n;
}

double RngStream::normal() { return normal_quantile(uniform01()); }

double RngStream::gamma(double shape) {
    if (!(shape > 0)) throw ComputeError("gamma: shape must be positive");
    if (shape < 1.0) {
        const double u = uniform01();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double RngStream::chisq(double df) { return 2.0 * gamma(0.5 * df); }

} // namespace micekit
