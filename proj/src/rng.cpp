#include "cryosim/rng.hpp"

#include <cmath>

namespace cryosim {

std::uint32_t RandomStream::next_u32() {
    if (buffered_ == 0) {
        buffer_ = engine_(block_++);
        buffered_ = 4;
    }
    return buffer_[4 - buffered_--];
}

std::uint64_t RandomStream::next_u64() {
    std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double RandomStream::uniform() {
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RandomStream::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform_open();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(a);
    has_cached_normal_ = true;
    return r * std::cos(a);
}

double RandomStream::lognormal(double mu, double sigma) {
    return std::exp(mu + sigma * normal());
}

long long RandomStream::poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 30.0) {
        // Knuth product method
        double limit = std::exp(-lambda);
        double prod = uniform_open();
        long long n = 0;
        while (prod > limit) {
            prod *= uniform_open();
            ++n;
        }
        return n;
    }
    // Hormann's PTRS transformed rejection, exact for large lambda
    double b = 0.931 + 2.53 * std::sqrt(lambda);
    double a = -0.059 + 0.02483 * b;
    double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        double u = uniform() - 0.5;
        double v = uniform_open();
        double us = 0.5 - std::abs(u);
        double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<long long>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
        double rhs = -lambda + k * std::log(lambda) - std::lgamma(k + 1.0);
        if (lhs <= rhs) return static_cast<long long>(k);
    }
}

} // namespace cryosim
