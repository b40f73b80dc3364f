#pragma once
#include <array>
#include <cstdint>

namespace cryosim {

// Pipeline stage identifiers used to derive independent random streams from
// one root seed. Streams are keyed (seed; stage, scene, substream), so the
// thread count can never change which numbers a stage consumes.
enum class rng_stage : std::uint32_t {
    generic = 0,
    conformer = 1,
    placement = 2,
    orientation = 3,
    ice = 4,
    noise = 5,
    blend = 6,
    context = 7,
    test = 99,
};

// Philox4x32-10 counter-based generator (Salmon et al. keyed-counter design).
class Philox4x32 {
public:
    using block_type = std::array<std::uint32_t, 4>;

    Philox4x32(std::uint64_t key, std::uint32_t c0, std::uint32_t c1, std::uint32_t c2)
        : key0_(static_cast<std::uint32_t>(key)),
          key1_(static_cast<std::uint32_t>(key >> 32)),
          ctr_{c0, c1, c2, 0} {}

    block_type operator()(std::uint32_t block_index) const {
        block_type c = ctr_;
        c[3] = block_index;
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            c = single_round(c, k0, k1);
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return c;
    }

private:
    static block_type single_round(const block_type& c, std::uint32_t k0, std::uint32_t k1) {
        std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
        std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
        std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    }

    std::uint32_t key0_, key1_;
    block_type ctr_;
};

// Sequential view over one Philox stream plus the distributions the engine
// needs. Samplers are implemented here (not std::<distribution>) so output
// is identical across standard-library versions.
class RandomStream {
public:
    RandomStream(std::uint64_t root_seed, rng_stage stage,
                 std::uint32_t scene_index = 0, std::uint32_t substream = 0)
        : engine_(root_seed, static_cast<std::uint32_t>(stage), scene_index, substream),
          seed_(root_seed), stage_(stage), scene_(scene_index) {}

    // Independent stream for a nested task (e.g. per bisection iteration).
    RandomStream substream(std::uint32_t idx) const {
        return RandomStream(seed_, stage_, scene_, idx);
    }

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    double uniform();                        // [0, 1)
    double uniform_open();                   // (0, 1]
    double uniform(double lo, double hi);
    double normal();                         // N(0, 1), Box-Muller
    double normal(double mean, double sigma) { return mean + sigma * normal(); }
    double lognormal(double mu, double sigma);
    long long poisson(double lambda);

    // URBG interface for std::shuffle and friends.
    using result_type = std::uint32_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xFFFFFFFFu; }
    result_type operator()() { return next_u32(); }

private:
    Philox4x32 engine_;
    std::uint64_t seed_;
    rng_stage stage_;
    std::uint32_t scene_;
    std::uint32_t block_ = 0;
    Philox4x32::block_type buffer_{};
    int buffered_ = 0;         // words left in buffer_
    double cached_normal_ = 0;
    bool has_cached_normal_ = false;
};

} // namespace cryosim
