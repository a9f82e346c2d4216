#pragma once
#include <cstdint>
#include <random>

namespace crowsim {

// Derives the stream seed for work unit k from a base seed: golden-ratio
// stride into the seed space followed by the splitmix64 finalizer. Distinct
// k give distinct outputs (the finalizer is a bijection on 64-bit words).
std::uint64_t child_seed(std::uint64_t base, std::uint64_t k);

// Deterministic random source: mt19937_64 driving a 53-bit uniform and a
// Box-Muller normal with cached spare. Same seed, same platform-independent
// sequence. Fill order over a lattice is always row-major by (y, x); this
// class only fixes the per-call sequence.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform();

    // standard normal, mean 0, std 1
    double normal();

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool hasSpare_ = false;
};

} // namespace crowsim
