#include "crowsim/rng.hpp"
#include <cmath>

namespace crowsim {

std::uint64_t child_seed(std::uint64_t base, std::uint64_t k) {
    std::uint64_t z = base + (k + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double RandomSource::uniform() {
    return (gen_() >> 11) * 0x1.0p-53;
}

double RandomSource::normal() {
    if (hasSpare_) {
        hasSpare_ = false;
        return spare_;
    }
    // u1 in (0,1] so the log is finite
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double mag = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * M_PI * u2;
    spare_ = mag * std::sin(ang);
    hasSpare_ = true;
    return mag * std::cos(ang);
}

} // namespace crowsim
