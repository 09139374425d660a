#ifndef KS_RNG_HPP
#define KS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace ks {

// Deterministic RNG. Uses the mt19937_64 stream directly instead of the
// standard distributions, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t seed_of(int restart) const { return base_ + static_cast<std::uint64_t>(restart); }

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double m = std::sqrt(-2.0 * std::log(u1));
        spare_ = m * std::sin(6.283185307179586476925286766559 * u2);
        have_spare_ = true;
        return m * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::mt19937_64 eng_;
    std::uint64_t base_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace ks

#endif
