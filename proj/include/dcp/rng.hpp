#ifndef DCP_RNG_HPP
#define DCP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace dcp {

// splitmix64 step; used to decorrelate sequential seeds before feeding the engine
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic random source: mt19937_64 engine, 53-bit uniforms, Box-Muller
// normals.  The variate recipes are fixed here (not delegated to std
// distributions) so a given seed reproduces the same stream on any standard
// library; bit-exactness is still only guaranteed within one build.
class rng {
  public:
    explicit rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    // uniform on [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller; the pair's second value is cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * uniform();
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    // exponential with the given rate ( > 0 )
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    // UniformRandomBitGenerator interface (for std distributions, e.g. gamma)
    using result_type = std::uint64_t;
    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return eng_(); }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dcp

#endif
