// Deterministic pseudo-random streams keyed by (seed, stream).
//
// The generator is splitmix64; a given (seed, stream) pair always produces the
// same draw sequence regardless of platform or thread schedule, which is what
// the reproducibility contract of the simulator rests on. Distribution draws
// (normal, Student-t) are built from the raw 64-bit output here instead of
// <random> distributions, because libstdc++/libc++ disagree on those.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace mind {

class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : s_(mix(mix(seed) + 0x9e3779b97f4a7c15ULL * (stream + 1))) {}

    std::uint64_t next_u64() {
        s_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = s_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1]
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Student-t with nu degrees of freedom (Bailey's polar method).
    double student_t(double nu) {
        for (;;) {
            double u = 2.0 * uniform() - 1.0;
            double v = 2.0 * uniform() - 1.0;
            double w = u * u + v * v;
            if (w > 1.0 || w == 0.0) continue;
            return u * std::sqrt(nu * (std::pow(w, -2.0 / nu) - 1.0) / w);
        }
    }

    // Hash-combines components into a stream index so that independent parts
    // of a run (eval point, meta step, task slot, ...) get independent streams.
    static std::uint64_t derive(std::initializer_list<std::uint64_t> parts) {
        std::uint64_t h = 0x2545f4914f6cdd1dULL;
        for (std::uint64_t p : parts) h = mix(h ^ mix(p));
        return h;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t s_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mind
