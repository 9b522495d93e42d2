#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "htgn/matrix.hpp"

namespace htgn {

// splitmix64-style mixing, used to derive independent streams from one seed
// so that e.g. parameter init and negative sampling do not share state.
inline uint64_t mix_seed(uint64_t seed, std::string_view tag) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
    for (char c : tag) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
        h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 27;
    }
    h ^= h >> 31;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 29;
    return h;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(gen_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        std::normal_distribution<double> d(mean, stddev);
        return d(gen_);
    }
    // inclusive bounds
    int uniform_int(int lo, int hi) {
        std::uniform_int_distribution<int> d(lo, hi);
        return d(gen_);
    }
    bool bernoulli(double p) {
        std::bernoulli_distribution d(p);
        return d(gen_);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

inline Matrix glorot_uniform(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    const double bound = std::sqrt(6.0 / (rows + cols));
    for (double& v : m.a) v = rng.uniform(-bound, bound);
    return m;
}

inline Matrix random_uniform(int rows, int cols, double lo, double hi, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.a) v = rng.uniform(lo, hi);
    return m;
}

}  // namespace htgn
