#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "beliefbench/mat.hpp"

namespace beliefbench::num {

// All randomness in the project flows through mt19937_64 plus the helpers
// below. std::uniform_*_distribution is avoided on purpose: its output is
// implementation-defined, and several tests pin exact sequences.
using Rng = std::mt19937_64;

// Unbiased draw in [0, n) via rejection sampling.
std::uint64_t bounded(Rng& rng, std::uint64_t n);

inline int pick_index(Rng& rng, int n) { return static_cast<int>(bounded(rng, static_cast<std::uint64_t>(n))); }

// [0, 1) with 53 bits of precision.
double uniform01(Rng& rng);

// Standard normal via Box-Muller. Consumes exactly two draws per call.
double normal(Rng& rng);

Mat randn(int rows, int cols, Rng& rng, double stddev = 1.0);

template <class T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = bounded(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace beliefbench::num
