#pragma once

#include <random>

#include "gcprobe/subspace.hpp"

namespace gcprobe::testing {

inline ComplexMatrix random_complex(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    ComplexMatrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            m(r, c) = Complex(n(rng), n(rng));
        }
    }
    return m;
}

inline RealMatrix random_real(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    RealMatrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            m(r, c) = n(rng);
        }
    }
    return m;
}

/// Small Gaussian-integer entries, exactly representable for the rank oracle.
inline ComplexMatrix random_gaussian_integers(std::mt19937_64& rng, Index rows, Index cols) {
    std::uniform_int_distribution<int> u(-5, 5);
    ComplexMatrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            m(r, c) = Complex(u(rng), u(rng));
        }
    }
    return m;
}

inline RealMatrix random_antisymmetric(std::mt19937_64& rng, Index d, double scale = 1.0) {
    const RealMatrix a = random_real(rng, d, d) * scale;
    return a - a.transpose();
}

}  // namespace gcprobe::testing
