#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "framecast/errors.hpp"

namespace fc {

/// Row-major dense matrix of doubles. Column vectors are n x 1 tensors.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // length rows*cols, row-major

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    static Tensor2 col_vec(std::size_t n) { return Tensor2(n, 1); }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    // Flat access, row-major. Convenient for vectors.
    double& operator[](std::size_t k) { return data[k]; }
    double operator[](std::size_t k) const { return data[k]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { data.assign(data.size(), v); }

    bool is_finite() const;
};

/// Seedable 64-bit-state generator (splitmix64). Identical seed gives an
/// identical draw sequence on every platform.
struct Rng {
    std::uint64_t state = 0;

    explicit Rng(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next_u64() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform draw in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform draw in [lo, hi). Requires lo < hi.
    double uniform(double lo, double hi);

    /// Integer in [0, n). Requires n > 0.
    std::size_t uniform_index(std::size_t n);

    /// Gaussian via Box-Muller.
    double normal(double mean, double stddev);
};

/// Derives an independent stream for a sub-task (trial, frame, epoch) so
/// results do not depend on evaluation order.
Rng derive_rng(std::uint64_t seed, std::uint64_t stream);

Tensor2 rand_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);

/// a^T * b without materializing the transpose.
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);

/// a * b^T without materializing the transpose.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);

/// dst += u * v^T (outer product accumulate); u, v are column vectors.
void add_outer(Tensor2& dst, const Tensor2& u, const Tensor2& v);

Tensor2 add(const Tensor2& a, const Tensor2& b);
Tensor2 sub(const Tensor2& a, const Tensor2& b);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);
Tensor2 scale(const Tensor2& a, double s);
Tensor2 transpose(const Tensor2& a);

void add_in_place(Tensor2& dst, const Tensor2& src);
void axpy(Tensor2& dst, double alpha, const Tensor2& x); // dst += alpha*x
void scale_in_place(Tensor2& a, double s);

Tensor2 sigmoid(const Tensor2& x);
Tensor2 tanh(const Tensor2& x);

double sigmoid_scalar(double x);

/// Stacks column vectors on top of each other ([a; b]).
Tensor2 concat_rows(const Tensor2& a, const Tensor2& b);

} // namespace fc
