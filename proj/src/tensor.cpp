#include "framecast/tensor.hpp"

#include <cmath>
#include <string>

namespace fc {

namespace {

std::string shape_str(const Tensor2& t) {
    return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

} // namespace

bool Tensor2::is_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double Rng::uniform(double lo, double hi) {
    if (!(lo < hi))
        throw config_error("rand_uniform: lo (" + std::to_string(lo) + ") must be < hi (" +
                           std::to_string(hi) + ")");
    return lo + uniform() * (hi - lo);
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw config_error("uniform_index: n must be > 0");
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k >= n ? n - 1 : k;
}

double Rng::normal(double mean, double stddev) {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53; // uniform() yields [0,1); guard the log
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586 * u2);
}

Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
    // one splitmix64 scramble of the stream id, xored into the seed
    std::uint64_t z = stream + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return Rng(seed ^ z);
}

Tensor2 rand_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    if (!(lo < hi))
        throw config_error("rand_uniform: lo (" + std::to_string(lo) + ") must be < hi (" +
                           std::to_string(hi) + ")");
    Tensor2 t(rows, cols);
    for (auto& v : t.data) v = lo + rng.uniform() * (hi - lo);
    return t;
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows)
        throw shape_error("matmul: inner dimensions differ, " + shape_str(a) + " * " + shape_str(b));
    Tensor2 out(a.rows, b.cols);
    const std::size_t n = a.rows, k = a.cols, m = b.cols;
    // ikj order: contiguous access on b and out
    for (std::size_t i = 0; i < n; ++i) {
        double* out_row = &out.data[i * m];
        const double* a_row = &a.data[i * k];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a_row[p];
            const double* b_row = &b.data[p * m];
            for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
        }
    }
    return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
    if (a.rows != b.rows)
        throw shape_error("matmul_tn: row counts differ, " + shape_str(a) + "^T * " + shape_str(b));
    Tensor2 out(a.cols, b.cols);
    const std::size_t n = a.cols, k = a.rows, m = b.cols;
    for (std::size_t p = 0; p < k; ++p) {
        const double* a_row = &a.data[p * n];
        const double* b_row = &b.data[p * m];
        for (std::size_t i = 0; i < n; ++i) {
            const double av = a_row[i];
            double* out_row = &out.data[i * m];
            for (std::size_t j = 0; j < m; ++j) out_row[j] += av * b_row[j];
        }
    }
    return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.cols)
        throw shape_error("matmul_nt: column counts differ, " + shape_str(a) + " * " +
                          shape_str(b) + "^T");
    Tensor2 out(a.rows, b.rows);
    const std::size_t n = a.rows, k = a.cols, m = b.rows;
    for (std::size_t i = 0; i < n; ++i) {
        const double* a_row = &a.data[i * k];
        double* out_row = &out.data[i * m];
        for (std::size_t j = 0; j < m; ++j) {
            const double* b_row = &b.data[j * k];
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
            out_row[j] = acc;
        }
    }
    return out;
}

void add_outer(Tensor2& dst, const Tensor2& u, const Tensor2& v) {
    if (u.cols != 1 || v.cols != 1 || dst.rows != u.rows || dst.cols != v.rows)
        throw shape_error("add_outer: expected " + shape_str(dst) + " += (" + std::to_string(u.rows) +
                          "x1)(" + std::to_string(v.rows) + "x1)^T");
    for (std::size_t i = 0; i < u.rows; ++i) {
        const double ui = u.data[i];
        double* row = &dst.data[i * dst.cols];
        for (std::size_t j = 0; j < v.rows; ++j) row[j] += ui * v.data[j];
    }
}

namespace {

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
    if (!a.same_shape(b))
        throw shape_error(std::string(op) + ": shapes differ, " + shape_str(a) + " vs " + shape_str(b));
}

} // namespace

Tensor2 add(const Tensor2& a, const Tensor2& b) {
    require_same_shape(a, b, "add");
    Tensor2 out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor2 sub(const Tensor2& a, const Tensor2& b) {
    require_same_shape(a, b, "sub");
    Tensor2 out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
    require_same_shape(a, b, "hadamard");
    Tensor2 out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

Tensor2 scale(const Tensor2& a, double s) {
    Tensor2 out = a;
    for (auto& v : out.data) v *= s;
    return out;
}

Tensor2 transpose(const Tensor2& a) {
    Tensor2 out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) out.data[j * a.rows + i] = a.data[i * a.cols + j];
    return out;
}

void add_in_place(Tensor2& dst, const Tensor2& src) {
    require_same_shape(dst, src, "add_in_place");
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

void axpy(Tensor2& dst, double alpha, const Tensor2& x) {
    require_same_shape(dst, x, "axpy");
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += alpha * x.data[i];
}

void scale_in_place(Tensor2& a, double s) {
    for (auto& v : a.data) v *= s;
}

double sigmoid_scalar(double x) {
    // branch on sign so exp never overflows
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor2 sigmoid(const Tensor2& x) {
    Tensor2 out = x;
    for (auto& v : out.data) v = sigmoid_scalar(v);
    return out;
}

Tensor2 tanh(const Tensor2& x) {
    Tensor2 out = x;
    for (auto& v : out.data) v = std::tanh(v);
    return out;
}

Tensor2 concat_rows(const Tensor2& a, const Tensor2& b) {
    if (a.cols != 1 || b.cols != 1)
        throw shape_error("concat_rows: expects column vectors, got " + shape_str(a) + " and " +
                          shape_str(b));
    Tensor2 out(a.rows + b.rows, 1);
    for (std::size_t i = 0; i < a.rows; ++i) out.data[i] = a.data[i];
    for (std::size_t i = 0; i < b.rows; ++i) out.data[a.rows + i] = b.data[i];
    return out;
}

} // namespace fc
