#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace camadapt {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0);

    /// Takes ownership of `values`; throws ShapeError unless
    /// values.size() == rows * cols.
    static Mat from_values(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Mat identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(data_).subspan(i * cols_, cols_);
    }

    bool same_shape(const Mat& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
    bool all_finite() const;

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Vec matvec(const Mat& m, std::span<const double> v);
/// mᵀ·v without materializing the transpose.
Vec matvec_transposed(const Mat& m, std::span<const double> v);
/// m += scale · a bᵀ
void add_outer(Mat& m, double scale, std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
Vec normalized(std::span<const double> v);

Vec relu(std::span<const double> v);

/// softmax(logits / tau), max-subtracted.
Vec softmax_temp(std::span<const double> logits, double tau);

/// dot(a,b)/(|a||b|) clamped to [-1, 1]. Zero vectors are a DomainError.
double cosine_sim(std::span<const double> a, std::span<const double> b);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

bool all_finite(std::span<const double> v);

/// xoshiro256** seeded through splitmix64. Gaussian draws use the Marsaglia
/// polar method and cache the second variate of each accepted pair.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Independent stream for one consumer of a user seed. Components that
    /// share a seed (data generation, initialization, shuffling) draw from
    /// different streams so their samples are uncorrelated.
    static Rng stream(std::uint64_t seed, std::string_view purpose);

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 bits of resolution.
    double next_unit();
    /// Uniform integer in [0, n) by rejection; n must be > 0.
    std::uint64_t next_index(std::uint64_t n);
    double next_gaussian();

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

Vec gaussian_sample(Rng& rng, double mean, double sigma, std::size_t n);
double uniform_sample(Rng& rng, double lo, double hi);

}  // namespace camadapt
