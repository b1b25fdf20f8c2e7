#include "camadapt/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "camadapt/error.hpp"

namespace camadapt {

namespace {

std::string dims(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat Mat::from_values(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols) {
        throw ShapeError("matrix " + dims(rows, cols) + " needs " + std::to_string(rows * cols) +
                         " values, got " + std::to_string(values.size()));
    }
    Mat m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(values);
    return m;
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Mat::all_finite() const { return camadapt::all_finite(data_); }

Vec matvec(const Mat& m, std::span<const double> v) {
    if (v.size() != m.cols()) {
        throw ShapeError("matvec: matrix is " + dims(m.rows(), m.cols()) + " but vector has length " +
                         std::to_string(v.size()));
    }
    Vec out(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v);
    return out;
}

Vec matvec_transposed(const Mat& m, std::span<const double> v) {
    if (v.size() != m.rows()) {
        throw ShapeError("matvec_transposed: matrix is " + dims(m.rows(), m.cols()) +
                         " but vector has length " + std::to_string(v.size()));
    }
    Vec out(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        auto row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += row[j] * vi;
    }
    return out;
}

void add_outer(Mat& m, double scale, std::span<const double> a, std::span<const double> b) {
    if (a.size() != m.rows() || b.size() != m.cols()) {
        throw ShapeError("add_outer: matrix is " + dims(m.rows(), m.cols()) + " but outer product is " +
                         dims(a.size(), b.size()));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double ai = scale * a[i];
        if (ai == 0.0) continue;
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += ai * b[j];
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vec normalized(std::span<const double> v) {
    const double n = norm2(v);
    if (!(n > 0.0)) throw DomainError("cannot normalize a zero vector");
    Vec out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

Vec relu(std::span<const double> v) {
    Vec out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [](double x) { return x > 0.0 ? x : 0.0; });
    return out;
}

Vec softmax_temp(std::span<const double> logits, double tau) {
    if (logits.empty()) throw ShapeError("softmax_temp: empty logits");
    if (!(tau > 0.0)) throw DomainError("softmax_temp: tau must be > 0, got " + std::to_string(tau));
    const double mx = *std::max_element(logits.begin(), logits.end());
    Vec out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - mx) / tau);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("cosine_sim: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
    }
    const double na = norm2(a);
    const double nb = norm2(b);
    if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine_sim: zero vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::size_t argmax(std::span<const double> v) {
    if (v.empty()) throw ShapeError("argmax: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
}

Rng Rng::stream(std::uint64_t seed, std::string_view purpose) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : purpose) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t x = seed ^ h;
    return Rng(splitmix64(x));
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::next_index(std::uint64_t n) {
    if (n == 0) throw DomainError("next_index: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

double Rng::next_gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * next_unit() - 1.0;
        v = 2.0 * next_unit() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

Vec gaussian_sample(Rng& rng, double mean, double sigma, std::size_t n) {
    if (!(sigma >= 0.0)) throw DomainError("gaussian_sample: sigma must be >= 0");
    Vec out(n);
    for (double& x : out) x = mean + sigma * rng.next_gaussian();
    return out;
}

double uniform_sample(Rng& rng, double lo, double hi) {
    if (lo > hi) {
        throw DomainError("uniform_sample: lo " + std::to_string(lo) + " > hi " + std::to_string(hi));
    }
    const double u = rng.next_unit();
    if (lo == hi) return lo;
    return std::min(hi, lo + (hi - lo) * u);
}

}  // namespace camadapt
