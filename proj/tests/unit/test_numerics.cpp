#include <doctest.h>

#include <cmath>
#include <numeric>

#include "camadapt/error.hpp"
#include "camadapt/numerics.hpp"

using namespace camadapt;

namespace {

double sample_std(const Vec& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("matvec examples") {
    CHECK(matvec(Mat::identity(3), Vec{1, 2, 3}) == Vec{1, 2, 3});
    CHECK(matvec(Mat::from_values(1, 1, {2}), Vec{1}) == Vec{2});
    CHECK(matvec(Mat::from_values(2, 2, {1, 1, 0, 2}), Vec{3, 4}) == Vec{7, 8});
    CHECK_THROWS_AS(matvec(Mat(2, 3), Vec{1, 2}), ShapeError);
    CHECK(matvec_transposed(Mat::from_values(2, 2, {1, 1, 0, 2}), Vec{3, 4}) == Vec{3, 11});
}

TEST_CASE("matrix construction rejects bad shapes") {
    CHECK_THROWS_AS(Mat::from_values(2, 2, {1, 2, 3}), ShapeError);
}

TEST_CASE("relu examples and idempotence") {
    CHECK(relu(Vec{0, 0}) == Vec{0, 0});
    CHECK(relu(Vec{-1, 2}) == Vec{0, 2});
    CHECK(relu(Vec{5}) == Vec{5});
    Rng rng(3);
    const Vec v = gaussian_sample(rng, 0.0, 1.0, 50);
    CHECK(relu(relu(v)) == relu(v));
}

TEST_CASE("softmax_temp examples") {
    const Vec a = softmax_temp(Vec{0, 0}, 1.0);
    CHECK(a[0] == doctest::Approx(0.5));
    CHECK(a[1] == doctest::Approx(0.5));
    const Vec b = softmax_temp(Vec{2, 0}, 1.0);
    CHECK(std::abs(b[0] - 0.8808) < 1e-4);
    CHECK(std::abs(b[1] - 0.1192) < 1e-4);
    CHECK(softmax_temp(Vec{1, 0}, 0.5) == softmax_temp(Vec{2, 0}, 1.0));
    CHECK_THROWS_AS(softmax_temp(Vec{1, 0}, 0.0), DomainError);
    CHECK_THROWS_AS(softmax_temp(Vec{1, 0}, -1.0), DomainError);
    CHECK_THROWS_AS(softmax_temp(Vec{}, 1.0), ShapeError);
}

TEST_CASE("softmax_temp sums to one and preserves argmax") {
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.next_index(12);
        const Vec v = gaussian_sample(rng, 0.0, 50.0, n);
        for (double tau : {0.01, 0.3, 1.0, 7.0}) {
            const Vec p = softmax_temp(v, tau);
            CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
            CHECK(argmax(p) == argmax(v));
        }
    }
}

TEST_CASE("argmax ties go to the lowest index") {
    CHECK(argmax(Vec{1, 3, 3}) == 1);
    CHECK(argmax(Vec{2, 2, 2}) == 0);
}

TEST_CASE("cosine_sim examples and properties") {
    CHECK(cosine_sim(Vec{0.6, 0.8}, Vec{0.6, 0.8}) == doctest::Approx(1.0));
    CHECK(cosine_sim(Vec{1, 0}, Vec{0, 1}) == 0.0);
    CHECK(std::abs(cosine_sim(Vec{1, 0}, Vec{1, 1}) - 0.7071) < 1e-4);
    CHECK_THROWS_AS(cosine_sim(Vec{0, 0}, Vec{1, 1}), DomainError);
    CHECK_THROWS_AS(cosine_sim(Vec{1}, Vec{1, 1}), ShapeError);

    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec a = gaussian_sample(rng, 0.0, 1.0, 9);
        const Vec b = gaussian_sample(rng, 0.0, 1.0, 9);
        CHECK(std::abs(cosine_sim(a, a) - 1.0) < 1e-12);
        Vec scaled = a;
        for (double& x : scaled) x *= 3.7;
        CHECK(std::abs(cosine_sim(scaled, b) - cosine_sim(a, b)) < 1e-12);
        const double c = cosine_sim(a, b);
        CHECK((c >= -1.0 && c <= 1.0));
    }
}

TEST_CASE("gaussian_sample") {
    Rng rng(1);
    CHECK(gaussian_sample(rng, 0.25, 0.0, 7) == Vec(7, 0.25));

    Rng big(2024);
    const double s = sample_std(gaussian_sample(big, 0.0, 0.02, 10000));
    CHECK(s >= 0.019);
    CHECK(s <= 0.021);

    Rng a(77), b(77);
    CHECK(gaussian_sample(a, 0.0, 1.0, 100) == gaussian_sample(b, 0.0, 1.0, 100));
}

TEST_CASE("uniform_sample") {
    Rng rng(9);
    CHECK(uniform_sample(rng, 0.15, 0.15) == 0.15);
    CHECK_THROWS_AS(uniform_sample(rng, 0.2, 0.1), DomainError);

    double sum = 0.0;
    bool inside = true;
    for (int i = 0; i < 10000; ++i) {
        const double x = uniform_sample(rng, 0.075, 0.225);
        inside = inside && x >= 0.075 && x <= 0.225;
        sum += x;
    }
    CHECK(inside);
    CHECK(std::abs(sum / 10000.0 - 0.15) < 0.005);

    Rng a(4), b(4);
    CHECK(uniform_sample(a, 0.0, 1.0) == uniform_sample(b, 0.0, 1.0));
}

TEST_CASE("rng streams are reproducible and distinct") {
    Rng a = Rng::stream(7, "init");
    Rng b = Rng::stream(7, "init");
    Rng c = Rng::stream(7, "shuffle");
    const std::uint64_t x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());

    Rng r(13);
    for (int i = 0; i < 1000; ++i) CHECK(r.next_index(7) < 7);
}
