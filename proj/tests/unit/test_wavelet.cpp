#include "oracles.hpp"

#include "fregan/wavelet.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace fregan;

TEST_CASE("haar analysis matches the explicit orthonormal matrix")
{
    for (std::size_t n : {2u, 8u, 30u, 256u}) {
        const auto x = oracle::gaussian(n, n);
        const auto [low, high] = oracle::haar_by_matrix(x);
        const WaveletPair p = dwt_haar(x);
        REQUIRE(p.low.size() == n / 2);
        for (std::size_t i = 0; i < n / 2; ++i) {
            CHECK(p.low[i] == doctest::Approx(low[i]).epsilon(1e-14));
            CHECK(p.high[i] == doctest::Approx(high[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("odd lengths are padded with one zero and trimmed again")
{
    const std::vector<double> x{1.0, 2.0, 3.0};
    const WaveletPair p = dwt_haar(x);
    REQUIRE(p.low.size() == 2);
    CHECK(p.low[1] == doctest::Approx(3.0 / std::sqrt(2.0)));
    CHECK(p.high[1] == doctest::Approx(3.0 / std::sqrt(2.0)));
    const auto y = idwt_haar(p);
    REQUIRE(y.size() == 3);
    for (int i = 0; i < 3; ++i)
        CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-14));
}

TEST_CASE("reconstruction and energy on random signals")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 600;
        const auto x = oracle::gaussian(n, 100 + trial);
        const WaveletPair p = dwt_haar(x);
        const auto y = idwt_haar(p);
        REQUIRE(y.size() == n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(y[i] - x[i]) < 1e-12);
        CHECK(energy(p.low) + energy(p.high) == doctest::Approx(oracle::sum_squares(x)).epsilon(1e-12));
    }
}

TEST_CASE("the Nyquist tone: average pooling annihilates it, the high band keeps it")
{
    const std::vector<double> x{1.0, -1.0, 1.0, -1.0};
    const auto ap = avg_pool_downsample(x, 2);
    REQUIRE(ap.size() == 2);
    CHECK(ap[0] == 0.0);
    CHECK(ap[1] == 0.0);
    const WaveletPair p = dwt_haar(x);
    CHECK(energy(p.low) == doctest::Approx(0.0));
    CHECK(energy(p.high) == doctest::Approx(4.0));
}

TEST_CASE("average pooling matches pairwise means")
{
    const auto x = oracle::gaussian(101, 9);
    const auto a = avg_pool_downsample(x, 2);
    const auto b = oracle::mean_pool2(x);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("multilevel pyramid: band count, low-first order, energy")
{
    const auto x = oracle::gaussian(1000, 4);
    const WaveletPyramid pyr = dwt_multilevel(x, 3);
    REQUIRE(pyr.levels.size() == 4);
    CHECK(pyr.padded_length == 1000);
    for (int m = 0; m <= 3; ++m) {
        CHECK(pyr.levels[m].size() == (1u << m));
        double e = 0.0;
        for (const auto& band : pyr.levels[m])
            e += energy(band);
        CHECK(e == doctest::Approx(oracle::sum_squares(x)).epsilon(1e-12));
    }
    const WaveletPair one = dwt_haar(x);
    for (std::size_t i = 0; i < one.low.size(); ++i) {
        CHECK(pyr.levels[1][0][i] == doctest::Approx(one.low[i]));
        CHECK(pyr.levels[1][1][i] == doctest::Approx(one.high[i]));
    }
    const WaveletPair ll = dwt_haar(one.low);
    for (std::size_t i = 0; i < ll.low.size(); ++i)
        CHECK(pyr.levels[2][0][i] == doctest::Approx(ll.low[i]));
    CHECK_THROWS_AS(dwt_multilevel(std::vector<double>{1.0}, 2), std::invalid_argument);
}

TEST_CASE("chirp demo: DWT keeps the energy, pooling loses the upper half")
{
    const ChirpReport r = chirp_demo(2.0, 0.0, 11025.0, 22050, 8);
    REQUIRE(r.dwt_retained.has_value());
    REQUIRE(r.ap_retained.has_value());
    CHECK(*r.dwt_retained > 0.99);
    CHECK(*r.ap_retained < 0.75);
    REQUIRE(r.crossing_time.has_value());
    CHECK(*r.crossing_time == doctest::Approx(1.0));
    CHECK(r.segments.size() == 8);
    CHECK(r.segments.back().above_half_band);
    CHECK(r.segments.back().ap_energy < 0.05 * r.segments.back().input_energy);
}
