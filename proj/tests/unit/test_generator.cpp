#include "fregan/errors.hpp"
#include "fregan/generator.hpp"
#include "fregan/layers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace fregan;

namespace {

MelSpectrogram random_mel(int frames, std::uint64_t seed)
{
    MelSpectrogram m;
    m.cols = frames;
    m.values.resize(static_cast<std::size_t>(m.rows) * frames);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(-5.0, 2.0);
    for (auto& v : m.values)
        v = d(rng);
    return m;
}

} // namespace

TEST_CASE("generator output and branch lengths follow the frame count")
{
    const GeneratorConfig cfg = GeneratorConfig::micro_v2();
    const ParamSet params = init_generator(cfg, 7);
    for (int frames : {1, 4, 32, 113}) {
        CAPTURE(frames);
        const MultiResolutionOutput out = generate(random_mel(frames, frames), cfg, params);
        CHECK(out.final.samples.size() == 256u * frames);
        REQUIRE(out.branches.size() == 4);
        const std::size_t expected[4] = {32, 64, 128, 256};
        for (int k = 0; k < 4; ++k) {
            CHECK(out.branches[k].size() == expected[k] * frames);
            CHECK(out.projected[k].size() == 256u * frames);
        }
        for (double v : out.final.samples) {
            REQUIRE(std::isfinite(v));
            REQUIRE(std::abs(v) <= 1.0);
        }
    }
}

TEST_CASE("without resolution connections only the last block emits a waveform")
{
    GeneratorConfig cfg = GeneratorConfig::micro_v2();
    cfg.use_rcg = false;
    const MultiResolutionOutput out = generate(random_mel(3, 1), cfg, init_generator(cfg, 1));
    REQUIRE(out.branches.size() == 1);
    CHECK(out.branches[0].size() == 768);
}

TEST_CASE("full-size configurations validate and have the expected hop")
{
    for (const auto& cfg : {GeneratorConfig::v1(), GeneratorConfig::v2(), GeneratorConfig::micro_v1()}) {
        CHECK_NOTHROW(cfg.validate());
        CHECK(cfg.hop() == 256);
        CHECK(cfg.resolution(cfg.blocks() - 1) == 256);
    }
    CHECK(GeneratorConfig::v1().base_channels > GeneratorConfig::v2().base_channels);
}

TEST_CASE("a silenced generator outputs zeros")
{
    const GeneratorConfig cfg = GeneratorConfig::micro_v2();
    ParamSet params = init_generator(cfg, 3);
    layers::zero_out(params);
    const MultiResolutionOutput out = generate(random_mel(5, 2), cfg, params);
    for (double v : out.final.samples)
        REQUIRE(v == 0.0);
}

TEST_CASE("same seed gives the same weights")
{
    const GeneratorConfig cfg = GeneratorConfig::micro_v2();
    const ParamSet a = init_generator(cfg, 11), b = init_generator(cfg, 11), c = init_generator(cfg, 12);
    CHECK(a.checksum() == b.checksum());
    CHECK(a.checksum() != c.checksum());
}

TEST_CASE("parameter checks name the offending tensor")
{
    const GeneratorConfig cfg = GeneratorConfig::micro_v2();
    ParamSet params = init_generator(cfg, 1);
    CHECK_NOTHROW(check_generator_params(cfg, params));

    GeneratorConfig wider = cfg;
    wider.base_channels = 32;
    try {
        check_generator_params(wider, params);
        FAIL("expected a shape error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("expected") != std::string::npos);
    }

    params.add("stray", Dims{1, 1, 1, 1});
    CHECK_THROWS_WITH_AS(check_generator_params(cfg, params), doctest::Contains("unexpected stray"), ConfigError);
}

TEST_CASE("invalid generator configurations are rejected")
{
    GeneratorConfig c = GeneratorConfig::micro_v2();
    c.upsample_rates = {8, 4, 2, 2, 4};
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("hop size"), ConfigError);

    c = GeneratorConfig::micro_v2();
    c.mrf_kernel_sizes = {4};
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = GeneratorConfig::micro_v2();
    c.top_k = 6;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = GeneratorConfig::micro_v2();
    c.upsample_kernels[0] = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("nearest-neighbour upsampling repeats and scales")
{
    const auto y = nn_upsample({1.0, -2.0}, 3, 0.5);
    CHECK(y == std::vector<double>{0.5, 0.5, 0.5, -1.0, -1.0, -1.0});
    CHECK_THROWS_AS(nn_upsample({1.0}, 0), std::invalid_argument);
}
