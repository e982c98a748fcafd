#include "oracles.hpp"

#include "fregan/discriminators.hpp"
#include "fregan/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace fregan;

TEST_CASE("period reshape geometry matches hand-computed tables")
{
    struct Row {
        int length, period, height, padded;
    };
    const Row rows[] = {
        {8192, 2, 4096, 8192}, {8192, 3, 2731, 8193}, {8192, 5, 1639, 8195}, {8192, 7, 1171, 8197},
        {8192, 11, 745, 8195}, {100, 2, 50, 100},     {100, 3, 34, 102},     {100, 5, 20, 100},
        {100, 7, 15, 105},     {100, 11, 10, 110},    {1, 11, 1, 11},
    };
    for (const auto& r : rows) {
        CAPTURE(r.length);
        CAPTURE(r.period);
        const PeriodGeometry g = period_geometry(r.length, r.period);
        CHECK(g.height == r.height);
        CHECK(g.width == r.period);
        CHECK(g.padded_length == r.padded);
    }
    CHECK_THROWS_AS(period_geometry(10, 0), std::invalid_argument);
}

TEST_CASE("period reshape lays consecutive samples across the width")
{
    Tape tape(false);
    std::vector<double> x(10);
    for (int i = 0; i < 10; ++i)
        x[i] = i;
    const Var y = period_reshape(tape.constant(Tensor::signal(x)), 3);
    const Tensor& t = y.value();
    REQUIRE(t.dims() == Dims{1, 1, 4, 3});
    for (int i = 0; i < 10; ++i)
        CHECK(t.at(0, 0, i / 3, i % 3) == i);
    // reflection of the tail: ..., 8, 9 | 8, 7
    CHECK(t.at(0, 0, 3, 1) == 8.0);
    CHECK(t.at(0, 0, 3, 2) == 7.0);
}

TEST_CASE("the ensemble has five period and three scale sub-discriminators")
{
    const DiscriminatorConfig cfg = DiscriminatorConfig::micro();
    ParamSet rpd = init_rpd(cfg, 1), rsd = init_rsd(cfg, 2);
    Tape tape(false);
    ParamBinder pr(tape, std::as_const(rpd)), ps(tape, std::as_const(rsd));
    const Var audio = tape.constant(Tensor::signal(oracle::gaussian(4096, 3, 0.2)));
    const auto out = discriminate(pr, ps, cfg, audio);
    REQUIRE(out.size() == 8);
    CHECK(cfg.sub_discriminator_count() == 8);
    for (const auto& d : out) {
        CHECK(d.score.value().all_finite());
        CHECK(d.features.size() >= 2);
    }
    // the period stacks keep the period as the width
    for (int k = 0; k < 5; ++k)
        CHECK(out[k].score.dims().w == cfg.periods[k]);
}

TEST_CASE("wavelet views keep near-Nyquist energy, pooled views lose it")
{
    const auto tone = oracle::sine(0.47 * 22050.0, 0.2, 0.5);
    const double input = oracle::sum_squares(tone);
    Tape tape(false);
    const Var audio = tape.constant(Tensor::signal(tone));
    for (int level : {1, 2}) {
        CAPTURE(level);
        const Tensor dwt = downsample_input(audio, level, DownsampleMode::dwt).value();
        CHECK(dwt.dims().c == (1 << level));
        CHECK(dwt.sum_squares() == doctest::Approx(input).epsilon(1e-9));
        const Tensor ap = downsample_input(audio, level, DownsampleMode::avg_pool).value();
        CHECK(ap.dims().c == 1);
        CHECK(ap.sum_squares() < 0.05 * input);
    }
}

TEST_CASE("feature maps from the plain-audio interface align real and fake")
{
    const DiscriminatorConfig cfg = DiscriminatorConfig::micro();
    const ParamSet rpd = init_rpd(cfg, 4), rsd = init_rsd(cfg, 5);
    AudioBuffer real, fake;
    real.samples = oracle::gaussian(2048, 6, 0.3);
    fake.samples = oracle::gaussian(2048, 7, 0.3);
    const auto pairs = collect_feature_maps(real, fake, rpd, rsd, cfg);
    REQUIRE(pairs.size() == 8);
    for (const auto& sub : pairs)
        for (const auto& [r, f] : sub)
            CHECK(r.dims() == f.dims());
    const DiscriminatorOutput direct = rpd_forward(real, 3, rpd, cfg);
    REQUIRE(direct.features.size() == pairs[1].size());
    for (std::size_t i = 0; i < direct.features.size(); ++i)
        CHECK(direct.features[i].values()[0] == pairs[1][i].first.values()[0]);
}

TEST_CASE("discriminator configuration errors")
{
    DiscriminatorConfig c = DiscriminatorConfig::micro();
    c.periods = {2, 4};
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("coprime"), ConfigError);
    c = DiscriminatorConfig::micro();
    c.rsd_levels = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DiscriminatorConfig::micro();
    c.rsd_groups[1] = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(DiscriminatorConfig::standard().validate());
    CHECK(parse_downsample_mode(to_string(DownsampleMode::avg_pool)) == DownsampleMode::avg_pool);
    CHECK_THROWS(parse_downsample_mode("bilinear"));
}
