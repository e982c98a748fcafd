#include "gradcheck.hpp"
#include "oracles.hpp"

#include "fregan/autograd.hpp"
#include "fregan/generator.hpp"
#include "fregan/ops.hpp"
#include "fregan/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>

using namespace fregan;

namespace {

using Fn = std::function<Var(ParamBinder&)>;

Parameter& add_random(ParamSet& ps, const std::string& name, Dims d, std::uint64_t seed, double lo = -1.0,
                      double hi = 1.0)
{
    Parameter& p = ps.add(name, d);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : p.value.values())
        v = u(rng);
    return p;
}

// Values bounded away from zero so piecewise ops stay on one side under a
// tiny step.
Parameter& add_away_from_zero(ParamSet& ps, const std::string& name, Dims d, std::uint64_t seed)
{
    Parameter& p = add_random(ps, name, d, seed, 0.1, 1.0);
    std::mt19937_64 rng(seed + 1);
    for (auto& v : p.value.values())
        if (rng() % 2)
            v = -v;
    return p;
}

// Every op result is reduced through mean((y - 0.3)^2), which is smooth.
void check(ParamSet& ps, const Fn& f, double tol = 1e-6)
{
    ps.zero_grad();
    {
        Tape tape;
        ParamBinder b(tape, ps);
        tape.backward(ops::mean_squared_error(f(b), 0.3));
    }
    auto value = [&] {
        Tape tape(false);
        ParamBinder b(tape, std::as_const(ps));
        return ops::mean_squared_error(f(b), 0.3).value()[0];
    };
    const double h = 1e-6;
    for (auto& p : ps.items())
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double old = p.value[i];
            p.value[i] = old + h;
            const double up = value();
            p.value[i] = old - h;
            const double down = value();
            p.value[i] = old;
            const double fd = (up - down) / (2.0 * h);
            INFO(p.name << "[" << i << "] analytic " << p.grad[i] << " fd " << fd);
            CHECK(std::abs(p.grad[i] - fd) <= tol * (std::abs(fd) + 1.0));
        }
}

} // namespace

TEST_CASE("gradient: strided, dilated, grouped convolution over period columns")
{
    ParamSet ps;
    add_random(ps, "x", Dims{2, 4, 13, 3}, 1);
    add_random(ps, "w", Dims{6, 2, 3, 1}, 2);
    add_random(ps, "b", Dims{6, 1, 1, 1}, 3);
    check(ps, [](ParamBinder& p) {
        return ops::conv(p("x"), p("w"), p("b"), ops::ConvSpec{2, 2, 2, 2});
    });
}

TEST_CASE("gradient: transposed convolution")
{
    ParamSet ps;
    add_random(ps, "x", Dims{1, 3, 7, 1}, 4);
    add_random(ps, "w", Dims{3, 2, 8, 1}, 5);
    add_random(ps, "b", Dims{2, 1, 1, 1}, 6);
    check(ps, [](ParamBinder& p) {
        return ops::conv_transpose(p("x"), p("w"), p("b"), ops::ConvTransposeSpec{4, 2});
    });
}

TEST_CASE("gradient: weight normalisation")
{
    ParamSet ps;
    add_random(ps, "v", Dims{3, 2, 5, 1}, 7);
    add_random(ps, "g", Dims{3, 1, 1, 1}, 8);
    check(ps, [](ParamBinder& p) { return ops::weight_norm(p("v"), p("g")); });
}

TEST_CASE("gradient: pointwise and layout ops")
{
    ParamSet ps;
    add_away_from_zero(ps, "x", Dims{2, 3, 9, 1}, 9);
    add_random(ps, "y", Dims{2, 2, 9, 1}, 10);
    check(ps, [](ParamBinder& p) {
        Var a = ops::leaky_relu(p("x"), 0.1);
        a = ops::tanh(ops::scale(a, 1.7));
        a = ops::concat_channels({a, p("y")});
        a = ops::repeat_h(a, 3);
        a = ops::pad_reflect_right(a, 5);
        a = ops::pad_zero_right(a, 2);
        return ops::reshape(a, Dims{2, 5, 17, 2});
    });
}

TEST_CASE("gradient: Haar analysis and average pooling on odd lengths")
{
    ParamSet ps;
    add_random(ps, "x", Dims{1, 2, 11, 1}, 11);
    check(ps, [](ParamBinder& p) { return ops::add(ops::haar_analysis(p("x")), ops::haar_analysis(p("x"))); });
    check(ps, [](ParamBinder& p) { return ops::avg_pool2(ops::avg_pool2(p("x"))); });
}

TEST_CASE("gradient: reductions")
{
    ParamSet ps;
    add_random(ps, "a", Dims{1, 2, 6, 1}, 12);
    Parameter& b = add_random(ps, "b", Dims{1, 2, 6, 1}, 13);
    for (std::size_t i = 0; i < b.value.size(); ++i)
        b.value[i] = ps.at("a").value[i] + (i % 2 ? 0.5 : -0.5);
    check(ps, [](ParamBinder& p) {
        const Var m = ops::mean_abs_diff(p("a"), p("b"));
        const Var s = ops::mean_squared_error(p("a"), -0.2);
        return ops::weighted_sum({m, s}, {0.7, -1.3});
    });
}

TEST_CASE("gradient: log-mel of a short segment")
{
    ParamSet ps;
    Parameter& x = ps.add("x", Dims{1, 1, 1024, 1});
    const auto noise = oracle::gaussian(1024, 14, 0.3);
    std::copy(noise.begin(), noise.end(), x.value.data());
    check(ps, [](ParamBinder& p) { return ops::log_mel(p("x")); }, 1e-5);
}

TEST_CASE("gradient: multi-receptive-field block")
{
    ParamSet ps;
    add_mrf_params(ps, "m", 2, {3, 5}, {{1, 1}, {3, 1}});
    std::mt19937_64 rng(15);
    for (auto& p : ps.items())
        init_normal(p.value, 0.5, rng);
    add_random(ps, "x", Dims{1, 2, 12, 1}, 16);
    check(ps, [](ParamBinder& p) { return mrf_block(p, "m", p("x"), {3, 5}, {{1, 1}, {3, 1}}, 0.1); });
}

TEST_CASE("branch trace records piecewise decisions")
{
    Tape tape(false);
    const Var x = tape.constant(Tensor(Dims{1, 1, 3, 1}, std::vector<double>{-1.0, 2.0, -3.0}));
    ops::BranchTrace outer;
    ops::leaky_relu(x, 0.1);
    {
        ops::BranchTrace inner;
        ops::leaky_relu(x, 0.1);
        CHECK(inner.pattern().size() == 3);
    }
    CHECK(outer.pattern() == std::vector<std::uint8_t>{1, 0, 1});
}

// The acceptance gradient check runs with non-negative discriminator weights
// (see its notes). This covers the other sign pattern: mixed-sign
// discriminators, where many units sit on the negative leaky-ReLU branch, at a
// step small enough that only a few stencils cross a kink.
TEST_CASE("gradient: full losses at a mixed-sign point")
{
    gradcheck::Point p = gradcheck::make_point(3, false);
    for (auto loss : {gradcheck::Loss::generator_total, gradcheck::Loss::discriminator_total}) {
        const auto entries = gradcheck::scan(p, loss, 2e-6);
        std::size_t used = 0;
        for (const auto& e : entries) {
            if (e.flipped)
                continue;
            ++used;
            INFO(e.param << "[" << e.index << "] analytic " << e.analytic << " fd " << e.fd);
            CHECK(std::abs(e.analytic - e.fd) <= 1e-5 * (std::abs(e.analytic) + std::abs(e.fd)) + 2e-7);
        }
        CHECK(used >= entries.size() * 9 / 10);
    }
}
