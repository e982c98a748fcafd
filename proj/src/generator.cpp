#include "fregan/generator.hpp"

#include "fregan/errors.hpp"
#include "fregan/layers.hpp"
#include "fregan/ops.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace fregan {

GeneratorConfig GeneratorConfig::v1()
{
    GeneratorConfig c;
    c.base_channels = 512;
    return c;
}

GeneratorConfig GeneratorConfig::v2()
{
    GeneratorConfig c;
    c.base_channels = 128;
    return c;
}

GeneratorConfig GeneratorConfig::micro_v1()
{
    GeneratorConfig c;
    c.base_channels = 32;
    c.mrf_kernel_sizes = {3, 7};
    return c;
}

GeneratorConfig GeneratorConfig::micro_v2()
{
    GeneratorConfig c;
    c.base_channels = 16;
    c.mrf_kernel_sizes = {3, 7};
    return c;
}

int GeneratorConfig::channels(int block) const
{
    if (block < 0)
        return base_channels;
    return std::max(1, base_channels >> (block + 1));
}

int GeneratorConfig::hop() const
{
    int h = 1;
    for (int r : upsample_rates)
        h *= r;
    return h;
}

int GeneratorConfig::resolution(int block) const
{
    int r = 1;
    for (int i = 0; i <= block; ++i)
        r *= upsample_rates[i];
    return r;
}

bool GeneratorConfig::is_branch_block(int block) const
{
    return use_rcg ? block >= blocks() - top_k : block == blocks() - 1;
}

void GeneratorConfig::validate() const
{
    auto fail = [](const std::string& what) { throw ConfigError("generator config: " + what); };
    if (mel_channels < 1)
        fail("mel_channels must be >= 1");
    if (pre_kernel < 1 || pre_kernel % 2 == 0)
        fail("pre_kernel must be odd");
    if (post_kernel < 1 || post_kernel % 2 == 0)
        fail("post_kernel must be odd");
    if (upsample_rates.empty() || upsample_rates.size() != upsample_kernels.size())
        fail("upsample_rates and upsample_kernels must be non-empty and equally long");
    if (hop() != kHopSize)
        fail("product of upsample_rates is " + std::to_string(hop()) + ", must equal hop size " +
             std::to_string(kHopSize));
    for (std::size_t i = 0; i < upsample_rates.size(); ++i) {
        if (upsample_rates[i] < 1)
            fail("upsample rate must be >= 1");
        if (upsample_kernels[i] < upsample_rates[i])
            fail("transposed kernel " + std::to_string(upsample_kernels[i]) + " smaller than its rate " +
                 std::to_string(upsample_rates[i]));
        if ((upsample_kernels[i] - upsample_rates[i]) % 2 != 0)
            fail("transposed kernel minus rate must be even at block " + std::to_string(i));
    }
    if (mrf_kernel_sizes.empty())
        fail("mrf_kernel_sizes must be non-empty");
    for (int k : mrf_kernel_sizes)
        if (k < 1 || k % 2 == 0)
            fail("mrf kernel sizes must be odd");
    if (mrf_dilations.empty())
        fail("mrf_dilations must be non-empty");
    for (const auto& pair : mrf_dilations)
        if (pair.size() != 2 || pair[0] < 1 || pair[1] < 1)
            fail("each mrf dilation entry must be a pair of positive integers");
    if (base_channels < 1)
        fail("base_channels must be >= 1");
    if (top_k < 1 || top_k > blocks())
        fail("top_k must lie in [1, " + std::to_string(blocks()) + "]");
    if (!(leaky_slope >= 0.0) || !(init_std > 0.0))
        fail("leaky_slope must be >= 0 and init_std > 0");
}

namespace {

struct SkipGeometry {
    int kernel;
    ops::ConvTransposeSpec spec;
};

SkipGeometry transposed_skip(int factor)
{
    if (factor % 2 == 0)
        return {2 * factor, {factor, factor / 2}};
    return {factor, {factor, 0}};
}

std::vector<int> branch_blocks(const GeneratorConfig& cfg)
{
    std::vector<int> out;
    for (int i = 0; i < cfg.blocks(); ++i)
        if (cfg.is_branch_block(i))
            out.push_back(i);
    return out;
}

std::string mrf_name(const std::string& prefix, std::size_t kernel_index, std::size_t rung, char which)
{
    return prefix + ".k" + std::to_string(kernel_index) + "." + std::to_string(rung) + "." + which;
}

} // namespace

void add_mrf_params(ParamSet& params, const std::string& prefix, int channels, const std::vector<int>& kernel_sizes,
                    const std::vector<std::vector<int>>& dilations)
{
    for (std::size_t j = 0; j < kernel_sizes.size(); ++j)
        for (std::size_t l = 0; l < dilations.size(); ++l) {
            layers::add_conv(params, mrf_name(prefix, j, l, 'a'), channels, channels, kernel_sizes[j]);
            layers::add_conv(params, mrf_name(prefix, j, l, 'b'), channels, channels, kernel_sizes[j]);
        }
}

Var mrf_block(ParamBinder& p, const std::string& prefix, Var x, const std::vector<int>& kernel_sizes,
              const std::vector<std::vector<int>>& dilations, double slope)
{
    if (kernel_sizes.empty())
        throw ConfigError("mrf_block: no kernel sizes");
    ParamSet expected;
    add_mrf_params(expected, prefix, x.dims().c, kernel_sizes, dilations);
    for (const auto& e : expected.items()) {
        if (!p.has(e.name))
            throw ConfigError("mrf_block: missing parameter " + e.name);
        const Dims have = p.params().at(e.name).value.dims();
        if (!(have == e.value.dims()))
            throw ConfigError("mrf_block: parameter " + e.name + " has shape " + to_string(have) + ", expected " +
                              to_string(e.value.dims()));
    }
    std::vector<Var> stacks;
    for (std::size_t j = 0; j < kernel_sizes.size(); ++j) {
        Var y = x;
        for (std::size_t l = 0; l < dilations.size(); ++l) {
            const int d1 = dilations[l][0];
            const int d2 = dilations[l][1];
            Var t = ops::leaky_relu(y, slope);
            t = layers::conv(p, mrf_name(prefix, j, l, 'a'), t,
                             {1, d1, layers::same_padding(kernel_sizes[j], d1), 1});
            t = ops::leaky_relu(t, slope);
            t = layers::conv(p, mrf_name(prefix, j, l, 'b'), t,
                             {1, d2, layers::same_padding(kernel_sizes[j], d2), 1});
            y = ops::add(t, y);
        }
        stacks.push_back(y);
    }
    if (stacks.size() == 1)
        return stacks.front();
    Var sum = stacks.front();
    for (std::size_t j = 1; j < stacks.size(); ++j)
        sum = ops::add(sum, stacks[j]);
    return ops::scale(sum, 1.0 / static_cast<double>(stacks.size()));
}

ParamSet make_generator_params(const GeneratorConfig& cfg)
{
    cfg.validate();
    ParamSet ps;
    layers::add_conv(ps, "pre", cfg.mel_channels, cfg.channels(-1), cfg.pre_kernel);
    for (int i = 0; i < cfg.blocks(); ++i) {
        const std::string idx = std::to_string(i);
        if (cfg.use_mel_condition && i >= cfg.blocks() - cfg.top_k)
            layers::add_conv(ps, "cond." + idx, cfg.mel_channels, cfg.channels(i - 1), 1);
        layers::add_conv_transpose(ps, "ups." + idx, cfg.channels(i - 1), cfg.channels(i), cfg.upsample_kernels[i]);
        add_mrf_params(ps, "mrf." + idx, cfg.channels(i), cfg.mrf_kernel_sizes, cfg.mrf_dilations);
        if (cfg.is_branch_block(i))
            layers::add_conv(ps, "post." + idx, cfg.channels(i), 1, cfg.post_kernel);
    }
    const std::vector<int> branches = branch_blocks(cfg);
    for (std::size_t j = 1; j < branches.size(); ++j) {
        const std::string name = "skip." + std::to_string(j);
        const int factor = cfg.upsample_rates[branches[j]];
        if (cfg.use_nn_upsampler)
            layers::add_conv(ps, name, 1, 1, 1, 1, false);
        else
            layers::add_conv_transpose(ps, name, 1, 1, transposed_skip(factor).kernel, false);
    }
    return ps;
}

ParamSet init_generator(const GeneratorConfig& cfg, std::uint64_t seed)
{
    ParamSet ps = make_generator_params(cfg);
    std::mt19937_64 rng(seed);
    layers::initialise(ps, layers::InitScheme::normal, cfg.init_std, rng);
    return ps;
}

void check_generator_params(const GeneratorConfig& cfg, const ParamSet& params)
{
    const ParamSet expected = make_generator_params(cfg);
    for (const auto& e : expected.items()) {
        if (!params.contains(e.name))
            throw ConfigError("generator parameters: missing " + e.name + " with shape " + to_string(e.value.dims()));
        const Dims have = params.at(e.name).value.dims();
        if (!(have == e.value.dims()))
            throw ConfigError("generator parameters: " + e.name + " has shape " + to_string(have) + ", expected " +
                              to_string(e.value.dims()));
    }
    for (const auto& p : params.items())
        if (!expected.contains(p.name))
            throw ConfigError("generator parameters: unexpected " + p.name);
}

GeneratorVars generator_forward(ParamBinder& p, const GeneratorConfig& cfg, Var mel)
{
    const Dims md = mel.dims();
    if (md.c != cfg.mel_channels || md.w != 1)
        throw std::invalid_argument("generator: mel must have " + std::to_string(cfg.mel_channels) +
                                    " rows, got input " + to_string(md));
    if (md.h < 1)
        throw std::invalid_argument("generator: mel has no frames");
    const double slope = cfg.leaky_slope;
    GeneratorVars out;
    Var x = layers::conv(p, "pre", mel, {1, 1, layers::same_padding(cfg.pre_kernel), 1});
    std::vector<int> branch_factor;
    for (int i = 0; i < cfg.blocks(); ++i) {
        const std::string idx = std::to_string(i);
        if (cfg.use_mel_condition && i >= cfg.blocks() - cfg.top_k) {
            // A 1x1 projection commutes with nearest-neighbour stretching, so
            // project at frame rate and stretch afterwards.
            Var c = layers::conv(p, "cond." + idx, mel, {});
            x = ops::add(x, ops::repeat_h(c, i == 0 ? 1 : cfg.resolution(i - 1)));
        }
        x = ops::leaky_relu(x, slope);
        const int rate = cfg.upsample_rates[i];
        x = layers::conv_transpose(p, "ups." + idx, x, {rate, (cfg.upsample_kernels[i] - rate) / 2});
        x = mrf_block(p, "mrf." + idx, x, cfg.mrf_kernel_sizes, cfg.mrf_dilations, slope);
        if (cfg.is_branch_block(i)) {
            Var b = layers::conv(p, "post." + idx, ops::leaky_relu(x, slope),
                                 {1, 1, layers::same_padding(cfg.post_kernel), 1});
            out.branches.push_back(b);
            branch_factor.push_back(rate);
        }
    }
    const std::size_t k = out.branches.size();
    for (std::size_t b = 0; b < k; ++b) {
        Var y = out.branches[b];
        for (std::size_t j = b + 1; j < k; ++j) {
            const std::string name = "skip." + std::to_string(j);
            const int factor = branch_factor[j];
            if (cfg.use_nn_upsampler) {
                y = layers::conv(p, name, ops::repeat_h(y, factor), {});
            } else {
                y = layers::conv_transpose(p, name, y, transposed_skip(factor).spec);
            }
        }
        out.projected.push_back(y);
    }
    Var sum = out.projected.front();
    for (std::size_t b = 1; b < k; ++b)
        sum = ops::add(sum, out.projected[b]);
    out.final = ops::tanh(sum);
    return out;
}

MultiResolutionOutput generate(const MelSpectrogram& mel, const GeneratorConfig& cfg, const ParamSet& params)
{
    if (mel.rows != cfg.mel_channels)
        throw std::invalid_argument("generate: mel has " + std::to_string(mel.rows) + " rows, expected " +
                                    std::to_string(cfg.mel_channels));
    check_generator_params(cfg, params);
    Tape tape(false);
    ParamBinder binder(tape, params);
    GeneratorVars vars = generator_forward(binder, cfg, tape.constant(mel.to_tensor()));
    MultiResolutionOutput out;
    const auto& f = vars.final.value();
    out.final.samples.assign(f.data(), f.data() + f.size());
    for (const Var& b : vars.branches)
        out.branches.emplace_back(b.value().data(), b.value().data() + b.value().size());
    for (const Var& b : vars.projected)
        out.projected.emplace_back(b.value().data(), b.value().data() + b.value().size());
    return out;
}

std::vector<double> nn_upsample(const std::vector<double>& x, int factor, double projection_gain)
{
    if (factor < 1)
        throw std::invalid_argument("nn_upsample: factor must be >= 1, got " + std::to_string(factor));
    std::vector<double> y;
    y.reserve(x.size() * factor);
    for (double v : x)
        for (int r = 0; r < factor; ++r)
            y.push_back(projection_gain * v);
    return y;
}

} // namespace fregan
