#include "fregan/discriminators.hpp"

#include "fregan/errors.hpp"
#include "fregan/layers.hpp"
#include "fregan/ops.hpp"

#include <numeric>
#include <random>
#include <stdexcept>

namespace fregan {

std::string to_string(DownsampleMode m)
{
    return m == DownsampleMode::dwt ? "dwt" : "avg_pool";
}

DownsampleMode parse_downsample_mode(const std::string& s)
{
    if (s == "dwt")
        return DownsampleMode::dwt;
    if (s == "avg_pool")
        return DownsampleMode::avg_pool;
    throw ConfigError("downsample mode must be \"dwt\" or \"avg_pool\", got \"" + s + "\"");
}

DiscriminatorConfig DiscriminatorConfig::standard()
{
    return {};
}

DiscriminatorConfig DiscriminatorConfig::micro()
{
    DiscriminatorConfig c;
    c.rpd_channels = {4, 8, 16, 16};
    c.rsd_channels = {8, 8, 16, 16, 16};
    c.rsd_kernels = {15, 21, 21, 21, 5};
    c.rsd_strides = {1, 2, 2, 4, 1};
    c.rsd_groups = {1, 2, 4, 4, 1};
    return c;
}

void DiscriminatorConfig::validate() const
{
    auto fail = [](const std::string& what) { throw ConfigError("discriminator config: " + what); };
    if (periods.empty())
        fail("periods must be non-empty");
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (periods[i] < 1)
            fail("periods must be positive");
        for (std::size_t j = i + 1; j < periods.size(); ++j)
            if (std::gcd(periods[i], periods[j]) != 1)
                fail("periods " + std::to_string(periods[i]) + " and " + std::to_string(periods[j]) +
                     " are not coprime");
    }
    if (rsd_levels != 3)
        fail("rsd_levels must be 3, got " + std::to_string(rsd_levels));
    if (rpd_channels.size() < 2)
        fail("rpd_channels needs at least two layers");
    for (int c : rpd_channels)
        if (c < 1)
            fail("rpd_channels must be positive");
    if (rpd_kernel < 1 || rpd_kernel % 2 == 0 || rpd_post_kernel < 1 || rpd_post_kernel % 2 == 0)
        fail("rpd kernels must be odd");
    if (rpd_plain_stride < 1)
        fail("rpd_plain_stride must be >= 1");
    if (rpd_residual_levels < 0 || rpd_residual_levels > static_cast<int>(rpd_channels.size()) - 1)
        fail("rpd_residual_levels must lie in [0, strided layer count]");
    const std::size_t n = rsd_channels.size();
    if (n < 2 || rsd_kernels.size() != n || rsd_strides.size() != n || rsd_groups.size() != n)
        fail("rsd_channels, rsd_kernels, rsd_strides and rsd_groups must have equal length >= 2");
    int cin = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (rsd_kernels[i] < 1 || rsd_kernels[i] % 2 == 0)
            fail("rsd kernels must be odd");
        if (rsd_strides[i] < 1 || rsd_groups[i] < 1 || rsd_channels[i] < 1)
            fail("rsd strides, groups and channels must be positive");
        if (i == 0 && rsd_groups[0] != 1)
            fail("the first rsd layer must be ungrouped (its input width depends on the level)");
        if (cin % rsd_groups[i] != 0 || rsd_channels[i] % rsd_groups[i] != 0)
            fail("rsd layer " + std::to_string(i) + ": groups must divide input and output channels");
        cin = rsd_channels[i];
    }
    if (rsd_post_kernel < 1 || rsd_post_kernel % 2 == 0)
        fail("rsd_post_kernel must be odd");
    if (rsd_residual_levels < 0)
        fail("rsd_residual_levels must be >= 0");
    if (!(leaky_slope >= 0.0))
        fail("leaky_slope must be >= 0");
}

namespace {

int input_channels(int level, DownsampleMode mode)
{
    return mode == DownsampleMode::dwt ? (1 << level) : 1;
}

std::string rpd_prefix(int period)
{
    return "rpd.p" + std::to_string(period);
}

std::string rsd_prefix(int level)
{
    return "rsd.s" + std::to_string(level);
}

// Layer index -> residual level injected after it (0 when none), for the
// scale stacks. A residual goes after the first layer reaching each new
// power-of-two cumulative stride.
std::vector<int> rsd_injection_levels(const DiscriminatorConfig& cfg)
{
    std::vector<int> out(cfg.rsd_channels.size(), 0);
    if (!cfg.use_resolution_wise)
        return out;
    long long cumulative = 1;
    int last = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        cumulative *= cfg.rsd_strides[i];
        int q = 0;
        while ((1LL << (q + 1)) <= cumulative)
            ++q;
        if ((1LL << q) == cumulative && q > last && q <= cfg.rsd_residual_levels) {
            out[i] = q;
            last = q;
        }
    }
    return out;
}

int rpd_injection_level(const DiscriminatorConfig& cfg, std::size_t layer)
{
    if (!cfg.use_resolution_wise)
        return 0;
    const int m = static_cast<int>(layer) + 1;
    return m <= cfg.rpd_residual_levels ? m : 0;
}

void add_rpd_params(ParamSet& ps, const DiscriminatorConfig& cfg, int period)
{
    const std::string pre = rpd_prefix(period);
    int cin = 1;
    for (std::size_t l = 0; l < cfg.rpd_channels.size(); ++l) {
        layers::add_conv(ps, pre + ".conv" + std::to_string(l), cin, cfg.rpd_channels[l], cfg.rpd_kernel);
        if (int m = rpd_injection_level(cfg, l))
            layers::add_conv(ps, pre + ".res" + std::to_string(m), input_channels(m, cfg.mode),
                             cfg.rpd_channels[l], 1);
        cin = cfg.rpd_channels[l];
    }
    layers::add_conv(ps, pre + ".post", cin, 1, cfg.rpd_post_kernel);
}

void add_rsd_params(ParamSet& ps, const DiscriminatorConfig& cfg, int level)
{
    const std::string pre = rsd_prefix(level);
    const std::vector<int> inject = rsd_injection_levels(cfg);
    int cin = input_channels(level, cfg.mode);
    for (std::size_t l = 0; l < cfg.rsd_channels.size(); ++l) {
        layers::add_conv(ps, pre + ".conv" + std::to_string(l), cin, cfg.rsd_channels[l], cfg.rsd_kernels[l],
                         cfg.rsd_groups[l]);
        if (inject[l] > 0)
            layers::add_conv(ps, pre + ".res" + std::to_string(inject[l]),
                             input_channels(level + inject[l], cfg.mode), cfg.rsd_channels[l], 1);
        cin = cfg.rsd_channels[l];
    }
    layers::add_conv(ps, pre + ".post", cin, 1, cfg.rsd_post_kernel);
}

void check_audio(Var audio, const char* who)
{
    const Dims d = audio.dims();
    if (d.c != 1 || d.w != 1 || d.h < 1)
        throw std::invalid_argument(std::string(who) + ": audio must be [N,1,L,1] with L >= 1, got " + to_string(d));
}

void require_match(Var a, Var b, const std::string& what)
{
    if (!(a.dims() == b.dims()))
        throw std::logic_error(what + ": residual " + to_string(b.dims()) + " does not match layer " +
                               to_string(a.dims()));
}

} // namespace

ParamSet make_rpd_params(const DiscriminatorConfig& cfg)
{
    cfg.validate();
    ParamSet ps;
    for (int p : cfg.periods)
        add_rpd_params(ps, cfg, p);
    return ps;
}

ParamSet make_rsd_params(const DiscriminatorConfig& cfg)
{
    cfg.validate();
    ParamSet ps;
    for (int l = 0; l < cfg.rsd_levels; ++l)
        add_rsd_params(ps, cfg, l);
    return ps;
}

ParamSet init_rpd(const DiscriminatorConfig& cfg, std::uint64_t seed)
{
    ParamSet ps = make_rpd_params(cfg);
    std::mt19937_64 rng(seed);
    layers::initialise(ps, layers::InitScheme::fan_in_uniform, 0.0, rng);
    return ps;
}

ParamSet init_rsd(const DiscriminatorConfig& cfg, std::uint64_t seed)
{
    ParamSet ps = make_rsd_params(cfg);
    std::mt19937_64 rng(seed);
    layers::initialise(ps, layers::InitScheme::fan_in_uniform, 0.0, rng);
    return ps;
}

PeriodGeometry period_geometry(int length, int period)
{
    if (period <= 0)
        throw std::invalid_argument("period must be positive, got " + std::to_string(period));
    if (length < 1)
        throw std::invalid_argument("period reshape of an empty signal");
    const int height = (length + period - 1) / period;
    return {height * period, height, period};
}

Var period_reshape(Var x, int period)
{
    const Dims d = x.dims();
    if (d.w != 1)
        throw std::invalid_argument("period_reshape: input width must be 1, got " + to_string(d));
    const PeriodGeometry g = period_geometry(d.h, period);
    const int pad = g.padded_length - d.h;
    Var padded = pad == 0 ? x : (pad <= d.h - 1 ? ops::pad_reflect_right(x, pad) : ops::pad_zero_right(x, pad));
    return ops::reshape(padded, Dims{d.n, d.c, g.height, g.width});
}

Var downsample_input(Var audio, int level, DownsampleMode mode)
{
    if (level < 0)
        throw std::invalid_argument("downsample level must be >= 0, got " + std::to_string(level));
    Var x = audio;
    for (int i = 0; i < level; ++i)
        x = mode == DownsampleMode::dwt ? ops::haar_analysis(x) : ops::avg_pool2(x);
    return x;
}

DiscriminatorVars rpd_forward(ParamBinder& p, const DiscriminatorConfig& cfg, Var audio, int period)
{
    if (period <= 0)
        throw std::invalid_argument("rpd_forward: period must be positive, got " + std::to_string(period));
    check_audio(audio, "rpd_forward");
    const std::string pre = rpd_prefix(period);
    if (!p.has(pre + ".post.v"))
        throw ConfigError("rpd_forward: no parameters for period " + std::to_string(period));
    const int stride = cfg.rpd_stride();
    const std::size_t n = cfg.rpd_channels.size();
    DiscriminatorVars out;
    Var x = period_reshape(audio, period);
    for (std::size_t l = 0; l < n; ++l) {
        const ops::ConvSpec spec{l + 1 < n ? stride : 1, 1, layers::same_padding(cfg.rpd_kernel), 1};
        x = ops::leaky_relu(layers::conv(p, pre + ".conv" + std::to_string(l), x, spec), cfg.leaky_slope);
        out.features.push_back(x);
        if (int m = rpd_injection_level(cfg, l)) {
            Var r = period_reshape(downsample_input(audio, m, cfg.mode), period);
            r = layers::conv(p, pre + ".res" + std::to_string(m), r, {});
            require_match(x, r, pre);
            x = ops::add(x, r);
        }
    }
    out.score = layers::conv(p, pre + ".post", x, {1, 1, layers::same_padding(cfg.rpd_post_kernel), 1});
    out.features.push_back(out.score);
    return out;
}

DiscriminatorVars rsd_forward(ParamBinder& p, const DiscriminatorConfig& cfg, Var audio, int level)
{
    if (level < 0 || level >= cfg.rsd_levels)
        throw std::invalid_argument("rsd_forward: level must lie in [0, " + std::to_string(cfg.rsd_levels - 1) +
                                    "], got " + std::to_string(level));
    check_audio(audio, "rsd_forward");
    const std::string pre = rsd_prefix(level);
    if (!p.has(pre + ".post.v"))
        throw ConfigError("rsd_forward: no parameters for level " + std::to_string(level));
    const std::vector<int> inject = rsd_injection_levels(cfg);
    DiscriminatorVars out;
    Var x = downsample_input(audio, level, cfg.mode);
    for (std::size_t l = 0; l < cfg.rsd_channels.size(); ++l) {
        const ops::ConvSpec spec{cfg.rsd_strides[l], 1, layers::same_padding(cfg.rsd_kernels[l]), cfg.rsd_groups[l]};
        x = ops::leaky_relu(layers::conv(p, pre + ".conv" + std::to_string(l), x, spec), cfg.leaky_slope);
        out.features.push_back(x);
        if (inject[l] > 0) {
            Var r = downsample_input(audio, level + inject[l], cfg.mode);
            r = layers::conv(p, pre + ".res" + std::to_string(inject[l]), r, {});
            require_match(x, r, pre);
            x = ops::add(x, r);
        }
    }
    out.score = layers::conv(p, pre + ".post", x, {1, 1, layers::same_padding(cfg.rsd_post_kernel), 1});
    out.features.push_back(out.score);
    return out;
}

std::vector<DiscriminatorVars> discriminate(ParamBinder& rpd, ParamBinder& rsd, const DiscriminatorConfig& cfg,
                                            Var audio)
{
    std::vector<DiscriminatorVars> out;
    out.reserve(cfg.sub_discriminator_count());
    for (int period : cfg.periods)
        out.push_back(rpd_forward(rpd, cfg, audio, period));
    for (int level = 0; level < cfg.rsd_levels; ++level)
        out.push_back(rsd_forward(rsd, cfg, audio, level));
    return out;
}

namespace {

DiscriminatorOutput materialise(const DiscriminatorVars& v)
{
    DiscriminatorOutput out;
    out.score = v.score.value();
    for (const Var& f : v.features)
        out.features.push_back(f.value());
    return out;
}

Tensor audio_tensor(const AudioBuffer& x)
{
    if (x.samples.empty())
        throw std::invalid_argument("discriminator input is empty");
    return Tensor::signal(x.samples);
}

} // namespace

DiscriminatorOutput rpd_forward(const AudioBuffer& x, int period, const ParamSet& params,
                                const DiscriminatorConfig& cfg)
{
    if (period <= 0)
        throw std::invalid_argument("rpd_forward: period must be positive, got " + std::to_string(period));
    Tape tape(false);
    ParamBinder binder(tape, params);
    return materialise(rpd_forward(binder, cfg, tape.constant(audio_tensor(x)), period));
}

DiscriminatorOutput rsd_forward(const AudioBuffer& x, int level, const ParamSet& params,
                                const DiscriminatorConfig& cfg)
{
    Tape tape(false);
    ParamBinder binder(tape, params);
    return materialise(rsd_forward(binder, cfg, tape.constant(audio_tensor(x)), level));
}

std::vector<FeaturePairs> collect_feature_maps(const AudioBuffer& real, const AudioBuffer& fake,
                                               const ParamSet& rpd, const ParamSet& rsd,
                                               const DiscriminatorConfig& cfg)
{
    if (real.samples.size() != fake.samples.size())
        throw std::invalid_argument("collect_feature_maps: real has " + std::to_string(real.samples.size()) +
                                    " samples, fake has " + std::to_string(fake.samples.size()));
    Tape tape(false);
    ParamBinder pb(tape, rpd);
    ParamBinder sb(tape, rsd);
    const auto r = discriminate(pb, sb, cfg, tape.constant(audio_tensor(real)));
    const auto f = discriminate(pb, sb, cfg, tape.constant(audio_tensor(fake)));
    std::vector<FeaturePairs> out(r.size());
    for (std::size_t k = 0; k < r.size(); ++k)
        for (std::size_t i = 0; i < r[k].features.size(); ++i)
            out[k].emplace_back(r[k].features[i].value(), f[k].features[i].value());
    return out;
}

} // namespace fregan
