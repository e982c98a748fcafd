#include "fregan/layers.hpp"

#include <cmath>

namespace fregan::layers {

namespace {
bool ends_with(const std::string& s, const std::string& suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
} // namespace

void add_conv(ParamSet& params, const std::string& prefix, int cin, int cout, int kernel, int groups, bool bias)
{
    params.add(prefix + ".v", Dims{cout, cin / groups, kernel, 1});
    params.add(prefix + ".g", Dims{cout, 1, 1, 1});
    if (bias)
        params.add(prefix + ".b", Dims{cout, 1, 1, 1});
}

void add_conv_transpose(ParamSet& params, const std::string& prefix, int cin, int cout, int kernel, bool bias)
{
    params.add(prefix + ".v", Dims{cin, cout, kernel, 1});
    params.add(prefix + ".g", Dims{cin, 1, 1, 1});
    if (bias)
        params.add(prefix + ".b", Dims{cout, 1, 1, 1});
}

Var conv(ParamBinder& p, const std::string& prefix, Var x, ops::ConvSpec spec)
{
    Var w = ops::weight_norm(p(prefix + ".v"), p(prefix + ".g"));
    Var b = p.has(prefix + ".b") ? p(prefix + ".b") : Var{};
    return ops::conv(x, w, b, spec);
}

Var conv_transpose(ParamBinder& p, const std::string& prefix, Var x, ops::ConvTransposeSpec spec)
{
    Var w = ops::weight_norm(p(prefix + ".v"), p(prefix + ".g"));
    Var b = p.has(prefix + ".b") ? p(prefix + ".b") : Var{};
    return ops::conv_transpose(x, w, b, spec);
}

void initialise(ParamSet& params, InitScheme scheme, double scale, std::mt19937_64& rng)
{
    for (auto& param : params.items()) {
        if (!ends_with(param.name, ".v"))
            continue;
        const std::string prefix = param.name.substr(0, param.name.size() - 2);
        Tensor& v = param.value;
        const double fan_in = static_cast<double>(v.dims().c) * v.dims().h;
        const double bound = 1.0 / std::sqrt(fan_in);
        if (scheme == InitScheme::normal)
            init_normal(v, scale, rng);
        else
            init_uniform(v, bound, rng);
        Tensor& g = params.at(prefix + ".g").value;
        const int rows = v.dims().n;
        const std::size_t slice = v.size() / rows;
        for (int r = 0; r < rows; ++r) {
            double ss = 0.0;
            for (std::size_t i = 0; i < slice; ++i)
                ss += v[r * slice + i] * v[r * slice + i];
            g[r] = std::sqrt(ss);
        }
        if (params.contains(prefix + ".b")) {
            Tensor& b = params.at(prefix + ".b").value;
            if (scheme == InitScheme::normal)
                b.fill(0.0);
            else
                init_uniform(b, bound, rng);
        }
    }
}

void zero_out(ParamSet& params)
{
    for (auto& param : params.items())
        if (ends_with(param.name, ".g") || ends_with(param.name, ".b"))
            param.value.fill(0.0);
}

} // namespace fregan::layers
