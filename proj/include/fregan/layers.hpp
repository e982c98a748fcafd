#pragma once

#include "fregan/autograd.hpp"
#include "fregan/ops.hpp"

#include <random>
#include <string>

namespace fregan::layers {

// Weight-normalised convolutions store `<prefix>.v` (direction), `<prefix>.g`
// (per-slice gain over the leading axis) and optionally `<prefix>.b`.
void add_conv(ParamSet& params, const std::string& prefix, int cin, int cout, int kernel,
              int groups = 1, bool bias = true);
void add_conv_transpose(ParamSet& params, const std::string& prefix, int cin, int cout, int kernel,
                        bool bias = true);

Var conv(ParamBinder& p, const std::string& prefix, Var x, ops::ConvSpec spec);
Var conv_transpose(ParamBinder& p, const std::string& prefix, Var x, ops::ConvTransposeSpec spec);

// "same" padding for an odd kernel at the given dilation.
inline int same_padding(int kernel, int dilation = 1)
{
    return dilation * (kernel - 1) / 2;
}

enum class InitScheme {
    normal,        // v ~ N(0, scale), bias 0
    fan_in_uniform // v, bias ~ U(+-1/sqrt(fan_in))
};

// Initialises every weight-normalised layer in `params`, then sets g = ||v||
// so the effective weight starts equal to v.
void initialise(ParamSet& params, InitScheme scheme, double scale, std::mt19937_64& rng);

// Sets every gain and bias to zero, which silences every convolution.
void zero_out(ParamSet& params);

} // namespace fregan::layers
