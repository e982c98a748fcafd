#pragma once

#include "fregan/autograd.hpp"

#include <cstdint>
#include <vector>

namespace fregan::ops {

// While alive, records which side of its switch every element of every
// piecewise op (leaky_relu, mean_abs_diff, the log-mel floor) landed on, in
// evaluation order. Two evaluations with equal patterns lie on one smooth
// piece of the computation, which is what a finite-difference stencil needs.
// One active trace per thread.
class BranchTrace {
public:
    BranchTrace();
    ~BranchTrace();
    BranchTrace(const BranchTrace&) = delete;
    BranchTrace& operator=(const BranchTrace&) = delete;

    const std::vector<std::uint8_t>& pattern() const { return pattern_; }
    // Appends to the active trace, if any.
    static void note(std::uint8_t side);
    static bool active();

private:
    std::vector<std::uint8_t> pattern_;
    BranchTrace* previous_;
};

// Convolution along the height axis, applied independently to every width
// column. With width 1 this is a Conv1d; with width p it is a Conv2d with a
// (k, 1) kernel, which is what the period sub-discriminators use.
struct ConvSpec {
    int stride = 1;
    int dilation = 1;
    int padding = 0;
    int groups = 1;
};

// weight dims: [out, in/groups, k, 1]; bias dims: [out,1,1,1] or invalid Var.
Var conv(Var x, Var weight, Var bias, ConvSpec spec);
int conv_output_length(int length, int kernel, ConvSpec spec);

struct ConvTransposeSpec {
    int stride = 1;
    int padding = 0;
};

// weight dims: [in, out, k, 1] (the transposed-convolution layout); width must be 1.
Var conv_transpose(Var x, Var weight, Var bias, ConvTransposeSpec spec);
int conv_transpose_output_length(int length, int kernel, ConvTransposeSpec spec);

// w = g * v / ||v||, the norm taken over every slice of v's leading axis.
Var weight_norm(Var v, Var g);

Var add(Var a, Var b);
Var scale(Var a, double s);
Var leaky_relu(Var a, double slope);
Var tanh(Var a);

// Every height sample repeated `factor` times.
Var repeat_h(Var x, int factor);
// Extends the height axis on the right by mirroring (no edge repeat).
Var pad_reflect_right(Var x, int amount);
Var pad_zero_right(Var x, int amount);
Var reshape(Var x, Dims dims);
Var concat_channels(const std::vector<Var>& parts);

// One Haar analysis step on every channel (width must be 1). Output channel
// 2c is the low band of input channel c and 2c+1 its high band; odd lengths
// are zero-padded by one sample first.
Var haar_analysis(Var x);
// Pairwise mean with the same odd-length zero padding as haar_analysis, so
// both downsamplers produce identical lengths inside the discriminators.
Var avg_pool2(Var x);

// Scalar mean((a - target)^2) over every element.
Var mean_squared_error(Var a, double target);
// Scalar mean |a - b|.
Var mean_abs_diff(Var a, Var b);
// Scalar sum of weighted scalars.
Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights);

} // namespace fregan::ops
