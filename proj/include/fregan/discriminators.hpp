#pragma once

#include "fregan/autograd.hpp"
#include "fregan/spectral.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fregan {

enum class DownsampleMode { dwt, avg_pool };

std::string to_string(DownsampleMode m);
DownsampleMode parse_downsample_mode(const std::string& s);

struct DiscriminatorConfig {
    std::vector<int> periods{2, 3, 5, 7, 11};
    int rsd_levels = 3;
    DownsampleMode mode = DownsampleMode::dwt;
    // false: plain multi-period / multi-scale stacks without residual inputs.
    bool use_resolution_wise = true;

    // Period sub-discriminators: every entry but the last is a strided (k,1)
    // convolution; the last runs at stride 1; then a (post_kernel,1) post-conv.
    std::vector<int> rpd_channels{32, 128, 512, 1024, 1024};
    int rpd_kernel = 5;
    // Stride of the plain stack. Resolution-wise stacks stride by 2 so each
    // layer lands on the resolution of one wavelet level.
    int rpd_plain_stride = 3;
    int rpd_post_kernel = 3;
    // Wavelet levels fed into the period stacks (after strided layers 0..n-1).
    int rpd_residual_levels = 3;

    std::vector<int> rsd_channels{128, 128, 256, 512, 1024, 1024, 1024};
    std::vector<int> rsd_kernels{15, 41, 41, 41, 41, 41, 5};
    std::vector<int> rsd_strides{1, 2, 2, 4, 4, 1, 1};
    std::vector<int> rsd_groups{1, 4, 16, 16, 16, 16, 1};
    int rsd_post_kernel = 3;
    // Residual inputs at cumulative strides 2 and 4 of each scale stack.
    int rsd_residual_levels = 2;

    double leaky_slope = 0.1;

    static DiscriminatorConfig standard();
    static DiscriminatorConfig micro();

    void validate() const;
    int rpd_stride() const { return use_resolution_wise ? 2 : rpd_plain_stride; }
    int sub_discriminator_count() const { return static_cast<int>(periods.size()) + rsd_levels; }
};

ParamSet make_rpd_params(const DiscriminatorConfig& cfg);
ParamSet make_rsd_params(const DiscriminatorConfig& cfg);
ParamSet init_rpd(const DiscriminatorConfig& cfg, std::uint64_t seed);
ParamSet init_rsd(const DiscriminatorConfig& cfg, std::uint64_t seed);

struct PeriodGeometry {
    int padded_length;
    int height;
    int width;
};
PeriodGeometry period_geometry(int length, int period);

// [N,C,L,1] -> [N,C,L'/p,p], right-padding by reflection (zeros when the
// signal is too short to mirror).
Var period_reshape(Var x, int period);

// The level-m view of raw audio [N,1,L,1]: 2^m wavelet sub-bands stacked as
// channels (dwt) or m rounds of pairwise averaging (avg_pool, 1 channel).
Var downsample_input(Var audio, int level, DownsampleMode mode);

struct DiscriminatorVars {
    Var score;
    std::vector<Var> features; // every conv layer's activation, post-conv output last
};

DiscriminatorVars rpd_forward(ParamBinder& p, const DiscriminatorConfig& cfg, Var audio, int period);
DiscriminatorVars rsd_forward(ParamBinder& p, const DiscriminatorConfig& cfg, Var audio, int level);

// All sub-discriminators: periods in config order, then scales 0..rsd_levels-1.
std::vector<DiscriminatorVars> discriminate(ParamBinder& rpd, ParamBinder& rsd, const DiscriminatorConfig& cfg,
                                            Var audio);

struct DiscriminatorOutput {
    Tensor score;
    std::vector<Tensor> features;
};

DiscriminatorOutput rpd_forward(const AudioBuffer& x, int period, const ParamSet& params,
                                const DiscriminatorConfig& cfg);
DiscriminatorOutput rsd_forward(const AudioBuffer& x, int level, const ParamSet& params,
                                const DiscriminatorConfig& cfg);

using FeaturePairs = std::vector<std::pair<Tensor, Tensor>>;

// One aligned (real, fake) list per sub-discriminator.
std::vector<FeaturePairs> collect_feature_maps(const AudioBuffer& real, const AudioBuffer& fake,
                                               const ParamSet& rpd, const ParamSet& rsd,
                                               const DiscriminatorConfig& cfg);

} // namespace fregan
