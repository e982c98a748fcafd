#pragma once

#include "fregan/autograd.hpp"
#include "fregan/discriminators.hpp"
#include "fregan/spectral.hpp"

#include <string>
#include <vector>

namespace fregan {

struct LossWeights {
    double lambda_fm = 2.0;
    double lambda_mel = 45.0;

    void validate() const;
};

struct LossReport {
    double d_total = 0.0;
    double g_total = 0.0;
    std::vector<double> d_terms; // per sub-discriminator
    std::vector<double> g_adv;   // per sub-discriminator
    std::vector<double> fm;      // per sub-discriminator
    double mel = 0.0;

    double g_adv_sum() const;
    double fm_sum() const;
    // g_adv_sum + lambda_fm * fm_sum + lambda_mel * mel
    double recompose(const LossWeights& w) const;
    bool all_finite() const;
    // Name of the first non-finite field, empty when every term is finite.
    std::string first_non_finite() const;
};

// Score maps and feature maps, one entry per sub-discriminator.
using ScoreList = std::vector<Tensor>;
using FeatureList = std::vector<std::vector<Tensor>>;

// Least squares: sum over sub-discriminators of mean (D(x)-1)^2 + mean D(x_hat)^2.
double d_loss(const ScoreList& real, const ScoreList& fake);
// sum over sub-discriminators of mean (D(x_hat)-1)^2.
double g_adv_loss(const ScoreList& fake);
// sum_k sum_i mean |real_k^i - fake_k^i|.
double fm_loss(const FeatureList& real, const FeatureList& fake);
double fm_loss(const std::vector<FeaturePairs>& pairs);
// mean |log-mel(x) - log-mel(x_hat)|.
double mel_loss(const AudioBuffer& x, const AudioBuffer& x_hat);

// Element-wise |log-mel(a) - log-mel(b)| with its mean; mel_loss is this mean.
struct MelDifference {
    MelSpectrogram map;
    double mean = 0.0;
};
MelDifference mel_difference(const AudioBuffer& a, const AudioBuffer& b);

namespace ops {
// Differentiable counterparts, one scalar per sub-discriminator.
std::vector<Var> d_loss_terms(const std::vector<Var>& real, const std::vector<Var>& fake);
std::vector<Var> g_adv_terms(const std::vector<Var>& fake);
std::vector<Var> fm_terms(const std::vector<std::vector<Var>>& real, const std::vector<std::vector<Var>>& fake);
Var mel_loss(Var audio, Var audio_hat);
Var sum(const std::vector<Var>& scalars);
} // namespace ops

} // namespace fregan
