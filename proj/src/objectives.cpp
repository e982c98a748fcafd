#include "fregan/objectives.hpp"

#include "fregan/errors.hpp"
#include "fregan/ops.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fregan {

void LossWeights::validate() const
{
    if (!(lambda_fm > 0.0) || !(lambda_mel > 0.0) || !std::isfinite(lambda_fm) || !std::isfinite(lambda_mel))
        throw ConfigError("loss weights must be finite and strictly positive");
}

double LossReport::g_adv_sum() const
{
    return std::accumulate(g_adv.begin(), g_adv.end(), 0.0);
}

double LossReport::fm_sum() const
{
    return std::accumulate(fm.begin(), fm.end(), 0.0);
}

double LossReport::recompose(const LossWeights& w) const
{
    return g_adv_sum() + w.lambda_fm * fm_sum() + w.lambda_mel * mel;
}

std::string LossReport::first_non_finite() const
{
    auto check_list = [](const std::vector<double>& v, const std::string& name) -> std::string {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!std::isfinite(v[i]))
                return name + "[" + std::to_string(i) + "]";
        return {};
    };
    if (auto s = check_list(d_terms, "d_loss"); !s.empty())
        return s;
    if (!std::isfinite(d_total))
        return "d_total";
    if (auto s = check_list(g_adv, "g_adv"); !s.empty())
        return s;
    if (auto s = check_list(fm, "fm"); !s.empty())
        return s;
    if (!std::isfinite(mel))
        return "mel";
    if (!std::isfinite(g_total))
        return "g_total";
    return {};
}

bool LossReport::all_finite() const
{
    return first_non_finite().empty();
}

namespace {

double mean_sq(const Tensor& t, double target)
{
    if (t.size() == 0)
        throw std::invalid_argument("empty score map");
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        s += (t[i] - target) * (t[i] - target);
    return s / static_cast<double>(t.size());
}

void check_layers(const std::vector<Tensor>& a, const std::vector<Tensor>& b, std::size_t k)
{
    if (a.size() != b.size())
        throw std::invalid_argument("fm_loss: sub-discriminator " + std::to_string(k) + " has " +
                                    std::to_string(a.size()) + " real and " + std::to_string(b.size()) +
                                    " fake layers");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i].dims() == b[i].dims()))
            throw std::invalid_argument("fm_loss: layer " + std::to_string(i) + " of sub-discriminator " +
                                        std::to_string(k) + " is misaligned: " + to_string(a[i].dims()) + " vs " +
                                        to_string(b[i].dims()));
}

double layer_l1(const Tensor& a, const Tensor& b)
{
    if (a.size() == 0)
        return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        s += std::abs(a[j] - b[j]);
    return s / static_cast<double>(a.size());
}

} // namespace

double d_loss(const ScoreList& real, const ScoreList& fake)
{
    if (real.size() != fake.size())
        throw std::invalid_argument("d_loss: " + std::to_string(real.size()) + " real score maps vs " +
                                    std::to_string(fake.size()) + " fake");
    double total = 0.0;
    for (std::size_t k = 0; k < real.size(); ++k)
        total += mean_sq(real[k], 1.0) + mean_sq(fake[k], 0.0);
    return total;
}

double g_adv_loss(const ScoreList& fake)
{
    double total = 0.0;
    for (const Tensor& t : fake)
        total += mean_sq(t, 1.0);
    return total;
}

double fm_loss(const FeatureList& real, const FeatureList& fake)
{
    if (real.size() != fake.size())
        throw std::invalid_argument("fm_loss: " + std::to_string(real.size()) + " real feature lists vs " +
                                    std::to_string(fake.size()) + " fake");
    double total = 0.0;
    for (std::size_t k = 0; k < real.size(); ++k) {
        check_layers(real[k], fake[k], k);
        for (std::size_t i = 0; i < real[k].size(); ++i)
            total += layer_l1(real[k][i], fake[k][i]);
    }
    return total;
}

double fm_loss(const std::vector<FeaturePairs>& pairs)
{
    FeatureList real(pairs.size()), fake(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k)
        for (const auto& [r, f] : pairs[k]) {
            real[k].push_back(r);
            fake[k].push_back(f);
        }
    return fm_loss(real, fake);
}

MelDifference mel_difference(const AudioBuffer& a, const AudioBuffer& b)
{
    if (a.samples.size() != b.samples.size())
        throw std::invalid_argument("mel difference: lengths differ (" + std::to_string(a.samples.size()) + " vs " +
                                    std::to_string(b.samples.size()) + ")");
    MelDifference out;
    out.map = mel_transform(a);
    const MelSpectrogram mb = mel_transform(b);
    double s = 0.0;
    for (std::size_t i = 0; i < out.map.values.size(); ++i) {
        out.map.values[i] = std::abs(out.map.values[i] - mb.values[i]);
        s += out.map.values[i];
    }
    out.mean = s * (1.0 / static_cast<double>(out.map.values.size()));
    return out;
}

double mel_loss(const AudioBuffer& x, const AudioBuffer& x_hat)
{
    return mel_difference(x, x_hat).mean;
}

namespace ops {

std::vector<Var> d_loss_terms(const std::vector<Var>& real, const std::vector<Var>& fake)
{
    if (real.size() != fake.size())
        throw std::invalid_argument("d_loss: score list lengths differ");
    std::vector<Var> out;
    for (std::size_t k = 0; k < real.size(); ++k)
        out.push_back(add(mean_squared_error(real[k], 1.0), mean_squared_error(fake[k], 0.0)));
    return out;
}

std::vector<Var> g_adv_terms(const std::vector<Var>& fake)
{
    std::vector<Var> out;
    for (const Var& f : fake)
        out.push_back(mean_squared_error(f, 1.0));
    return out;
}

std::vector<Var> fm_terms(const std::vector<std::vector<Var>>& real, const std::vector<std::vector<Var>>& fake)
{
    if (real.size() != fake.size())
        throw std::invalid_argument("fm_loss: feature list lengths differ");
    std::vector<Var> out;
    for (std::size_t k = 0; k < real.size(); ++k) {
        if (real[k].size() != fake[k].size() || real[k].empty())
            throw std::invalid_argument("fm_loss: sub-discriminator " + std::to_string(k) +
                                        " has mismatched layer counts");
        std::vector<Var> layers;
        for (std::size_t i = 0; i < real[k].size(); ++i) {
            if (!(real[k][i].dims() == fake[k][i].dims()))
                throw std::invalid_argument("fm_loss: layer " + std::to_string(i) + " of sub-discriminator " +
                                            std::to_string(k) + " is misaligned");
            layers.push_back(mean_abs_diff(real[k][i], fake[k][i]));
        }
        out.push_back(sum(layers));
    }
    return out;
}

Var mel_loss(Var audio, Var audio_hat)
{
    if (!(audio.dims() == audio_hat.dims()))
        throw std::invalid_argument("mel_loss: lengths differ");
    return mean_abs_diff(log_mel(audio), log_mel(audio_hat));
}

Var sum(const std::vector<Var>& scalars)
{
    return weighted_sum(scalars, std::vector<double>(scalars.size(), 1.0));
}

} // namespace ops

} // namespace fregan
