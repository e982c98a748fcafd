#include "fregan/wavelet.hpp"

#include "fft.hpp"
#include "fregan/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fregan {

WaveletPair dwt_haar(std::span<const double> x)
{
    if (x.empty())
        throw std::invalid_argument("dwt_haar: empty input");
    const double r = 1.0 / std::numbers::sqrt2;
    const std::size_t half = (x.size() + 1) / 2;
    WaveletPair p;
    p.original_length = x.size();
    p.low.resize(half);
    p.high.resize(half);
    for (std::size_t n = 0; n < half; ++n) {
        const double a = x[2 * n];
        const double b = 2 * n + 1 < x.size() ? x[2 * n + 1] : 0.0;
        p.low[n] = r * (a + b);
        p.high[n] = r * (a - b);
    }
    return p;
}

std::vector<double> idwt_haar(const WaveletPair& p)
{
    if (p.low.size() != p.high.size())
        throw std::invalid_argument("idwt_haar: sub-band lengths differ (" + std::to_string(p.low.size()) +
                                    " vs " + std::to_string(p.high.size()) + ")");
    const double r = 1.0 / std::numbers::sqrt2;
    std::vector<double> x(2 * p.low.size());
    for (std::size_t n = 0; n < p.low.size(); ++n) {
        x[2 * n] = r * (p.low[n] + p.high[n]);
        x[2 * n + 1] = r * (p.low[n] - p.high[n]);
    }
    if (p.original_length != 0) {
        if (p.original_length > x.size() || p.original_length + 1 < x.size())
            throw std::invalid_argument("idwt_haar: original length inconsistent with sub-bands");
        x.resize(p.original_length);
    }
    return x;
}

std::size_t WaveletPyramid::sample_count(std::size_t level) const
{
    std::size_t n = 0;
    for (const auto& band : levels.at(level))
        n += band.size();
    return n;
}

WaveletPyramid dwt_multilevel(std::span<const double> x, int levels)
{
    if (levels < 0)
        throw std::invalid_argument("dwt_multilevel: level count must be >= 0, got " + std::to_string(levels));
    if (levels > 30)
        throw std::invalid_argument("dwt_multilevel: level count too large");
    const std::size_t block = std::size_t{1} << levels;
    if (x.size() < block || x.empty())
        throw std::invalid_argument("dwt_multilevel: " + std::to_string(x.size()) + " samples too short for " +
                                    std::to_string(levels) + " levels");
    WaveletPyramid pyr;
    pyr.original_length = x.size();
    pyr.padded_length = (x.size() + block - 1) / block * block;
    std::vector<double> padded(x.begin(), x.end());
    padded.resize(pyr.padded_length, 0.0);
    pyr.levels.push_back({std::move(padded)});
    for (int m = 0; m < levels; ++m) {
        std::vector<std::vector<double>> next;
        next.reserve(pyr.levels.back().size() * 2);
        for (const auto& band : pyr.levels.back()) {
            WaveletPair p = dwt_haar(band);
            next.push_back(std::move(p.low));
            next.push_back(std::move(p.high));
        }
        pyr.levels.push_back(std::move(next));
    }
    return pyr;
}

std::vector<double> avg_pool_downsample(std::span<const double> x, int factor)
{
    if (factor <= 0)
        throw std::invalid_argument("avg_pool_downsample: factor must be positive, got " + std::to_string(factor));
    if (x.size() < static_cast<std::size_t>(factor))
        throw std::invalid_argument("avg_pool_downsample: input shorter than factor");
    const std::size_t out_len = x.size() / factor;
    std::vector<double> y(out_len);
    for (std::size_t n = 0; n < out_len; ++n) {
        double s = 0.0;
        for (int k = 0; k < factor; ++k)
            s += x[n * factor + k];
        y[n] = s / factor;
    }
    return y;
}

double energy(std::span<const double> x)
{
    double e = 0.0;
    for (double v : x)
        e += v * v;
    return e;
}

namespace {

double dominant_frequency(std::span<const double> x, double sample_rate)
{
    if (x.size() < 2)
        return 0.0;
    // Zero-pad to a power of two at least 4x the segment for a finer bin grid.
    int n = 2;
    while (n < static_cast<int>(x.size()) * 4)
        n *= 2;
    std::vector<double> buf(n, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        buf[i] = x[i] * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / x.size()));
    std::vector<std::complex<double>> spec(n / 2 + 1);
    detail::RealFft(n).forward(buf.data(), spec.data());
    int best = 0;
    for (int k = 1; k <= n / 2; ++k)
        if (std::abs(spec[k]) > std::abs(spec[best]))
            best = k;
    return best * sample_rate / n;
}

} // namespace

ChirpReport chirp_demo(double duration, double f0, double f1, int sample_rate, int segments)
{
    if (sample_rate <= 0 || duration <= 0.0)
        throw std::invalid_argument("chirp_demo: duration and sample rate must be positive");
    const double nyquist = sample_rate / 2.0;
    if (f1 > nyquist || f0 > nyquist)
        throw std::invalid_argument("chirp_demo: frequency above Nyquist (" + std::to_string(nyquist) + " Hz)");
    if (segments < 1)
        throw std::invalid_argument("chirp_demo: need at least one segment");

    SignalParams params;
    params.duration = duration;
    params.sample_rate = sample_rate;
    params.amplitude = 1.0;
    params.f0 = f0;
    params.f1 = f1;
    AudioBuffer chirp = make_signal(SignalKind::chirp, params);
    if (chirp.samples.size() % 2 == 1)
        chirp.samples.push_back(0.0);
    if (chirp.samples.size() < 2)
        throw std::invalid_argument("chirp_demo: signal shorter than two samples");

    ChirpReport r;
    r.duration = duration;
    r.f0 = f0;
    r.f1 = f1;
    r.sample_rate = sample_rate;
    r.half_band_hz = sample_rate / 4.0;
    if (f1 != f0 && (r.half_band_hz - f0) * (r.half_band_hz - f1) < 0.0)
        r.crossing_time = (r.half_band_hz - f0) * duration / (f1 - f0);
    r.input = chirp.samples;
    r.ap = avg_pool_downsample(r.input, 2);
    WaveletPair pair = dwt_haar(r.input);
    r.dwt_low = std::move(pair.low);
    r.dwt_high = std::move(pair.high);

    r.input_energy = energy(r.input);
    r.ap_energy = energy(r.ap);
    r.dwt_low_energy = energy(r.dwt_low);
    r.dwt_high_energy = energy(r.dwt_high);
    if (r.input_energy > 0.0) {
        r.ap_retained = 2.0 * r.ap_energy / r.input_energy;
        r.dwt_retained = (r.dwt_low_energy + r.dwt_high_energy) / r.input_energy;
    }

    const std::size_t half_len = r.ap.size();
    for (int s = 0; s < segments; ++s) {
        const std::size_t b = half_len * s / segments;
        const std::size_t e = half_len * (s + 1) / segments;
        ChirpSegment seg;
        seg.t_begin = 2.0 * b / sample_rate;
        seg.t_end = 2.0 * e / sample_rate;
        const double tc = 0.5 * (seg.t_begin + seg.t_end);
        seg.input_hz = f0 + (f1 - f0) * tc / duration;
        seg.above_half_band = seg.input_hz > r.half_band_hz;
        seg.input_energy = energy(std::span(r.input).subspan(2 * b, 2 * (e - b)));
        seg.ap_energy = energy(std::span(r.ap).subspan(b, e - b));
        seg.dwt_low_energy = energy(std::span(r.dwt_low).subspan(b, e - b));
        seg.dwt_high_energy = energy(std::span(r.dwt_high).subspan(b, e - b));
        seg.ap_peak_hz = seg.ap_energy > 0.0 ? dominant_frequency(std::span(r.ap).subspan(b, e - b), sample_rate / 2.0) : 0.0;
        r.segments.push_back(seg);
    }
    return r;
}

} // namespace fregan
