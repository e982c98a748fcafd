#include "fregan/spectral.hpp"

#include "fft.hpp"
#include "fregan/errors.hpp"
#include "fregan/io_util.hpp"
#include "fregan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace fregan {

namespace {

constexpr double kPi = std::numbers::pi;

const std::vector<double>& hann_window()
{
    static const std::vector<double> w = [] {
        std::vector<double> v(kWindowSize);
        for (int i = 0; i < kWindowSize; ++i)
            v[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / kWindowSize);
        return v;
    }();
    return w;
}

const detail::RealFft& mel_fft()
{
    static const detail::RealFft fft(kFftSize);
    return fft;
}

const detail::ComplexFft& mel_fft_complex()
{
    static const detail::ComplexFft fft(kFftSize);
    return fft;
}

// Index into the unpadded signal for padded position p (512 samples of
// reflection on each side).
int reflect_index(int p, int length)
{
    int s = p - kWindowSize / 2;
    if (s < 0)
        s = -s;
    if (s >= length)
        s = 2 * (length - 1) - s;
    return s;
}

} // namespace

Tensor MelSpectrogram::to_tensor() const
{
    return Tensor(Dims{1, rows, cols, 1}, values);
}

MelSpectrogram MelSpectrogram::from_tensor(const Tensor& t, int batch_index)
{
    MelSpectrogram m;
    m.rows = t.dims().c;
    m.cols = t.dims().h;
    m.values.assign(t.data() + t.index(batch_index, 0, 0), t.data() + t.index(batch_index, 0, 0) + static_cast<std::size_t>(m.rows) * m.cols);
    return m;
}

int mel_frame_count(std::size_t samples)
{
    return static_cast<int>((samples + kHopSize - 1) / kHopSize);
}

double hz_to_mel(double hz)
{
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    constexpr double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (hz < min_log_hz)
        return hz / f_sp;
    return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel)
{
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    constexpr double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (mel < min_log_mel)
        return mel * f_sp;
    return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

double MelFilterbank::weight(int band, int bin) const
{
    const Band& b = bands[band];
    const int i = bin - b.first_bin;
    if (i < 0 || i >= static_cast<int>(b.weights.size()))
        return 0.0;
    return b.weights[i];
}

double MelFilterbank::weight_at_hz(int band, double hz) const
{
    const double lo = edges_hz[band];
    const double mid = edges_hz[band + 1];
    const double hi = edges_hz[band + 2];
    const double rise = (hz - lo) / (mid - lo);
    const double fall = (hi - hz) / (hi - mid);
    return std::max(0.0, std::min(rise, fall)) * 2.0 / (hi - lo);
}

const MelFilterbank& mel_filterbank()
{
    static const MelFilterbank fb = [] {
        MelFilterbank f;
        const double mlo = hz_to_mel(kMelFMin);
        const double mhi = hz_to_mel(kMelFMax);
        f.edges_hz.resize(kMelBands + 2);
        for (int i = 0; i < kMelBands + 2; ++i)
            f.edges_hz[i] = mel_to_hz(mlo + (mhi - mlo) * i / (kMelBands + 1));
        f.bands.resize(kMelBands);
        for (int b = 0; b < kMelBands; ++b) {
            MelFilterbank::Band band;
            band.first_bin = -1;
            for (int k = 0; k < kFftBins; ++k) {
                const double hz = static_cast<double>(k) * kSampleRate / kFftSize;
                const double w = f.weight_at_hz(b, hz);
                if (w > 0.0) {
                    if (band.first_bin < 0)
                        band.first_bin = k;
                    band.weights.resize(k - band.first_bin + 1, 0.0);
                    band.weights[k - band.first_bin] = w;
                }
            }
            if (band.first_bin < 0)
                band.first_bin = 0;
            f.bands[b] = std::move(band);
        }
        return f;
    }();
    return fb;
}

namespace {

// Forward pass for one [L] signal; optionally keeps the complex spectra and
// pre-log mel energies needed by backward.
void log_mel_single(const double* x, int length, double* out_bands_by_frames, int frames,
                    std::vector<std::complex<double>>* spectra, std::vector<double>* mel_energy)
{
    const auto& window = hann_window();
    const auto& fb = mel_filterbank();
    std::vector<double> frame(kFftSize);
    std::vector<std::complex<double>> spec(kFftBins);
    std::vector<double> mag(kFftBins);
    if (spectra)
        spectra->resize(static_cast<std::size_t>(frames) * kFftBins);
    if (mel_energy)
        mel_energy->resize(static_cast<std::size_t>(frames) * kMelBands);
    for (int t = 0; t < frames; ++t) {
        for (int i = 0; i < kFftSize; ++i)
            frame[i] = window[i] * x[reflect_index(t * kHopSize + i, length)];
        mel_fft().forward(frame.data(), spec.data());
        for (int k = 0; k < kFftBins; ++k)
            mag[k] = std::sqrt(std::norm(spec[k]) + kMagnitudeEpsilon);
        if (spectra)
            std::copy(spec.begin(), spec.end(), spectra->begin() + static_cast<std::ptrdiff_t>(t) * kFftBins);
        for (int b = 0; b < kMelBands; ++b) {
            const auto& band = fb.bands[b];
            double e = 0.0;
            for (std::size_t j = 0; j < band.weights.size(); ++j)
                e += band.weights[j] * mag[band.first_bin + j];
            if (mel_energy)
                (*mel_energy)[static_cast<std::size_t>(t) * kMelBands + b] = e;
            if (ops::BranchTrace::active())
                ops::BranchTrace::note(e <= kLogFloor);
            out_bands_by_frames[static_cast<std::size_t>(b) * frames + t] = std::log(std::max(e, kLogFloor));
        }
    }
}

void require_mel_length(std::size_t length)
{
    if (length < static_cast<std::size_t>(kWindowSize))
        throw std::invalid_argument("mel transform needs at least " + std::to_string(kWindowSize) +
                                    " samples, got " + std::to_string(length));
}

} // namespace

MelSpectrogram mel_transform(const AudioBuffer& x)
{
    require_mel_length(x.size());
    MelSpectrogram m;
    m.cols = mel_frame_count(x.size());
    m.values.assign(static_cast<std::size_t>(m.rows) * m.cols, 0.0);
    log_mel_single(x.samples.data(), static_cast<int>(x.size()), m.values.data(), m.cols, nullptr, nullptr);
    return m;
}

namespace ops {

Var log_mel(Var audio)
{
    const Dims d = audio.dims();
    if (d.c != 1 || d.w != 1)
        throw std::invalid_argument("log_mel expects [N,1,L,1], got " + to_string(d));
    require_mel_length(static_cast<std::size_t>(d.h));
    const int frames = mel_frame_count(static_cast<std::size_t>(d.h));
    const bool keep = audio.tape->recording() && audio.tape->needs_grad(audio.id);
    Tensor out(Dims{d.n, kMelBands, frames, 1});
    std::vector<std::vector<std::complex<double>>> spectra(keep ? d.n : 0);
    std::vector<std::vector<double>> energies(keep ? d.n : 0);
    for (int n = 0; n < d.n; ++n)
        log_mel_single(&audio.value().at(n, 0, 0), d.h, &out.at(n, 0, 0), frames,
                       keep ? &spectra[n] : nullptr, keep ? &energies[n] : nullptr);

    return audio.tape->emit(std::move(out), {audio},
                            [audio, frames, spectra = std::move(spectra), energies = std::move(energies)](Tape& tape, const Tensor& g) {
        const Dims d = tape.value(audio.id).dims();
        const auto& window = hann_window();
        const auto& fb = mel_filterbank();
        Tensor& gx = tape.grad(audio.id);
        std::vector<double> dmag(kFftBins);
        std::vector<std::complex<double>> coef(kFftSize);
        std::vector<std::complex<double>> back(kFftSize);
        for (int n = 0; n < d.n; ++n) {
            double* dx = &gx.at(n, 0, 0);
            for (int t = 0; t < frames; ++t) {
                std::fill(dmag.begin(), dmag.end(), 0.0);
                bool any = false;
                for (int b = 0; b < kMelBands; ++b) {
                    const double e = energies[n][static_cast<std::size_t>(t) * kMelBands + b];
                    if (e <= kLogFloor)
                        continue;
                    const double de = g.at(n, b, t) / e;
                    if (de == 0.0)
                        continue;
                    any = true;
                    const auto& band = fb.bands[b];
                    for (std::size_t j = 0; j < band.weights.size(); ++j)
                        dmag[band.first_bin + j] += band.weights[j] * de;
                }
                if (!any)
                    continue;
                const std::complex<double>* spec = &spectra[n][static_cast<std::size_t>(t) * kFftBins];
                for (int k = 0; k < kFftBins; ++k) {
                    const double mag = std::sqrt(std::norm(spec[k]) + kMagnitudeEpsilon);
                    coef[k] = dmag[k] * std::conj(spec[k]) / mag;
                }
                for (int k = kFftBins; k < kFftSize; ++k)
                    coef[k] = 0.0;
                // d|X_k|/dx[i] = w[i] Re(conj(X_k)/|X_k| e^{-2 pi i k i / N})
                mel_fft_complex().forward(coef.data(), back.data());
                for (int i = 0; i < kFftSize; ++i)
                    dx[reflect_index(t * kHopSize + i, d.h)] += window[i] * back[i].real();
            }
        }
    });
}

} // namespace ops

Spectrogram stft_magnitude(const std::vector<double>& x, int sample_rate, int n_fft, int hop)
{
    if (n_fft < 2 || hop < 1)
        throw std::invalid_argument("stft_magnitude: bad n_fft/hop");
    Spectrogram s;
    s.bins = n_fft / 2 + 1;
    const int length = static_cast<int>(x.size());
    s.frames = length == 0 ? 0 : (length + hop - 1) / hop;
    s.bin_hz = static_cast<double>(sample_rate) / n_fft;
    s.frame_seconds = static_cast<double>(hop) / sample_rate;
    s.magnitude.assign(static_cast<std::size_t>(s.bins) * s.frames, 0.0);
    if (s.frames == 0)
        return s;
    detail::RealFft fft(n_fft);
    std::vector<double> frame(n_fft);
    std::vector<std::complex<double>> spec(s.bins);
    const int half = n_fft / 2;
    for (int t = 0; t < s.frames; ++t) {
        for (int i = 0; i < n_fft; ++i) {
            int p = t * hop + i - half;
            if (length > half) {
                if (p < 0)
                    p = -p;
                if (p >= length)
                    p = 2 * (length - 1) - p;
            }
            const double v = (p >= 0 && p < length) ? x[p] : 0.0;
            frame[i] = v * (0.5 - 0.5 * std::cos(2.0 * kPi * i / n_fft));
        }
        fft.forward(frame.data(), spec.data());
        for (int k = 0; k < s.bins; ++k)
            s.magnitude[static_cast<std::size_t>(k) * s.frames + t] = std::abs(spec[k]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t read_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p)
{
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v)
{
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

} // namespace

AudioBuffer load_wav(const std::filesystem::path& path, int expected_rate)
{
    const std::string bytes = read_file_bytes(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::string where = path.string() + ": ";
    if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        throw FormatError(where + "not a RIFF/WAVE file");
    std::size_t pos = 12;
    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    while (pos + 8 <= bytes.size()) {
        const std::string id(bytes.data() + pos, 4);
        const std::uint32_t size = read_u32(p + pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size())
            throw FormatError(where + "truncated '" + id + "' chunk");
        if (id == "fmt ") {
            if (size < 16)
                throw FormatError(where + "fmt chunk too small");
            format = read_u16(p + body);
            channels = read_u16(p + body + 2);
            rate = read_u32(p + body + 4);
            bits = read_u16(p + body + 14);
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt)
                throw FormatError(where + "data chunk before fmt chunk");
            if (format != 1)
                throw FormatError(where + "expected PCM format (1), got format " + std::to_string(format));
            if (channels != 1)
                throw FormatError(where + "expected mono (1 channel), got " + std::to_string(channels) + " channels");
            if (bits != 16)
                throw FormatError(where + "expected 16-bit samples, got " + std::to_string(bits) + "-bit");
            if (static_cast<int>(rate) != expected_rate)
                throw FormatError(where + "expected sample rate " + std::to_string(expected_rate) +
                                  " Hz, got " + std::to_string(rate) + " Hz");
            AudioBuffer out;
            out.sample_rate = static_cast<int>(rate);
            out.samples.resize(size / 2);
            for (std::size_t i = 0; i < out.samples.size(); ++i) {
                const auto v = static_cast<std::int16_t>(read_u16(p + body + 2 * i));
                out.samples[i] = static_cast<double>(v) / 32768.0;
            }
            return out;
        }
        pos = body + size + (size & 1u);
    }
    throw FormatError(where + "no data chunk");
}

void save_wav(const AudioBuffer& x, const std::filesystem::path& path)
{
    std::string s;
    const auto data_bytes = static_cast<std::uint32_t>(x.samples.size() * 2);
    s.reserve(44 + data_bytes);
    s += "RIFF";
    put_u32(s, 36 + data_bytes);
    s += "WAVEfmt ";
    put_u32(s, 16);
    put_u16(s, 1);
    put_u16(s, 1);
    put_u32(s, static_cast<std::uint32_t>(x.sample_rate));
    put_u32(s, static_cast<std::uint32_t>(x.sample_rate) * 2);
    put_u16(s, 2);
    put_u16(s, 16);
    s += "data";
    put_u32(s, data_bytes);
    for (double v : x.samples) {
        if (!std::isfinite(v))
            throw std::invalid_argument("save_wav: non-finite sample");
        const double q = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
        put_u16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0))));
    }
    write_file_atomic(path, s);
}

void save_mel(const MelSpectrogram& mel, const std::filesystem::path& path)
{
    std::string s = "FGML";
    put_u32(s, static_cast<std::uint32_t>(mel.rows));
    put_u32(s, static_cast<std::uint32_t>(mel.cols));
    put_u32(s, kMelDtypeFloat32);
    for (double v : mel.values) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(s, bits);
    }
    write_file_atomic(path, s);
}

MelSpectrogram load_mel(const std::filesystem::path& path)
{
    const std::string bytes = read_file_bytes(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::string where = path.string() + ": ";
    if (bytes.size() < 16 || std::memcmp(p, "FGML", 4) != 0)
        throw FormatError(where + "missing FGML magic");
    MelSpectrogram m;
    m.rows = static_cast<int>(read_u32(p + 4));
    m.cols = static_cast<int>(read_u32(p + 8));
    const std::uint32_t dtype = read_u32(p + 12);
    if (dtype != kMelDtypeFloat32)
        throw FormatError(where + "unsupported dtype tag " + std::to_string(dtype));
    const std::size_t count = static_cast<std::size_t>(m.rows) * m.cols;
    if (bytes.size() != 16 + 4 * count)
        throw FormatError(where + "payload size does not match " + std::to_string(m.rows) + "x" +
                          std::to_string(m.cols));
    m.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t bits = read_u32(p + 16 + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        m.values[i] = f;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Test signals

AudioBuffer make_signal(SignalKind kind, const SignalParams& params)
{
    if (params.sample_rate <= 0)
        throw std::invalid_argument("make_signal: sample rate must be positive");
    if (params.duration < 0.0)
        throw std::invalid_argument("make_signal: negative duration");
    if (params.amplitude < 0.0 || params.amplitude > 1.0)
        throw std::invalid_argument("make_signal: amplitude must lie in [0, 1]");
    const double nyquist = params.sample_rate / 2.0;
    auto check_freq = [nyquist](double f, const char* what) {
        if (f < 0.0 || f > nyquist)
            throw std::invalid_argument(std::string("make_signal: ") + what + " " + std::to_string(f) +
                                        " Hz outside [0, Nyquist=" + std::to_string(nyquist) + " Hz]");
    };
    AudioBuffer out;
    out.sample_rate = params.sample_rate;
    const auto n = static_cast<std::size_t>(std::llround(params.duration * params.sample_rate));
    out.samples.assign(n, 0.0);
    const double sr = params.sample_rate;
    switch (kind) {
    case SignalKind::sine:
        check_freq(params.frequency, "frequency");
        for (std::size_t i = 0; i < n; ++i)
            out.samples[i] = params.amplitude * std::sin(2.0 * kPi * params.frequency * (i / sr));
        break;
    case SignalKind::chirp: {
        check_freq(params.f0, "f0");
        check_freq(params.f1, "f1");
        const double rate = params.duration > 0.0 ? (params.f1 - params.f0) / params.duration : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = i / sr;
            out.samples[i] = params.amplitude * std::sin(2.0 * kPi * (params.f0 * t + 0.5 * rate * t * t));
        }
        break;
    }
    case SignalKind::noise: {
        std::mt19937_64 rng(params.seed);
        std::uniform_real_distribution<double> dist(-params.amplitude, params.amplitude);
        for (auto& v : out.samples)
            v = dist(rng);
        break;
    }
    case SignalKind::silence:
        break;
    }
    return out;
}

AudioBuffer make_speechlike(double duration, std::uint64_t seed, int sample_rate)
{
    if (duration <= 0.0)
        throw std::invalid_argument("make_speechlike: duration must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double base_f0 = 105.0 + 30.0 * uni(rng);
    const double glide = 20.0 + 25.0 * uni(rng);
    const double formants[3] = {600.0 + 200.0 * uni(rng), 1100.0 + 300.0 * uni(rng), 2400.0 + 400.0 * uni(rng)};
    const double bandwidths[3] = {80.0, 110.0, 160.0};
    auto envelope_gain = [&](double f) {
        double g = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double x = (f - formants[i]) / (0.5 * bandwidths[i]);
            g += 1.0 / (1.0 + x * x) / (i + 1.0);
        }
        return g + 0.02;
    };

    const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
    AudioBuffer out;
    out.sample_rate = sample_rate;
    out.samples.assign(n, 0.0);
    double phase = 0.0;
    const double fric_start = 0.85 * duration;
    std::normal_distribution<double> noise(0.0, 1.0);
    double prev_noise = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        const double f0 = base_f0 + glide * std::sin(kPi * t / duration);
        phase += 2.0 * kPi * f0 / sample_rate;
        double v = 0.0;
        const int harmonics = static_cast<int>(5000.0 / f0);
        for (int k = 1; k <= harmonics; ++k)
            v += envelope_gain(k * f0) / k * std::sin(k * phase);
        const double attack = std::min(1.0, t / 0.02);
        const double release = std::min(1.0, std::max(0.0, (fric_start - t) / 0.03));
        const double syllable = 0.75 + 0.25 * std::cos(2.0 * kPi * 4.0 * t);
        v *= attack * release * syllable;
        if (t >= fric_start) {
            const double w = noise(rng);
            v += 0.15 * (w - prev_noise);
            prev_noise = w;
        }
        out.samples[i] = v;
    }
    double peak = 0.0;
    for (double v : out.samples)
        peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
        for (auto& v : out.samples)
            v *= 0.5 / peak;
    // recording noise floor, 60 dB under the peak
    for (auto& v : out.samples)
        v += 5e-4 * noise(rng);
    return out;
}

} // namespace fregan
