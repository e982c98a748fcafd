#include "fregan/evalsuite.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace fregan {

using nlohmann::json;

std::vector<std::vector<double>> mel_cepstra(const MelSpectrogram& mel)
{
    const int n = mel.rows;
    std::vector<double> basis(static_cast<std::size_t>(n) * n);
    for (int k = 0; k < n; ++k) {
        const double a = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (int i = 0; i < n; ++i)
            basis[static_cast<std::size_t>(k) * n + i] =
                a * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n));
    }
    std::vector<std::vector<double>> out(mel.cols, std::vector<double>(n, 0.0));
    for (int t = 0; t < mel.cols; ++t)
        for (int k = 0; k < n; ++k) {
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                s += basis[static_cast<std::size_t>(k) * n + i] * mel.at(i, t);
            out[t][k] = s;
        }
    return out;
}

namespace {

// Shared preconditions of the paired metrics; returns the common length.
std::size_t paired_length(const AudioBuffer& a, const AudioBuffer& b, const char* metric)
{
    if (a.sample_rate != b.sample_rate)
        throw std::invalid_argument(std::string(metric) + ": sample rates differ (" +
                                    std::to_string(a.sample_rate) + " vs " + std::to_string(b.sample_rate) + ")");
    const std::size_t la = a.size();
    const std::size_t lb = b.size();
    const std::size_t longer = std::max(la, lb);
    const std::size_t shorter = std::min(la, lb);
    if (static_cast<double>(longer - shorter) > 0.1 * static_cast<double>(longer))
        throw std::invalid_argument(std::string(metric) + ": durations differ by more than 10% (" +
                                    std::to_string(la) + " vs " + std::to_string(lb) + " samples)");
    return shorter;
}

AudioBuffer head(const AudioBuffer& x, std::size_t n)
{
    AudioBuffer out;
    out.sample_rate = x.sample_rate;
    out.samples.assign(x.samples.begin(), x.samples.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

} // namespace

double mcd13(const AudioBuffer& reference, const AudioBuffer& candidate)
{
    const std::size_t n = paired_length(reference, candidate, "mcd13");
    if (n < static_cast<std::size_t>(kWindowSize))
        throw std::invalid_argument("mcd13: signals shorter than one analysis window");
    const auto ca = mel_cepstra(mel_transform(head(reference, n)));
    const auto cb = mel_cepstra(mel_transform(head(candidate, n)));
    double total = 0.0;
    for (std::size_t t = 0; t < ca.size(); ++t) {
        double s = 0.0;
        for (int d = 1; d <= kCepstralOrder; ++d)
            s += (ca[t][d] - cb[t][d]) * (ca[t][d] - cb[t][d]);
        total += std::sqrt(s);
    }
    return 10.0 / std::numbers::ln10 * std::numbers::sqrt2 * total / static_cast<double>(ca.size());
}

std::vector<std::optional<double>> track_pitch(const AudioBuffer& x, const PitchSettings& s)
{
    const double sr = x.sample_rate;
    const int win = static_cast<int>(std::lround(s.window_seconds * sr));
    const int hop = static_cast<int>(std::lround(s.hop_seconds * sr));
    const int lag_min = static_cast<int>(std::floor(sr / s.f_max));
    const int lag_max = static_cast<int>(std::ceil(sr / s.f_min));
    if (win <= lag_max + 1 || hop < 1)
        throw std::invalid_argument("track_pitch: window too short for the pitch search range");
    std::vector<std::optional<double>> out;
    std::vector<double> frame(win), r(lag_max + 2, 0.0);
    for (std::size_t start = 0; start + win <= x.size(); start += hop) {
        double mean = 0.0;
        for (int i = 0; i < win; ++i)
            mean += x.samples[start + i];
        mean /= win;
        double energy = 0.0;
        for (int i = 0; i < win; ++i) {
            frame[i] = x.samples[start + i] - mean;
            energy += frame[i] * frame[i];
        }
        if (energy < 1e-10 * win) {
            out.emplace_back();
            continue;
        }
        double best = -1.0;
        for (int lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
            double xy = 0.0, xx = 0.0, yy = 0.0;
            for (int i = 0; i + lag < win; ++i) {
                xy += frame[i] * frame[i + lag];
                xx += frame[i] * frame[i];
                yy += frame[i + lag] * frame[i + lag];
            }
            r[lag] = xx > 0.0 && yy > 0.0 ? xy / std::sqrt(xx * yy) : 0.0;
            if (lag >= lag_min && lag <= lag_max)
                best = std::max(best, r[lag]);
        }
        if (best < s.voicing_threshold) {
            out.emplace_back();
            continue;
        }
        // The shortest lag whose peak nearly matches the best one, which
        // avoids locking onto a multiple of the period.
        int pick = -1;
        for (int lag = lag_min; lag <= lag_max; ++lag)
            if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] >= 0.9 * best) {
                pick = lag;
                break;
            }
        if (pick < 0) {
            out.emplace_back();
            continue;
        }
        double refined = pick;
        const double den = r[pick - 1] - 2.0 * r[pick] + r[pick + 1];
        if (den < 0.0)
            refined += 0.5 * (r[pick - 1] - r[pick + 1]) / den;
        out.emplace_back(sr / refined);
    }
    return out;
}

void PitchErrorAccumulator::add(const std::vector<std::optional<double>>& a,
                                const std::vector<std::optional<double>>& b)
{
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t t = 0; t < n; ++t)
        if (a[t] && b[t]) {
            sum_sq += (*a[t] - *b[t]) * (*a[t] - *b[t]);
            ++frames;
        }
}

std::optional<double> PitchErrorAccumulator::rmse() const
{
    if (frames == 0)
        return std::nullopt;
    return std::sqrt(sum_sq / static_cast<double>(frames));
}

std::optional<double> rmse_f0(const AudioBuffer& reference, const AudioBuffer& candidate, const PitchSettings& s)
{
    const std::size_t n = paired_length(reference, candidate, "rmse_f0");
    PitchErrorAccumulator acc;
    acc.add(track_pitch(head(reference, n), s), track_pitch(head(candidate, n), s));
    return acc.rmse();
}

namespace {

Eigen::MatrixXd to_matrix(const EmbeddingSet& set)
{
    Eigen::MatrixXd m(set.size(), set.front().size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set[i].size() != set.front().size())
            throw std::invalid_argument("frechet_distance: embeddings of unequal length");
        for (std::size_t j = 0; j < set[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = set[i][j];
    }
    return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Tr((A B)^(1/2)) through the symmetric form (A^(1/2) B A^(1/2))^(1/2).
double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const Eigen::MatrixXd ra = psd_sqrt(a);
    const Eigen::MatrixXd inner = ra * b * ra;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

} // namespace

FrechetResult frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b)
{
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("frechet_distance: each set needs at least 2 embeddings");
    if (a.front().size() != b.front().size() || a.front().empty())
        throw std::invalid_argument("frechet_distance: embedding dimensions differ");
    const Eigen::MatrixXd ma = to_matrix(a);
    const Eigen::MatrixXd mb = to_matrix(b);
    const Eigen::VectorXd mu_a = ma.colwise().mean();
    const Eigen::VectorXd mu_b = mb.colwise().mean();
    const Eigen::MatrixXd ca = ma.rowwise() - mu_a.transpose();
    const Eigen::MatrixXd cb = mb.rowwise() - mu_b.transpose();
    Eigen::MatrixXd sa = ca.transpose() * ca / static_cast<double>(a.size() - 1);
    Eigen::MatrixXd sb = cb.transpose() * cb / static_cast<double>(b.size() - 1);

    FrechetResult r;
    double tr = trace_sqrt_product(sa, sb);
    if (!std::isfinite(tr)) {
        const Eigen::MatrixXd eps = 1e-6 * Eigen::MatrixXd::Identity(sa.rows(), sa.cols());
        sa += eps;
        sb += eps;
        tr = trace_sqrt_product(sa, sb);
        r.regularized = true;
    }
    const double d = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr;
    r.distance = std::max(0.0, d);
    return r;
}

std::vector<double> logmel_stats_embedding(const AudioBuffer& x)
{
    const MelSpectrogram m = mel_transform(x);
    std::vector<double> out(2 * static_cast<std::size_t>(m.rows));
    for (int b = 0; b < m.rows; ++b) {
        double mean = 0.0;
        for (int t = 0; t < m.cols; ++t)
            mean += m.at(b, t);
        mean /= m.cols;
        double var = 0.0;
        for (int t = 0; t < m.cols; ++t)
            var += (m.at(b, t) - mean) * (m.at(b, t) - mean);
        out[b] = mean;
        out[m.rows + b] = std::sqrt(var / m.cols);
    }
    return out;
}

json MetricReport::to_json() const
{
    json per = json::array();
    for (const auto& u : per_utterance)
        per.push_back(json{{"id", u.id},
                           {"mcd13_db", u.mcd13},
                           {"rmse_f0_hz", u.rmse_f0 ? json(*u.rmse_f0) : json("undefined")},
                           {"mel_l1", u.mel_l1}});
    return json{{"mcd13_db", mcd13},
                {"rmse_f0_hz", rmse_f0 ? json(*rmse_f0) : json("undefined")},
                {"frechet_logmel_stats", frechet ? json(*frechet) : json("undefined")},
                {"frechet_regularized", frechet_regularized},
                {"pairs", per_utterance.size()},
                {"per_utterance", per}};
}

std::string MetricReport::to_csv() const
{
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string s = "id,mcd13_db,rmse_f0_hz,mel_l1\n";
    for (const auto& u : per_utterance)
        s += u.id + "," + num(u.mcd13) + "," + (u.rmse_f0 ? num(*u.rmse_f0) : "undefined") + "," + num(u.mel_l1) +
             "\n";
    s += "ALL," + num(mcd13) + "," + (rmse_f0 ? num(*rmse_f0) : "undefined") + ",\n";
    return s;
}

MetricReport evaluate_pairs(const std::vector<NamedAudio>& references, const std::vector<NamedAudio>& candidates,
                            const Embedder& embed)
{
    std::map<std::string, const AudioBuffer*> cand;
    for (const auto& c : candidates)
        cand[c.id] = &c.audio;
    std::string orphans;
    for (const auto& r : references)
        if (cand.count(r.id) == 0)
            orphans += " " + r.id;
    std::map<std::string, bool> ref_ids;
    for (const auto& r : references)
        ref_ids[r.id] = true;
    for (const auto& c : candidates)
        if (ref_ids.count(c.id) == 0)
            orphans += " " + c.id;
    if (!orphans.empty())
        throw std::invalid_argument("unpaired files:" + orphans);
    if (references.empty())
        throw std::invalid_argument("no pairs to evaluate");

    MetricReport rep;
    PitchErrorAccumulator pitch;
    EmbeddingSet ea, eb;
    double mcd_sum = 0.0;
    for (const auto& r : references) {
        const AudioBuffer& c = *cand.at(r.id);
        const std::size_t n = paired_length(r.audio, c, "evaluate");
        UtteranceMetrics u;
        u.id = r.id;
        u.mcd13 = mcd13(r.audio, c);
        const auto pa = track_pitch(head(r.audio, n));
        const auto pb = track_pitch(head(c, n));
        PitchErrorAccumulator one;
        one.add(pa, pb);
        pitch.add(pa, pb);
        u.rmse_f0 = one.rmse();
        u.mel_l1 = mel_loss(head(r.audio, n), head(c, n));
        mcd_sum += u.mcd13;
        ea.push_back(embed(r.audio));
        eb.push_back(embed(c));
        rep.per_utterance.push_back(u);
    }
    rep.mcd13 = mcd_sum / static_cast<double>(references.size());
    rep.rmse_f0 = pitch.rmse();
    if (references.size() >= 2) {
        const FrechetResult f = frechet_distance(ea, eb);
        rep.frechet = f.distance;
        rep.frechet_regularized = f.regularized;
    }
    return rep;
}

MelDifference mel_difference_map(const AudioBuffer& reference, const AudioBuffer& candidate)
{
    return mel_difference(reference, candidate);
}

AudioBuffer copy_synthesis(const AudioBuffer& x, const GeneratorConfig& cfg, const ParamSet& params)
{
    if (x.sample_rate != kSampleRate)
        throw std::invalid_argument("copy synthesis expects " + std::to_string(kSampleRate) + " Hz input");
    AudioBuffer y = generate(mel_transform(x), cfg, params).final;
    y.samples.resize(x.size());
    return y;
}

json SpeedReport::to_json() const
{
    return json{{"samples_per_second", samples_per_second},
                {"real_time_factor", real_time_factor},
                {"device", device},
                {"repetitions", repetitions},
                {"audio_seconds", audio_seconds},
                {"rep_samples_per_second", rep_samples_per_second},
                {"statistic", "median"}};
}

SpeedReport bench_synthesis(const GeneratorConfig& cfg, const ParamSet& params, const std::vector<MelSpectrogram>& mels,
                            const std::string& device, const BenchSettings& s)
{
    if (device != "cpu")
        throw std::invalid_argument("bench_synthesis: only the cpu device is available in this build");
    if (mels.empty() || s.repetitions < 1)
        throw std::invalid_argument("bench_synthesis: needs mels and at least one repetition");
    double samples = 0.0;
    for (const auto& m : mels)
        samples += static_cast<double>(m.cols) * kHopSize;
    for (int i = 0; i < s.warmup; ++i)
        generate(mels.front(), cfg, params);

    SpeedReport rep;
    rep.device = device;
    rep.repetitions = s.repetitions;
    rep.audio_seconds = samples / kSampleRate;
    for (int i = 0; i < s.repetitions; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& m : mels)
            generate(m, cfg, params);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        rep.rep_samples_per_second.push_back(samples / dt.count());
    }
    std::vector<double> sorted = rep.rep_samples_per_second;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    rep.samples_per_second = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    rep.real_time_factor = rep.samples_per_second / static_cast<double>(kSampleRate);
    return rep;
}

std::vector<MelSpectrogram> benchmark_mel_set(double seconds, std::uint64_t seed)
{
    // Chunks of 128 frames keep each forward pass small.
    constexpr int chunk_frames = 128;
    const int total_frames = static_cast<int>(std::ceil(seconds * kSampleRate / kHopSize));
    const AudioBuffer source = make_speechlike(static_cast<double>(chunk_frames) * kHopSize / kSampleRate, seed);
    const MelSpectrogram base = mel_transform(source);
    std::vector<MelSpectrogram> out;
    for (int done = 0; done < total_frames; done += chunk_frames) {
        MelSpectrogram m = base;
        const int cols = std::min(chunk_frames, total_frames - done);
        if (cols != m.cols) {
            m.cols = cols;
            m.values.assign(static_cast<std::size_t>(m.rows) * cols, 0.0);
            for (int b = 0; b < m.rows; ++b)
                for (int t = 0; t < cols; ++t)
                    m.at(b, t) = base.at(b, t);
        }
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace fregan
