#include "fregan/config.hpp"
#include "fregan/errors.hpp"
#include "fregan/evalsuite.hpp"
#include "fregan/image.hpp"
#include "fregan/io_util.hpp"
#include "fregan/trainer.hpp"
#include "fregan/wavelet.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fregan;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    std::int64_t seed = -1;
    std::string device = "cpu";
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true)
{
    cmd->add_option("--config", c.config, "JSON run configuration");
    cmd->add_option("--set", c.overrides, "dotted.key=value override (repeatable)");
    auto* out = cmd->add_option("--out", c.out, "output directory");
    if (needs_out)
        out->required();
    cmd->add_option("--seed", c.seed, "overrides train.seed");
    cmd->add_option("--device", c.device, "cpu or gpu")->check(CLI::IsMember({"cpu", "gpu"}));
}

ExperimentConfig effective_config(const Common& c)
{
    std::vector<std::string> overrides = c.overrides;
    if (c.seed >= 0)
        overrides.push_back("train.seed=" + std::to_string(c.seed));
    return load_experiment_config(c.config, overrides);
}

void require_cpu(const Common& c)
{
    if (c.device != "cpu")
        throw ConfigError("device \"" + c.device + "\" is not available in this build; use --device cpu");
}

void persist_config(const ExperimentConfig& cfg, const fs::path& out)
{
    write_json_file(to_json(cfg), out / "effective_config.json");
}

AudioBuffer load_audio_or_mel_input(const fs::path& input, const GeneratorConfig& g, bool& was_wav,
                                    MelSpectrogram& mel)
{
    std::string ext = input.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    AudioBuffer audio;
    was_wav = ext == ".wav";
    if (was_wav) {
        audio = load_wav(input);
        mel = mel_transform(audio);
    } else {
        mel = load_mel(input);
    }
    if (mel.rows != g.mel_channels)
        throw ConfigError("input mel has " + std::to_string(mel.rows) + " bands, the model expects " +
                          std::to_string(g.mel_channels));
    return audio;
}

int cmd_train(const Common& c, const std::string& resume)
{
    require_cpu(c);
    const ExperimentConfig cfg = effective_config(c);
    const fs::path out(c.out);
    std::vector<AudioBuffer> clips = load_training_clips(cfg.data);
    std::optional<AudioBuffer> probe;
    if (!cfg.data.probe.empty())
        probe = load_wav(cfg.data.probe);
    fs::create_directories(out);
    persist_config(cfg, out);
    Trainer t(cfg, std::move(clips), probe);
    if (!resume.empty())
        t.load(resume);
    t.run(static_cast<std::uint64_t>(cfg.train.steps), out);
    std::printf("trained %llu steps, %llu epochs; outputs in %s\n", static_cast<unsigned long long>(t.steps_done()),
                static_cast<unsigned long long>(t.epoch()), out.string().c_str());
    return 0;
}

int cmd_synth(const Common& c, const std::string& checkpoint, const std::string& input, const std::string& output)
{
    require_cpu(c);
    const Checkpoint ck = load_checkpoint(checkpoint);
    if (!c.config.empty() || !c.overrides.empty()) {
        const std::uint64_t want = config_hash(effective_config(c));
        if (want != ck.config_hash)
            throw ConfigError("checkpoint " + checkpoint + " has config hash " + hash_hex(ck.config_hash) +
                              " but the given config hashes to " + hash_hex(want));
    }
    bool was_wav = false;
    MelSpectrogram mel;
    load_audio_or_mel_input(input, ck.models.gcfg, was_wav, mel);
    const AudioBuffer y = generate(mel, ck.models.gcfg, ck.models.generator).final;
    save_wav(y, output);
    std::printf("wrote %zu samples (%d frames) to %s\n", y.size(), mel.cols, output.c_str());
    return 0;
}

std::vector<NamedAudio> read_dir(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw NotFoundError("directory not found: " + dir.string());
    std::vector<NamedAudio> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".wav")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
        out.push_back({f.filename().string(), load_wav(f)});
    return out;
}

int cmd_eval(const Common& c, const std::string& ref_dir, const std::string& cand_dir, const std::string& checkpoint)
{
    require_cpu(c);
    const fs::path out(c.out);
    const std::vector<NamedAudio> refs = read_dir(ref_dir);
    std::vector<NamedAudio> cands;
    if (!cand_dir.empty()) {
        cands = read_dir(cand_dir);
    } else {
        if (checkpoint.empty())
            throw ConfigError("eval needs --cand DIR or --checkpoint CKPT for copy synthesis");
        const Checkpoint ck = load_checkpoint(checkpoint);
        for (const auto& r : refs)
            cands.push_back({r.id, copy_synthesis(r.audio, ck.models.gcfg, ck.models.generator)});
        for (const auto& cnd : cands)
            save_wav(cnd.audio, out / "synth" / cnd.id);
    }
    std::map<std::string, bool> ref_ids, cand_ids;
    for (const auto& r : refs)
        ref_ids[r.id] = true;
    for (const auto& x : cands)
        cand_ids[x.id] = true;
    std::string orphans;
    for (const auto& [id, _] : ref_ids)
        if (!cand_ids.count(id))
            orphans += "\n  " + (fs::path(ref_dir) / id).string();
    for (const auto& [id, _] : cand_ids)
        if (!ref_ids.count(id))
            orphans += "\n  " + (fs::path(cand_dir) / id).string();
    if (!orphans.empty())
        throw ConfigError("unpaired files:" + orphans);

    const MetricReport rep = evaluate_pairs(refs, cands);
    fs::create_directories(out);
    write_json_file(rep.to_json(), out / "metrics.json");
    write_file_atomic(out / "metrics.csv", rep.to_csv());
    std::printf("MCD13 %.4f dB  RMSE_f0 %s  Frechet(logmel stats) %s  over %zu pairs\n", rep.mcd13,
                rep.rmse_f0 ? std::to_string(*rep.rmse_f0).append(" Hz").c_str() : "undefined",
                rep.frechet ? std::to_string(*rep.frechet).c_str() : "undefined", rep.per_utterance.size());
    return 0;
}

json chirp_json(const ChirpReport& r)
{
    json segs = json::array();
    for (const auto& s : r.segments)
        segs.push_back(json{{"t_begin", s.t_begin},
                            {"t_end", s.t_end},
                            {"input_hz", s.input_hz},
                            {"input_energy", s.input_energy},
                            {"avg_pool_energy", s.ap_energy},
                            {"dwt_low_energy", s.dwt_low_energy},
                            {"dwt_high_energy", s.dwt_high_energy},
                            {"avg_pool_peak_hz", s.ap_peak_hz},
                            {"above_half_band", s.above_half_band}});
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json("undefined"); };
    return json{{"duration_s", r.duration},
                {"f0_hz", r.f0},
                {"f1_hz", r.f1},
                {"sample_rate", r.sample_rate},
                {"half_band_hz", r.half_band_hz},
                {"crossing_time_s", opt(r.crossing_time)},
                {"input_energy", r.input_energy},
                {"avg_pool_energy", r.ap_energy},
                {"dwt_low_energy", r.dwt_low_energy},
                {"dwt_high_energy", r.dwt_high_energy},
                {"avg_pool_power_ratio", opt(r.ap_retained)},
                {"dwt_power_ratio", opt(r.dwt_retained)},
                {"segments", segs}};
}

Panel spectrogram_panel(const std::vector<double>& x, int sample_rate)
{
    const Spectrogram s = stft_magnitude(x, sample_rate, 512, 128);
    return Panel{s.magnitude, s.bins, s.frames};
}

int cmd_demo_chirp(const Common& c, double duration, double f0, double f1)
{
    const fs::path out(c.out);
    const ChirpReport r = chirp_demo(duration, f0, f1, kSampleRate);
    fs::create_directories(out);
    write_json_file(chirp_json(r), out / "chirp_report.json");
    const int half = kSampleRate / 2;
    const RgbImage img = stacked_panels({spectrogram_panel(r.input, kSampleRate), spectrogram_panel(r.ap, half),
                                         spectrogram_panel(r.dwt_low, half), spectrogram_panel(r.dwt_high, half)},
                                        160, 800);
    write_png(img, out / "chirp_panels.png");
    std::printf("input energy %.6g, avg-pool %.6g, dwt %.6g (low %.6g + high %.6g)\n", r.input_energy, r.ap_energy,
                r.dwt_low_energy + r.dwt_high_energy, r.dwt_low_energy, r.dwt_high_energy);
    return 0;
}

AudioBuffer default_clip()
{
    return make_speechlike(1.5, 11);
}

int cmd_ablate(const Common& c, const std::string& clip_path, int steps)
{
    require_cpu(c);
    std::vector<std::string> overrides = c.overrides;
    ExperimentConfig base = effective_config(c);
    if (steps > 0)
        base.train.steps = steps;
    const fs::path out(c.out);
    fs::create_directories(out);
    persist_config(base, out);
    const AudioBuffer clip = clip_path.empty() ? default_clip() : load_wav(clip_path);
    const auto rows = ablation_matrix(base);
    const auto results = run_ablation(rows, {clip}, clip, out, [](const std::string& name) {
        std::printf("running %s\n", name.c_str());
        std::fflush(stdout);
    });
    write_file_atomic(out / "ablation.csv", ablation_csv(results));
    std::fputs(ablation_csv(results).c_str(), stdout);
    return 0;
}

int cmd_plot(const Common& c, const std::string& contributions, const std::string& ref, const std::string& cand)
{
    const fs::path out(c.out);
    bool drew = false;
    if (!contributions.empty()) {
        const auto series = ContributionSeries::from_csv(read_file_bytes(contributions));
        if (series.entries.empty())
            throw ConfigError("contribution file " + contributions + " has no entries");
        for (const auto& e : series.entries) {
            double s = 0.0;
            for (double v : e.shares)
                s += v;
            if (std::abs(s - 100.0) > 1e-6)
                throw ConfigError("contribution entry at epoch " + std::to_string(e.epoch) + " sums to " +
                                  std::to_string(s) + "%, not 100%");
        }
        write_png(stacked_area_plot(series), out / "contributions.png");
        drew = true;
    }
    if (!ref.empty() || !cand.empty()) {
        if (ref.empty() || cand.empty())
            throw ConfigError("a difference map needs both --ref and --cand");
        AudioBuffer a = load_wav(ref), b = load_wav(cand);
        // synth output runs to a whole number of frames; compare the overlap
        const std::size_t n = std::min(a.size(), b.size());
        if (n == 0 || std::max(a.size(), b.size()) - n > static_cast<std::size_t>(kHopSize))
            throw ConfigError("--ref and --cand lengths differ by more than one frame (" + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()) + " samples)");
        a.samples.resize(n);
        b.samples.resize(n);
        const MelDifference d = mel_difference_map(a, b);
        double hi = 0.0;
        for (double v : d.map.values)
            hi = std::max(hi, v);
        write_png(heatmap(d.map.values, d.map.rows, d.map.cols, 0.0, hi, 3), out / "mel_difference.png");
        write_json_file(json{{"mean_abs_difference", d.mean}, {"rows", d.map.rows}, {"cols", d.map.cols}},
                        out / "mel_difference.json");
        std::printf("mean |difference| %.17g\n", d.mean);
        drew = true;
    }
    if (!drew)
        throw ConfigError("plot needs --contributions FILE or --ref/--cand WAVs");
    return 0;
}

int cmd_bench(const Common& c, const std::string& checkpoint, double seconds, int reps)
{
    const fs::path out(c.out);
    GeneratorConfig g;
    ParamSet params;
    if (!checkpoint.empty()) {
        Checkpoint ck = load_checkpoint(checkpoint);
        g = ck.models.gcfg;
        params = std::move(ck.models.generator);
    } else {
        const ExperimentConfig cfg = effective_config(c);
        fs::create_directories(out);
        persist_config(cfg, out);
        g = cfg.generator;
        params = init_generator(g, cfg.train.seed);
    }
    BenchSettings s;
    s.repetitions = reps;
    const SpeedReport rep = bench_synthesis(g, params, benchmark_mel_set(seconds), c.device, s);
    fs::create_directories(out);
    write_json_file(rep.to_json(), out / "speed.json");
    std::printf("%.1f samples/s (%.3fx real time) on %s\n", rep.samples_per_second, rep.real_time_factor,
                rep.device.c_str());
    return 0;
}

int cmd_ingest(const Common& c, const std::string& wav_dir)
{
    const ExperimentConfig cfg = effective_config(c);
    const SplitManifests m = ingest_dataset(wav_dir, cfg.train.seed, cfg.train.split);
    write_manifests(m, c.out);
    std::printf("train %zu, val %zu, test %zu, rejected %zu\n", m.train.size(), m.val.size(), m.test.size(),
                m.rejects.size());
    for (const auto& [path, why] : m.rejects)
        std::printf("  rejected %s: %s\n", path.c_str(), why.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-resolution GAN vocoder toolkit"};
    app.require_subcommand(1);

    Common common;
    std::string resume, checkpoint, input, output, ref, cand, contributions, clip, wav_dir;
    double duration = 8.0, f0 = 0.0, f1 = kSampleRate / 2.0, seconds = 30.0;
    int steps = 0, reps = 5;

    auto* train = app.add_subcommand("train", "train a model");
    add_common(train, common);
    train->add_option("--resume", resume, "checkpoint to continue from");

    auto* synth = app.add_subcommand("synth", "synthesise audio from a mel file or a wav (copy synthesis)");
    add_common(synth, common, false);
    synth->add_option("--checkpoint", checkpoint)->required();
    synth->add_option("--input", input, ".fgml mel or .wav")->required();
    synth->add_option("--output", output, "output wav")->required();

    auto* eval = app.add_subcommand("eval", "objective metrics over paired wav directories");
    add_common(eval, common);
    eval->add_option("--ref", ref, "reference wav directory")->required();
    eval->add_option("--cand", cand, "candidate wav directory");
    eval->add_option("--checkpoint", checkpoint, "copy-synthesise candidates with this model");

    auto* chirp = app.add_subcommand("demo-chirp", "average pooling versus Haar DWT on an up-chirp");
    add_common(chirp, common);
    chirp->add_option("--duration", duration);
    chirp->add_option("--f0", f0);
    chirp->add_option("--f1", f1);

    auto* ablate = app.add_subcommand("ablate", "run the component ablation rows");
    add_common(ablate, common);
    ablate->add_option("--clip", clip, "training and evaluation wav (default: synthetic utterance)");
    ablate->add_option("--steps", steps, "steps per row (default: train.steps)");

    auto* plot = app.add_subcommand("plot", "contribution curves and mel difference maps");
    add_common(plot, common);
    plot->add_option("--contributions", contributions, "contributions.csv from a training run");
    plot->add_option("--ref", ref, "reference wav for a difference map");
    plot->add_option("--cand", cand, "candidate wav for a difference map");

    auto* bench = app.add_subcommand("bench", "synthesis throughput");
    add_common(bench, common);
    bench->add_option("--checkpoint", checkpoint);
    bench->add_option("--seconds", seconds, "audio seconds per repetition (>= 30 for reporting)");
    bench->add_option("--repetitions", reps)->check(CLI::PositiveNumber);

    auto* ingest = app.add_subcommand("ingest", "validate and split a wav directory into manifests");
    add_common(ingest, common);
    ingest->add_option("--wav-dir", wav_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train)
            return cmd_train(common, resume);
        if (*synth)
            return cmd_synth(common, checkpoint, input, output);
        if (*eval)
            return cmd_eval(common, ref, cand, checkpoint);
        if (*chirp)
            return cmd_demo_chirp(common, duration, f0, f1);
        if (*ablate)
            return cmd_ablate(common, clip, steps);
        if (*plot)
            return cmd_plot(common, contributions, ref, cand);
        if (*bench)
            return cmd_bench(common, checkpoint, seconds, reps);
        if (*ingest)
            return cmd_ingest(common, wav_dir);
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
