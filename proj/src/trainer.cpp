#include "fregan/trainer.hpp"

#include "fregan/errors.hpp"
#include "fregan/evalsuite.hpp"
#include "fregan/io_util.hpp"
#include "fregan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

namespace fregan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void shuffle_in_place(std::vector<std::uint64_t>& v, std::mt19937_64& rng)
{
    // Written out rather than std::shuffle so manifests do not depend on the
    // standard library's distribution algorithms.
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

std::vector<fs::path> wav_files(const fs::path& dir)
{
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file())
            continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (ext == ".wav")
            out.push_back(fs::relative(e.path(), dir));
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

SplitManifests ingest_dataset(const fs::path& wav_dir, std::uint64_t seed, const std::array<double, 3>& ratios)
{
    if (!fs::is_directory(wav_dir))
        throw NotFoundError("dataset directory not found: " + wav_dir.string());
    SplitManifests m;
    std::vector<std::string> valid;
    for (const fs::path& rel : wav_files(wav_dir)) {
        try {
            const AudioBuffer a = load_wav(wav_dir / rel);
            if (a.size() < static_cast<std::size_t>(kWindowSize))
                m.rejects.emplace_back(rel.generic_string(), "shorter than one analysis window");
            else
                valid.push_back(rel.generic_string());
        } catch (const std::exception& e) {
            m.rejects.emplace_back(rel.generic_string(), e.what());
        }
    }
    if (valid.size() < 10)
        throw ConfigError("dataset " + wav_dir.string() + " has " + std::to_string(valid.size()) +
                          " valid wav files, at least 10 are required");

    std::vector<std::uint64_t> idx(valid.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    std::mt19937_64 rng(seed);
    shuffle_in_place(idx, rng);

    const double n = static_cast<double>(valid.size());
    const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * n + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * n + 1e-9));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::string& name = valid[idx[i]];
        if (i < n_val)
            m.val.push_back(name);
        else if (i < n_val + n_test)
            m.test.push_back(name);
        else
            m.train.push_back(name);
    }
    for (auto* list : {&m.train, &m.val, &m.test})
        std::sort(list->begin(), list->end());
    return m;
}

void write_manifests(const SplitManifests& m, const fs::path& out_dir)
{
    auto lines = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v)
            s += x + "\n";
        return s;
    };
    write_file_atomic(out_dir / "train.txt", lines(m.train));
    write_file_atomic(out_dir / "val.txt", lines(m.val));
    write_file_atomic(out_dir / "test.txt", lines(m.test));
    std::string rejects;
    for (const auto& [path, reason] : m.rejects)
        rejects += path + "\t" + reason + "\n";
    write_file_atomic(out_dir / "rejects.txt", rejects);
}

std::vector<std::string> read_manifest(const fs::path& file)
{
    std::istringstream in(read_file_bytes(file));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (!line.empty())
            out.push_back(line);
    }
    return out;
}

AdamW::AdamW(const ParamSet& params)
{
    for (const auto& p : params.items()) {
        m_.emplace_back(p.value.dims());
        v_.emplace_back(p.value.dims());
    }
}

void AdamW::step(ParamSet& params, const AdamWSettings& s, double lr)
{
    if (params.size() != m_.size())
        throw std::logic_error("AdamW state does not match the parameter set");
    ++t_;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t_));
    auto& items = params.items();
    for (std::size_t k = 0; k < items.size(); ++k) {
        Tensor& w = items[k].value;
        const Tensor& g = items[k].grad;
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] -= lr * s.weight_decay * w[i];
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.eps);
        }
    }
}

ModelBundle init_models(const GeneratorConfig& g, const DiscriminatorConfig& d, std::uint64_t seed)
{
    ModelBundle m;
    m.gcfg = g;
    m.dcfg = d;
    m.generator = init_generator(g, seed);
    m.rpd = init_rpd(d, seed + 1);
    m.rsd = init_rsd(d, seed + 2);
    return m;
}

OptimizerBundle init_optimizers(const ModelBundle& m, const TrainConfig& t)
{
    OptimizerBundle o;
    o.settings = AdamWSettings{t.adam_beta1, t.adam_beta2, t.adam_eps, t.weight_decay};
    o.generator = AdamW(m.generator);
    o.rpd = AdamW(m.rpd);
    o.rsd = AdamW(m.rsd);
    return o;
}

Batch make_batch(const std::vector<AudioBuffer>& clips, const std::vector<std::size_t>& picks, int segment_length,
                 std::mt19937_64& rng)
{
    if (segment_length % kHopSize != 0 || segment_length < kWindowSize)
        throw ConfigError("segment_length must be a multiple of 256 and at least 1024");
    const int n = static_cast<int>(picks.size());
    const int frames = segment_length / kHopSize;
    Batch b;
    b.audio = Tensor(Dims{n, 1, segment_length, 1});
    b.mel = Tensor(Dims{n, kMelBands, frames, 1});
    for (int i = 0; i < n; ++i) {
        const AudioBuffer& clip = clips.at(picks[i]);
        AudioBuffer seg;
        seg.samples.assign(segment_length, 0.0);
        const std::size_t len = clip.size();
        const std::size_t seg_len = static_cast<std::size_t>(segment_length);
        std::size_t start = 0;
        if (len > seg_len)
            start = static_cast<std::size_t>(rng() % (len - seg_len + 1));
        const std::size_t take = std::min(seg_len, len - start);
        std::copy_n(clip.samples.begin() + static_cast<std::ptrdiff_t>(start), take, seg.samples.begin());
        const MelSpectrogram mel = mel_transform(seg);
        if (mel.cols != frames)
            throw std::logic_error("segment produced " + std::to_string(mel.cols) + " mel frames, expected " +
                                   std::to_string(frames));
        std::copy(seg.samples.begin(), seg.samples.end(), b.audio.data() + b.audio.index(i, 0, 0));
        std::copy(mel.values.begin(), mel.values.end(), b.mel.data() + b.mel.index(i, 0, 0));
    }
    return b;
}

namespace {

std::vector<double> values_of(const std::vector<Var>& v)
{
    std::vector<double> out;
    for (const Var& x : v)
        out.push_back(x.value()[0]);
    return out;
}

std::string first_bad(const std::vector<double>& v, const std::string& name)
{
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            return name + "[" + std::to_string(i) + "]";
    return {};
}

void check_params(const ParamSet& p, const std::string& network)
{
    for (const auto& x : p.items())
        if (!x.value.all_finite())
            throw NumericalError(network + " parameter " + x.name + " became non-finite");
}

} // namespace

namespace {

LossReport run_phases(const Batch& batch, ModelBundle& models, OptimizerBundle& opt, const LossWeights& w, double lr,
                      bool update_d, bool update_g)
{
    const Dims& ad = batch.audio.dims();
    const Dims& md = batch.mel.dims();
    if (ad.n != md.n || ad.h != md.h * kHopSize)
        throw std::invalid_argument("batch audio " + to_string(ad) + " is not aligned with mel " + to_string(md));
    if (md.c != models.gcfg.mel_channels)
        throw ConfigError("batch mel has " + std::to_string(md.c) + " bands, generator expects " +
                          std::to_string(models.gcfg.mel_channels));

    Tape tape;
    ParamBinder gb(tape, models.generator);
    const Var real = tape.constant(batch.audio);
    const GeneratorVars gv = generator_forward(gb, models.gcfg, tape.constant(batch.mel));
    const Var fake = gv.final;
    LossReport r;

    if (update_d) {
        const Var detached = tape.constant(fake.value());
        ParamBinder rb(tape, models.rpd);
        ParamBinder sb(tape, models.rsd);
        const auto real_out = discriminate(rb, sb, models.dcfg, real);
        const auto fake_out = discriminate(rb, sb, models.dcfg, detached);
        std::vector<Var> rs, fs;
        for (std::size_t k = 0; k < real_out.size(); ++k) {
            rs.push_back(real_out[k].score);
            fs.push_back(fake_out[k].score);
        }
        const auto terms = ops::d_loss_terms(rs, fs);
        const Var total = ops::sum(terms);
        r.d_terms = values_of(terms);
        r.d_total = total.value()[0];
        std::string bad = first_bad(r.d_terms, "d_loss");
        if (bad.empty() && !std::isfinite(r.d_total))
            bad = "d_total";
        if (!bad.empty())
            throw NumericalError("non-finite loss term " + bad + " in the discriminator update");
        models.rpd.zero_grad();
        models.rsd.zero_grad();
        tape.backward(total);
        opt.rpd.step(models.rpd, opt.settings, lr);
        opt.rsd.step(models.rsd, opt.settings, lr);
        check_params(models.rpd, "period discriminator");
        check_params(models.rsd, "scale discriminator");
    }
    if (!update_g)
        return r;

    tape.zero_grad();
    models.generator.zero_grad();
    // Frozen view of the updated discriminators: gradients reach the
    // generator through them without touching their parameters.
    ParamBinder rb(tape, std::as_const(models.rpd));
    ParamBinder sb(tape, std::as_const(models.rsd));
    const auto real_out = discriminate(rb, sb, models.dcfg, real);
    const auto fake_out = discriminate(rb, sb, models.dcfg, fake);
    std::vector<Var> fake_scores;
    std::vector<std::vector<Var>> real_feats, fake_feats;
    for (std::size_t k = 0; k < fake_out.size(); ++k) {
        fake_scores.push_back(fake_out[k].score);
        real_feats.push_back(real_out[k].features);
        fake_feats.push_back(fake_out[k].features);
    }
    const auto adv = ops::g_adv_terms(fake_scores);
    const auto fm = ops::fm_terms(real_feats, fake_feats);
    const Var mel = ops::mel_loss(real, fake);

    std::vector<Var> parts = adv;
    std::vector<double> weights(adv.size(), 1.0);
    for (const Var& f : fm) {
        parts.push_back(f);
        weights.push_back(w.lambda_fm);
    }
    parts.push_back(mel);
    weights.push_back(w.lambda_mel);
    const Var total = ops::weighted_sum(parts, weights);

    r.g_adv = values_of(adv);
    r.fm = values_of(fm);
    r.mel = mel.value()[0];
    r.g_total = total.value()[0];
    if (const std::string bad = r.first_non_finite(); !bad.empty())
        throw NumericalError("non-finite loss term " + bad + " in the generator update");
    tape.backward(total);
    opt.generator.step(models.generator, opt.settings, lr);
    check_params(models.generator, "generator");
    return r;
}

} // namespace

LossReport train_step(const Batch& batch, ModelBundle& models, OptimizerBundle& opt, const LossWeights& w, double lr)
{
    return run_phases(batch, models, opt, w, lr, true, true);
}

LossReport discriminator_update(const Batch& batch, ModelBundle& models, OptimizerBundle& opt, double lr)
{
    return run_phases(batch, models, opt, LossWeights{}, lr, true, false);
}

LossReport generator_update(const Batch& batch, ModelBundle& models, OptimizerBundle& opt, const LossWeights& w,
                            double lr)
{
    return run_phases(batch, models, opt, w, lr, false, true);
}

std::vector<double> contribution_shares(const std::vector<double>& stds)
{
    double total = 0.0;
    for (double s : stds) {
        if (!(s >= 0.0) || !std::isfinite(s))
            throw std::invalid_argument("contribution shares need finite non-negative deviations");
        total += s;
    }
    std::vector<double> out(stds.size(), stds.empty() ? 0.0 : 100.0 / static_cast<double>(stds.size()));
    if (total > 0.0)
        for (std::size_t i = 0; i < stds.size(); ++i)
            out[i] = 100.0 * stds[i] / total;
    return out;
}

std::vector<double> track_contributions(const ParamSet& generator, const GeneratorConfig& cfg,
                                        const MelSpectrogram& probe)
{
    const MultiResolutionOutput out = generate(probe, cfg, generator);
    std::vector<double> stds;
    for (const auto& b : out.projected) {
        double mean = 0.0;
        for (double x : b)
            mean += x;
        mean /= static_cast<double>(b.size());
        double var = 0.0;
        for (double x : b)
            var += (x - mean) * (x - mean);
        stds.push_back(std::sqrt(var / static_cast<double>(b.size())));
    }
    std::vector<double> shares = contribution_shares(stds);
    if (static_cast<int>(shares.size()) < cfg.top_k)
        shares.insert(shares.begin(), cfg.top_k - shares.size(), 0.0);
    return shares;
}

namespace {

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string ContributionSeries::to_csv() const
{
    std::size_t k = entries.empty() ? 0 : entries.front().shares.size();
    std::string s = "epoch,step";
    for (std::size_t i = 0; i < k; ++i)
        s += ",S" + std::to_string(i);
    s += "\n";
    for (const auto& e : entries) {
        s += std::to_string(e.epoch) + "," + std::to_string(e.step);
        for (double v : e.shares)
            s += "," + fmt(v);
        s += "\n";
    }
    return s;
}

ContributionSeries ContributionSeries::from_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("epoch,step", 0) != 0)
        throw FormatError("contribution file must start with an epoch,step header");
    ContributionSeries out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream row(line);
        std::string cell;
        ContributionEntry e;
        try {
            std::getline(row, cell, ',');
            e.epoch = std::stoull(cell);
            std::getline(row, cell, ',');
            e.step = std::stoull(cell);
            while (std::getline(row, cell, ','))
                e.shares.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw FormatError("malformed contribution row: " + line);
        }
        out.entries.push_back(std::move(e));
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'F', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class ByteWriter {
public:
    template <typename T>
    void pod(T v)
    {
        buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void str(const std::string& s)
    {
        pod<std::uint64_t>(s.size());
        buf_ += s;
    }
    void tensor(const Tensor& t)
    {
        const Dims& d = t.dims();
        for (int x : {d.n, d.c, d.h, d.w})
            pod<std::int32_t>(x);
        buf_.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
    }
    void params(const ParamSet& p)
    {
        pod<std::uint32_t>(static_cast<std::uint32_t>(p.size()));
        for (const auto& x : p.items()) {
            str(x.name);
            tensor(x.value);
        }
    }
    void adam(const AdamW& a)
    {
        pod<std::uint64_t>(a.steps());
        pod<std::uint32_t>(static_cast<std::uint32_t>(a.first_moments().size()));
        for (std::size_t i = 0; i < a.first_moments().size(); ++i) {
            tensor(a.first_moments()[i]);
            tensor(a.second_moments()[i]);
        }
    }
    std::string& bytes() { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(const std::string& s, std::size_t end) : s_(s), end_(end) {}

    template <typename T>
    T pod()
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, s_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    std::string str()
    {
        const auto n = pod<std::uint64_t>();
        need(n);
        std::string out = s_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    Tensor tensor()
    {
        Dims d;
        d.n = pod<std::int32_t>();
        d.c = pod<std::int32_t>();
        d.h = pod<std::int32_t>();
        d.w = pod<std::int32_t>();
        if (d.n < 0 || d.c < 0 || d.h < 0 || d.w < 0)
            throw FormatError("checkpoint holds a tensor with negative extent");
        need(d.size() * sizeof(double));
        std::vector<double> v(d.size());
        std::memcpy(v.data(), s_.data() + pos_, v.size() * sizeof(double));
        pos_ += v.size() * sizeof(double);
        return Tensor(d, std::move(v));
    }
    ParamSet params()
    {
        ParamSet p;
        const auto n = pod<std::uint32_t>();
        for (std::uint32_t i = 0; i < n; ++i) {
            const std::string name = str();
            Tensor t = tensor();
            Parameter& x = p.add(name, t.dims());
            x.value = std::move(t);
        }
        return p;
    }
    AdamW adam(const ParamSet& p)
    {
        AdamW a(p);
        a.set_steps(pod<std::uint64_t>());
        const auto n = pod<std::uint32_t>();
        if (n != p.size())
            throw FormatError("checkpoint optimizer state does not match its parameters");
        for (std::uint32_t i = 0; i < n; ++i) {
            a.first_moments()[i] = tensor();
            a.second_moments()[i] = tensor();
            if (!(a.first_moments()[i].dims() == p.items()[i].value.dims()) ||
                !(a.second_moments()[i].dims() == p.items()[i].value.dims()))
                throw FormatError("checkpoint optimizer moment has the wrong shape for " + p.items()[i].name);
        }
        return a;
    }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const
    {
        if (n > end_ - pos_)
            throw FormatError("checkpoint is truncated");
    }
    const std::string& s_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const Checkpoint& c, const fs::path& path)
{
    ByteWriter w;
    w.bytes().append(kMagic, 4);
    w.pod<std::uint32_t>(kVersion);
    w.pod<std::uint64_t>(c.config_hash);
    w.str(c.config.dump());
    w.pod<std::uint64_t>(c.step);
    w.pod<std::uint64_t>(c.epoch);
    w.str(c.rng_state);
    w.pod<std::uint64_t>(c.cursor);
    w.pod<std::uint64_t>(c.order.size());
    for (auto o : c.order)
        w.pod<std::uint64_t>(o);
    w.params(c.models.generator);
    w.params(c.models.rpd);
    w.params(c.models.rsd);
    w.adam(c.optimizers.generator);
    w.adam(c.optimizers.rpd);
    w.adam(c.optimizers.rsd);
    w.str(c.contributions.to_csv());
    const std::uint64_t sum = fnv1a(w.bytes());
    w.pod<std::uint64_t>(sum);
    write_file_atomic(path, w.bytes());
}

Checkpoint load_checkpoint(const fs::path& path)
{
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 4 + 4 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(path.string() + " is not a checkpoint file");
    const std::size_t body = bytes.size() - 8;
    std::uint64_t stored_sum;
    std::memcpy(&stored_sum, bytes.data() + body, 8);
    if (fnv1a(bytes.substr(0, body)) != stored_sum)
        throw FormatError(path.string() + " is corrupted (checksum mismatch)");

    ByteReader r(bytes, body);
    r.pod<std::uint32_t>(); // magic
    if (r.pod<std::uint32_t>() != kVersion)
        throw FormatError(path.string() + " has an unsupported checkpoint version");
    Checkpoint c;
    c.config_hash = r.pod<std::uint64_t>();
    try {
        c.config = json::parse(r.str());
    } catch (const json::parse_error& e) {
        throw FormatError("checkpoint config is not valid JSON: " + std::string(e.what()));
    }
    const ExperimentConfig cfg = experiment_config_from_json(c.config);
    if (config_hash(cfg) != c.config_hash)
        throw FormatError("checkpoint config does not match its recorded hash");
    c.step = r.pod<std::uint64_t>();
    c.epoch = r.pod<std::uint64_t>();
    c.rng_state = r.str();
    c.cursor = r.pod<std::uint64_t>();
    const auto n_order = r.pod<std::uint64_t>();
    if (n_order > body)
        throw FormatError("checkpoint is truncated");
    for (std::uint64_t i = 0; i < n_order; ++i)
        c.order.push_back(r.pod<std::uint64_t>());
    c.models.gcfg = cfg.generator;
    c.models.dcfg = cfg.discriminator;
    c.models.generator = r.params();
    c.models.rpd = r.params();
    c.models.rsd = r.params();
    c.optimizers.settings =
        AdamWSettings{cfg.train.adam_beta1, cfg.train.adam_beta2, cfg.train.adam_eps, cfg.train.weight_decay};
    c.optimizers.generator = r.adam(c.models.generator);
    c.optimizers.rpd = r.adam(c.models.rpd);
    c.optimizers.rsd = r.adam(c.models.rsd);
    c.contributions = ContributionSeries::from_csv(r.str());
    if (r.position() != body)
        throw FormatError("checkpoint has trailing bytes");
    try {
        check_generator_params(cfg.generator, c.models.generator);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint generator parameters: ") + e.what());
    }
    return c;
}

std::string log_header(int sub_discriminators)
{
    std::string s = "step,epoch,lr,d_total,g_total,g_adv,fm,mel";
    for (const char* name : {"d", "g_adv", "fm"})
        for (int k = 0; k < sub_discriminators; ++k)
            s += "," + std::string(name) + "_" + std::to_string(k);
    return s + "\n";
}

std::string log_row(std::uint64_t step, std::uint64_t epoch, double lr, const LossReport& r)
{
    std::string s = std::to_string(step) + "," + std::to_string(epoch);
    for (double v : {lr, r.d_total, r.g_total, r.g_adv_sum(), r.fm_sum(), r.mel})
        s += "," + fmt(v);
    for (const auto* list : {&r.d_terms, &r.g_adv, &r.fm})
        for (double v : *list)
            s += "," + fmt(v);
    return s + "\n";
}

Trainer::Trainer(ExperimentConfig cfg, std::vector<AudioBuffer> clips, std::optional<AudioBuffer> probe)
    : cfg_(std::move(cfg)), hash_(0), clips_(std::move(clips))
{
    cfg_.validate();
    hash_ = config_hash(cfg_);
    if (clips_.empty())
        throw ConfigError("training needs at least one clip");
    for (const auto& c : clips_) {
        if (c.sample_rate != kSampleRate)
            throw ConfigError("training clips must be sampled at " + std::to_string(kSampleRate) + " Hz");
        if (c.size() == 0)
            throw ConfigError("training clip is empty");
    }
    const AudioBuffer& p = probe ? *probe : clips_.front();
    AudioBuffer head;
    head.samples.assign(static_cast<std::size_t>(cfg_.train.segment_length), 0.0);
    std::copy_n(p.samples.begin(), std::min(p.size(), head.samples.size()), head.samples.begin());
    probe_mel_ = mel_transform(head);

    models_ = init_models(cfg_.generator, cfg_.discriminator, cfg_.train.seed);
    opt_ = init_optimizers(models_, cfg_.train);
    rng_.seed(cfg_.train.seed + 3);
    order_.resize(clips_.size());
    reshuffle();
    record_contribution();
}

double Trainer::learning_rate() const
{
    return cfg_.train.learning_rate * std::pow(cfg_.train.lr_decay, static_cast<double>(epoch_));
}

void Trainer::reshuffle()
{
    for (std::size_t i = 0; i < order_.size(); ++i)
        order_[i] = i;
    shuffle_in_place(order_, rng_);
    cursor_ = 0;
}

std::vector<std::size_t> Trainer::next_picks()
{
    std::vector<std::size_t> picks;
    for (int b = 0; b < cfg_.train.batch_size; ++b) {
        if (cursor_ == order_.size()) {
            ++epoch_;
            reshuffle();
        }
        picks.push_back(static_cast<std::size_t>(order_[cursor_++]));
    }
    return picks;
}

void Trainer::record_contribution()
{
    if (epoch_ % static_cast<std::uint64_t>(cfg_.train.contribution_every) != 0)
        return;
    if (!contributions_.entries.empty() && contributions_.entries.back().epoch == epoch_)
        return;
    contributions_.entries.push_back(
        ContributionEntry{epoch_, step_, track_contributions(models_.generator, models_.gcfg, probe_mel_)});
}

LossReport Trainer::step()
{
    const double lr = learning_rate();
    const std::uint64_t epoch_before = epoch_;
    const Batch batch = make_batch(clips_, next_picks(), cfg_.train.segment_length, rng_);
    LossReport r = train_step(batch, models_, opt_, cfg_.loss, lr);
    ++step_;
    if (cursor_ == order_.size()) {
        ++epoch_;
        reshuffle();
    }
    if (epoch_ != epoch_before)
        record_contribution();
    return r;
}

void Trainer::run(std::uint64_t steps, const fs::path& out_dir,
                  const std::function<void(std::uint64_t, const LossReport&)>& on_step)
{
    std::ofstream log;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path file = out_dir / kLogFile;
        const bool fresh = step_ == 0 || !fs::exists(file);
        log.open(file, fresh ? std::ios::trunc : std::ios::app);
        if (!log)
            throw std::runtime_error("cannot write " + file.string());
        if (fresh)
            log << log_header(models_.dcfg.sub_discriminator_count());
    }
    auto persist = [&] {
        if (out_dir.empty())
            return;
        write_file_atomic(out_dir / kContributionFile, contributions_.to_csv());
        save(out_dir / kCheckpointFile);
    };
    while (step_ < steps) {
        const double lr = learning_rate();
        const std::uint64_t epoch = epoch_;
        const LossReport r = step();
        if (log.is_open()) {
            log << log_row(step_, epoch, lr, r);
            log.flush();
        }
        if (on_step)
            on_step(step_, r);
        if (cfg_.train.checkpoint_every > 0 && step_ % static_cast<std::uint64_t>(cfg_.train.checkpoint_every) == 0)
            persist();
    }
    persist();
}

Checkpoint Trainer::checkpoint() const
{
    Checkpoint c;
    c.config = to_json(cfg_);
    c.config_hash = hash_;
    c.models = models_;
    c.optimizers = opt_;
    c.step = step_;
    c.epoch = epoch_;
    std::ostringstream rng;
    rng << rng_;
    c.rng_state = rng.str();
    c.order = order_;
    c.cursor = cursor_;
    c.contributions = contributions_;
    return c;
}

void Trainer::save(const fs::path& path) const
{
    save_checkpoint(checkpoint(), path);
}

namespace {

void require_same_layout(const ParamSet& have, const ParamSet& got, const std::string& network)
{
    if (have.size() != got.size())
        throw FormatError("checkpoint " + network + " has " + std::to_string(got.size()) + " parameters, expected " +
                          std::to_string(have.size()));
    for (std::size_t i = 0; i < have.size(); ++i) {
        const auto& a = have.items()[i];
        const auto& b = got.items()[i];
        if (a.name != b.name || !(a.value.dims() == b.value.dims()))
            throw FormatError("checkpoint " + network + " parameter " + b.name + " does not match " + a.name);
    }
}

} // namespace

void Trainer::load(const fs::path& path)
{
    Checkpoint c = load_checkpoint(path);
    if (c.config_hash != hash_)
        throw ConfigError("checkpoint " + path.string() + " was written with config hash " +
                          hash_hex(c.config_hash) + " but the current config hashes to " + hash_hex(hash_));
    require_same_layout(models_.generator, c.models.generator, "generator");
    require_same_layout(models_.rpd, c.models.rpd, "period discriminator");
    require_same_layout(models_.rsd, c.models.rsd, "scale discriminator");
    if (c.order.size() != clips_.size() || c.cursor > c.order.size())
        throw ConfigError("checkpoint was written for " + std::to_string(c.order.size()) +
                          " training clips, this run has " + std::to_string(clips_.size()));
    std::mt19937_64 rng;
    std::istringstream in(c.rng_state);
    in >> rng;
    if (!in)
        throw FormatError("checkpoint random state is unreadable");

    models_ = std::move(c.models);
    opt_ = std::move(c.optimizers);
    rng_ = rng;
    order_ = std::move(c.order);
    cursor_ = c.cursor;
    step_ = c.step;
    epoch_ = c.epoch;
    contributions_ = std::move(c.contributions);
}

std::vector<AudioBuffer> load_training_clips(const DataConfig& data)
{
    if (data.root.empty())
        throw ConfigError("data.root is not set");
    const fs::path root(data.root);
    if (!fs::is_directory(root))
        throw NotFoundError("dataset directory not found: " + root.string());
    std::vector<fs::path> files;
    if (!data.manifest.empty()) {
        if (!fs::exists(data.manifest))
            throw NotFoundError("manifest not found: " + data.manifest);
        for (const auto& rel : read_manifest(data.manifest))
            files.push_back(root / rel);
    } else {
        for (const auto& rel : wav_files(root))
            files.push_back(root / rel);
    }
    if (files.empty())
        throw ConfigError("no training clips found under " + root.string());
    std::vector<AudioBuffer> clips;
    for (const auto& f : files)
        clips.push_back(load_wav(f));
    return clips;
}

std::vector<AblationRow> ablation_matrix(const ExperimentConfig& base)
{
    std::vector<AblationRow> rows;
    rows.push_back({"baseline", "baseline", base});
    AblationRow r{"w/o RCG", "wo_rcg", base};
    r.config.generator.use_rcg = false;
    rows.push_back(r);
    r = {"w/o NN upsampler", "wo_nn_upsampler", base};
    r.config.generator.use_nn_upsampler = false;
    rows.push_back(r);
    r = {"w/o mel condition", "wo_mel_condition", base};
    r.config.generator.use_mel_condition = false;
    rows.push_back(r);
    r = {"w/o RPD & RSD", "wo_rpd_rsd", base};
    r.config.discriminator.use_resolution_wise = false;
    rows.push_back(r);
    r = {"w/o DWT", "wo_dwt", base};
    r.config.discriminator.mode = DownsampleMode::avg_pool;
    rows.push_back(r);
    return rows;
}

std::vector<AblationResult> run_ablation(const std::vector<AblationRow>& rows, const std::vector<AudioBuffer>& clips,
                                         const AudioBuffer& eval_clip, const fs::path& out_dir,
                                         const std::function<void(const std::string&)>& progress)
{
    std::vector<AblationResult> results;
    for (const auto& row : rows) {
        if (progress)
            progress(row.name);
        Trainer t(row.config, clips);
        double last_mel = 0.0;
        t.run(static_cast<std::uint64_t>(row.config.train.steps), out_dir.empty() ? fs::path() : out_dir / row.slug,
              [&](std::uint64_t, const LossReport& r) { last_mel = r.mel; });
        const AudioBuffer synth = copy_synthesis(eval_clip, t.models().gcfg, t.models().generator);
        AblationResult res;
        res.name = row.name;
        res.final_mel_loss = last_mel;
        res.mcd13 = mcd13(eval_clip, synth);
        res.rmse_f0 = rmse_f0(eval_clip, synth);
        res.mel_l1 = mel_loss(eval_clip, synth);
        res.s3_share = t.contributions().entries.back().shares.back();
        for (double v : {res.final_mel_loss, res.mcd13, res.mel_l1, res.s3_share, res.rmse_f0.value_or(0.0)})
            if (!std::isfinite(v))
                throw NumericalError("ablation row \"" + row.name + "\" produced a non-finite metric");
        results.push_back(res);
    }
    return results;
}

std::string ablation_csv(const std::vector<AblationResult>& results)
{
    std::string s = "row,final_mel_loss,mcd13_db,rmse_f0_hz,mel_l1,s3_share_percent\n";
    for (const auto& r : results)
        s += "\"" + r.name + "\"," + fmt(r.final_mel_loss) + "," + fmt(r.mcd13) + "," +
             (r.rmse_f0 ? fmt(*r.rmse_f0) : std::string("undefined")) + "," + fmt(r.mel_l1) + "," +
             fmt(r.s3_share) + "\n";
    return s;
}

} // namespace fregan
