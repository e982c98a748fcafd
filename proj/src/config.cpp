#include "fregan/config.hpp"

#include "fregan/errors.hpp"
#include "fregan/io_util.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace fregan {

using nlohmann::json;

void TrainConfig::validate() const
{
    auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
    if (batch_size < 1)
        fail("batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        fail("learning_rate must be finite and > 0");
    if (!(lr_decay > 0.0) || lr_decay > 1.0)
        fail("lr_decay must lie in (0, 1]");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        fail("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0) || !(weight_decay >= 0.0))
        fail("adam_eps must be > 0 and weight_decay >= 0");
    if (segment_length < kWindowSize || segment_length % kHopSize != 0)
        fail("segment_length must be a multiple of " + std::to_string(kHopSize) + " and at least " +
             std::to_string(kWindowSize));
    if (steps < 0)
        fail("steps must be >= 0");
    double total = 0.0;
    for (double r : split) {
        if (!(r >= 0.0))
            fail("split ratios must be non-negative");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9)
        fail("split ratios must sum to 1");
    if (checkpoint_every < 0 || contribution_every < 1)
        fail("checkpoint_every must be >= 0 and contribution_every >= 1");
}

void ExperimentConfig::validate() const
{
    generator.validate();
    discriminator.validate();
    train.validate();
    loss.validate();
}

ExperimentConfig ExperimentConfig::micro()
{
    ExperimentConfig c;
    c.generator = GeneratorConfig::micro_v2();
    c.discriminator = DiscriminatorConfig::micro();
    c.train.batch_size = 1;
    return c;
}

json to_json(const GeneratorConfig& c)
{
    return json{{"mel_channels", c.mel_channels},
                {"pre_kernel", c.pre_kernel},
                {"upsample_rates", c.upsample_rates},
                {"upsample_kernels", c.upsample_kernels},
                {"mrf_kernel_sizes", c.mrf_kernel_sizes},
                {"mrf_dilations", c.mrf_dilations},
                {"base_channels", c.base_channels},
                {"top_k", c.top_k},
                {"post_kernel", c.post_kernel},
                {"use_rcg", c.use_rcg},
                {"use_nn_upsampler", c.use_nn_upsampler},
                {"use_mel_condition", c.use_mel_condition},
                {"leaky_slope", c.leaky_slope},
                {"init_std", c.init_std}};
}

json to_json(const DiscriminatorConfig& c)
{
    return json{{"periods", c.periods},
                {"rsd_levels", c.rsd_levels},
                {"mode", to_string(c.mode)},
                {"use_resolution_wise", c.use_resolution_wise},
                {"rpd_channels", c.rpd_channels},
                {"rpd_kernel", c.rpd_kernel},
                {"rpd_plain_stride", c.rpd_plain_stride},
                {"rpd_post_kernel", c.rpd_post_kernel},
                {"rpd_residual_levels", c.rpd_residual_levels},
                {"rsd_channels", c.rsd_channels},
                {"rsd_kernels", c.rsd_kernels},
                {"rsd_strides", c.rsd_strides},
                {"rsd_groups", c.rsd_groups},
                {"rsd_post_kernel", c.rsd_post_kernel},
                {"rsd_residual_levels", c.rsd_residual_levels},
                {"leaky_slope", c.leaky_slope}};
}

json to_json(const TrainConfig& c)
{
    return json{{"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"lr_decay", c.lr_decay},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"weight_decay", c.weight_decay},
                {"segment_length", c.segment_length},
                {"steps", c.steps},
                {"seed", c.seed},
                {"split", c.split},
                {"checkpoint_every", c.checkpoint_every},
                {"contribution_every", c.contribution_every}};
}

json to_json(const ExperimentConfig& c)
{
    return json{{"generator", to_json(c.generator)},
                {"discriminator", to_json(c.discriminator)},
                {"train", to_json(c.train)},
                {"loss", json{{"lambda_fm", c.loss.lambda_fm}, {"lambda_mel", c.loss.lambda_mel}}},
                {"data", json{{"root", c.data.root}, {"manifest", c.data.manifest}, {"probe", c.data.probe}}}};
}

namespace {

// Reads fields out of one JSON object and remembers which keys were used.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object())
            throw ConfigError("config section \"" + where_ + "\" must be an object");
    }

    template <typename T>
    void read(const char* key, T& field)
    {
        used_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end())
            return;
        try {
            field = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key \"" + path(key) + "\" has the wrong type: " + it->dump());
        }
    }

    const json* find(const char* key)
    {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (used_.count(it.key()) == 0)
                throw ConfigError("unknown config key \"" + path(it.key()) + "\"");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

GeneratorConfig generator_preset(const std::string& name)
{
    if (name == "v1")
        return GeneratorConfig::v1();
    if (name == "v2")
        return GeneratorConfig::v2();
    if (name == "micro_v1")
        return GeneratorConfig::micro_v1();
    if (name == "micro_v2")
        return GeneratorConfig::micro_v2();
    throw ConfigError("unknown generator preset \"" + name + "\" (v1, v2, micro_v1, micro_v2)");
}

DiscriminatorConfig discriminator_preset(const std::string& name)
{
    if (name == "standard")
        return DiscriminatorConfig::standard();
    if (name == "micro")
        return DiscriminatorConfig::micro();
    throw ConfigError("unknown discriminator preset \"" + name + "\" (standard, micro)");
}

} // namespace

GeneratorConfig generator_config_from_json(const json& j, const std::string& where)
{
    Section s(j, where);
    GeneratorConfig c = GeneratorConfig::v1();
    std::string preset;
    s.read("preset", preset);
    if (!preset.empty())
        c = generator_preset(preset);
    s.read("mel_channels", c.mel_channels);
    s.read("pre_kernel", c.pre_kernel);
    s.read("upsample_rates", c.upsample_rates);
    s.read("upsample_kernels", c.upsample_kernels);
    s.read("mrf_kernel_sizes", c.mrf_kernel_sizes);
    s.read("mrf_dilations", c.mrf_dilations);
    s.read("base_channels", c.base_channels);
    s.read("top_k", c.top_k);
    s.read("post_kernel", c.post_kernel);
    s.read("use_rcg", c.use_rcg);
    s.read("use_nn_upsampler", c.use_nn_upsampler);
    s.read("use_mel_condition", c.use_mel_condition);
    s.read("leaky_slope", c.leaky_slope);
    s.read("init_std", c.init_std);
    s.finish();
    return c;
}

DiscriminatorConfig discriminator_config_from_json(const json& j, const std::string& where)
{
    Section s(j, where);
    DiscriminatorConfig c;
    std::string preset;
    s.read("preset", preset);
    if (!preset.empty())
        c = discriminator_preset(preset);
    s.read("periods", c.periods);
    s.read("rsd_levels", c.rsd_levels);
    std::string mode = to_string(c.mode);
    s.read("mode", mode);
    c.mode = parse_downsample_mode(mode);
    s.read("use_resolution_wise", c.use_resolution_wise);
    s.read("rpd_channels", c.rpd_channels);
    s.read("rpd_kernel", c.rpd_kernel);
    s.read("rpd_plain_stride", c.rpd_plain_stride);
    s.read("rpd_post_kernel", c.rpd_post_kernel);
    s.read("rpd_residual_levels", c.rpd_residual_levels);
    s.read("rsd_channels", c.rsd_channels);
    s.read("rsd_kernels", c.rsd_kernels);
    s.read("rsd_strides", c.rsd_strides);
    s.read("rsd_groups", c.rsd_groups);
    s.read("rsd_post_kernel", c.rsd_post_kernel);
    s.read("rsd_residual_levels", c.rsd_residual_levels);
    s.read("leaky_slope", c.leaky_slope);
    s.finish();
    return c;
}

ExperimentConfig experiment_config_from_json(const json& j)
{
    if (!j.is_object())
        throw ConfigError("config root must be an object");
    Section root(j, "");
    ExperimentConfig c;
    std::string preset;
    root.read("preset", preset);
    if (preset == "micro")
        c = ExperimentConfig::micro();
    else if (!preset.empty() && preset != "standard")
        throw ConfigError("unknown experiment preset \"" + preset + "\" (standard, micro)");

    if (const json* g = root.find("generator")) {
        json merged = to_json(c.generator);
        if (!g->contains("preset"))
            merged.update(*g);
        c.generator = generator_config_from_json(g->contains("preset") ? *g : merged, "generator");
    }
    if (const json* d = root.find("discriminator")) {
        json merged = to_json(c.discriminator);
        if (!d->contains("preset"))
            merged.update(*d);
        c.discriminator = discriminator_config_from_json(d->contains("preset") ? *d : merged, "discriminator");
    }
    if (const json* t = root.find("train")) {
        Section s(*t, "train");
        TrainConfig& tc = c.train;
        s.read("batch_size", tc.batch_size);
        s.read("learning_rate", tc.learning_rate);
        s.read("lr_decay", tc.lr_decay);
        s.read("adam_beta1", tc.adam_beta1);
        s.read("adam_beta2", tc.adam_beta2);
        s.read("adam_eps", tc.adam_eps);
        s.read("weight_decay", tc.weight_decay);
        s.read("segment_length", tc.segment_length);
        s.read("steps", tc.steps);
        s.read("seed", tc.seed);
        s.read("split", tc.split);
        s.read("checkpoint_every", tc.checkpoint_every);
        s.read("contribution_every", tc.contribution_every);
        s.finish();
    }
    if (const json* l = root.find("loss")) {
        Section s(*l, "loss");
        s.read("lambda_fm", c.loss.lambda_fm);
        s.read("lambda_mel", c.loss.lambda_mel);
        s.finish();
    }
    if (const json* d = root.find("data")) {
        Section s(*d, "data");
        s.read("root", c.data.root);
        s.read("manifest", c.data.manifest);
        s.read("probe", c.data.probe);
        s.finish();
    }
    root.finish();
    c.validate();
    return c;
}

void apply_override(json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override \"" + assignment + "\" must look like key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty())
            throw ConfigError("override key \"" + key + "\" has an empty component");
        if (!node->is_object())
            throw ConfigError("override key \"" + key + "\" descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null())
            *node = json::object();
        start = dot + 1;
    }
}

json read_json_file(const std::filesystem::path& file)
{
    const std::string text = read_file_bytes(file);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + file.string() + ": " + e.what());
    }
}

void write_json_file(const json& j, const std::filesystem::path& file)
{
    write_file_atomic(file, j.dump(2) + "\n");
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file, const std::vector<std::string>& overrides)
{
    json doc = file.empty() ? json::object() : read_json_file(file);
    for (const auto& o : overrides)
        apply_override(doc, o);
    return experiment_config_from_json(doc);
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed)
{
    std::uint64_t h = seed;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t config_hash(const ExperimentConfig& c)
{
    json t = to_json(c.train);
    for (const char* k : {"steps", "checkpoint_every", "contribution_every", "split"})
        t.erase(k);
    const json shaped{{"generator", to_json(c.generator)},
                      {"discriminator", to_json(c.discriminator)},
                      {"train", t},
                      {"loss", json{{"lambda_fm", c.loss.lambda_fm}, {"lambda_mel", c.loss.lambda_mel}}}};
    return fnv1a(shaped.dump());
}

std::string hash_hex(std::uint64_t h)
{
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace fregan
