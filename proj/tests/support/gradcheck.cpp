#include "gradcheck.hpp"

#include "fregan/objectives.hpp"
#include "fregan/ops.hpp"

#include <cmath>
#include <random>

using namespace fregan;

namespace gradcheck {

GeneratorConfig tiny_generator()
{
    GeneratorConfig c;
    c.mel_channels = 4;
    c.pre_kernel = 3;
    c.base_channels = 2;
    c.mrf_kernel_sizes = {3};
    c.mrf_dilations = {{1, 1}};
    c.post_kernel = 3;
    c.init_std = 0.3;
    return c;
}

DiscriminatorConfig tiny_discriminators()
{
    DiscriminatorConfig c;
    c.rpd_channels = {1, 1};
    c.rpd_residual_levels = 1;
    c.rsd_channels = {1, 1, 1};
    c.rsd_kernels = {5, 5, 3};
    c.rsd_strides = {1, 2, 2};
    c.rsd_groups = {1, 1, 1};
    return c;
}

Point make_point(int seed, bool positive_discriminators)
{
    Point p;
    p.gcfg = tiny_generator();
    p.dcfg = tiny_discriminators();
    p.generator = init_generator(p.gcfg, seed);
    p.rpd = init_rpd(p.dcfg, seed + 100);
    p.rsd = init_rsd(p.dcfg, seed + 200);
    std::mt19937_64 rng(seed + 300);
    std::normal_distribution<double> nd(0.0, 1.0);
    if (positive_discriminators)
        for (ParamSet* ps : {&p.rpd, &p.rsd})
            for (auto& x : ps->items())
                for (auto& v : x.value.values())
                    v = std::abs(v);
    for (auto& x : p.generator.items())
        if (x.name.size() > 2 && x.name.compare(x.name.size() - 2, 2, ".b") == 0)
            for (auto& v : x.value.values())
                v = 0.3 * nd(rng);
    p.mel = Tensor(Dims{1, 4, 4, 1});
    for (auto& v : p.mel.values())
        v = nd(rng);
    p.real.resize(1024);
    for (auto& v : p.real)
        v = 0.6 + 0.15 * nd(rng);
    return p;
}

Evaluation evaluate(Point& p, Loss loss, bool backward)
{
    ops::BranchTrace trace;
    Tape tape(backward);
    ParamBinder g(tape, p.generator), rp(tape, p.rpd), rs(tape, p.rsd);
    const GeneratorVars gv = generator_forward(g, p.gcfg, tape.constant(p.mel));
    const Var real = tape.constant(Tensor::signal(p.real));
    const bool gen = loss == Loss::generator_total;
    const Var fake = gen ? gv.final : tape.constant(gv.final.value());
    const auto dr = discriminate(rp, rs, p.dcfg, real);
    const auto df = discriminate(rp, rs, p.dcfg, fake);
    std::vector<Var> sr, sf;
    std::vector<std::vector<Var>> fr, ff;
    for (std::size_t k = 0; k < dr.size(); ++k) {
        sr.push_back(dr[k].score);
        sf.push_back(df[k].score);
        fr.push_back(dr[k].features);
        ff.push_back(df[k].features);
    }
    const Var root = gen ? ops::weighted_sum({ops::sum(ops::g_adv_terms(sf)), ops::sum(ops::fm_terms(fr, ff)),
                                              ops::mel_loss(real, gv.final)},
                                             {1.0, 2.0, 45.0})
                         : ops::sum(ops::d_loss_terms(sr, sf));
    if (backward)
        tape.backward(root);
    return Evaluation{root.value()[0], trace.pattern()};
}

std::vector<Entry> scan(Point& p, Loss loss, double h)
{
    p.generator.zero_grad();
    p.rpd.zero_grad();
    p.rsd.zero_grad();
    const Evaluation base = evaluate(p, loss, true);
    std::vector<ParamSet*> sets{&p.rpd, &p.rsd};
    if (loss == Loss::generator_total)
        sets.insert(sets.begin(), &p.generator);
    std::vector<Entry> out;
    for (ParamSet* ps : sets)
        for (auto& x : ps->items())
            for (std::size_t i = 0; i < x.value.size(); ++i) {
                Entry e;
                e.param = x.name;
                e.index = i;
                e.analytic = x.grad[i];
                const double old = x.value[i];
                double fd[2];
                for (int k = 0; k < 2; ++k) {
                    const double step = k == 0 ? h : h / 2.0;
                    x.value[i] = old + step;
                    const Evaluation up = evaluate(p, loss, false);
                    x.value[i] = old - step;
                    const Evaluation down = evaluate(p, loss, false);
                    x.value[i] = old;
                    e.flipped = e.flipped || up.pattern != base.pattern || down.pattern != base.pattern;
                    fd[k] = (up.value - down.value) / (2.0 * step);
                }
                e.fd = fd[0];
                e.fd_half = fd[1];
                e.rel = std::abs(e.analytic - e.fd) / (std::abs(e.analytic) + 1e-8);
                out.push_back(e);
            }
    return out;
}

bool certified(const std::vector<Entry>& entries, double stability)
{
    for (const auto& e : entries) {
        if (e.flipped)
            return false;
        if (std::abs(e.fd - e.fd_half) > stability * (std::abs(e.fd_half) + 1e-8))
            return false;
    }
    return true;
}

std::size_t parameter_count(const Point& p)
{
    return p.generator.scalar_count() + p.rpd.scalar_count() + p.rsd.scalar_count();
}

} // namespace gradcheck
