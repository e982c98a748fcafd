#include "fregan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fregan::ops {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw std::invalid_argument(what);
}

int ceil_div(int a, int b)
{
    // b > 0; works for negative a.
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

int floor_div(int a, int b)
{
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Output rows ho in [lo, hi] for which ho*stride + offset lands in [0, in_len).
struct RowRange {
    int lo;
    int hi;
};

RowRange valid_rows(int offset, int stride, int in_len, int out_len)
{
    int lo = std::max(0, ceil_div(-offset, stride));
    int hi = std::min(out_len - 1, floor_div(in_len - 1 - offset, stride));
    return {lo, hi};
}

} // namespace

int conv_output_length(int length, int kernel, ConvSpec spec)
{
    return (length + 2 * spec.padding - spec.dilation * (kernel - 1) - 1) / spec.stride + 1;
}

Var conv(Var x, Var weight, Var bias, ConvSpec spec)
{
    const Tensor& in = x.value();
    const Tensor& wt = weight.value();
    const Dims xd = in.dims();
    const Dims wd = wt.dims();
    const int cout = wd.n;
    const int kernel = wd.h;
    require(spec.groups >= 1 && xd.c % spec.groups == 0 && cout % spec.groups == 0,
            "conv: groups " + std::to_string(spec.groups) + " must divide channels " +
                std::to_string(xd.c) + "->" + std::to_string(cout));
    const int cin_g = xd.c / spec.groups;
    const int cout_g = cout / spec.groups;
    require(wd.c == cin_g && wd.w == 1,
            "conv: weight " + to_string(wd) + " incompatible with input " + to_string(xd));
    const int hout = conv_output_length(xd.h, kernel, spec);
    require(hout >= 1, "conv: input length " + std::to_string(xd.h) + " too short for kernel " +
                           std::to_string(kernel));
    if (bias.valid())
        require(bias.value().size() == static_cast<std::size_t>(cout), "conv: bias size mismatch");

    const int W = xd.w;
    Tensor out(Dims{xd.n, cout, hout, W});
    for (int n = 0; n < xd.n; ++n) {
        for (int co = 0; co < cout; ++co) {
            double* y = &out.at(n, co, 0);
            if (bias.valid()) {
                const double b = bias.value()[co];
                for (int i = 0; i < hout * W; ++i)
                    y[i] = b;
            }
            const int g = co / cout_g;
            for (int cl = 0; cl < cin_g; ++cl) {
                const double* xs = &in.at(n, g * cin_g + cl, 0);
                for (int k = 0; k < kernel; ++k) {
                    const double wv = wt.at(co, cl, k);
                    const int offset = k * spec.dilation - spec.padding;
                    const auto [lo, hi] = valid_rows(offset, spec.stride, xd.h, hout);
                    if (lo > hi)
                        continue;
                    if (spec.stride == 1) {
                        const double* src = xs + static_cast<std::ptrdiff_t>(lo + offset) * W;
                        double* dst = y + static_cast<std::ptrdiff_t>(lo) * W;
                        const int count = (hi - lo + 1) * W;
                        for (int i = 0; i < count; ++i)
                            dst[i] += wv * src[i];
                    } else {
                        for (int ho = lo; ho <= hi; ++ho) {
                            const double* src = xs + static_cast<std::ptrdiff_t>(ho * spec.stride + offset) * W;
                            double* dst = y + static_cast<std::ptrdiff_t>(ho) * W;
                            for (int w = 0; w < W; ++w)
                                dst[w] += wv * src[w];
                        }
                    }
                }
            }
        }
    }

    return x.tape->emit(std::move(out), {x, weight, bias}, [x, weight, bias, spec, hout, cin_g, cout_g](Tape& tape, const Tensor& gy) {
        const Tensor& in = tape.value(x.id);
        const Tensor& wt = tape.value(weight.id);
        const Dims xd = in.dims();
        const int kernel = wt.dims().h;
        const int cout = wt.dims().n;
        const int W = xd.w;
        Tensor* gx = tape.needs_grad(x.id) ? &tape.grad(x.id) : nullptr;
        Tensor* gw = tape.needs_grad(weight.id) ? &tape.grad(weight.id) : nullptr;
        Tensor* gb = bias.valid() && tape.needs_grad(bias.id) ? &tape.grad(bias.id) : nullptr;
        for (int n = 0; n < xd.n; ++n) {
            for (int co = 0; co < cout; ++co) {
                const double* dy = &gy.at(n, co, 0);
                if (gb) {
                    double s = 0.0;
                    for (int i = 0; i < hout * W; ++i)
                        s += dy[i];
                    (*gb)[co] += s;
                }
                const int g = co / cout_g;
                for (int cl = 0; cl < cin_g; ++cl) {
                    const int ci = g * cin_g + cl;
                    const double* xs = &in.at(n, ci, 0);
                    double* dxs = gx ? &gx->at(n, ci, 0) : nullptr;
                    for (int k = 0; k < kernel; ++k) {
                        const double wv = wt.at(co, cl, k);
                        const int offset = k * spec.dilation - spec.padding;
                        const auto [lo, hi] = valid_rows(offset, spec.stride, xd.h, hout);
                        if (lo > hi)
                            continue;
                        double acc = 0.0;
                        if (spec.stride == 1) {
                            const std::ptrdiff_t s0 = static_cast<std::ptrdiff_t>(lo + offset) * W;
                            const std::ptrdiff_t d0 = static_cast<std::ptrdiff_t>(lo) * W;
                            const int count = (hi - lo + 1) * W;
                            for (int i = 0; i < count; ++i)
                                acc += dy[d0 + i] * xs[s0 + i];
                            if (dxs)
                                for (int i = 0; i < count; ++i)
                                    dxs[s0 + i] += wv * dy[d0 + i];
                        } else {
                            for (int ho = lo; ho <= hi; ++ho) {
                                const std::ptrdiff_t s0 = static_cast<std::ptrdiff_t>(ho * spec.stride + offset) * W;
                                const std::ptrdiff_t d0 = static_cast<std::ptrdiff_t>(ho) * W;
                                for (int w = 0; w < W; ++w) {
                                    acc += dy[d0 + w] * xs[s0 + w];
                                    if (dxs)
                                        dxs[s0 + w] += wv * dy[d0 + w];
                                }
                            }
                        }
                        if (gw)
                            gw->at(co, cl, k) += acc;
                    }
                }
            }
        }
    });
}

int conv_transpose_output_length(int length, int kernel, ConvTransposeSpec spec)
{
    return (length - 1) * spec.stride - 2 * spec.padding + kernel;
}

Var conv_transpose(Var x, Var weight, Var bias, ConvTransposeSpec spec)
{
    const Tensor& in = x.value();
    const Tensor& wt = weight.value();
    const Dims xd = in.dims();
    const Dims wd = wt.dims();
    require(xd.w == 1, "conv_transpose: width must be 1, got " + to_string(xd));
    require(wd.n == xd.c && wd.w == 1,
            "conv_transpose: weight " + to_string(wd) + " incompatible with input " + to_string(xd));
    const int cout = wd.c;
    const int kernel = wd.h;
    const int hout = conv_transpose_output_length(xd.h, kernel, spec);
    require(hout >= 1, "conv_transpose: empty output");
    if (bias.valid())
        require(bias.value().size() == static_cast<std::size_t>(cout),
                "conv_transpose: bias size mismatch");

    Tensor out(Dims{xd.n, cout, hout, 1});
    for (int n = 0; n < xd.n; ++n) {
        for (int co = 0; co < cout; ++co) {
            double* y = &out.at(n, co, 0);
            if (bias.valid()) {
                const double b = bias.value()[co];
                for (int i = 0; i < hout; ++i)
                    y[i] = b;
            }
            for (int ci = 0; ci < xd.c; ++ci) {
                const double* xs = &in.at(n, ci, 0);
                for (int k = 0; k < kernel; ++k) {
                    const double wv = wt.at(ci, co, k);
                    const int offset = k - spec.padding;
                    // input rows hi with 0 <= hi*stride + offset < hout
                    const auto [lo, hi] = valid_rows(offset, spec.stride, hout, xd.h);
                    for (int h = lo; h <= hi; ++h)
                        y[h * spec.stride + offset] += wv * xs[h];
                }
            }
        }
    }

    return x.tape->emit(std::move(out), {x, weight, bias}, [x, weight, bias, spec, hout](Tape& tape, const Tensor& gy) {
        const Tensor& in = tape.value(x.id);
        const Tensor& wt = tape.value(weight.id);
        const Dims xd = in.dims();
        const int cout = wt.dims().c;
        const int kernel = wt.dims().h;
        Tensor* gx = tape.needs_grad(x.id) ? &tape.grad(x.id) : nullptr;
        Tensor* gw = tape.needs_grad(weight.id) ? &tape.grad(weight.id) : nullptr;
        Tensor* gb = bias.valid() && tape.needs_grad(bias.id) ? &tape.grad(bias.id) : nullptr;
        for (int n = 0; n < xd.n; ++n) {
            for (int co = 0; co < cout; ++co) {
                const double* dy = &gy.at(n, co, 0);
                if (gb) {
                    double s = 0.0;
                    for (int i = 0; i < hout; ++i)
                        s += dy[i];
                    (*gb)[co] += s;
                }
                for (int ci = 0; ci < xd.c; ++ci) {
                    const double* xs = &in.at(n, ci, 0);
                    double* dxs = gx ? &gx->at(n, ci, 0) : nullptr;
                    for (int k = 0; k < kernel; ++k) {
                        const double wv = wt.at(ci, co, k);
                        const int offset = k - spec.padding;
                        const auto [lo, hi] = valid_rows(offset, spec.stride, hout, xd.h);
                        double acc = 0.0;
                        for (int h = lo; h <= hi; ++h) {
                            const double d = dy[h * spec.stride + offset];
                            acc += d * xs[h];
                            if (dxs)
                                dxs[h] += wv * d;
                        }
                        if (gw)
                            gw->at(ci, co, k) += acc;
                    }
                }
            }
        }
    });
}

Var weight_norm(Var v, Var g)
{
    const Tensor& vt = v.value();
    const Tensor& gt = g.value();
    const int rows = vt.dims().n;
    require(gt.size() == static_cast<std::size_t>(rows),
            "weight_norm: gain size " + std::to_string(gt.size()) + " != leading dim " +
                std::to_string(rows));
    const std::size_t slice = vt.size() / rows;
    std::vector<double> norms(rows);
    Tensor out(vt.dims());
    for (int r = 0; r < rows; ++r) {
        const double* src = vt.data() + r * slice;
        double ss = 0.0;
        for (std::size_t i = 0; i < slice; ++i)
            ss += src[i] * src[i];
        norms[r] = std::sqrt(ss);
        require(norms[r] != 0.0, "weight_norm: zero direction vector");
        // Dividing first keeps a one-element direction at exactly +-1.
        for (std::size_t i = 0; i < slice; ++i)
            out[r * slice + i] = gt[r] * (src[i] / norms[r]);
    }
    return v.tape->emit(std::move(out), {v, g}, [v, g, norms, slice](Tape& tape, const Tensor& gw) {
        const Tensor& vt = tape.value(v.id);
        const Tensor& gt = tape.value(g.id);
        Tensor* gv = tape.needs_grad(v.id) ? &tape.grad(v.id) : nullptr;
        Tensor* gg = tape.needs_grad(g.id) ? &tape.grad(g.id) : nullptr;
        for (std::size_t r = 0; r < norms.size(); ++r) {
            const double* vs = vt.data() + r * slice;
            const double* ws = gw.data() + r * slice;
            double dot = 0.0;
            for (std::size_t i = 0; i < slice; ++i)
                dot += ws[i] * vs[i];
            const double nrm = norms[r];
            if (gg)
                (*gg)[r] += dot / nrm;
            if (gv) {
                const double a = gt[r] / nrm;
                const double b = gt[r] * dot / (nrm * nrm * nrm);
                double* dv = gv->data() + r * slice;
                for (std::size_t i = 0; i < slice; ++i)
                    dv[i] += a * ws[i] - b * vs[i];
            }
        }
    });
}

Var add(Var a, Var b)
{
    require(a.dims() == b.dims(), "add: dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    Tensor out = a.value();
    out.add_inplace(b.value());
    return a.tape->emit(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
        if (tape.needs_grad(a.id))
            tape.grad(a.id).add_inplace(g);
        if (tape.needs_grad(b.id))
            tape.grad(b.id).add_inplace(g);
    });
}

Var scale(Var a, double s)
{
    Tensor out = a.value();
    for (auto& x : out.values())
        x *= s;
    return a.tape->emit(std::move(out), {a}, [a, s](Tape& tape, const Tensor& g) {
        Tensor& ga = tape.grad(a.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += s * g[i];
    });
}

namespace {
thread_local BranchTrace* active_trace = nullptr;
} // namespace

BranchTrace::BranchTrace() : previous_(active_trace)
{
    active_trace = this;
}

BranchTrace::~BranchTrace()
{
    active_trace = previous_;
}

void BranchTrace::note(std::uint8_t side)
{
    if (active_trace)
        active_trace->pattern_.push_back(side);
}

bool BranchTrace::active()
{
    return active_trace != nullptr;
}

Var leaky_relu(Var a, double slope)
{
    Tensor out = a.value();
    if (active_trace)
        for (double x : out.values())
            BranchTrace::note(x < 0.0);
    for (auto& x : out.values())
        if (x < 0.0)
            x *= slope;
    return a.tape->emit(std::move(out), {a}, [a, slope](Tape& tape, const Tensor& g) {
        const Tensor& in = tape.value(a.id);
        Tensor& ga = tape.grad(a.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += in[i] < 0.0 ? slope * g[i] : g[i];
    });
}

Var tanh(Var a)
{
    Tensor out = a.value();
    for (auto& x : out.values())
        x = std::tanh(x);
    const int self = static_cast<int>(a.tape->node_count());
    return a.tape->emit(std::move(out), {a}, [a, self](Tape& tape, const Tensor& g) {
        const Tensor& y = tape.value(self);
        Tensor& ga = tape.grad(a.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += (1.0 - y[i] * y[i]) * g[i];
    });
}

Var repeat_h(Var x, int factor)
{
    require(factor >= 1, "repeat_h: factor must be >= 1, got " + std::to_string(factor));
    const Dims d = x.dims();
    const Tensor& in = x.value();
    Tensor out(Dims{d.n, d.c, d.h * factor, d.w});
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int h = 0; h < d.h; ++h)
                for (int r = 0; r < factor; ++r)
                    for (int w = 0; w < d.w; ++w)
                        out.at(n, c, h * factor + r, w) = in.at(n, c, h, w);
    return x.tape->emit(std::move(out), {x}, [x, factor](Tape& tape, const Tensor& g) {
        const Dims d = tape.value(x.id).dims();
        Tensor& gx = tape.grad(x.id);
        for (int n = 0; n < d.n; ++n)
            for (int c = 0; c < d.c; ++c)
                for (int h = 0; h < d.h; ++h)
                    for (int r = 0; r < factor; ++r)
                        for (int w = 0; w < d.w; ++w)
                            gx.at(n, c, h, w) += g.at(n, c, h * factor + r, w);
    });
}

namespace {

Var pad_right(Var x, int amount, bool reflect)
{
    const Dims d = x.dims();
    require(amount >= 0, "pad: negative amount");
    if (reflect)
        require(amount <= d.h - 1, "pad_reflect_right: amount " + std::to_string(amount) +
                                       " needs length > " + std::to_string(amount));
    if (amount == 0)
        return x;
    auto source = [d, reflect](int h) { return h < d.h ? h : (reflect ? 2 * d.h - 2 - h : -1); };
    const Tensor& in = x.value();
    Tensor out(Dims{d.n, d.c, d.h + amount, d.w});
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int h = 0; h < d.h + amount; ++h) {
                const int s = source(h);
                if (s >= 0)
                    for (int w = 0; w < d.w; ++w)
                        out.at(n, c, h, w) = in.at(n, c, s, w);
            }
    return x.tape->emit(std::move(out), {x}, [x, d, source, amount](Tape& tape, const Tensor& g) {
        Tensor& gx = tape.grad(x.id);
        for (int n = 0; n < d.n; ++n)
            for (int c = 0; c < d.c; ++c)
                for (int h = 0; h < d.h + amount; ++h) {
                    const int s = source(h);
                    if (s >= 0)
                        for (int w = 0; w < d.w; ++w)
                            gx.at(n, c, s, w) += g.at(n, c, h, w);
                }
    });
}

} // namespace

Var pad_reflect_right(Var x, int amount)
{
    return pad_right(x, amount, true);
}

Var pad_zero_right(Var x, int amount)
{
    return pad_right(x, amount, false);
}

Var reshape(Var x, Dims dims)
{
    Tensor out = x.value().reshaped(dims);
    return x.tape->emit(std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
        Tensor& gx = tape.grad(x.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += g[i];
    });
}

Var concat_channels(const std::vector<Var>& parts)
{
    require(!parts.empty(), "concat_channels: no inputs");
    const Dims d0 = parts.front().dims();
    int channels = 0;
    for (const Var& p : parts) {
        const Dims d = p.dims();
        require(d.n == d0.n && d.h == d0.h && d.w == d0.w,
                "concat_channels: " + to_string(d) + " vs " + to_string(d0));
        channels += d.c;
    }
    Tensor out(Dims{d0.n, channels, d0.h, d0.w});
    const std::size_t plane = static_cast<std::size_t>(d0.h) * d0.w;
    for (int n = 0; n < d0.n; ++n) {
        int c0 = 0;
        for (const Var& p : parts) {
            const Tensor& t = p.value();
            for (int c = 0; c < t.dims().c; ++c)
                std::copy_n(&t.at(n, c, 0), plane, &out.at(n, c0 + c, 0));
            c0 += t.dims().c;
        }
    }
    return parts.front().tape->emit(std::move(out), parts, [parts, plane](Tape& tape, const Tensor& g) {
        const int batch = g.dims().n;
        for (int n = 0; n < batch; ++n) {
            int c0 = 0;
            for (const Var& p : parts) {
                const int pc = tape.value(p.id).dims().c;
                if (tape.needs_grad(p.id)) {
                    Tensor& gp = tape.grad(p.id);
                    for (int c = 0; c < pc; ++c) {
                        const double* src = &g.at(n, c0 + c, 0);
                        double* dst = &gp.at(n, c, 0);
                        for (std::size_t i = 0; i < plane; ++i)
                            dst[i] += src[i];
                    }
                }
                c0 += pc;
            }
        }
    });
}

Var haar_analysis(Var x)
{
    const Dims d = x.dims();
    require(d.w == 1, "haar_analysis: width must be 1");
    require(d.h >= 1, "haar_analysis: empty input");
    const int half = (d.h + 1) / 2;
    const double r = 1.0 / std::sqrt(2.0);
    const Tensor& in = x.value();
    Tensor out(Dims{d.n, 2 * d.c, half, 1});
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c) {
            const double* s = &in.at(n, c, 0);
            double* lo = &out.at(n, 2 * c, 0);
            double* hi = &out.at(n, 2 * c + 1, 0);
            for (int j = 0; j < half; ++j) {
                const double a = s[2 * j];
                const double b = 2 * j + 1 < d.h ? s[2 * j + 1] : 0.0;
                lo[j] = r * (a + b);
                hi[j] = r * (a - b);
            }
        }
    return x.tape->emit(std::move(out), {x}, [x, d, half, r](Tape& tape, const Tensor& g) {
        Tensor& gx = tape.grad(x.id);
        for (int n = 0; n < d.n; ++n)
            for (int c = 0; c < d.c; ++c) {
                double* dx = &gx.at(n, c, 0);
                const double* glo = &g.at(n, 2 * c, 0);
                const double* ghi = &g.at(n, 2 * c + 1, 0);
                for (int j = 0; j < half; ++j) {
                    dx[2 * j] += r * (glo[j] + ghi[j]);
                    if (2 * j + 1 < d.h)
                        dx[2 * j + 1] += r * (glo[j] - ghi[j]);
                }
            }
    });
}

Var avg_pool2(Var x)
{
    const Dims d = x.dims();
    require(d.w == 1, "avg_pool2: width must be 1");
    const int half = (d.h + 1) / 2;
    const Tensor& in = x.value();
    Tensor out(Dims{d.n, d.c, half, 1});
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c) {
            const double* s = &in.at(n, c, 0);
            double* o = &out.at(n, c, 0);
            for (int j = 0; j < half; ++j)
                o[j] = 0.5 * (s[2 * j] + (2 * j + 1 < d.h ? s[2 * j + 1] : 0.0));
        }
    return x.tape->emit(std::move(out), {x}, [x, d, half](Tape& tape, const Tensor& g) {
        Tensor& gx = tape.grad(x.id);
        for (int n = 0; n < d.n; ++n)
            for (int c = 0; c < d.c; ++c) {
                double* dx = &gx.at(n, c, 0);
                const double* go = &g.at(n, c, 0);
                for (int j = 0; j < half; ++j) {
                    dx[2 * j] += 0.5 * go[j];
                    if (2 * j + 1 < d.h)
                        dx[2 * j + 1] += 0.5 * go[j];
                }
            }
    });
}

Var mean_squared_error(Var a, double target)
{
    const Tensor& t = a.value();
    require(t.size() > 0, "mean_squared_error: empty input");
    double s = 0.0;
    for (double v : t.values())
        s += (v - target) * (v - target);
    const double inv = 1.0 / static_cast<double>(t.size());
    return a.tape->emit(Tensor::scalar(s * inv), {a}, [a, target, inv](Tape& tape, const Tensor& g) {
        const Tensor& t = tape.value(a.id);
        Tensor& ga = tape.grad(a.id);
        const double k = 2.0 * inv * g[0];
        for (std::size_t i = 0; i < t.size(); ++i)
            ga[i] += k * (t[i] - target);
    });
}

Var mean_abs_diff(Var a, Var b)
{
    require(a.dims() == b.dims(),
            "mean_abs_diff: dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    const Tensor& ta = a.value();
    const Tensor& tb = b.value();
    require(ta.size() > 0, "mean_abs_diff: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        s += std::abs(ta[i] - tb[i]);
        if (active_trace)
            BranchTrace::note(ta[i] > tb[i] ? 2 : (ta[i] < tb[i] ? 0 : 1));
    }
    const double inv = 1.0 / static_cast<double>(ta.size());
    return a.tape->emit(Tensor::scalar(s * inv), {a, b}, [a, b, inv](Tape& tape, const Tensor& g) {
        const Tensor& ta = tape.value(a.id);
        const Tensor& tb = tape.value(b.id);
        Tensor* ga = tape.needs_grad(a.id) ? &tape.grad(a.id) : nullptr;
        Tensor* gb = tape.needs_grad(b.id) ? &tape.grad(b.id) : nullptr;
        const double k = inv * g[0];
        for (std::size_t i = 0; i < ta.size(); ++i) {
            const double diff = ta[i] - tb[i];
            const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            if (ga)
                (*ga)[i] += k * sgn;
            if (gb)
                (*gb)[i] -= k * sgn;
        }
    });
}

Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights)
{
    require(!scalars.empty() && scalars.size() == weights.size(), "weighted_sum: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        require(scalars[i].value().size() == 1, "weighted_sum: inputs must be scalars");
        s += weights[i] * scalars[i].value()[0];
    }
    return scalars.front().tape->emit(Tensor::scalar(s), scalars, [scalars, weights](Tape& tape, const Tensor& g) {
        for (std::size_t i = 0; i < scalars.size(); ++i)
            if (tape.needs_grad(scalars[i].id))
                tape.grad(scalars[i].id)[0] += weights[i] * g[0];
    });
}

} // namespace fregan::ops
