#include "fregan/image.hpp"

#include "fregan/errors.hpp"
#include "fregan/io_util.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fregan {

RgbImage::RgbImage(int w, int h, std::array<std::uint8_t, 3> fill) : width(w), height(h)
{
    if (w < 1 || h < 1)
        throw std::invalid_argument("image dimensions must be positive");
    pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3)
        std::copy(fill.begin(), fill.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i));
}

std::array<std::uint8_t, 3> RgbImage::get(int x, int y) const
{
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RgbImage::set(int x, int y, std::array<std::uint8_t, 3> c)
{
    if (x < 0 || y < 0 || x >= width || y >= height)
        return;
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    pixels[i] = c[0];
    pixels[i + 1] = c[1];
    pixels[i + 2] = c[2];
}

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t len)
{
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), len);
}

void no_flush(png_structp) {}

struct ReadCursor {
    const std::string* bytes;
    std::size_t pos;
};

void take_bytes(png_structp png, png_bytep data, png_size_t len)
{
    auto* c = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (len > c->bytes->size() - c->pos)
        png_error(png, "truncated PNG");
    std::memcpy(data, c->bytes->data() + c->pos, len);
    c->pos += len;
}

} // namespace

std::string encode_png(const RgbImage& img)
{
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    std::string out;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        throw std::runtime_error("PNG encoding failed");
    }
    png_set_write_fn(png, &out, append_bytes, no_flush);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const RgbImage& img, const std::filesystem::path& path)
{
    write_file_atomic(path, encode_png(img));
}

RgbImage read_png(const std::filesystem::path& path)
{
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
        throw FormatError(path.string() + " is not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    ReadCursor cursor{&bytes, 0};
    RgbImage img;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        throw FormatError(path.string() + " could not be decoded");
    }
    png_set_read_fn(png, &cursor, take_bytes);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

std::array<std::uint8_t, 3> colormap(double t)
{
    // Control points sampled from a viridis-like ramp.
    static const double stops[5][3] = {
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    if (!std::isfinite(t))
        t = 0.0;
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const int i = std::min(3, static_cast<int>(t));
    const double f = t - i;
    std::array<std::uint8_t, 3> c{};
    for (int k = 0; k < 3; ++k)
        c[k] = static_cast<std::uint8_t>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
    return c;
}

RgbImage heatmap(const std::vector<double>& values, int rows, int cols, double vmin, double vmax, int scale)
{
    if (static_cast<std::size_t>(rows) * cols != values.size() || rows < 1 || cols < 1 || scale < 1)
        throw std::invalid_argument("heatmap: values do not match rows x cols");
    const double span = vmax > vmin ? vmax - vmin : 1.0;
    RgbImage img(cols * scale, rows * scale);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const auto colour = colormap((values[static_cast<std::size_t>(r) * cols + c] - vmin) / span);
            for (int dy = 0; dy < scale; ++dy)
                for (int dx = 0; dx < scale; ++dx)
                    img.set(c * scale + dx, (rows - 1 - r) * scale + dy, colour);
        }
    return img;
}

std::vector<std::vector<double>> stacked_layers(const ContributionSeries& series)
{
    std::vector<std::vector<double>> out;
    for (const auto& e : series.entries) {
        std::vector<double> cum;
        double s = 0.0;
        for (double v : e.shares) {
            s += v;
            cum.push_back(s);
        }
        out.push_back(std::move(cum));
    }
    return out;
}

std::array<std::uint8_t, 3> band_colour(std::size_t branch)
{
    static const std::array<std::uint8_t, 3> palette[] = {
        {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}, {148, 103, 189}, {140, 86, 75}};
    return palette[branch % std::size(palette)];
}

RgbImage stacked_area_plot(const ContributionSeries& series, const StackedPlotLayout& layout)
{
    if (series.entries.empty())
        throw std::invalid_argument("stacked_area_plot: empty series");
    RgbImage img(layout.width, layout.height);
    const int x0 = layout.margin, x1 = layout.width - layout.margin;
    const int y0 = layout.margin, y1 = layout.height - layout.margin; // y1 is 0%
    const auto layers = stacked_layers(series);
    const double e_first = static_cast<double>(series.entries.front().epoch);
    const double e_last = static_cast<double>(series.entries.back().epoch);
    const std::size_t n = series.entries.size();
    for (int x = x0; x < x1; ++x) {
        // Piecewise-linear in epoch between recorded entries.
        const double u = (x - x0 + 0.5) / (x1 - x0);
        const double epoch = e_first + u * (e_last - e_first);
        std::size_t j = 0;
        while (j + 1 < n && static_cast<double>(series.entries[j + 1].epoch) <= epoch)
            ++j;
        std::vector<double> cum = layers[j];
        if (j + 1 < n) {
            const double ea = static_cast<double>(series.entries[j].epoch);
            const double eb = static_cast<double>(series.entries[j + 1].epoch);
            const double f = eb > ea ? (epoch - ea) / (eb - ea) : 0.0;
            for (std::size_t k = 0; k < cum.size(); ++k)
                cum[k] += f * (layers[j + 1][k] - cum[k]);
        }
        double below = 0.0;
        for (std::size_t k = 0; k < cum.size(); ++k) {
            const int top = y1 - static_cast<int>(std::lround(cum[k] / 100.0 * (y1 - y0)));
            const int bottom = y1 - static_cast<int>(std::lround(below / 100.0 * (y1 - y0)));
            for (int y = std::max(top, y0); y < bottom; ++y)
                img.set(x, y, band_colour(k));
            below = cum[k];
        }
    }
    const std::array<std::uint8_t, 3> axis{0, 0, 0};
    for (int x = x0 - 1; x <= x1; ++x)
        img.set(x, y1, axis);
    for (int y = y0; y <= y1; ++y)
        img.set(x0 - 1, y, axis);
    return img;
}

RgbImage stacked_panels(const std::vector<Panel>& panels, int panel_height, int panel_width)
{
    if (panels.empty() || panel_height < 1 || panel_width < 1)
        throw std::invalid_argument("stacked_panels: nothing to draw");
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& p : panels) {
        if (static_cast<std::size_t>(p.rows) * p.cols != p.values.size() || p.rows < 1 || p.cols < 1)
            throw std::invalid_argument("stacked_panels: panel values do not match rows x cols");
        for (double v : p.values) {
            const double db = 20.0 * std::log10(v + 1e-9);
            lo = std::min(lo, db);
            hi = std::max(hi, db);
        }
    }
    lo = std::max(lo, hi - 80.0);
    const int gap = 4;
    RgbImage img(panel_width, static_cast<int>(panels.size()) * (panel_height + gap) - gap);
    for (std::size_t i = 0; i < panels.size(); ++i) {
        const Panel& p = panels[i];
        const int top = static_cast<int>(i) * (panel_height + gap);
        for (int y = 0; y < panel_height; ++y) {
            const int row = std::min(p.rows - 1, (panel_height - 1 - y) * p.rows / panel_height);
            for (int x = 0; x < panel_width; ++x) {
                const int col = std::min(p.cols - 1, x * p.cols / panel_width);
                const double db = 20.0 * std::log10(p.values[static_cast<std::size_t>(row) * p.cols + col] + 1e-9);
                img.set(x, top + y, colormap((db - lo) / (hi - lo > 0 ? hi - lo : 1.0)));
            }
        }
    }
    return img;
}

} // namespace fregan
