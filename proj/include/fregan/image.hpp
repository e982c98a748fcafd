#pragma once

#include "fregan/trainer.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fregan {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // row-major RGB, top row first

    RgbImage() = default;
    RgbImage(int w, int h, std::array<std::uint8_t, 3> fill = {255, 255, 255});
    std::array<std::uint8_t, 3> get(int x, int y) const;
    void set(int x, int y, std::array<std::uint8_t, 3> c);
};

std::string encode_png(const RgbImage& img);
void write_png(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

// Perceptually ordered dark-blue to yellow ramp; t is clamped to [0, 1].
std::array<std::uint8_t, 3> colormap(double t);

// Row 0 of `values` (rows x cols, row-major) is drawn at the bottom. Each
// value occupies a scale x scale block.
RgbImage heatmap(const std::vector<double>& values, int rows, int cols, double vmin, double vmax, int scale = 1);

// Cumulative shares per entry: layer i is the sum of shares 0..i, so the top
// layer of every entry is the total (100 for a well-formed series).
std::vector<std::vector<double>> stacked_layers(const ContributionSeries& series);

// Stacked-area chart of a contribution series, one band colour per branch.
// Epochs run left to right, 0% at the bottom of the plot and 100% at the top.
struct StackedPlotLayout {
    int width = 640;
    int height = 360;
    int margin = 20;
};
RgbImage stacked_area_plot(const ContributionSeries& series, const StackedPlotLayout& layout = {});
std::array<std::uint8_t, 3> band_colour(std::size_t branch);

// Vertical stack of log-magnitude panels, each rows x cols (row 0 = lowest
// frequency), normalised jointly so panels are comparable.
struct Panel {
    std::vector<double> values;
    int rows = 0;
    int cols = 0;
};
RgbImage stacked_panels(const std::vector<Panel>& panels, int panel_height, int panel_width);

} // namespace fregan
