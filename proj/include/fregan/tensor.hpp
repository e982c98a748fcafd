#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fregan {

// Every activation in the models is a 4-D block laid out as
// [batch, channel, height, width] with width fastest. One-dimensional
// signals use width 1, so a period reshape (L -> L/p x p) is a pure
// relabelling of the same memory.
struct Dims {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    std::size_t size() const
    {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Dims dims, double fill = 0.0);
    Tensor(Dims dims, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor(Dims{}, v); }
    // 1 x 1 x L x 1 signal view of a sample sequence.
    static Tensor signal(std::span<const double> samples);

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    const double& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int n, int c, int h, int w = 0) const
    {
        return ((static_cast<std::size_t>(n) * dims_.c + c) * dims_.h + h) * dims_.w + w;
    }
    double& at(int n, int c, int h, int w = 0) { return data_[index(n, c, h, w)]; }
    const double& at(int n, int c, int h, int w = 0) const { return data_[index(n, c, h, w)]; }

    // Same payload, different labelling; sizes must agree.
    Tensor reshaped(Dims d) const;
    void fill(double v);
    void add_inplace(const Tensor& other);

    bool all_finite() const;
    double sum() const;
    double sum_squares() const;

private:
    Dims dims_{0, 0, 0, 0};
    std::vector<double> data_;
};

} // namespace fregan
