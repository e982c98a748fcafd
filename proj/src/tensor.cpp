#include "fregan/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace fregan {

std::string to_string(const Dims& d)
{
    return "[" + std::to_string(d.n) + "," + std::to_string(d.c) + "," + std::to_string(d.h) +
           "," + std::to_string(d.w) + "]";
}

Tensor::Tensor(Dims dims, double fill) : dims_(dims), data_(dims.size(), fill) {}

Tensor::Tensor(Dims dims, std::vector<double> values) : dims_(dims), data_(std::move(values))
{
    if (data_.size() != dims_.size())
        throw std::invalid_argument("tensor payload size " + std::to_string(data_.size()) +
                                    " does not match dims " + to_string(dims_));
}

Tensor Tensor::signal(std::span<const double> samples)
{
    return Tensor(Dims{1, 1, static_cast<int>(samples.size()), 1},
                  std::vector<double>(samples.begin(), samples.end()));
}

Tensor Tensor::reshaped(Dims d) const
{
    if (d.size() != data_.size())
        throw std::invalid_argument("cannot reshape " + to_string(dims_) + " to " + to_string(d));
    Tensor out = *this;
    out.dims_ = d;
    return out;
}

void Tensor::fill(double v)
{
    for (auto& x : data_)
        x = v;
}

void Tensor::add_inplace(const Tensor& other)
{
    if (other.size() != size())
        throw std::invalid_argument("add_inplace size mismatch " + to_string(dims_) + " vs " +
                                    to_string(other.dims_));
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += other.data_[i];
}

bool Tensor::all_finite() const
{
    for (double x : data_)
        if (!std::isfinite(x))
            return false;
    return true;
}

double Tensor::sum() const
{
    double s = 0.0;
    for (double x : data_)
        s += x;
    return s;
}

double Tensor::sum_squares() const
{
    double s = 0.0;
    for (double x : data_)
        s += x * x;
    return s;
}

} // namespace fregan
