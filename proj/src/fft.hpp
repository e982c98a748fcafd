#pragma once

#include <complex>
#include <vector>

#include <fftw3.h>

namespace fregan::detail {

// Thin RAII wrappers over FFTW plans created for unaligned new-array execution,
// so one plan can be shared by every caller.
class RealFft {
public:
    explicit RealFft(int n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return n_; }
    // in: n reals, out: n/2+1 bins.
    void forward(const double* in, std::complex<double>* out) const;

private:
    int n_;
    fftw_plan plan_;
};

class ComplexFft {
public:
    explicit ComplexFft(int n);
    ~ComplexFft();
    ComplexFft(const ComplexFft&) = delete;
    ComplexFft& operator=(const ComplexFft&) = delete;

    // out[m] = sum_k in[k] exp(-2 pi i k m / n)
    void forward(const std::complex<double>* in, std::complex<double>* out) const;

private:
    int n_;
    fftw_plan plan_;
};

} // namespace fregan::detail
