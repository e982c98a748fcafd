#include "fft.hpp"

#include <mutex>
#include <stdexcept>

namespace fregan::detail {

namespace {
// Plan creation is the one FFTW entry point that is not thread-safe.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}
} // namespace

RealFft::RealFft(int n) : n_(n)
{
    if (n < 2)
        throw std::invalid_argument("RealFft: size must be >= 2");
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan_ == nullptr)
        throw std::runtime_error("fftw r2c plan creation failed");
}

RealFft::~RealFft()
{
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
}

void RealFft::forward(const double* in, std::complex<double>* out) const
{
    fftw_execute_dft_r2c(plan_, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
}

ComplexFft::ComplexFft(int n) : n_(n)
{
    if (n < 2)
        throw std::invalid_argument("ComplexFft: size must be >= 2");
    std::vector<std::complex<double>> in(n), out(n);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                             reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan_ == nullptr)
        throw std::runtime_error("fftw complex plan creation failed");
}

ComplexFft::~ComplexFft()
{
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
}

void ComplexFft::forward(const std::complex<double>* in, std::complex<double>* out) const
{
    fftw_execute_dft(plan_, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

} // namespace fregan::detail
