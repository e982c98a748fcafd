#pragma once

// Straightforward reference implementations used to check the library.
// Nothing here calls into the library's numeric code.

#include <cstdint>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>; // row-major, rows of equal length

// Explicit orthonormal Haar analysis matrix applied to an even-length signal;
// returns (low, high).
std::pair<Vec, Vec> haar_by_matrix(const Vec& x);
double sum_squares(const Vec& x);

// 2x mean pooling, trailing odd sample dropped.
Vec mean_pool2(const Vec& x);

// Log-mel by direct DFT: periodic Hann(1024), 512 samples of reflection on
// each side, hop 256, ceil(L/256) frames, magnitude sqrt(|X|^2 + 1e-9),
// 80 Slaney triangles over 0..11025 Hz, log(max(., 1e-5)).
// Returns bands x frames.
Mat log_mel(const Vec& x);

// Mean over matrix elements of |a - b|.
double mean_abs(const Mat& a, const Mat& b);

// Losses over nested lists: scores[k] is the flattened score map of
// sub-discriminator k; feats[k][i] is layer i of sub-discriminator k.
double d_loss(const Mat& real, const Mat& fake);
double g_adv_loss(const Mat& fake);
double fm_loss(const std::vector<Mat>& real, const std::vector<Mat>& fake);
double mel_loss(const Vec& x, const Vec& y);

// Orthonormal DCT-II by its defining sum.
Vec dct2(const Vec& x);
// Frame-by-frame mel-cepstral distortion over coefficients 1..13.
double mcd13(const Vec& x, const Vec& y);

// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
void jacobi(const Mat& a, Vec& values, Mat& vectors);
// Frechet distance with unbiased covariances and Tr((Sa Sb)^(1/2)) taken as
// the sum of square roots of the eigenvalues of Sa^(1/2) Sb Sa^(1/2).
double frechet(const Mat& a, const Mat& b);

Vec sine(double hz, double seconds, double amplitude, int sample_rate = 22050);
Vec gaussian(std::size_t n, std::uint64_t seed, double stddev = 1.0);

} // namespace oracle
