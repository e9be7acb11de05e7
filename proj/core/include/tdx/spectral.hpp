// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include "tdx/grid.hpp"
#include "tdx/tensor.hpp"

namespace tdx {

/// Discrete Fourier conventions used throughout:
///   forward:  c_j = sum_k f_k exp(-2 pi i j k / n)   (unnormalized)
///   inverse:  f_k = (1/n) sum_j c_j exp(+2 pi i j k / n)
/// The direct O(n^2) summation is the reference engine; a radix-2 FFT takes
/// over when n is a power of two.
std::vector<std::complex<double>> dft_forward(const std::vector<double>& f);

/// Inverse transform of a conjugate-symmetric spectrum; throws if the
/// imaginary residue of the reconstruction exceeds 1e-9 (relative).
std::vector<double> dft_inverse_real(const std::vector<std::complex<double>>& c);

/// First M complex modes packed as interleaved [Re c_0, Im c_0, Re c_1, ...].
/// This layout is the on-disk and in-model feature contract.
struct ModeVector {
    int m = 0;
    int n_src = 0;
    std::vector<double> features; // length 2m

    std::complex<double> mode(int j) const {
        return {features[2 * static_cast<size_t>(j)], features[2 * static_cast<size_t>(j) + 1]};
    }
};

/// Keeps the first M of n coefficients. Requires 1 <= M <= floor(n/2)+1.
ModeVector truncate_modes(const std::vector<std::complex<double>>& c, int m);

/// Zero-pads the retained modes, mirrors conjugate symmetry and inverts to a
/// real function at resolution n_out (0 means n_src). Requires
/// n_out >= 2(M-1); when n_out == 2(M-1) the last mode lands on the Nyquist
/// bin and must be (numerically) real.
GridFunction reconstruct(const ModeVector& mv, int n_out = 0);

/// dft_forward + truncate_modes of a scalar grid function.
ModeVector encode_modes(const GridFunction& f, int m);

/// Matrix B [2M x n_out] with reconstruct(mv, n_out) == features^T B for any
/// ModeVector with this m and n_src; the linear form of reconstruct used
/// inside differentiable losses.
Tensor reconstruction_matrix(int m, int n_src, int n_out = 0);

} // namespace tdx
