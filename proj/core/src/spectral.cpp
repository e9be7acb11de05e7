// SPDX-License-Identifier: Apache-2.0
#include "tdx/spectral.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace tdx {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<std::complex<double>> fft_radix2(std::vector<std::complex<double>> a, bool inverse) {
    const size_t n = a.size();
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    return a;
}

std::vector<std::complex<double>> dft_direct(const std::vector<std::complex<double>>& f, bool inverse) {
    const size_t n = f.size();
    std::vector<std::complex<double>> c(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (size_t j = 0; j < n; ++j) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t k = 0; k < n; ++k) {
            const double ang = sign * kTwoPi * static_cast<double>(j * k % n) / static_cast<double>(n);
            acc += f[k] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        c[j] = acc;
    }
    return c;
}

std::vector<std::complex<double>> transform(std::vector<std::complex<double>> f, bool inverse) {
    if (is_pow2(f.size()) && f.size() > 1) return fft_radix2(std::move(f), inverse);
    return dft_direct(f, inverse);
}

} // namespace

std::vector<std::complex<double>> dft_forward(const std::vector<double>& f) {
    if (f.empty()) throw TdxError("dft_forward: empty signal");
    std::vector<std::complex<double>> in(f.size());
    for (size_t k = 0; k < f.size(); ++k) in[k] = {f[k], 0.0};
    return transform(std::move(in), false);
}

std::vector<double> dft_inverse_real(const std::vector<std::complex<double>>& c) {
    if (c.empty()) throw TdxError("dft_inverse_real: empty spectrum");
    const size_t n = c.size();
    std::vector<std::complex<double>> out = transform(c, true);
    std::vector<double> f(n);
    double max_abs = 0.0, max_imag = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t k = 0; k < n; ++k) {
        f[k] = out[k].real() * inv_n;
        max_abs = std::max(max_abs, std::abs(f[k]));
        max_imag = std::max(max_imag, std::abs(out[k].imag()) * inv_n);
    }
    if (max_imag > 1e-9 * std::max(1.0, max_abs)) {
        throw NumericError("dft_inverse_real: imaginary residue " + std::to_string(max_imag) +
                           " exceeds tolerance; spectrum is not conjugate-symmetric");
    }
    return f;
}

ModeVector truncate_modes(const std::vector<std::complex<double>>& c, int m) {
    const int n = static_cast<int>(c.size());
    if (m < 1 || m > n / 2 + 1) {
        throw TdxError("truncate_modes: mode count " + std::to_string(m) + " out of range for n=" +
                       std::to_string(n));
    }
    ModeVector mv;
    mv.m = m;
    mv.n_src = n;
    mv.features.resize(2 * static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) {
        mv.features[2 * static_cast<size_t>(j)] = c[static_cast<size_t>(j)].real();
        mv.features[2 * static_cast<size_t>(j) + 1] = c[static_cast<size_t>(j)].imag();
    }
    return mv;
}

GridFunction reconstruct(const ModeVector& mv, int n_out) {
    if (n_out == 0) n_out = mv.n_src;
    const int m = mv.m;
    if (n_out < 2 * (m - 1) || n_out < 1) {
        throw TdxError("reconstruct: resolution " + std::to_string(n_out) + " too small for " +
                       std::to_string(m) + " retained modes");
    }
    const double scale = static_cast<double>(n_out) / static_cast<double>(mv.n_src);
    std::vector<std::complex<double>> c(static_cast<size_t>(n_out), {0.0, 0.0});
    c[0] = {scale * mv.features[0], 0.0};
    for (int j = 1; j < m; ++j) {
        const std::complex<double> cj{scale * mv.features[2 * static_cast<size_t>(j)],
                                      scale * mv.features[2 * static_cast<size_t>(j) + 1]};
        const int mirror = n_out - j;
        if (j == mirror) {
            c[static_cast<size_t>(j)] = {cj.real(), 0.0}; // Nyquist bin is real
        } else {
            c[static_cast<size_t>(j)] = cj;
            c[static_cast<size_t>(mirror)] = std::conj(cj);
        }
    }
    return GridFunction(Grid1D(n_out), dft_inverse_real(c));
}

ModeVector encode_modes(const GridFunction& f, int m) {
    if (f.dim != 1) throw ShapeError("encode_modes: scalar functions only");
    return truncate_modes(dft_forward(f.values), m);
}

Tensor reconstruction_matrix(int m, int n_src, int n_out) {
    if (n_out == 0) n_out = n_src;
    if (n_out < 2 * (m - 1) || n_out < 1 || m < 1 || n_src < 1) {
        throw TdxError("reconstruction_matrix: invalid m=" + std::to_string(m) + ", n_src=" +
                       std::to_string(n_src) + ", n_out=" + std::to_string(n_out));
    }
    Tensor b = Tensor::zeros({2 * m, n_out});
    const double inv_src = 1.0 / static_cast<double>(n_src);
    for (int k = 0; k < n_out; ++k) {
        b.at(0, k) = inv_src; // DC real; DC imaginary column stays zero
        for (int j = 1; j < m; ++j) {
            const double ang = kTwoPi * static_cast<double>(j) * static_cast<double>(k) /
                               static_cast<double>(n_out);
            const bool nyquist = (2 * j == n_out);
            const double w = nyquist ? 1.0 : 2.0;
            b.at(2 * j, k) = w * std::cos(ang) * inv_src;
            if (!nyquist) b.at(2 * j + 1, k) = -w * std::sin(ang) * inv_src;
        }
    }
    return b;
}

} // namespace tdx
