#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

// Row-major GEMM kernels for the convolution hot path. Operands are packed into
// MR-row and NR-column panels so that an MR x NR tile of C stays in registers
// for the whole inner-dimension loop.

namespace prn::detail {

template <typename T>
struct GemmTile;
template <>
struct GemmTile<float> {
    static constexpr std::size_t mr = 6, nr = 32;
};
template <>
struct GemmTile<double> {
    static constexpr std::size_t mr = 6, nr = 16;
};

/// C[M x N] (+)= L * R with L(i,k) = A[i*ra + k*ca] and R(k,j) = B[k*rb + j*cb].
template <typename T>
void gemm_strided(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t ra, std::size_t ca,
                  const T* B, std::size_t rb, std::size_t cb, T* C, bool accumulate) {
    constexpr std::size_t MR = GemmTile<T>::mr, NR = GemmTile<T>::nr;
    if (M == 0 || N == 0) return;
    if (K == 0) {
        if (!accumulate) std::fill(C, C + M * N, T(0));
        return;
    }
    const std::size_t mb = (M + MR - 1) / MR, nb = (N + NR - 1) / NR;
    thread_local std::vector<T> ap, bp;
    ap.assign(mb * MR * K, T(0));
    for (std::size_t b = 0; b < mb; ++b)
        for (std::size_t r = 0; r < MR && b * MR + r < M; ++r) {
            const T* src = A + (b * MR + r) * ra;
            T* dst = ap.data() + b * MR * K + r;
            for (std::size_t k = 0; k < K; ++k) dst[k * MR] = src[k * ca];
        }
    bp.resize(NR * K);
    for (std::size_t jb = 0; jb < nb; ++jb) {
        const std::size_t j0 = jb * NR, nc = std::min(NR, N - j0);
        for (std::size_t k = 0; k < K; ++k) {
            T* dst = bp.data() + k * NR;
            const T* src = B + k * rb + j0 * cb;
            if (cb == 1) {
                std::copy(src, src + nc, dst);
            } else {
                for (std::size_t c = 0; c < nc; ++c) dst[c] = src[c * cb];
            }
            std::fill(dst + nc, dst + NR, T(0));
        }
        for (std::size_t b = 0; b < mb; ++b) {
            T acc[MR][NR] = {};
            const T* a = ap.data() + b * MR * K;
            const T* bb = bp.data();
            for (std::size_t k = 0; k < K; ++k) {
#pragma GCC unroll 8
                for (std::size_t r = 0; r < MR; ++r) {
                    const T av = a[k * MR + r];
#pragma GCC unroll 32
                    for (std::size_t c = 0; c < NR; ++c) acc[r][c] += av * bb[k * NR + c];
                }
            }
            const std::size_t i0 = b * MR, mr = std::min(MR, M - i0);
            for (std::size_t r = 0; r < mr; ++r) {
                T* dst = C + (i0 + r) * N + j0;
                if (accumulate) {
                    for (std::size_t c = 0; c < nc; ++c) dst[c] += acc[r][c];
                } else {
                    for (std::size_t c = 0; c < nc; ++c) dst[c] = acc[r][c];
                }
            }
        }
    }
}

/// C[M x N] (+)= A[M x K] * B[K x N]
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
    gemm_strided(M, N, K, A, K, 1, B, N, 1, C, accumulate);
}

/// C[K x N] (+)= A^T * B, with A[M x K] and B[M x N]
template <typename T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
    gemm_strided(K, N, M, A, 1, K, B, N, 1, C, accumulate);
}

/// C[M x K] (+)= A * B^T, with A[M x N] and B[K x N]
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
    gemm_strided(M, K, N, A, N, 1, B, 1, N, C, accumulate);
}

}  // namespace prn::detail
