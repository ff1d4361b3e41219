#pragma once

#include <cstddef>

// Data-parallel f64 kernels behind the tensor layer. A scalar reference
// implementation always exists; an AVX2/FMA variant is selected at runtime
// when the CPU supports it. The two are equivalence-tested against each
// other (elementwise ops bit-exact, reductions to tight tolerance since
// accumulation order differs).
namespace evlab::kernels {

struct Ops {
    const char* name;

    // dst[i] = a[i] op b[i]
    void (*add)(const double* a, const double* b, double* dst, std::size_t n);
    void (*sub)(const double* a, const double* b, double* dst, std::size_t n);
    void (*mul)(const double* a, const double* b, double* dst, std::size_t n);

    // dst[i] = a[i] * s
    void (*scale)(const double* a, double s, double* dst, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y[i] += c
    void (*addc)(double c, double* y, std::size_t n);

    double (*sum)(const double* a, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    // sum of (a[i] - b[i])^2
    double (*sqdiff_sum)(const double* a, const double* b, std::size_t n);

    // dst[i] = max(a[i], 0)
    void (*relu)(const double* a, double* dst, std::size_t n);
    // dst[i] += g[i] * (x[i] > 0)
    void (*relu_grad)(const double* x, const double* g, double* dst, std::size_t n);
};

const Ops& scalar_ops();

// Null when this build/CPU has no AVX2+FMA.
const Ops* avx2_ops();

// Active table. Honours EVLAB_KERNELS=scalar|avx2 (avx2 falls back to
// scalar with a warning when unsupported).
const Ops& active();

} // namespace evlab::kernels
