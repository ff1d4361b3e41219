#include "evlab/kernels.hpp"

namespace evlab::kernels {

namespace {

void s_add(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void s_scale(const double* a, double s, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * s;
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_addc(double c, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += c;
}

double s_sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double s_sqdiff(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void s_relu(const double* a, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void s_relu_grad(const double* x, const double* g, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 0.0) dst[i] += g[i];
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar", s_add,  s_sub, s_mul,      s_scale, s_axpy,
        s_addc,   s_sum,  s_dot, s_sqdiff,   s_relu,  s_relu_grad,
    };
    return ops;
}

} // namespace evlab::kernels
