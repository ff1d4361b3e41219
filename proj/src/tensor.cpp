#include "evlab/tensor.hpp"

#include "evlab/kernels.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace evlab {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

void TensorImpl::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

Tensor make_from_impl(std::shared_ptr<TensorImpl> impl) { return Tensor(std::move(impl)); }

namespace {

[[noreturn]] void fail(const std::string& op, const std::string& msg) {
    throw std::invalid_argument("evlab::" + op + ": " + msg);
}

void check_positive_dims(const std::string& op, const Shape& s) {
    if (s.empty()) fail(op, "empty shape");
    for (int d : s)
        if (d <= 0) fail(op, "non-positive dimension in " + shape_str(s));
}

std::shared_ptr<TensorImpl> new_impl(Shape shape, double fill) {
    check_positive_dims("Tensor", shape);
    auto impl = std::make_shared<TensorImpl>();
    impl->value.assign(shape_numel(shape), fill);
    impl->shape = std::move(shape);
    return impl;
}

thread_local Tape* g_current_tape = nullptr;

// whether the op must be recorded
bool recording(std::initializer_list<const Tensor*> inputs) {
    if (!g_current_tape) return false;
    for (const Tensor* t : inputs)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

using Impl = std::shared_ptr<TensorImpl>;

Tensor make_output(Shape shape, bool rec) {
    auto impl = new_impl(std::move(shape), 0.0);
    impl->requires_grad = rec;
    return make_from_impl(std::move(impl));
}

void record_node(std::function<void()> fn) { g_current_tape->record(std::move(fn)); }

} // namespace

Tensor Tensor::zeros(Shape shape) { return make_from_impl(new_impl(std::move(shape), 0.0)); }

Tensor Tensor::full(Shape shape, double v) { return make_from_impl(new_impl(std::move(shape), v)); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    check_positive_dims("from_data", shape);
    if (shape_numel(shape) != data.size())
        fail("from_data", "shape " + shape_str(shape) + " does not match data length " +
                              std::to_string(data.size()));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->value = std::move(data);
    return make_from_impl(std::move(impl));
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.impl()->requires_grad = true;
    return t;
}

double Tensor::item() const {
    if (numel() != 1) fail("item", "tensor " + shape_str(shape()) + " is not scalar");
    return impl_->value[0];
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->value = impl_->value;
    return make_from_impl(std::move(impl));
}

void Tape::run_backward() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

Tape* current_tape() { return g_current_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_current_tape) { g_current_tape = &tape; }
TapeScope::~TapeScope() { g_current_tape = prev_; }

NoGradScope::NoGradScope() : prev_(g_current_tape) { g_current_tape = nullptr; }
NoGradScope::~NoGradScope() { g_current_tape = prev_; }

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        fail("backward", "loss must be scalar, got " + shape_str(loss.shape()));
    if (!g_current_tape) fail("backward", "no active tape");
    auto impl = loss.impl();
    impl->ensure_grad();
    impl->grad[0] += 1.0;
    g_current_tape->run_backward();
}

// ---- elementwise --------------------------------------------------------

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    const bool rec = recording({&a, &b});
    Tensor out = make_output(a.shape(), rec);
    kernels::active().add(a.data(), b.data(), out.data(), a.numel());
    if (rec) {
        Impl ia = a.impl(), ib = b.impl(), io = out.impl();
        record_node([ia, ib, io] {
            io->ensure_grad();
            const std::size_t n = io->value.size();
            if (ia->requires_grad) {
                ia->ensure_grad();
                kernels::active().axpy(1.0, io->grad.data(), ia->grad.data(), n);
            }
            if (ib->requires_grad) {
                ib->ensure_grad();
                kernels::active().axpy(1.0, io->grad.data(), ib->grad.data(), n);
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    const bool rec = recording({&a, &b});
    Tensor out = make_output(a.shape(), rec);
    kernels::active().sub(a.data(), b.data(), out.data(), a.numel());
    if (rec) {
        Impl ia = a.impl(), ib = b.impl(), io = out.impl();
        record_node([ia, ib, io] {
            io->ensure_grad();
            const std::size_t n = io->value.size();
            if (ia->requires_grad) {
                ia->ensure_grad();
                kernels::active().axpy(1.0, io->grad.data(), ia->grad.data(), n);
            }
            if (ib->requires_grad) {
                ib->ensure_grad();
                kernels::active().axpy(-1.0, io->grad.data(), ib->grad.data(), n);
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    const bool rec = recording({&a, &b});
    Tensor out = make_output(a.shape(), rec);
    kernels::active().mul(a.data(), b.data(), out.data(), a.numel());
    if (rec) {
        Impl ia = a.impl(), ib = b.impl(), io = out.impl();
        record_node([ia, ib, io] {
            io->ensure_grad();
            const std::size_t n = io->value.size();
            if (ia->requires_grad) {
                ia->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) ia->grad[i] += io->grad[i] * ib->value[i];
            }
            if (ib->requires_grad) {
                ib->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) ib->grad[i] += io->grad[i] * ia->value[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double s) {
    const bool rec = recording({&a});
    Tensor out = make_output(a.shape(), rec);
    kernels::active().scale(a.data(), s, out.data(), a.numel());
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io, s] {
            io->ensure_grad();
            ia->ensure_grad();
            kernels::active().axpy(s, io->grad.data(), ia->grad.data(), io->value.size());
        });
    }
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    const bool rec = recording({&a});
    Tensor out = make_output(a.shape(), rec);
    std::copy(a.data(), a.data() + a.numel(), out.data());
    kernels::active().addc(s, out.data(), out.numel());
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io] {
            io->ensure_grad();
            ia->ensure_grad();
            kernels::active().axpy(1.0, io->grad.data(), ia->grad.data(), io->value.size());
        });
    }
    return out;
}

// ---- unary --------------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const char* /*name*/, const Tensor& a, Fwd fwd, Bwd bwd) {
    const bool rec = recording({&a});
    Tensor out = make_output(a.shape(), rec);
    const std::size_t n = a.numel();
    const double* av = a.data();
    double* ov = out.data();
    for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(av[i]);
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io, bwd] {
            io->ensure_grad();
            ia->ensure_grad();
            const std::size_t m = io->value.size();
            for (std::size_t i = 0; i < m; ++i)
                ia->grad[i] += io->grad[i] * bwd(ia->value[i], io->value[i]);
        });
    }
    return out;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Tensor sigmoid(const Tensor& a) {
    return unary_op("sigmoid", a, stable_sigmoid,
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_op(const Tensor& a) {
    return unary_op("tanh", a, [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
    const bool rec = recording({&a});
    Tensor out = make_output(a.shape(), rec);
    kernels::active().relu(a.data(), out.data(), a.numel());
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io] {
            io->ensure_grad();
            ia->ensure_grad();
            kernels::active().relu_grad(ia->value.data(), io->grad.data(), ia->grad.data(),
                                        io->value.size());
        });
    }
    return out;
}

Tensor exp_op(const Tensor& a) {
    return unary_op("exp", a, [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor abs_op(const Tensor& a) {
    return unary_op("abs", a, [](double x) { return std::fabs(x); },
                    [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// ---- reductions ----------------------------------------------------------

Tensor sum(const Tensor& a) {
    const bool rec = recording({&a});
    Tensor out = make_output({1}, rec);
    out.data()[0] = kernels::active().sum(a.data(), a.numel());
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io] {
            io->ensure_grad();
            ia->ensure_grad();
            kernels::active().addc(io->grad[0], ia->grad.data(), ia->grad.size());
        });
    }
    return out;
}

Tensor mean(const Tensor& a) {
    const bool rec = recording({&a});
    Tensor out = make_output({1}, rec);
    const double inv = 1.0 / static_cast<double>(a.numel());
    out.data()[0] = kernels::active().sum(a.data(), a.numel()) * inv;
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io, inv] {
            io->ensure_grad();
            ia->ensure_grad();
            kernels::active().addc(io->grad[0] * inv, ia->grad.data(), ia->grad.size());
        });
    }
    return out;
}

// ---- matmul ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2)
        fail("matmul", "rank-2 operands required, got " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        fail("matmul", "inner dims mismatch " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
    const bool rec = recording({&a, &b});
    Tensor out = make_output({m, n}, rec);
    const auto& K = kernels::active();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
            K.axpy(a.data()[i * k + j], b.data() + j * n, out.data() + i * n,
                   static_cast<std::size_t>(n));
    if (rec) {
        Impl ia = a.impl(), ib = b.impl(), io = out.impl();
        record_node([ia, ib, io, m, k, n] {
            io->ensure_grad();
            const auto& Kk = kernels::active();
            if (ia->requires_grad) {
                ia->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < k; ++j)
                        ia->grad[i * k + j] += Kk.dot(io->grad.data() + i * n,
                                                      ib->value.data() + j * n,
                                                      static_cast<std::size_t>(n));
            }
            if (ib->requires_grad) {
                ib->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < k; ++j)
                        Kk.axpy(ia->value[i * k + j], io->grad.data() + i * n,
                                ib->grad.data() + j * n, static_cast<std::size_t>(n));
            }
        });
    }
    return out;
}

// ---- conv2d ---------------------------------------------------------------

namespace {

struct ConvDims {
    int cin, h, w, cout, kh, kw;
};

ConvDims conv_check(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 3)
        fail("conv2d", "input must be [C,H,W], got " + shape_str(x.shape()));
    if (w.shape().size() != 4)
        fail("conv2d", "kernel must be [Cout,Cin,kh,kw], got " + shape_str(w.shape()));
    ConvDims d{x.shape()[0], x.shape()[1], x.shape()[2],
               w.shape()[0], w.shape()[2], w.shape()[3]};
    if (w.shape()[1] != d.cin)
        fail("conv2d", "input " + shape_str(x.shape()) + " vs kernel " + shape_str(w.shape()) +
                           " channel mismatch");
    if (d.kh % 2 == 0 || d.kw % 2 == 0)
        fail("conv2d", "kernel dims must be odd, got " + shape_str(w.shape()));
    if (b.defined() && (b.shape().size() != 1 || b.shape()[0] != d.cout))
        fail("conv2d", "bias " + shape_str(b.shape()) + " must be [" + std::to_string(d.cout) +
                           "]");
    return d;
}

// out[co] += sum_ci,ky,kx w[co,ci,ky,kx] * shifted x[ci]; spans clipped at the
// borders implement the zero padding.
void conv_forward_plane(const double* x, const double* w, double* out, const ConvDims& d) {
    const auto& K = kernels::active();
    const int ph = d.kh / 2, pw = d.kw / 2;
    const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
    for (int co = 0; co < d.cout; ++co) {
        double* outp = out + co * plane;
        for (int ci = 0; ci < d.cin; ++ci) {
            const double* xp = x + ci * plane;
            const double* wp = w + ((co * d.cin) + ci) * d.kh * d.kw;
            for (int ky = 0; ky < d.kh; ++ky) {
                const int dy = ky - ph;
                const int oy0 = dy < 0 ? -dy : 0;
                const int oy1 = dy > 0 ? d.h - dy : d.h;
                for (int kx = 0; kx < d.kw; ++kx) {
                    const double wgt = wp[ky * d.kw + kx];
                    if (wgt == 0.0) continue;
                    const int dx = kx - pw;
                    const int ox0 = dx < 0 ? -dx : 0;
                    const int ox1 = dx > 0 ? d.w - dx : d.w;
                    if (ox1 <= ox0) continue;
                    const std::size_t len = static_cast<std::size_t>(ox1 - ox0);
                    for (int oy = oy0; oy < oy1; ++oy) {
                        K.axpy(wgt, xp + (oy + dy) * d.w + (ox0 + dx), outp + oy * d.w + ox0,
                               len);
                    }
                }
            }
        }
    }
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    const ConvDims d = conv_check(x, w, b);
    const bool rec = b.defined() ? recording({&x, &w, &b}) : recording({&x, &w});
    Tensor out = make_output({d.cout, d.h, d.w}, rec);
    conv_forward_plane(x.data(), w.data(), out.data(), d);
    if (b.defined()) {
        const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
        for (int co = 0; co < d.cout; ++co)
            kernels::active().addc(b.data()[co], out.data() + co * plane, plane);
    }
    if (rec) {
        Impl ix = x.impl(), iw = w.impl(), io = out.impl();
        Impl ib = b.defined() ? b.impl() : nullptr;
        record_node([ix, iw, ib, io, d] {
            io->ensure_grad();
            const auto& K = kernels::active();
            const int ph = d.kh / 2, pw = d.kw / 2;
            const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
            const double* g = io->grad.data();
            if (ix->requires_grad) {
                ix->ensure_grad();
                // gx[ci, oy+dy, ox+dx] += w * g[co, oy, ox]
                for (int co = 0; co < d.cout; ++co) {
                    const double* gp = g + co * plane;
                    for (int ci = 0; ci < d.cin; ++ci) {
                        double* gxp = ix->grad.data() + ci * plane;
                        const double* wp =
                            iw->value.data() + ((co * d.cin) + ci) * d.kh * d.kw;
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int dy = ky - ph;
                            const int oy0 = dy < 0 ? -dy : 0;
                            const int oy1 = dy > 0 ? d.h - dy : d.h;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const double wgt = wp[ky * d.kw + kx];
                                if (wgt == 0.0) continue;
                                const int dx = kx - pw;
                                const int ox0 = dx < 0 ? -dx : 0;
                                const int ox1 = dx > 0 ? d.w - dx : d.w;
                                if (ox1 <= ox0) continue;
                                const std::size_t len = static_cast<std::size_t>(ox1 - ox0);
                                for (int oy = oy0; oy < oy1; ++oy)
                                    K.axpy(wgt, gp + oy * d.w + ox0,
                                           gxp + (oy + dy) * d.w + (ox0 + dx), len);
                            }
                        }
                    }
                }
            }
            if (iw->requires_grad) {
                iw->ensure_grad();
                for (int co = 0; co < d.cout; ++co) {
                    const double* gp = g + co * plane;
                    for (int ci = 0; ci < d.cin; ++ci) {
                        const double* xp = ix->value.data() + ci * plane;
                        double* gwp = iw->grad.data() + ((co * d.cin) + ci) * d.kh * d.kw;
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int dy = ky - ph;
                            const int oy0 = dy < 0 ? -dy : 0;
                            const int oy1 = dy > 0 ? d.h - dy : d.h;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int dx = kx - pw;
                                const int ox0 = dx < 0 ? -dx : 0;
                                const int ox1 = dx > 0 ? d.w - dx : d.w;
                                if (ox1 <= ox0) continue;
                                const std::size_t len = static_cast<std::size_t>(ox1 - ox0);
                                double acc = 0.0;
                                for (int oy = oy0; oy < oy1; ++oy)
                                    acc += K.dot(xp + (oy + dy) * d.w + (ox0 + dx),
                                                 gp + oy * d.w + ox0, len);
                                gwp[ky * d.kw + kx] += acc;
                            }
                        }
                    }
                }
            }
            if (ib && ib->requires_grad) {
                ib->ensure_grad();
                for (int co = 0; co < d.cout; ++co)
                    ib->grad[co] += K.sum(g + co * plane, plane);
            }
        });
    }
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w) { return conv2d(x, w, Tensor()); }

// ---- shape ops -------------------------------------------------------------

Tensor broadcast_chw(const Tensor& v, int h, int w) {
    if (v.shape().size() != 1)
        fail("broadcast_chw", "expected rank-1 [C], got " + shape_str(v.shape()));
    if (h <= 0 || w <= 0) fail("broadcast_chw", "non-positive target dims");
    const int c = v.shape()[0];
    const bool rec = recording({&v});
    Tensor out = make_output({c, h, w}, rec);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int ch = 0; ch < c; ++ch)
        kernels::active().addc(v.data()[ch], out.data() + ch * plane, plane);
    if (rec) {
        Impl iv = v.impl(), io = out.impl();
        record_node([iv, io, c, plane] {
            io->ensure_grad();
            iv->ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                iv->grad[ch] += kernels::active().sum(io->grad.data() + ch * plane, plane);
        });
    }
    return out;
}

Tensor concat_ch(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 3 || b.shape().size() != 3 || a.shape()[1] != b.shape()[1] ||
        a.shape()[2] != b.shape()[2])
        fail("concat_ch", "incompatible shapes " + shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
    const int ca = a.shape()[0], cb = b.shape()[0];
    const bool rec = recording({&a, &b});
    Tensor out = make_output({ca + cb, a.shape()[1], a.shape()[2]}, rec);
    std::copy(a.data(), a.data() + a.numel(), out.data());
    std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
    if (rec) {
        Impl ia = a.impl(), ib = b.impl(), io = out.impl();
        record_node([ia, ib, io] {
            io->ensure_grad();
            const std::size_t na = ia->value.size(), nb = ib->value.size();
            if (ia->requires_grad) {
                ia->ensure_grad();
                kernels::active().axpy(1.0, io->grad.data(), ia->grad.data(), na);
            }
            if (ib->requires_grad) {
                ib->ensure_grad();
                kernels::active().axpy(1.0, io->grad.data() + na, ib->grad.data(), nb);
            }
        });
    }
    return out;
}

Tensor slice_ch(const Tensor& a, int start, int len) {
    if (a.shape().size() != 3)
        fail("slice_ch", "expected rank-3 [C,H,W], got " + shape_str(a.shape()));
    const int c = a.shape()[0];
    if (start < 0 || len <= 0 || start + len > c)
        fail("slice_ch", "range [" + std::to_string(start) + "," + std::to_string(start + len) +
                             ") out of bounds for " + shape_str(a.shape()));
    const std::size_t plane = static_cast<std::size_t>(a.shape()[1]) * a.shape()[2];
    const bool rec = recording({&a});
    Tensor out = make_output({len, a.shape()[1], a.shape()[2]}, rec);
    std::copy(a.data() + start * plane, a.data() + (start + len) * plane, out.data());
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io, start, plane] {
            io->ensure_grad();
            ia->ensure_grad();
            kernels::active().axpy(1.0, io->grad.data(), ia->grad.data() + start * plane,
                                   io->value.size());
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    check_positive_dims("reshape", shape);
    if (shape_numel(shape) != a.numel())
        fail("reshape", shape_str(a.shape()) + " cannot reshape to " + shape_str(shape));
    const bool rec = recording({&a});
    Tensor out = make_output(std::move(shape), rec);
    std::copy(a.data(), a.data() + a.numel(), out.data());
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io] {
            io->ensure_grad();
            ia->ensure_grad();
            kernels::active().axpy(1.0, io->grad.data(), ia->grad.data(), io->value.size());
        });
    }
    return out;
}

Tensor down2_nearest(const Tensor& a) {
    if (a.shape().size() != 3)
        fail("down2_nearest", "expected [C,H,W], got " + shape_str(a.shape()));
    const int c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
    if (h % 2 != 0 || w % 2 != 0)
        fail("down2_nearest", "spatial dims must be even, got " + shape_str(a.shape()));
    const int oh = h / 2, ow = w / 2;
    const bool rec = recording({&a});
    Tensor out = make_output({c, oh, ow}, rec);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                out.data()[(ch * oh + y) * ow + x] = a.data()[(ch * h + 2 * y) * w + 2 * x];
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io, c, h, w, oh, ow] {
            io->ensure_grad();
            ia->ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x)
                        ia->grad[(ch * h + 2 * y) * w + 2 * x] +=
                            io->grad[(ch * oh + y) * ow + x];
        });
    }
    return out;
}

namespace {

// half-pixel-centre source coordinate for 2x upsampling, clamped to the edge
inline void up2_taps(int o, int size, int& i0, int& i1, double& w1) {
    const double s = (o + 0.5) * 0.5 - 0.5;
    double fl = std::floor(s);
    double frac = s - fl;
    int i = static_cast<int>(fl);
    if (i < 0) {
        i = 0;
        frac = 0.0;
    }
    if (i >= size - 1) {
        i = size - 1;
        frac = 0.0;
    }
    i0 = i;
    i1 = i < size - 1 ? i + 1 : i;
    w1 = frac;
}

} // namespace

Tensor up2_bilinear(const Tensor& a) {
    if (a.shape().size() != 3)
        fail("up2_bilinear", "expected [C,H,W], got " + shape_str(a.shape()));
    const int c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
    const int oh = 2 * h, ow = 2 * w;
    const bool rec = recording({&a});
    Tensor out = make_output({c, oh, ow}, rec);
    for (int ch = 0; ch < c; ++ch) {
        const double* src = a.data() + static_cast<std::size_t>(ch) * h * w;
        double* dst = out.data() + static_cast<std::size_t>(ch) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            int y0, y1;
            double wy;
            up2_taps(oy, h, y0, y1, wy);
            for (int ox = 0; ox < ow; ++ox) {
                int x0, x1;
                double wx;
                up2_taps(ox, w, x0, x1, wx);
                dst[oy * ow + ox] = (1 - wy) * ((1 - wx) * src[y0 * w + x0] + wx * src[y0 * w + x1]) +
                                    wy * ((1 - wx) * src[y1 * w + x0] + wx * src[y1 * w + x1]);
            }
        }
    }
    if (rec) {
        Impl ia = a.impl(), io = out.impl();
        record_node([ia, io, c, h, w, oh, ow] {
            io->ensure_grad();
            ia->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                double* gsrc = ia->grad.data() + static_cast<std::size_t>(ch) * h * w;
                const double* gdst = io->grad.data() + static_cast<std::size_t>(ch) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    int y0, y1;
                    double wy;
                    up2_taps(oy, h, y0, y1, wy);
                    for (int ox = 0; ox < ow; ++ox) {
                        int x0, x1;
                        double wx;
                        up2_taps(ox, w, x0, x1, wx);
                        const double g = gdst[oy * ow + ox];
                        gsrc[y0 * w + x0] += (1 - wy) * (1 - wx) * g;
                        gsrc[y0 * w + x1] += (1 - wy) * wx * g;
                        gsrc[y1 * w + x0] += wy * (1 - wx) * g;
                        gsrc[y1 * w + x1] += wy * wx * g;
                    }
                }
            }
        });
    }
    return out;
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
    Tensor d = sub(a, b);
    return mean(mul(d, d));
}

Tensor l1_loss(const Tensor& a, const Tensor& b) { return mean(abs_op(sub(a, b))); }

} // namespace evlab
