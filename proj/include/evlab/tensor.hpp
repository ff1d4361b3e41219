#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace evlab {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // empty until backward touches it
    bool requires_grad = false;

    void ensure_grad();
};

class Tape;

// Dense row-major f64 tensor with reverse-mode autodiff. Feature maps use
// CHW layout. Ops record onto the thread-local current tape (see TapeScope)
// whenever an input requires gradients.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor from_data(Shape shape, std::vector<double> data);
    // trainable leaf
    static Tensor param(Shape shape, std::vector<double> data);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t numel() const { return impl_->value.size(); }

    double* data() { return impl_->value.data(); }
    const double* data() const { return impl_->value.data(); }
    std::vector<double>& values() { return impl_->value; }
    const std::vector<double>& values() const { return impl_->value; }

    double item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    const std::vector<double>& grad() const { return impl_->grad; }
    void zero_grad();

    // value copy detached from any graph
    Tensor detach() const;

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;

    friend Tensor make_from_impl(std::shared_ptr<TensorImpl>);
};

// Recorded operations in execution order; execution order is a topological
// order of the graph, so one reverse sweep visits each node exactly once.
class Tape {
public:
    void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    void run_backward();

private:
    std::vector<std::function<void()>> nodes_;
};

Tape* current_tape();

class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* prev_;
};

// ---- ops ----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);

// x: [Cin,H,W], w: [Cout,Cin,kh,kw] (odd kh/kw), stride 1, zero padding
// preserving HxW. Bias b: [Cout] or undefined Tensor for none.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor conv2d(const Tensor& x, const Tensor& w);

Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor abs_op(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// v: [C] -> [C,h,w]
Tensor broadcast_chw(const Tensor& v, int h, int w);
// along channel axis; both [*,H,W]
Tensor concat_ch(const Tensor& a, const Tensor& b);
Tensor slice_ch(const Tensor& a, int start, int len);
Tensor reshape(const Tensor& a, Shape shape);

// [C,H,W] -> [C,H/2,W/2], picks the top-left sample of each 2x2 block
Tensor down2_nearest(const Tensor& a);
// [C,H,W] -> [C,2H,2W], half-pixel-centre bilinear with edge clamping
Tensor up2_bilinear(const Tensor& a);

// backward-warps [C,H,W] by per-pixel flow (H*W each): out(y,x) sampled
// bilinearly at (y - flow_y, x - flow_x), clamped to the border. The flow is
// a fixed map; gradients flow to x only.
Tensor warp_bilinear(const Tensor& x, const std::vector<double>& flow_y,
                     const std::vector<double>& flow_x);

Tensor mse_loss(const Tensor& a, const Tensor& b);
Tensor l1_loss(const Tensor& a, const Tensor& b);

// loss must be scalar; accumulates d(loss)/d(leaf) into each leaf's grad.
void backward(const Tensor& loss);

} // namespace evlab
