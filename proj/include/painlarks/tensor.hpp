#pragma once

// Dense n-dimensional tensors of doubles with reverse-mode automatic
// differentiation.
//
// A Tensor is a cheap handle onto shared storage (data + same-shape gradient
// buffer). Operations are free functions; while a Tape is alive in the current
// thread, any operation touching a requires_grad tensor appends a backward
// rule to it, and backward(loss) replays those rules in reverse. The tape is
// rebuilt on every forward pass, so graphs may be fully dynamic.
//
//   {
//     Tape tape;
//     Tensor y = matmul(w, x);
//     Tensor loss = sum(mul(y, y));
//     backward(loss);          // w.grad() now holds d(loss)/dw
//   }                          // tape ends here
//
// Storage is row-major; Eigen does the heavy lifting behind the free
// functions. Broadcasting is limited to scalar-vs-tensor in add/sub/mul;
// everything else reshapes explicitly.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "painlarks/errors.hpp"
#include "painlarks/random.hpp"

namespace painlarks {

class Rng;

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

class Tape;

namespace detail {
struct TensorImpl {
  Shape shape;
  Eigen::ArrayXd data;
  Eigen::ArrayXd grad;
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // 0 = not produced by a recorded op
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng,
                        bool requires_grad = false);
  static Tensor normal(Shape shape, double mean, double stddev, Rng& rng,
                       bool requires_grad = false);

  // A Tensor is a handle: const on the handle does not freeze the storage
  // (same convention as shared_ptr), which lets backward closures capture
  // tensors by value and still accumulate into their gradients.
  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  std::int64_t numel() const { return impl_->data.size(); }

  Eigen::ArrayXd& array() const { return impl_->data; }
  Eigen::ArrayXd& grad_array() const { return impl_->grad; }
  double* data() const { return impl_->data.data(); }
  double* grad() const { return impl_->grad.data(); }

  // Row-major element access, mostly for tests and loaders.
  double& at(std::initializer_list<int> idx) const;

  // Value of a one-element tensor.
  double value() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) const { impl_->requires_grad = rg; }
  std::uint64_t tape_id() const { return impl_->tape_id; }
  void set_tape_id(std::uint64_t id) const { impl_->tape_id = id; }

  void zero_grad() const { impl_->grad.setZero(); }

  // Deep copy, detached from any tape.
  Tensor clone() const;

  // Copies values from another tensor of identical shape (grad untouched).
  void copy_data_from(const Tensor& src) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  static Tensor make(Shape shape, bool requires_grad);
};

// Append-only record of one forward pass. At most one Tape may be alive per
// thread; constructing it activates recording, destruction stops it. backward
// consumes the tape: a second backward on the same tape throws.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  std::uint64_t id() const { return id_; }
  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  void record(std::function<void()> backward_rule);
  void run_backward();

 private:
  std::vector<std::function<void()>> nodes_;
  std::uint64_t id_;
  bool consumed_ = false;
};

// ---- primitive operations --------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);            // [m,k]x[k,n]
Tensor matvec(const Tensor& a, const Tensor& x);            // [m,k]x[k] -> [m]
Tensor transpose2d(const Tensor& x);                        // [m,n] -> [n,m]
Tensor dot(const Tensor& a, const Tensor& b);               // [k]·[k] -> scalar

// input [C_in,H,W], kernel [C_out,C_in/groups,kh,kw]. Zero padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad,
              int groups = 1);

// input [T,C_in], kernel [C_out,C_in,k] -> [T+2*pad-k+1, C_out]. Zero padding.
Tensor conv1d_temporal(const Tensor& input, const Tensor& kernel, int pad);

Tensor gelu(const Tensor& x);     // exact form: 0.5*x*(1+erf(x/sqrt(2)))
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

// Binary elementwise; shapes must match exactly unless one side is a
// one-element tensor, which broadcasts.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double c);

// X [m,n] + b [n], b added to every row.
Tensor add_rowwise(const Tensor& x, const Tensor& b);

// Normalizes over the last axis, then applies gamma/beta (both [C]).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-6);

Tensor sum(const Tensor& x);       // -> scalar
Tensor mean_all(const Tensor& x);  // -> scalar
Tensor mean_axis(const Tensor& x, int axis);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose01(const Tensor& x);  // swap the first two axes, rank >= 2
Tensor slice_axis0(const Tensor& x, int index);
Tensor stack_axis0(const std::vector<Tensor>& parts);
Tensor concat_last(const Tensor& a, const Tensor& b);

Tensor softmax(const Tensor& x);               // 1-D
Tensor log_softmax_rows(const Tensor& x);      // [B,C]
// -mean_b logp[b, labels[b]]
Tensor nll_from_log_probs(const Tensor& logp, const std::vector<int>& labels);

void backward(const Tensor& loss);

// ---- non-differentiable helpers ---------------------------------------------

int argmax(const Tensor& x);
// Numerically stable softmax of a [2] logit pair.
std::pair<double, double> softmax2(const Tensor& logits);

// Text dump: line 1 shape, line 2 row-major values, %.17g.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void write_tensor_file(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

}  // namespace painlarks
