#include "painlarks/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace painlarks {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;
using MapV = Eigen::Map<Eigen::VectorXd>;
using CMapV = Eigen::Map<const Eigen::VectorXd>;

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

void check_shape_positive(const Shape& s) {
  for (int d : s) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(s));
  }
}

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_next_tape_id{1};

bool recording(const Tensor& a) {
  return g_active_tape != nullptr && a.requires_grad();
}
bool recording(const Tensor& a, const Tensor& b) {
  return g_active_tape != nullptr && (a.requires_grad() || b.requires_grad());
}
bool recording(const Tensor& a, const Tensor& b, const Tensor& c) {
  return g_active_tape != nullptr &&
         (a.requires_grad() || b.requires_grad() || c.requires_grad());
}

void mark_output(Tensor& out) {
  out.set_requires_grad(true);
  out.set_tape_id(g_active_tape->id());
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::string r = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::make(Shape shape, bool requires_grad) {
  check_shape_positive(shape);
  auto impl = std::make_shared<detail::TensorImpl>();
  std::int64_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data = Eigen::ArrayXd::Zero(n);
  impl->grad = Eigen::ArrayXd::Zero(n);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return make(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = make(std::move(shape), requires_grad);
  t.impl_->data.setConstant(value);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  Tensor t = make(std::move(shape), requires_grad);
  if (static_cast<std::int64_t>(values.size()) != t.numel()) {
    throw ShapeError("from_values: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(t.shape()));
  }
  for (std::int64_t i = 0; i < t.numel(); ++i) t.impl_->data[i] = values[static_cast<size_t>(i)];
  return t;
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  Tensor t = make(std::move(shape), requires_grad);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.impl_->data[i] = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::normal(Shape shape, double mean, double stddev, Rng& rng,
                      bool requires_grad) {
  Tensor t = make(std::move(shape), requires_grad);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.impl_->data[i] = rng.normal(mean, stddev);
  return t;
}

double& Tensor::at(std::initializer_list<int> idx) const {
  std::int64_t flat = 0;
  size_t k = 0;
  for (int i : idx) {
    flat = flat * impl_->shape[k] + i;
    ++k;
  }
  return impl_->data[flat];
}

double Tensor::value() const {
  if (numel() != 1) throw ShapeError("value(): tensor " + shape_str(shape()) + " is not scalar");
  return impl_->data[0];
}

Tensor Tensor::clone() const {
  Tensor t = make(impl_->shape, impl_->requires_grad);
  t.impl_->data = impl_->data;
  t.impl_->grad = impl_->grad;
  return t;
}

void Tensor::copy_data_from(const Tensor& src) const {
  if (src.shape() != shape()) {
    throw ShapeError("copy_data_from: " + shape_str(src.shape()) + " into " + shape_str(shape()));
  }
  impl_->data = src.impl_->data;
}

// ---- Tape -------------------------------------------------------------------

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {
  if (g_active_tape != nullptr) {
    throw Error("Tape: a tape is already active in this thread");
  }
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = nullptr; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_rule) {
  nodes_.push_back(std::move(backward_rule));
}

void Tape::run_backward() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  consumed_ = true;
}

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw Error("backward: no active tape");
  if (tape->consumed()) throw Error("backward: tape already consumed");
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad() || loss.tape_id() != tape->id()) {
    throw Error("backward: loss was not recorded on the active tape");
  }
  loss.grad_array()[0] += 1.0;
  tape->run_backward();
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  MapM(out.data(), m, n).noalias() = CMapM(a.data(), m, k) * CMapM(b.data(), k, n);
  if (recording(a, b)) {
    mark_output(out);
    Tape::active()->record([a, b, out, m, k, n] {
      CMapM g(out.grad(), m, n);
      if (a.requires_grad()) {
        MapM(a.grad(), m, k).noalias() += g * CMapM(b.data(), k, n).transpose();
      }
      if (b.requires_grad()) {
        MapM(b.grad(), k, n).noalias() += CMapM(a.data(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.ndim() != 2 || x.ndim() != 1 || a.dim(1) != x.dim(0)) {
    throw ShapeError("matvec: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(x.shape()));
  }
  const int m = a.dim(0), k = a.dim(1);
  Tensor out = Tensor::zeros({m});
  MapV(out.data(), m).noalias() = CMapM(a.data(), m, k) * CMapV(x.data(), k);
  if (recording(a, x)) {
    mark_output(out);
    Tape::active()->record([a, x, out, m, k] {
      CMapV g(out.grad(), m);
      if (a.requires_grad()) {
        MapM(a.grad(), m, k).noalias() += g * CMapV(x.data(), k).transpose();
      }
      if (x.requires_grad()) {
        MapV(x.grad(), k).noalias() += CMapM(a.data(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

Tensor transpose2d(const Tensor& x) {
  if (x.ndim() != 2) throw ShapeError("transpose2d: need rank 2, got " + shape_str(x.shape()));
  const int m = x.dim(0), n = x.dim(1);
  Tensor out = Tensor::zeros({n, m});
  MapM(out.data(), n, m) = CMapM(x.data(), m, n).transpose();
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out, m, n] {
      MapM(x.grad(), m, n) += CMapM(out.grad(), n, m).transpose();
    });
  }
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 1 || b.ndim() != 1 || a.dim(0) != b.dim(0)) {
    throw ShapeError("dot: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  Tensor out = Tensor::scalar(CMapV(a.data(), a.numel()).dot(CMapV(b.data(), b.numel())));
  if (recording(a, b)) {
    mark_output(out);
    Tape::active()->record([a, b, out] {
      const double g = out.grad()[0];
      if (a.requires_grad()) a.grad_array() += g * b.array();
      if (b.requires_grad()) b.grad_array() += g * a.array();
    });
  }
  return out;
}

// ---- convolutions -------------------------------------------------------------

namespace {

// Patch matrix for one input channel group: rows are output positions, columns
// run over (channel within group, ky, kx).
MatRM im2col_2d(const double* in, int cg, int h, int w, int kh, int kw,
                int stride, int pad, int oh, int ow) {
  MatRM cols(static_cast<std::int64_t>(oh) * ow, static_cast<std::int64_t>(cg) * kh * kw);
  cols.setZero();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const std::int64_t row = static_cast<std::int64_t>(oy) * ow + ox;
      std::int64_t col = 0;
      for (int c = 0; c < cg; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < kw; ++kx, ++col) {
            const int ix = ox * stride - pad + kx;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
              cols(row, col) = in[(static_cast<std::int64_t>(c) * h + iy) * w + ix];
            }
          }
        }
      }
    }
  }
  return cols;
}

void col2im_2d(const MatRM& dcols, double* din, int cg, int h, int w, int kh,
               int kw, int stride, int pad, int oh, int ow) {
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const std::int64_t row = static_cast<std::int64_t>(oy) * ow + ox;
      std::int64_t col = 0;
      for (int c = 0; c < cg; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < kw; ++kx, ++col) {
            const int ix = ox * stride - pad + kx;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
              din[(static_cast<std::int64_t>(c) * h + iy) * w + ix] += dcols(row, col);
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad,
              int groups) {
  if (input.ndim() != 3 || kernel.ndim() != 4) {
    throw ShapeError("conv2d: need input [C,H,W] and kernel [Co,Ci,kh,kw], got " +
                     shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
  }
  const int ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (stride < 1 || pad < 0 || groups < 1) throw ConfigError("conv2d: bad stride/pad/groups");
  if (ci % groups != 0 || co % groups != 0) {
    throw ShapeError("conv2d: channels " + std::to_string(ci) + "->" + std::to_string(co) +
                     " not divisible by groups " + std::to_string(groups));
  }
  const int cig = ci / groups, cog = co / groups;
  if (kernel.dim(1) != cig) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " does not match input " +
                     shape_str(input.shape()) + " with groups " + std::to_string(groups));
  }
  if (kh > h + 2 * pad || kw > w + 2 * pad) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) +
                     " larger than padded input " + shape_str(input.shape()));
  }
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  Tensor out = Tensor::zeros({co, oh, ow});

  const bool rec = recording(input, kernel);
  auto cols_keep = rec ? std::make_shared<std::vector<MatRM>>() : nullptr;

  const std::int64_t kper = static_cast<std::int64_t>(cig) * kh * kw;
  for (int g = 0; g < groups; ++g) {
    MatRM cols = im2col_2d(input.data() + static_cast<std::int64_t>(g) * cig * h * w, cig, h,
                           w, kh, kw, stride, pad, oh, ow);
    CMapM kmat(kernel.data() + static_cast<std::int64_t>(g) * cog * kper, cog, kper);
    // out rows are channels, columns are positions
    MapM(out.data() + static_cast<std::int64_t>(g) * cog * oh * ow, cog,
         static_cast<std::int64_t>(oh) * ow)
        .noalias() = kmat * cols.transpose();
    if (rec) cols_keep->push_back(std::move(cols));
  }

  if (rec) {
    mark_output(out);
    Tape::active()->record([input, kernel, out, cols_keep, groups, cig, cog, h, w,
                            kh, kw, stride, pad, oh, ow, kper] {
      for (int g = 0; g < groups; ++g) {
        CMapM gout(out.grad() + static_cast<std::int64_t>(g) * cog * oh * ow, cog,
                   static_cast<std::int64_t>(oh) * ow);
        if (kernel.requires_grad()) {
          MapM(kernel.grad() + static_cast<std::int64_t>(g) * cog * kper, cog, kper)
              .noalias() += gout * (*cols_keep)[static_cast<size_t>(g)];
        }
        if (input.requires_grad()) {
          CMapM kmat(kernel.data() + static_cast<std::int64_t>(g) * cog * kper, cog, kper);
          MatRM dcols = gout.transpose() * kmat;
          col2im_2d(dcols, input.grad() + static_cast<std::int64_t>(g) * cig * h * w, cig,
                    h, w, kh, kw, stride, pad, oh, ow);
        }
      }
    });
  }
  return out;
}

Tensor conv1d_temporal(const Tensor& input, const Tensor& kernel, int pad) {
  if (input.ndim() != 2 || kernel.ndim() != 3 || kernel.dim(1) != input.dim(1)) {
    throw ShapeError("conv1d_temporal: need input [T,C] and kernel [Co,C,k], got " +
                     shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
  }
  const int t = input.dim(0), c = input.dim(1);
  const int co = kernel.dim(0), k = kernel.dim(2);
  if (pad < 0) throw ConfigError("conv1d_temporal: negative padding");
  if (t + 2 * pad < k) {
    throw ShapeError("conv1d_temporal: kernel length " + std::to_string(k) +
                     " exceeds padded input length " + std::to_string(t + 2 * pad));
  }
  const int to = t + 2 * pad - k + 1;
  Tensor out = Tensor::zeros({to, co});

  // cols: rows are output steps, columns run over (channel, tap)
  MatRM cols(to, static_cast<std::int64_t>(c) * k);
  cols.setZero();
  for (int ot = 0; ot < to; ++ot) {
    for (int ch = 0; ch < c; ++ch) {
      for (int dt = 0; dt < k; ++dt) {
        const int it = ot - pad + dt;
        if (it >= 0 && it < t) cols(ot, static_cast<std::int64_t>(ch) * k + dt) = input.data()[static_cast<std::int64_t>(it) * c + ch];
      }
    }
  }
  CMapM kmat(kernel.data(), co, static_cast<std::int64_t>(c) * k);
  MapM(out.data(), to, co).noalias() = cols * kmat.transpose();

  if (recording(input, kernel)) {
    mark_output(out);
    auto cols_keep = std::make_shared<MatRM>(std::move(cols));
    Tape::active()->record([input, kernel, out, cols_keep, t, c, co, k, pad, to] {
      CMapM gout(out.grad(), to, co);
      if (kernel.requires_grad()) {
        MapM(kernel.grad(), co, static_cast<std::int64_t>(c) * k).noalias() +=
            gout.transpose() * (*cols_keep);
      }
      if (input.requires_grad()) {
        MatRM dcols = gout * CMapM(kernel.data(), co, static_cast<std::int64_t>(c) * k);
        for (int ot = 0; ot < to; ++ot) {
          for (int ch = 0; ch < c; ++ch) {
            for (int dt = 0; dt < k; ++dt) {
              const int it = ot - pad + dt;
              if (it >= 0 && it < t) {
                input.grad()[static_cast<std::int64_t>(it) * c + ch] +=
                    dcols(ot, static_cast<std::int64_t>(ch) * k + dt);
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// ---- elementwise ---------------------------------------------------------------

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out] {
      for (std::int64_t i = 0; i < x.numel(); ++i) {
        const double v = x.data()[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        x.grad()[i] += out.grad()[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  out.array() = x.array().max(0.0);
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out] {
      x.grad_array() += (x.array() > 0.0).cast<double>() * out.grad_array();
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) out.data()[i] = sigmoid_scalar(x.data()[i]);
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out] {
      x.grad_array() += out.array() * (1.0 - out.array()) * out.grad_array();
    });
  }
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  out.array() = x.array().tanh();
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out] {
      x.grad_array() += (1.0 - out.array().square()) * out.grad_array();
    });
  }
  return out;
}

namespace {

enum class BinOp { kAdd, kSub, kMul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  const bool a_scalar = a.numel() == 1, b_scalar = b.numel() == 1;
  if (a.shape() != b.shape() && !a_scalar && !b_scalar) {
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  const Shape& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  Tensor out = Tensor::zeros(out_shape);
  const auto& av = a.array();
  const auto& bv = b.array();
  auto& ov = out.array();
  switch (op) {
    case BinOp::kAdd:
      if (a_scalar && !b_scalar) ov = av[0] + bv;
      else if (b_scalar && !a_scalar) ov = av + bv[0];
      else ov = av + bv;
      break;
    case BinOp::kSub:
      if (a_scalar && !b_scalar) ov = av[0] - bv;
      else if (b_scalar && !a_scalar) ov = av - bv[0];
      else ov = av - bv;
      break;
    case BinOp::kMul:
      if (a_scalar && !b_scalar) ov = av[0] * bv;
      else if (b_scalar && !a_scalar) ov = av * bv[0];
      else ov = av * bv;
      break;
  }
  if (recording(a, b)) {
    mark_output(out);
    Tape::active()->record([a, b, out, op, a_scalar, b_scalar] {
      const auto& g = out.grad_array();
      if (a.requires_grad()) {
        switch (op) {
          case BinOp::kAdd:
          case BinOp::kSub:
            if (a_scalar && out.numel() != 1) a.grad_array()[0] += g.sum();
            else a.grad_array() += g;
            break;
          case BinOp::kMul:
            if (a_scalar && out.numel() != 1) a.grad_array()[0] += (g * b.array()).sum();
            else if (b_scalar && out.numel() != 1) a.grad_array() += g * b.array()[0];
            else a.grad_array() += g * b.array();
            break;
        }
      }
      if (b.requires_grad()) {
        switch (op) {
          case BinOp::kAdd:
            if (b_scalar && out.numel() != 1) b.grad_array()[0] += g.sum();
            else b.grad_array() += g;
            break;
          case BinOp::kSub:
            if (b_scalar && out.numel() != 1) b.grad_array()[0] -= g.sum();
            else b.grad_array() -= g;
            break;
          case BinOp::kMul:
            if (b_scalar && out.numel() != 1) b.grad_array()[0] += (g * a.array()).sum();
            else if (a_scalar && out.numel() != 1) b.grad_array() += g * a.array()[0];
            else b.grad_array() += g * a.array();
            break;
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::kMul, "mul"); }

Tensor scale(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  out.array() = x.array() * c;
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out, c] { x.grad_array() += c * out.grad_array(); });
  }
  return out;
}

Tensor add_rowwise(const Tensor& x, const Tensor& b) {
  if (x.ndim() != 2 || b.ndim() != 1 || b.dim(0) != x.dim(1)) {
    throw ShapeError("add_rowwise: incompatible shapes " + shape_str(x.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const int m = x.dim(0), n = x.dim(1);
  Tensor out = Tensor::zeros({m, n});
  MapM(out.data(), m, n) = CMapM(x.data(), m, n).rowwise() + CMapV(b.data(), n).transpose();
  if (recording(x, b)) {
    mark_output(out);
    Tape::active()->record([x, b, out, m, n] {
      CMapM g(out.grad(), m, n);
      if (x.requires_grad()) MapM(x.grad(), m, n) += g;
      if (b.requires_grad()) MapV(b.grad(), n) += g.colwise().sum().transpose();
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (x.ndim() < 1) throw ShapeError("layer_norm: rank-0 input");
  const int c = x.dim(x.ndim() - 1);
  if (c == 0 || gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 ||
      beta.dim(0) != c) {
    throw ShapeError("layer_norm: input " + shape_str(x.shape()) + " with gamma " +
                     shape_str(gamma.shape()) + ", beta " + shape_str(beta.shape()));
  }
  if (eps <= 0) throw ConfigError("layer_norm: eps must be positive");
  const std::int64_t rows = x.numel() / c;
  Tensor out = Tensor::zeros(x.shape());
  // saved per row for backward: xhat, inverse stddev
  auto xhat = std::make_shared<MatRM>(rows, c);
  auto inv_std = std::make_shared<Eigen::VectorXd>(rows);
  CMapM xm(x.data(), rows, c);
  MapM om(out.data(), rows, c);
  CMapV gv(gamma.data(), c);
  CMapV bv(beta.data(), c);
  for (std::int64_t r = 0; r < rows; ++r) {
    const double mean = xm.row(r).mean();
    const double var = (xm.row(r).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    xhat->row(r) = (xm.row(r).array() - mean) * is;
    om.row(r) = xhat->row(r).cwiseProduct(gv.transpose()) + bv.transpose();
  }
  if (recording(x, gamma, beta)) {
    mark_output(out);
    Tape::active()->record([x, gamma, beta, out, xhat, inv_std, rows, c] {
      CMapM g(out.grad(), rows, c);
      CMapV gv(gamma.data(), c);
      for (std::int64_t r = 0; r < rows; ++r) {
        Eigen::RowVectorXd gy = g.row(r).cwiseProduct(gv.transpose());
        if (x.requires_grad()) {
          const double m1 = gy.mean();
          const double m2 = gy.cwiseProduct(xhat->row(r)).mean();
          MapM(x.grad(), rows, c).row(r).array() +=
              ((gy.array() - m1) - xhat->row(r).array() * m2) * (*inv_std)[r];
        }
        if (gamma.requires_grad()) {
          MapV(gamma.grad(), c) += g.row(r).cwiseProduct(xhat->row(r)).transpose();
        }
        if (beta.requires_grad()) MapV(beta.grad(), c) += g.row(r).transpose();
      }
    });
  }
  return out;
}

// ---- reductions and shape ops ----------------------------------------------------

Tensor sum(const Tensor& x) {
  Tensor out = Tensor::scalar(x.array().sum());
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out] { x.grad_array() += out.grad()[0]; });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  Tensor out = Tensor::scalar(x.array().mean());
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out] {
      x.grad_array() += out.grad()[0] / static_cast<double>(x.numel());
    });
  }
  return out;
}

Tensor mean_axis(const Tensor& x, int axis) {
  if (axis < 0 || axis >= x.ndim()) {
    throw ShapeError("mean_axis: axis " + std::to_string(axis) + " for shape " +
                     shape_str(x.shape()));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  const std::int64_t n = x.dim(axis);
  Shape out_shape;
  for (int i = 0; i < x.ndim(); ++i) {
    if (i != axis) out_shape.push_back(x.dim(i));
  }
  if (out_shape.empty()) out_shape = {1};
  Tensor out = Tensor::zeros(out_shape);
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t k = 0; k < n; ++k) {
      const double* src = x.data() + (o * n + k) * inner;
      double* dst = out.data() + o * inner;
      for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  out.array() /= static_cast<double>(n);
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out, outer, inner, n] {
      for (std::int64_t o = 0; o < outer; ++o) {
        const double* g = out.grad() + o * inner;
        for (std::int64_t k = 0; k < n; ++k) {
          double* dst = x.grad() + (o * n + k) * inner;
          for (std::int64_t i = 0; i < inner; ++i) dst[i] += g[i] / static_cast<double>(n);
        }
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_shape_positive(shape);
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tensor out = Tensor::zeros(shape);
  out.array() = x.array();
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out] { x.grad_array() += out.grad_array(); });
  }
  return out;
}

Tensor transpose01(const Tensor& x) {
  if (x.ndim() < 2) throw ShapeError("transpose01: need rank >= 2, got " + shape_str(x.shape()));
  const std::int64_t d0 = x.dim(0), d1 = x.dim(1);
  std::int64_t block = 1;
  for (int i = 2; i < x.ndim(); ++i) block *= x.dim(i);
  Shape out_shape = x.shape();
  std::swap(out_shape[0], out_shape[1]);
  Tensor out = Tensor::zeros(out_shape);
  for (std::int64_t a = 0; a < d0; ++a) {
    for (std::int64_t b = 0; b < d1; ++b) {
      out.array().segment((b * d0 + a) * block, block) =
          x.array().segment((a * d1 + b) * block, block);
    }
  }
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out, d0, d1, block] {
      for (std::int64_t a = 0; a < d0; ++a) {
        for (std::int64_t b = 0; b < d1; ++b) {
          x.grad_array().segment((a * d1 + b) * block, block) +=
              out.grad_array().segment((b * d0 + a) * block, block);
        }
      }
    });
  }
  return out;
}

Tensor slice_axis0(const Tensor& x, int index) {
  if (x.ndim() < 2 || index < 0 || index >= x.dim(0)) {
    throw ShapeError("slice_axis0: index " + std::to_string(index) + " for shape " +
                     shape_str(x.shape()));
  }
  Shape out_shape(x.shape().begin() + 1, x.shape().end());
  Tensor out = Tensor::zeros(out_shape);
  const std::int64_t block = out.numel();
  out.array() = x.array().segment(index * block, block);
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out, index, block] {
      x.grad_array().segment(index * block, block) += out.grad_array();
    });
  }
  return out;
}

Tensor stack_axis0(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack_axis0: empty list");
  const Shape& s = parts[0].shape();
  for (const Tensor& p : parts) {
    if (p.shape() != s) {
      throw ShapeError("stack_axis0: mixed shapes " + shape_str(s) + " and " +
                       shape_str(p.shape()));
    }
  }
  Shape out_shape;
  out_shape.push_back(static_cast<int>(parts.size()));
  out_shape.insert(out_shape.end(), s.begin(), s.end());
  Tensor out = Tensor::zeros(out_shape);
  const std::int64_t block = parts[0].numel();
  bool any_grad = false;
  for (size_t i = 0; i < parts.size(); ++i) {
    out.array().segment(static_cast<std::int64_t>(i) * block, block) = parts[i].array();
    any_grad = any_grad || parts[i].requires_grad();
  }
  if (Tape::active() != nullptr && any_grad) {
    mark_output(out);
    Tape::active()->record([parts, out, block] {
      for (size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].requires_grad()) {
          parts[i].grad_array() +=
              out.grad_array().segment(static_cast<std::int64_t>(i) * block, block);
        }
      }
    });
  }
  return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.ndim() != b.ndim()) {
    throw ShapeError("concat_last: rank mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  for (int i = 0; i + 1 < a.ndim(); ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw ShapeError("concat_last: leading dims differ, " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()));
    }
  }
  const int ca = a.dim(a.ndim() - 1), cb = b.dim(b.ndim() - 1);
  Shape out_shape = a.shape();
  out_shape.back() = ca + cb;
  Tensor out = Tensor::zeros(out_shape);
  const std::int64_t rows = a.numel() / ca;
  for (std::int64_t r = 0; r < rows; ++r) {
    out.array().segment(r * (ca + cb), ca) = a.array().segment(r * ca, ca);
    out.array().segment(r * (ca + cb) + ca, cb) = b.array().segment(r * cb, cb);
  }
  if (recording(a, b)) {
    mark_output(out);
    Tape::active()->record([a, b, out, rows, ca, cb] {
      for (std::int64_t r = 0; r < rows; ++r) {
        if (a.requires_grad()) {
          a.grad_array().segment(r * ca, ca) += out.grad_array().segment(r * (ca + cb), ca);
        }
        if (b.requires_grad()) {
          b.grad_array().segment(r * cb, cb) +=
              out.grad_array().segment(r * (ca + cb) + ca, cb);
        }
      }
    });
  }
  return out;
}

// ---- softmax family -----------------------------------------------------------

Tensor softmax(const Tensor& x) {
  if (x.ndim() != 1) throw ShapeError("softmax: need rank 1, got " + shape_str(x.shape()));
  Tensor out = Tensor::zeros(x.shape());
  const double m = x.array().maxCoeff();
  out.array() = (x.array() - m).exp();
  out.array() /= out.array().sum();
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out] {
      const double inner = (out.grad_array() * out.array()).sum();
      x.grad_array() += out.array() * (out.grad_array() - inner);
    });
  }
  return out;
}

Tensor log_softmax_rows(const Tensor& x) {
  if (x.ndim() != 2) {
    throw ShapeError("log_softmax_rows: need rank 2, got " + shape_str(x.shape()));
  }
  const int b = x.dim(0), c = x.dim(1);
  Tensor out = Tensor::zeros({b, c});
  CMapM xm(x.data(), b, c);
  MapM om(out.data(), b, c);
  for (int r = 0; r < b; ++r) {
    const double m = xm.row(r).maxCoeff();
    const double lse = m + std::log((xm.row(r).array() - m).exp().sum());
    om.row(r) = xm.row(r).array() - lse;
  }
  if (recording(x)) {
    mark_output(out);
    Tape::active()->record([x, out, b, c] {
      CMapM g(out.grad(), b, c);
      CMapM om(out.data(), b, c);
      MapM xg(x.grad(), b, c);
      for (int r = 0; r < b; ++r) {
        const double gsum = g.row(r).sum();
        xg.row(r) += g.row(r) - (om.row(r).array().exp() * gsum).matrix();
      }
    });
  }
  return out;
}

Tensor nll_from_log_probs(const Tensor& logp, const std::vector<int>& labels) {
  if (logp.ndim() != 2 || static_cast<int>(labels.size()) != logp.dim(0)) {
    throw ShapeError("nll_from_log_probs: log-probs " + shape_str(logp.shape()) + " with " +
                     std::to_string(labels.size()) + " labels");
  }
  const int b = logp.dim(0), c = logp.dim(1);
  for (int r = 0; r < b; ++r) {
    if (labels[static_cast<size_t>(r)] < 0 || labels[static_cast<size_t>(r)] >= c) {
      throw DataError("nll_from_log_probs: label " + std::to_string(labels[static_cast<size_t>(r)]) +
                      " out of range for " + std::to_string(c) + " classes");
    }
  }
  double acc = 0;
  for (int r = 0; r < b; ++r) acc -= logp.data()[static_cast<std::int64_t>(r) * c + labels[static_cast<size_t>(r)]];
  Tensor out = Tensor::scalar(acc / b);
  if (recording(logp)) {
    mark_output(out);
    Tape::active()->record([logp, out, labels, b, c] {
      const double g = out.grad()[0] / b;
      for (int r = 0; r < b; ++r) {
        logp.grad()[static_cast<std::int64_t>(r) * c + labels[static_cast<size_t>(r)]] -= g;
      }
    });
  }
  return out;
}

// ---- non-differentiable helpers ---------------------------------------------------

int argmax(const Tensor& x) {
  int best = 0;
  for (std::int64_t i = 1; i < x.numel(); ++i) {
    if (x.data()[i] > x.data()[best]) best = static_cast<int>(i);
  }
  return best;
}

std::pair<double, double> softmax2(const Tensor& logits) {
  if (logits.numel() != 2) {
    throw ShapeError("softmax2: need 2 logits, got " + shape_str(logits.shape()));
  }
  const double a = logits.data()[0], b = logits.data()[1];
  const double m = a > b ? a : b;
  const double ea = std::exp(a - m), eb = std::exp(b - m);
  return {ea / (ea + eb), eb / (ea + eb)};
}

void write_tensor(std::ostream& os, const Tensor& t) {
  for (size_t i = 0; i < t.shape().size(); ++i) {
    if (i) os << ' ';
    os << t.shape()[i];
  }
  os << '\n';
  char buf[40];
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", t.data()[i]);
    if (i) os << ' ';
    os << buf;
  }
  os << '\n';
}

Tensor read_tensor(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("tensor dump: missing shape line");
  Shape shape;
  {
    std::istringstream ls(line);
    int d;
    while (ls >> d) shape.push_back(d);
  }
  if (shape.empty()) throw DataError("tensor dump: empty shape line");
  if (!std::getline(is, line)) throw DataError("tensor dump: missing value line");
  std::vector<double> values;
  values.reserve(static_cast<size_t>(shape_numel(shape)));
  {
    std::istringstream ls(line);
    double v;
    while (ls >> v) values.push_back(v);
  }
  return Tensor::from_values(std::move(shape), std::move(values));
}

void write_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  write_tensor(f, t);
}

Tensor read_tensor_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path);
  return read_tensor(f);
}

}  // namespace painlarks
