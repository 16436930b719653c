#include "painlarks/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace painlarks {

double grad_rel_err(double analytic, double finite_diff) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(finite_diff)});
  return std::fabs(analytic - finite_diff) / denom;
}

namespace {

// Analytic gradients for all inputs of one forward evaluation.
std::vector<Eigen::ArrayXd> analytic_grads(const std::function<Tensor()>& forward,
                                           const std::vector<Tensor>& inputs) {
  for (const Tensor& t : inputs) t.zero_grad();
  {
    Tape tape;
    Tensor loss = forward();
    backward(loss);
  }
  std::vector<Eigen::ArrayXd> grads;
  grads.reserve(inputs.size());
  for (const Tensor& t : inputs) grads.push_back(t.grad_array());
  return grads;
}

double fd_at(const std::function<Tensor()>& forward, const Tensor& input,
             std::int64_t idx, double step) {
  double* slot = input.data() + idx;
  const double orig = *slot;
  *slot = orig + step;
  const double fp = forward().value();
  *slot = orig - step;
  const double fm = forward().value();
  *slot = orig;
  return (fp - fm) / (2.0 * step);
}

}  // namespace

double gradcheck(const std::function<Tensor()>& forward,
                 const std::vector<Tensor>& inputs, double step) {
  const auto grads = analytic_grads(forward, inputs);
  double max_err = 0.0;
  for (size_t t = 0; t < inputs.size(); ++t) {
    for (std::int64_t i = 0; i < inputs[t].numel(); ++i) {
      const double fd = fd_at(forward, inputs[t], i, step);
      max_err = std::max(max_err, grad_rel_err(grads[t][i], fd));
    }
  }
  return max_err;
}

double gradcheck_sampled(const std::function<Tensor()>& forward,
                         const std::vector<Tensor>& inputs, int samples, Rng& rng,
                         double step) {
  const auto grads = analytic_grads(forward, inputs);
  std::int64_t total = 0;
  for (const Tensor& t : inputs) total += t.numel();
  double max_err = 0.0;
  for (int s = 0; s < samples; ++s) {
    std::int64_t pick = rng.uniform_int(0, static_cast<int>(total - 1));
    size_t t = 0;
    while (pick >= inputs[t].numel()) {
      pick -= inputs[t].numel();
      ++t;
    }
    const double fd = fd_at(forward, inputs[t], pick, step);
    max_err = std::max(max_err, grad_rel_err(grads[t][pick], fd));
  }
  return max_err;
}

}  // namespace painlarks
