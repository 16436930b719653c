#pragma once

// Central finite-difference gradient checking. The oracle only ever evaluates
// the forward pass (outside any tape), so it stays independent of the backward
// rules it is used to verify.

#include <functional>
#include <vector>

#include "painlarks/random.hpp"
#include "painlarks/tensor.hpp"

namespace painlarks {

// Relative error between analytic and finite-difference gradients:
// |ad - fd| / max(1, |ad|, |fd|).
double grad_rel_err(double analytic, double finite_diff);

// Checks every element of every input. `forward` must return a scalar loss
// built from the given tensors (which must have requires_grad set). Returns
// the max relative error over all checked elements.
double gradcheck(const std::function<Tensor()>& forward,
                 const std::vector<Tensor>& inputs, double step = 1e-5);

// Same, but checks `samples` randomly chosen elements across the inputs.
// For models with too many parameters to sweep exhaustively.
double gradcheck_sampled(const std::function<Tensor()>& forward,
                         const std::vector<Tensor>& inputs, int samples,
                         Rng& rng, double step = 1e-5);

}  // namespace painlarks
