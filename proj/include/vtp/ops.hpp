#pragma once

#include <vector>

#include "vtp/rng.hpp"
#include "vtp/tensor.hpp"

namespace vtp {

// Primitive forward/backward catalog. Every op returns a fresh tensor and,
// when the tape is recording, appends the closure that accumulates exact
// analytic gradients onto its inputs.

Tensor add(Tape& tape, Tensor a, Tensor b);
Tensor sub(Tape& tape, Tensor a, Tensor b);
Tensor mul(Tape& tape, Tensor a, Tensor b);
Tensor scale(Tape& tape, Tensor a, double c);

/// Numpy-style broadcast of `a` to `shape` (right-aligned, 1-dims expand).
Tensor broadcast(Tape& tape, Tensor a, const Shape& shape);

Tensor matmul(Tape& tape, Tensor a, Tensor b);
Tensor transpose(Tape& tape, Tensor a);

/// Concatenate 2D tensors along axis 0 or 1 (or 1D tensors along axis 0).
Tensor concat(Tape& tape, std::vector<Tensor> parts, int axis);

Tensor sum_axis(Tape& tape, Tensor a, int axis);
Tensor mean_axis(Tape& tape, Tensor a, int axis);
Tensor sum_all(Tape& tape, Tensor a);
Tensor mean_all(Tape& tape, Tensor a);

/// Softmax over the last axis.
Tensor softmax(Tape& tape, Tensor a);
Tensor log_softmax(Tape& tape, Tensor a);

/// -mean_i log_probs[i, targets[i]] over the rows of a 2D log-prob matrix.
Tensor nll_loss(Tape& tape, Tensor log_probs,
                const std::vector<int>& targets);

/// Per-vector (last axis) normalization with learned gain and bias.
Tensor layer_norm(Tape& tape, Tensor a, Tensor gain,
                  Tensor bias, double eps);

/// Batch normalization over axis 0 of an (N x C) input. Training mode uses
/// batch statistics and updates the running buffers in place; inference mode
/// is the frozen affine map through the running statistics.
Tensor batch_norm(Tape& tape, Tensor a, Tensor gain,
                  Tensor bias, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum,
                  double eps);

Tensor gelu(Tape& tape, Tensor a);

/// Rows of `table` selected by `ids` (embedding lookup / row slicing).
Tensor gather_rows(Tape& tape, Tensor table,
                   const std::vector<int>& ids);

/// Same values, new shape (element count preserved).
Tensor reshape(Tape& tape, Tensor a, Shape shape);

/// Each row divided by its L2 norm.
Tensor l2_normalize_rows(Tape& tape, Tensor a);

/// Inverted dropout. Identity when !training or rate == 0.
Tensor dropout(Tape& tape, Tensor a, double rate, bool training,
               Rng& rng);

}  // namespace vtp
