#pragma once

#include <map>
#include <vector>

#include "vtp/masking.hpp"
#include "vtp/ops.hpp"
#include "vtp/tensor.hpp"

namespace vtp {

struct ContrastiveConfig {
  double temperature = 0.1;  // gamma
  int n = 2;                 // clips per side (group size is 2n)
};

struct ObjectiveConfig {
  double alpha = 1.0;
  bool pure_cl = false;  // contrastive-only mode; stands in for "alpha = inf"
  ContrastiveConfig contrastive;
};

struct MaskNll {
  Tensor loss;
  double accuracy = 0.0;
  std::size_t positions = 0;
};

/// Negative log-likelihood over the masked positions of one grid, averaged
/// per position. logits rows are position-major (t, then i, then j) and span
/// the content vocabulary only. Ties in the accuracy argmax go to the lowest
/// id. Throws on empty targets.
MaskNll mask_nll(Tape& tape, const Tensor& logits,
                 const std::map<MaskPosition, std::int32_t>& targets,
                 int h_len, int w_len);

/// Batch form, micro-averaged: one mean over all masked positions of all
/// grids.
MaskNll mask_nll_batch(
    Tape& tape, const std::vector<Tensor>& logits,
    const std::vector<const std::map<MaskPosition, std::int32_t>*>& targets,
    int h_len, int w_len);

/// Symmetric InfoNCE over n positive pairs (rows of f and f_prime). For each
/// side the denominator has 2n-1 terms: the other features of the same side
/// plus all features of the opposite side (positive included).
Tensor info_nce(Tape& tape, const Tensor& f, const Tensor& f_prime,
                double temperature);

/// mask_loss + alpha * gamma * cl_loss.
Tensor combined_loss(Tape& tape, const Tensor& mask_loss,
                     const Tensor& cl_loss, const ObjectiveConfig& cfg);

}  // namespace vtp
