#include "vtp/objectives.hpp"

#include <stdexcept>

namespace vtp {

namespace {

struct GatheredTargets {
  std::vector<int> rows;
  std::vector<int> ids;
};

GatheredTargets collect(const std::map<MaskPosition, std::int32_t>& targets,
                        int h_len, int w_len, int vq_size) {
  GatheredTargets out;
  out.rows.reserve(targets.size());
  out.ids.reserve(targets.size());
  for (const auto& [pos, id] : targets) {
    if (id < 0 || id >= vq_size)
      throw std::invalid_argument("mask target id " + std::to_string(id) +
                                  " is not a content token");
    const auto& [t, i, j] = pos;
    out.rows.push_back((t * h_len + i) * w_len + j);
    out.ids.push_back(static_cast<int>(id));
  }
  return out;
}

int argmax_lowest(const double* row, int n) {
  int best = 0;
  for (int j = 1; j < n; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

}  // namespace

MaskNll mask_nll_batch(
    Tape& tape, const std::vector<Tensor>& logits,
    const std::vector<const std::map<MaskPosition, std::int32_t>*>& targets,
    int h_len, int w_len) {
  if (logits.size() != targets.size())
    throw std::invalid_argument("logits/targets batch size mismatch");
  std::vector<Tensor> gathered;
  std::vector<int> all_ids;
  std::size_t hits = 0, total = 0;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const int vq = logits[b].shape()[1];
    const GatheredTargets gt = collect(*targets[b], h_len, w_len, vq);
    if (gt.rows.empty()) continue;
    gathered.push_back(gather_rows(tape, logits[b], gt.rows));
    all_ids.insert(all_ids.end(), gt.ids.begin(), gt.ids.end());
    for (std::size_t k = 0; k < gt.rows.size(); ++k) {
      const double* row = logits[b].values().data() +
                          static_cast<std::size_t>(gt.rows[k]) * vq;
      hits += argmax_lowest(row, vq) == gt.ids[k];
    }
    total += gt.rows.size();
  }
  if (total == 0)
    throw std::invalid_argument("mask_nll requires at least one masked position");
  Tensor rows = gathered.size() == 1 ? gathered[0] : concat(tape, gathered, 0);
  MaskNll out;
  out.loss = nll_loss(tape, log_softmax(tape, rows), all_ids);
  out.accuracy = static_cast<double>(hits) / static_cast<double>(total);
  out.positions = total;
  return out;
}

MaskNll mask_nll(Tape& tape, const Tensor& logits,
                 const std::map<MaskPosition, std::int32_t>& targets,
                 int h_len, int w_len) {
  return mask_nll_batch(tape, {logits}, {&targets}, h_len, w_len);
}

Tensor info_nce(Tape& tape, const Tensor& f, const Tensor& f_prime,
                double temperature) {
  if (f.shape().size() != 2 || f.shape() != f_prime.shape())
    throw std::invalid_argument("info_nce: feature matrices must match, got " +
                                shape_str(f.shape()) + " vs " +
                                shape_str(f_prime.shape()));
  const int n = f.shape()[0];
  if (n < 2) throw std::invalid_argument("info_nce requires n >= 2");
  if (temperature <= 0.0)
    throw std::invalid_argument("temperature must be positive");
  const double inv_gamma = 1.0 / temperature;
  Tensor same = scale(tape, matmul(tape, f, transpose(tape, f)), inv_gamma);
  Tensor cross = scale(tape, matmul(tape, f, transpose(tape, f_prime)),
                       inv_gamma);  // cross[i][k] = f_i . f'_k / gamma
  Tensor cross_p = transpose(tape, cross);  // cross_p[i][k] = f'_i . f_k
  Tensor same_p =
      scale(tape, matmul(tape, f_prime, transpose(tape, f_prime)), inv_gamma);

  std::vector<int> without_i(static_cast<std::size_t>(n - 1));
  std::vector<Tensor> terms;
  terms.reserve(static_cast<std::size_t>(2 * n));
  auto side_loss = [&](const Tensor& own, const Tensor& other, int i) {
    // denominator: own-side dots without i, plus all opposite-side dots
    for (int k = 0, m = 0; k < n; ++k)
      if (k != i) without_i[static_cast<std::size_t>(m++)] = k;
    Tensor own_row = gather_rows(tape, own, {i});  // (1 x n)
    Tensor own_wo_i = transpose(
        tape, gather_rows(tape, transpose(tape, own_row), without_i));
    Tensor other_row = gather_rows(tape, other, {i});
    Tensor all = concat(tape, {own_wo_i, other_row}, 1);  // (1 x 2n-1)
    // positive sits at offset n-1+i (its own column inside other_row)
    return nll_loss(tape, log_softmax(tape, all), {n - 1 + i});
  };
  for (int i = 0; i < n; ++i) terms.push_back(side_loss(same, cross, i));
  for (int i = 0; i < n; ++i) terms.push_back(side_loss(same_p, cross_p, i));
  return scale(tape, sum_all(tape, concat(tape, terms, 0)),
               1.0 / static_cast<double>(n));
}

Tensor combined_loss(Tape& tape, const Tensor& mask_loss,
                     const Tensor& cl_loss, const ObjectiveConfig& cfg) {
  if (cfg.alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  return add(tape, mask_loss,
             scale(tape, cl_loss,
                   cfg.alpha * cfg.contrastive.temperature));
}

}  // namespace vtp
