#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "vtp/finite_diff.hpp"
#include "vtp/objectives.hpp"
#include "vtp/rng.hpp"

using namespace vtp;

namespace {

Tensor random_features(int n, int d, Rng& rng, bool requires_grad = false) {
  Tensor f = Tensor::zeros({n, d}, requires_grad);
  for (auto& v : f.values()) v = rng.normal();
  return f;
}

// independent scalar re-implementation of the symmetric InfoNCE sum
double oracle_info_nce(const std::vector<std::vector<double>>& f,
                       const std::vector<std::vector<double>>& fp,
                       double gamma) {
  const int n = static_cast<int>(f.size());
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s / gamma;
  };
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double denom = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k != i) denom += std::exp(dot(f[i], f[k]));
      denom += std::exp(dot(f[i], fp[k]));
    }
    total += -std::log(std::exp(dot(f[i], fp[i])) / denom);
  }
  for (int i = 0; i < n; ++i) {
    double denom = 0.0;
    for (int k = 0; k < n; ++k) {
      denom += std::exp(dot(fp[i], f[k]));
      if (k != i) denom += std::exp(dot(fp[i], fp[k]));
    }
    total += -std::log(std::exp(dot(fp[i], f[i])) / denom);
  }
  return total / n;
}

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  const int n = t.shape()[0], d = t.shape()[1];
  std::vector<std::vector<double>> out;
  for (int r = 0; r < n; ++r)
    out.emplace_back(t.values().begin() + r * d,
                     t.values().begin() + (r + 1) * d);
  return out;
}

}  // namespace

TEST_CASE("uniform logits give ln(vocabulary size)") {
  Tape tape;
  const int vq = 8192;
  Tensor logits = Tensor::zeros({2, vq});
  std::map<MaskPosition, std::int32_t> targets{{{0, 0, 0}, 17},
                                               {{0, 0, 1}, 4000}};
  const MaskNll r = mask_nll(tape, logits, targets, 1, 2);
  CHECK(std::abs(r.loss.item() - std::log(8192.0)) < 1e-9);
  CHECK(r.positions == 2);
}

TEST_CASE("confident correct logits drive the loss to zero") {
  Tape tape;
  const int vq = 16;
  Tensor logits = Tensor::zeros({1, vq});
  logits.values()[5] = 40.0;
  std::map<MaskPosition, std::int32_t> targets{{{0, 0, 0}, 5}};
  const MaskNll r = mask_nll(tape, logits, targets, 1, 1);
  CHECK(r.loss.item() < 1e-9);
  CHECK(r.accuracy == 1.0);
}

TEST_CASE("mask_nll matches a hand-computed two-position case") {
  Tape tape;
  Tensor logits =
      Tensor::from_values({2, 3}, {0.3, -1.0, 2.0, 1.5, 1.5, -0.5});
  std::map<MaskPosition, std::int32_t> targets{{{0, 0, 0}, 2},
                                               {{0, 0, 1}, 0}};
  const MaskNll r = mask_nll(tape, logits, targets, 1, 2);
  auto lse = [](double a, double b, double c) {
    return std::log(std::exp(a) + std::exp(b) + std::exp(c));
  };
  const double expected =
      0.5 * ((lse(0.3, -1.0, 2.0) - 2.0) + (lse(1.5, 1.5, -0.5) - 1.5));
  CHECK(r.loss.item() == doctest::Approx(expected).epsilon(1e-12));
  // row 0 argmax = 2 (correct), row 1 tie between 0 and 1 -> lowest id 0
  CHECK(r.accuracy == 1.0);
}

TEST_CASE("mask_nll rejects empty targets and non-content ids") {
  Tape tape;
  Tensor logits = Tensor::zeros({2, 4});
  std::map<MaskPosition, std::int32_t> empty;
  CHECK_THROWS_AS(mask_nll(tape, logits, empty, 1, 2), std::invalid_argument);
  std::map<MaskPosition, std::int32_t> bad{{{0, 0, 0}, 4}};
  CHECK_THROWS_AS(mask_nll(tape, logits, bad, 1, 2), std::invalid_argument);
}

TEST_CASE("mask_nll micro-averages across grids of unequal mask size") {
  Tape tape;
  Tensor a = Tensor::zeros({2, 4});
  a.values()[0 * 4 + 1] = 3.0;
  Tensor b = Tensor::zeros({2, 4});
  std::map<MaskPosition, std::int32_t> ta{{{0, 0, 0}, 1}};
  std::map<MaskPosition, std::int32_t> tb{{{0, 0, 0}, 0}, {{0, 0, 1}, 2}};
  const MaskNll r = mask_nll_batch(tape, {a, b}, {&ta, &tb}, 1, 2);
  const double lse_a =
      std::log(std::exp(0.0) + std::exp(3.0) + std::exp(0.0) + std::exp(0.0));
  const double expected = ((lse_a - 3.0) + std::log(4.0) + std::log(4.0)) / 3.0;
  CHECK(r.loss.item() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.positions == 3);
}

TEST_CASE("identical features collapse InfoNCE to 2 ln(2n-1)") {
  for (int n : {2, 4, 8}) {
    Tensor f = Tensor::zeros({n, 6});
    for (int r = 0; r < n; ++r) f.values()[r * 6 + 0] = 1.0;  // same unit vec
    Tensor fp = Tensor::zeros({n, 6});
    for (int r = 0; r < n; ++r) fp.values()[r * 6 + 0] = 1.0;
    Tape tape;
    const double loss = info_nce(tape, f, fp, 1.0).item();
    CHECK(std::abs(loss - 2.0 * std::log(2.0 * n - 1.0)) < 1e-9);
  }
}

TEST_CASE("orthogonal negatives and a sharp temperature drive the loss to 0") {
  const int n = 3;
  Tensor f = Tensor::zeros({n, n});
  Tensor fp = Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i) {
    f.values()[i * n + i] = 1.0;
    fp.values()[i * n + i] = 1.0;
  }
  Tape tape;
  CHECK(info_nce(tape, f, fp, 0.01).item() < 1e-10);
}

TEST_CASE("InfoNCE matches the scalar oracle on random features") {
  Rng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 3;
    Tensor f = random_features(n, 5, rng);
    Tensor fp = random_features(n, 5, rng);
    Tape tape;
    const double got = info_nce(tape, f, fp, 0.7).item();
    const double expected = oracle_info_nce(rows_of(f), rows_of(fp), 0.7);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("InfoNCE is invariant under a common orthogonal transform") {
  Rng rng(43);
  const int n = 4, d = 5;
  Tensor f = random_features(n, d, rng);
  Tensor fp = random_features(n, d, rng);

  // Householder reflector H = I - 2uu^T
  std::vector<double> u(d);
  double norm = 0.0;
  for (auto& v : u) {
    v = rng.normal();
    norm += v * v;
  }
  for (auto& v : u) v /= std::sqrt(norm);
  auto reflect = [&](Tensor& t) {
    for (int r = 0; r < n; ++r) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += t.values()[r * d + c] * u[
          static_cast<std::size_t>(c)];
      for (int c = 0; c < d; ++c)
        t.values()[r * d + c] -= 2.0 * dot * u[static_cast<std::size_t>(c)];
    }
  };
  Tape tape;
  const double before = info_nce(tape, f, fp, 0.3).item();
  reflect(f);
  reflect(fp);
  const double after = info_nce(tape, f, fp, 0.3).item();
  CHECK(before == doctest::Approx(after).epsilon(1e-12));
}

TEST_CASE("raising the positive dot strictly lowers the loss") {
  // f_1 orthogonal to everything else; f'_1 = c * f_1 so only the positive
  // pair's dot moves with c
  const int n = 3, d = 4;
  auto build = [&](double c) {
    Tensor f = Tensor::zeros({n, d});
    Tensor fp = Tensor::zeros({n, d});
    f.values()[0 * d + 0] = 1.0;
    fp.values()[0 * d + 0] = c;
    f.values()[1 * d + 1] = 0.8;
    fp.values()[1 * d + 2] = 0.5;
    f.values()[2 * d + 3] = -0.7;
    fp.values()[2 * d + 1] = 0.4;
    Tape tape;
    return info_nce(tape, f, fp, 0.5).item();
  };
  double prev = build(0.0);
  for (double c : {0.3, 0.8, 1.5, 3.0}) {
    const double cur = build(c);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("raising the target's probability lowers mask_nll") {
  std::map<MaskPosition, std::int32_t> targets{{{0, 0, 0}, 1}};
  auto loss_at = [&](double bump) {
    Tape tape;
    Tensor logits = Tensor::from_values({1, 3}, {0.2, 0.1 + bump, -0.4});
    return mask_nll(tape, logits, targets, 1, 1).loss.item();
  };
  double prev = loss_at(0.0);
  for (double bump : {0.5, 1.0, 2.0}) {
    const double cur = loss_at(bump);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("combined loss arithmetic") {
  Tape tape;
  ObjectiveConfig cfg;
  cfg.alpha = 0.0;
  Tensor mask = Tensor::scalar(9.0);
  Tensor cl = Tensor::scalar(2.0);
  CHECK(combined_loss(tape, mask, cl, cfg).item() == 9.0);

  cfg.alpha = 1.0;
  cfg.contrastive.temperature = 0.1;
  CHECK(combined_loss(tape, mask, cl, cfg).item() ==
        doctest::Approx(9.2).epsilon(1e-12));
}

TEST_CASE("info_nce validates its inputs") {
  Tape tape;
  Tensor one = Tensor::zeros({1, 4});
  CHECK_THROWS_AS(info_nce(tape, one, one, 0.1), std::invalid_argument);
  Tensor f = Tensor::zeros({2, 4});
  Tensor fp = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(info_nce(tape, f, fp, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(info_nce(tape, f, f, 0.0), std::invalid_argument);
}

TEST_CASE("gradients flow through both objective branches") {
  Rng rng(44);
  Tensor f = random_features(2, 4, rng, true);
  Tensor fp = random_features(2, 4, rng, true);
  Tensor logits = Tensor::zeros({2, 5}, true);
  for (auto& v : logits.values()) v = rng.normal();
  std::map<MaskPosition, std::int32_t> targets{{{0, 0, 0}, 2}, {{0, 0, 1}, 0}};

  ObjectiveConfig cfg;
  cfg.alpha = 1.0;
  cfg.contrastive.temperature = 0.1;
  auto forward = [&](Tape& tape) {
    Tensor mask = mask_nll(tape, logits, targets, 1, 2).loss;
    Tensor cl = info_nce(tape, f, fp, cfg.contrastive.temperature);
    return combined_loss(tape, mask, cl, cfg);
  };
  for (Tensor t : {f, fp, logits}) t.zero_grad();
  Tape tape;
  tape.backward(forward(tape));
  auto value_only = [&]() {
    Tape t2;
    t2.set_recording(false);
    return forward(t2).item();
  };
  CHECK(finite_diff_check(value_only, {f, fp, logits}, 1e-5) < 1e-6);
}
