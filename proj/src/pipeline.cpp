#include "vtp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vtp {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::size_t> sample_distinct(std::size_t population, int count,
                                         Rng& rng) {
  if (count > static_cast<int>(population))
    throw std::invalid_argument("batch needs " + std::to_string(count) +
                                " distinct videos, store has " +
                                std::to_string(population));
  std::vector<std::size_t> pool(population);
  for (std::size_t k = 0; k < population; ++k) pool[k] = k;
  for (int k = 0; k < count; ++k) {
    const std::size_t pick =
        k + rng.uniform_below(static_cast<std::uint64_t>(population - k));
    std::swap(pool[static_cast<std::size_t>(k)], pool[pick]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace

PositivePair sample_positive_pair(const VideoTokenStore& store,
                                  std::size_t video_index,
                                  const PairSamplerConfig& cfg, Rng& rng) {
  if (video_index >= store.videos.size())
    throw std::out_of_range("video index out of range");
  if (cfg.clip_len < 1) throw std::invalid_argument("clip_len must be >= 1");
  const VideoEntry& video = store.videos[video_index];
  const int frames = video.grid.t_len;
  const int max_start = std::max(0, frames - cfg.clip_len);
  auto draw = [&]() {
    return static_cast<int>(
        rng.uniform_below(static_cast<std::uint64_t>(max_start) + 1));
  };
  PositivePair pair;
  if (cfg.d_max == 0.0) {
    pair.start_a = pair.start_b = draw();
  } else {
    const double limit = cfg.d_max * video.fps();
    for (int attempt = 0;; ++attempt) {
      pair.start_a = draw();
      pair.start_b = draw();
      if (std::abs(pair.start_a - pair.start_b) <= limit) break;
      if (attempt > 1000000)
        throw std::runtime_error("positive pair rejection did not terminate");
    }
  }
  pair.clip_a = slice_clip(store, video_index, pair.start_a, cfg.clip_len);
  pair.clip_b = slice_clip(store, video_index, pair.start_b, cfg.clip_len);
  return pair;
}

ClipPairBatch build_batch(const VideoTokenStore& store,
                          const std::vector<std::size_t>& video_indices,
                          const PairSamplerConfig& sampler_cfg,
                          const MaskingConfig& masking_cfg, Rng& rng) {
  const int n = static_cast<int>(video_indices.size());
  if (n < 2)
    throw std::invalid_argument("contrastive batch needs n >= 2 videos");
  std::set<std::size_t> uniq(video_indices.begin(), video_indices.end());
  if (static_cast<int>(uniq.size()) != n)
    throw std::invalid_argument(
        "duplicate video index in batch: a video cannot provide its own "
        "negative");
  const Vocabulary vocab = store.vocabulary();
  ClipPairBatch batch;
  batch.masked.resize(static_cast<std::size_t>(2 * n));
  batch.targets.resize(static_cast<std::size_t>(2 * n));
  batch.raw.resize(static_cast<std::size_t>(2 * n));
  batch.video_ids.resize(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    const std::size_t v = video_indices[static_cast<std::size_t>(i)];
    PositivePair pair = sample_positive_pair(store, v, sampler_cfg, rng);
    const GridDims dims{pair.clip_a.t_len, pair.clip_a.h_len,
                        pair.clip_a.w_len};
    for (int side = 0; side < 2; ++side) {
      const std::size_t slot = static_cast<std::size_t>(side == 0 ? i : i + n);
      TokenGrid& clip = side == 0 ? pair.clip_a : pair.clip_b;
      const MaskSet mask = sample_mask(dims, masking_cfg, rng);
      MaskedGrid m = apply_mask(clip, mask, vocab);
      batch.raw[slot] = std::move(clip);
      batch.masked[slot] = std::move(m.grid);
      batch.targets[slot] = std::move(m.targets);
      batch.video_ids[slot] = store.videos[v].id;
    }
  }
  return batch;
}

void TrainConfig::validate(std::size_t store_videos) const {
  if (group_size < 4 || group_size % 2 != 0)
    throw std::invalid_argument(
        "group_size must be an even count >= 4 (two clips per video, n >= 2)");
  if (accumulation_target % group_size != 0)
    throw std::invalid_argument(
        "accumulation_target must be a multiple of group_size");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (clip_norm <= 0.0) throw std::invalid_argument("clip_norm must be > 0");
  if (group_size / 2 > static_cast<int>(store_videos))
    throw std::invalid_argument("group needs " +
                                std::to_string(group_size / 2) +
                                " distinct videos, store has " +
                                std::to_string(store_videos));
  if (objective.pure_cl && objective.alpha == 0.0)
    throw std::invalid_argument("pure_cl with alpha = 0 leaves no objective");
}

int TrainConfig::derived_steps_per_epoch(std::size_t store_videos) const {
  if (steps_per_epoch > 0) return steps_per_epoch;
  const int groups_per_pass = std::max(
      1, static_cast<int>(store_videos) / std::max(1, group_size / 2));
  return std::max(1, groups_per_pass / micro_batches_per_step());
}

int TrainConfig::total_steps(std::size_t store_videos) const {
  return epochs * derived_steps_per_epoch(store_videos);
}

std::string metrics_header() {
  return "step,lr,mask_loss,mask_acc,cl_loss,combined_loss,grad_norm,scale";
}

std::string metrics_row(const LossReport& r) {
  std::string row = std::to_string(r.step) + "," + fmt(r.lr) + ",";
  row += r.mask_loss ? fmt(*r.mask_loss) : "";
  row += ",";
  row += r.mask_acc ? fmt(*r.mask_acc) : "";
  row += ",";
  row += r.cl_loss ? fmt(*r.cl_loss) : "";
  row += ",";
  row += fmt(r.combined) + "," + fmt(r.grad_norm) + "," + fmt(r.clip_scale);
  return row;
}

MicroResult pretrain_group_loss(Tape& tape, const ClipPairBatch& batch,
                                const ModelParams& params,
                                const ModelConfig& model_cfg,
                                const TrainConfig& cfg,
                                const ForwardOptions& opts) {
  const int n = batch.pairs();
  if (n < 2) throw std::invalid_argument("group needs at least two pairs");
  const bool want_mask = !cfg.objective.pure_cl;
  const bool want_cl = cfg.objective.pure_cl || cfg.objective.alpha > 0.0;
  MicroResult out;

  Tensor mask_loss, cl_loss;
  if (want_mask) {
    ModelOutput fwd = model_forward(tape, batch.masked, params, model_cfg,
                                    ForwardMode::kPretrain, opts);
    std::vector<const std::map<MaskPosition, std::int32_t>*> targets;
    for (const auto& t : batch.targets) targets.push_back(&t);
    const MaskNll nll =
        mask_nll_batch(tape, fwd.token_logits, targets,
                       batch.masked[0].h_len, batch.masked[0].w_len);
    mask_loss = nll.loss;
    out.mask_loss = nll.loss.item();
    out.mask_acc = nll.accuracy;
    if (want_cl && cfg.cl_input_masked) {
      std::vector<int> first(static_cast<std::size_t>(n)),
          second(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        first[static_cast<std::size_t>(i)] = i;
        second[static_cast<std::size_t>(i)] = i + n;
      }
      Tensor f = gather_rows(tape, fwd.cls_features, first);
      Tensor fp = gather_rows(tape, fwd.cls_features, second);
      cl_loss = info_nce(tape, f, fp, cfg.objective.contrastive.temperature);
    }
  }
  if (want_cl && !cl_loss.defined()) {
    // contrastive branch on its own inputs (unmasked, or masked when the
    // mask branch is off but cl_input_masked stays on)
    const std::vector<TokenGrid>& inputs =
        cfg.cl_input_masked ? batch.masked : batch.raw;
    ModelOutput fwd = model_forward(tape, inputs, params, model_cfg,
                                    ForwardMode::kPretrain, opts);
    std::vector<int> first(static_cast<std::size_t>(n)),
        second(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      first[static_cast<std::size_t>(i)] = i;
      second[static_cast<std::size_t>(i)] = i + n;
    }
    Tensor f = gather_rows(tape, fwd.cls_features, first);
    Tensor fp = gather_rows(tape, fwd.cls_features, second);
    cl_loss = info_nce(tape, f, fp, cfg.objective.contrastive.temperature);
  }
  if (cl_loss.defined()) out.cl_loss = cl_loss.item();

  if (!want_mask) {
    // contrastive-only mode keeps the plain CL objective
    out.loss = cl_loss;
  } else if (cl_loss.defined() && cfg.objective.alpha > 0.0) {
    out.loss = combined_loss(tape, mask_loss, cl_loss, cfg.objective);
  } else {
    out.loss = mask_loss;
  }
  out.combined = out.loss.item();
  return out;
}

Trainer::Trainer(ModelParams& params, const ModelConfig& model_cfg,
                 TrainConfig cfg, std::size_t store_videos)
    : params_(params), model_cfg_(model_cfg), cfg_(std::move(cfg)) {
  cfg_.validate(store_videos);
  trainable_ = params_.trainable();
  adam_ = AdamState(trainable_,
                    AdamConfig{cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps,
                               cfg_.weight_decay});
  schedule_ = LrSchedule{cfg_.peak_lr, cfg_.total_steps(store_videos),
                         cfg_.warmup_ratio};
  params_.zero_grads();
}

std::optional<LossReport> Trainer::micro_step(const ClipPairBatch& batch,
                                              const ForwardOptions& opts) {
  Tape tape;
  const MicroResult r =
      pretrain_group_loss(tape, batch, params_, model_cfg_, cfg_, opts);
  if (!std::isfinite(r.combined))
    throw std::runtime_error("non-finite loss after step " +
                             std::to_string(steps_));
  tape.backward(r.loss);
  ++micro_count_;
  if (r.mask_loss) {
    mask_loss_sum_ += *r.mask_loss;
    mask_acc_sum_ += *r.mask_acc;
    ++mask_terms_;
  }
  if (r.cl_loss) {
    cl_loss_sum_ += *r.cl_loss;
    ++cl_terms_;
  }
  combined_sum_ += r.combined;
  if (micro_count_ < cfg_.micro_batches_per_step()) return std::nullopt;

  // normalize the summed gradients to the mean over micro-batches
  const double inv = 1.0 / micro_count_;
  for (auto& p : trainable_)
    for (double& g : p.grad()) g *= inv;

  LossReport report;
  report.step = steps_ + 1;
  report.lr = lr_at(report.step, schedule_);
  report.grad_norm = global_grad_norm(trainable_);
  report.clip_scale = clip_global_norm(trainable_, cfg_.clip_norm);
  adam_.step(trainable_, report.lr);
  for (auto& p : trainable_) p.zero_grad();

  if (mask_terms_ > 0) {
    report.mask_loss = mask_loss_sum_ / mask_terms_;
    report.mask_acc = mask_acc_sum_ / mask_terms_;
  }
  if (cl_terms_ > 0) report.cl_loss = cl_loss_sum_ / cl_terms_;
  report.combined = combined_sum_ / micro_count_;

  micro_count_ = 0;
  mask_loss_sum_ = mask_acc_sum_ = cl_loss_sum_ = combined_sum_ = 0.0;
  mask_terms_ = cl_terms_ = 0;
  ++steps_;
  return report;
}

std::vector<double> multi_crop_predict(const ModelParams& params,
                                       const ModelConfig& model_cfg,
                                       const VideoTokenStore& store,
                                       std::size_t video_index, int clip_len,
                                       const CropConfig& crops) {
  if (video_index >= store.videos.size())
    throw std::out_of_range("video index out of range");
  if (crops.temporal < 1)
    throw std::invalid_argument("temporal crop count must be >= 1");
  const VideoEntry& video = store.videos[video_index];
  const int frames = video.grid.t_len;
  const int max_start = std::max(0, frames - clip_len);

  std::vector<int> starts;
  if (max_start == 0 || crops.temporal == 1) {
    starts.assign(1, 0);
  } else {
    for (int k = 0; k < crops.temporal; ++k)
      starts.push_back(static_cast<int>(
          std::llround(static_cast<double>(k) * max_start /
                       (crops.temporal - 1))));
  }

  const int gh = video.grid.h_len, gw = video.grid.w_len;
  const int mh = std::min(gh, params.pos_h.shape()[0]);
  const int mw = std::min(gw, params.pos_w.shape()[0]);
  std::vector<std::pair<int, int>> corners;
  corners.emplace_back((gh - mh) / 2, (gw - mw) / 2);  // center
  if (crops.three_spatial) {
    corners.emplace_back(0, 0);
    corners.emplace_back(gh - mh, gw - mw);
  }

  std::vector<double> score;
  int count = 0;
  Tape tape;
  tape.set_recording(false);
  ForwardOptions opts;  // inference
  for (int start : starts) {
    const TokenGrid clip = slice_clip(store, video_index, start, clip_len);
    for (const auto& [ci, cj] : corners) {
      for (int flip = 0; flip < (crops.flip ? 2 : 1); ++flip) {
        TokenGrid window(clip.t_len, mh, mw);
        for (int t = 0; t < clip.t_len; ++t)
          for (int i = 0; i < mh; ++i)
            for (int j = 0; j < mw; ++j)
              window.at(t, i, j) =
                  clip.at(t, ci + i, flip ? cj + mw - 1 - j : cj + j);
        ModelOutput out = model_forward(tape, {window}, params, model_cfg,
                                        ForwardMode::kFinetune, opts);
        Tensor probs = softmax(tape, out.class_logits);
        if (score.empty()) score.assign(probs.values().size(), 0.0);
        for (std::size_t k = 0; k < probs.values().size(); ++k)
          score[k] += probs.values()[k];
        ++count;
      }
    }
  }
  for (auto& s : score) s /= count;
  return score;
}

std::map<std::string, int> load_labels(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open labels file: " + path);
  std::map<std::string, int> labels;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::size_t comma = line.rfind(',');
    if (comma == std::string::npos)
      throw std::runtime_error("bad labels row (want video_id,label): " + line);
    labels[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
  }
  return labels;
}

PretrainResult run_pretrain(const VideoTokenStore& store, ModelParams& params,
                            const ModelConfig& model_cfg,
                            const TrainConfig& cfg, std::ostream& metrics) {
  cfg.validate(store.videos.size());
  Trainer trainer(params, model_cfg, cfg, store.videos.size());
  Rng data_rng = Rng(cfg.seed).split(1);
  Rng dropout_rng = Rng(cfg.seed).split(2);
  MaskingConfig masking = cfg.masking;
  PairSamplerConfig sampler = cfg.sampler;

  ForwardOptions opts;
  opts.training = true;
  opts.bn_training = true;
  opts.dropout_rng = &dropout_rng;

  metrics << metrics_header() << "\n";
  PretrainResult result;
  const int total_steps = cfg.total_steps(store.videos.size());
  const int n = cfg.group_size / 2;
  while (trainer.steps_taken() < total_steps) {
    const auto videos = sample_distinct(store.videos.size(), n, data_rng);
    const ClipPairBatch batch =
        build_batch(store, videos, sampler, masking, data_rng);
    if (auto report = trainer.micro_step(batch, opts)) {
      metrics << metrics_row(*report) << "\n";
      result.last = *report;
      result.steps = report->step;
    }
  }
  return result;
}

FinetuneResult run_finetune(const VideoTokenStore& store, ModelParams& params,
                            const ModelConfig& model_cfg,
                            const TrainConfig& cfg,
                            const std::map<std::string, int>& labels,
                            std::ostream& metrics) {
  if (!params.classifier_w.defined())
    throw std::invalid_argument("model was built without a classifier head");
  for (const auto& video : store.videos)
    if (!labels.contains(video.id))
      throw std::runtime_error("labels file missing video: " + video.id);

  std::vector<Tensor> trainable;
  if (cfg.linear_probe) {
    trainable = {params.classifier_w, params.classifier_b};
  } else {
    trainable = params.trainable();
  }
  AdamState adam(trainable, AdamConfig{cfg.adam_beta1, cfg.adam_beta2,
                                       cfg.adam_eps, cfg.weight_decay});
  const int batch_videos =
      std::min<int>(cfg.group_size, static_cast<int>(store.videos.size()));
  const int steps_per_epoch = std::max(
      1, static_cast<int>(store.videos.size()) / batch_videos);
  const int total_steps = cfg.epochs * steps_per_epoch;
  LrSchedule schedule{cfg.peak_lr, total_steps, cfg.warmup_ratio};
  Rng data_rng = Rng(cfg.seed).split(11);
  Rng dropout_rng = Rng(cfg.seed).split(12);
  params.zero_grads();

  ForwardOptions opts;
  opts.training = true;
  opts.bn_training = false;  // batch norm lives in the removed cl head
  opts.dropout_rng = &dropout_rng;

  metrics << "step,lr,loss,accuracy\n";
  FinetuneResult result;
  for (int step = 1; step <= total_steps; ++step) {
    const auto videos =
        sample_distinct(store.videos.size(), batch_videos, data_rng);
    std::vector<TokenGrid> clips;
    std::vector<int> ids;
    for (std::size_t v : videos) {
      const int frames = store.videos[v].grid.t_len;
      const int max_start = std::max(0, frames - cfg.sampler.clip_len);
      const int start = static_cast<int>(
          data_rng.uniform_below(static_cast<std::uint64_t>(max_start) + 1));
      clips.push_back(slice_clip(store, v, start, cfg.sampler.clip_len));
      ids.push_back(labels.at(store.videos[v].id));
    }
    Tape tape;
    ModelOutput out = model_forward(tape, clips, params, model_cfg,
                                    ForwardMode::kFinetune, opts);
    Tensor loss = nll_loss(tape, log_softmax(tape, out.class_logits), ids);
    if (!std::isfinite(loss.item()))
      throw std::runtime_error("non-finite loss after step " +
                               std::to_string(step - 1));
    tape.backward(loss);

    int hits = 0;
    const int classes = out.class_logits.shape()[1];
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const double* row = out.class_logits.values().data() +
                          static_cast<std::size_t>(k) * classes;
      int best = 0;
      for (int c = 1; c < classes; ++c)
        if (row[c] > row[best]) best = c;
      hits += best == ids[static_cast<std::size_t>(k)];
    }

    const double lr = lr_at(step, schedule);
    clip_global_norm(trainable, cfg.clip_norm);
    adam.step(trainable, lr);
    for (auto& p : trainable) p.zero_grad();
    // gradients may have landed on frozen tensors in probe mode; drop them
    if (cfg.linear_probe) params.zero_grads();

    result.final_loss = loss.item();
    result.train_accuracy = static_cast<double>(hits) / ids.size();
    result.steps = step;
    metrics << step << "," << fmt(lr) << "," << fmt(result.final_loss) << ","
            << fmt(result.train_accuracy) << "\n";
  }
  return result;
}

double pair_retrieval_top1(const VideoTokenStore& store, ModelParams& params,
                           const ModelConfig& model_cfg,
                           const TrainConfig& cfg) {
  const int n = static_cast<int>(store.videos.size());
  if (n < 2) throw std::invalid_argument("retrieval needs >= 2 videos");
  std::vector<std::size_t> all(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) all[static_cast<std::size_t>(k)] = k;
  Rng rng = Rng(cfg.seed).split(21);
  const ClipPairBatch batch =
      build_batch(store, all, cfg.sampler, cfg.masking, rng);
  Tape tape;
  tape.set_recording(false);
  ForwardOptions opts;  // inference, frozen batch norm
  ModelOutput out = model_forward(tape, batch.masked, params, model_cfg,
                                  ForwardMode::kPretrain, opts);
  const auto& feat = out.cls_features.values();
  const int dim = out.cls_features.shape()[1];
  auto dot = [&](int a, int b) {
    double s = 0.0;
    for (int k = 0; k < dim; ++k)
      s += feat[static_cast<std::size_t>(a) * dim + k] *
           feat[static_cast<std::size_t>(b) * dim + k];
    return s;
  };
  int hits = 0;
  for (int i = 0; i < 2 * n; ++i) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < 2 * n; ++j) {
      if (j == i) continue;
      const double s = dot(i, j);
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    hits += best == (i < n ? i + n : i - n);
  }
  return static_cast<double>(hits) / (2.0 * n);
}

}  // namespace vtp
