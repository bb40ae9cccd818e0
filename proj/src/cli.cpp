#include "vtp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vtp/image_io.hpp"
#include "vtp/masking.hpp"
#include "vtp/pipeline.hpp"
#include "vtp/run_config.hpp"
#include "vtp/token_store.hpp"

namespace vtp::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

int guard(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

std::vector<std::string> sorted_ppm_files(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

TokenGrid quantize_files(const std::vector<std::string>& files,
                         const ToyQuantizerConfig& qcfg) {
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(read_ppm(f));
  return quantize_video(frames, qcfg);
}

GridDims parse_dims(const std::string& text) {
  GridDims dims;
  char x1 = 0, x2 = 0;
  std::istringstream in(text);
  if (!(in >> dims.t >> x1 >> dims.h >> x2 >> dims.w) || x1 != 'x' ||
      x2 != 'x' || dims.t < 1 || dims.h < 1 || dims.w < 1 || !in.eof())
    throw std::invalid_argument("bad --dims (want TxHxW): " + text);
  return dims;
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    const int k = std::stoi(text);
    return {k, k};
  }
  const int lo = std::stoi(text.substr(0, dots));
  const int hi = std::stoi(text.substr(dots + 2));
  if (lo < 1 || hi < lo)
    throw std::invalid_argument("bad --blocks range: " + text);
  return {lo, hi};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int infer_num_classes(const std::map<std::string, int>& labels) {
  int max_label = -1;
  for (const auto& [id, label] : labels) {
    if (label < 0)
      throw std::invalid_argument("negative label for video " + id);
    max_label = std::max(max_label, label);
  }
  return max_label + 1;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

}  // namespace

int run_quantize(const QuantizeArgs& args, std::ostream& out,
                 std::ostream& err) {
  return guard(err, [&]() {
    ToyQuantizerConfig qcfg;
    qcfg.patch = args.patch;
    qcfg.vq_size = args.vq_size;
    if (args.fps < 1) throw std::invalid_argument("--fps must be >= 1");

    VideoTokenStore store;
    store.vq_size = args.vq_size;
    const fs::path input(args.frames);
    if (!fs::exists(input))
      throw std::invalid_argument("no such input: " + args.frames);
    if (fs::is_regular_file(input)) {
      store.add_video(input.stem().string(),
                      static_cast<std::uint32_t>(args.fps), 1,
                      quantize_files({input.string()}, qcfg));
    } else {
      const auto direct = sorted_ppm_files(input);
      if (!direct.empty()) {
        store.add_video(input.filename().string(),
                        static_cast<std::uint32_t>(args.fps), 1,
                        quantize_files(direct, qcfg));
      } else {
        std::vector<std::string> subdirs;
        for (const auto& entry : fs::directory_iterator(input))
          if (entry.is_directory()) subdirs.push_back(entry.path().string());
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& sub : subdirs) {
          const auto files = sorted_ppm_files(sub);
          if (files.empty()) continue;
          store.add_video(fs::path(sub).filename().string(),
                          static_cast<std::uint32_t>(args.fps), 1,
                          quantize_files(files, qcfg));
        }
      }
    }
    save_store(store, args.out_store);
    out << "wrote " << args.out_store << " with " << store.videos.size()
        << " video(s)\n";
    for (const auto& v : store.videos)
      out << v.id << " " << v.grid.t_len << "x" << v.grid.h_len << "x"
          << v.grid.w_len << "\n";
    return kOk;
  });
}

int run_calibrate(const CalibrateArgs& args, std::ostream& out,
                  std::ostream& err) {
  return guard(err, [&]() {
    const GridDims dims = parse_dims(args.dims);
    const auto [lo, hi] = parse_range(args.blocks);
    if (args.samples < 1)
      throw std::invalid_argument("--samples must be >= 1");
    Rng rng(args.seed);
    MaskingConfig cfg;
    cfg.strategy = MaskStrategy::kBlock;
    std::vector<RatioEstimate> estimates;
    for (int k = lo; k <= hi; ++k) {
      cfg.num_blocks = k;
      estimates.push_back(estimate_ratio(dims, cfg, args.samples, rng));
    }
    int flagged = lo;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int k = lo; k <= hi; ++k) {
      const double gap = std::abs(estimates[static_cast<std::size_t>(k - lo)]
                                      .mean - 0.15);
      if (gap < best_gap) {
        best_gap = gap;
        flagged = k;
      }
    }
    out << "blocks,mean_ratio,stderr,closest_to_15pct\n";
    for (int k = lo; k <= hi; ++k) {
      const auto& est = estimates[static_cast<std::size_t>(k - lo)];
      out << k << "," << fmt(est.mean) << "," << fmt(est.stderr_) << ","
          << (k == flagged ? 1 : 0) << "\n";
    }
    return kOk;
  });
}

namespace {

struct LoadedRun {
  RunConfig run;
  ModelConfig model;
  TrainConfig train;
  VideoTokenStore store;
};

LoadedRun load_run(const TrainArgs& args) {
  LoadedRun r{RunConfig::from_file(args.config), {}, {}, {}};
  r.model = r.run.model_config();
  r.train = r.run.train_config();
  r.store = load_store(args.store);
  return r;
}

}  // namespace

int run_pretrain_cmd(const TrainArgs& args, std::ostream& out,
                     std::ostream& err) {
  return guard(err, [&]() {
    LoadedRun r = load_run(args);
    r.train.validate(r.store.videos.size());
    if (r.model.vocab.vq_size != r.store.vq_size)
      throw std::invalid_argument(
          "config vocab.vq_size " + std::to_string(r.model.vocab.vq_size) +
          " differs from store vq_size " + std::to_string(r.store.vq_size));
    fs::create_directories(args.out_dir);
    ModelParams params = ModelParams::init(r.model);
    if (!args.init_ckpt.empty()) params.load(args.init_ckpt, true);

    std::ostringstream metrics;
    PretrainResult result;
    try {
      result = run_pretrain(r.store, params, r.model, r.train, metrics);
    } catch (const std::exception& e) {
      // keep whatever metrics were produced before the abort
      write_text(fs::path(args.out_dir) / "metrics.csv", metrics.str());
      throw std::runtime_error(std::string("pretraining aborted: ") +
                               e.what());
    }
    write_text(fs::path(args.out_dir) / "metrics.csv", metrics.str());
    write_text(fs::path(args.out_dir) / "resolved.cfg",
               r.run.resolved_dump());
    params.save((fs::path(args.out_dir) / "model.vprm").string());
    out << "pretrained " << result.steps << " step(s); checkpoint at "
        << (fs::path(args.out_dir) / "model.vprm").string() << "\n";
    return kOk;
  });
}

int run_finetune_cmd(const TrainArgs& args, std::ostream& out,
                     std::ostream& err) {
  return guard(err, [&]() {
    LoadedRun r = load_run(args);
    if (args.labels.empty())
      throw std::invalid_argument("--labels is required for fine-tuning");
    const auto labels = load_labels(args.labels);
    const int classes = infer_num_classes(labels);
    if (classes < 2)
      throw std::invalid_argument("labels define fewer than two classes");
    if (r.model.num_classes == 0) r.model.num_classes = classes;
    if (r.model.num_classes < classes)
      throw std::invalid_argument("model.num_classes smaller than the labels");
    if (args.probe) r.train.linear_probe = true;

    fs::create_directories(args.out_dir);
    ModelParams params = ModelParams::init(r.model);
    if (!args.init_ckpt.empty()) params.load(args.init_ckpt, true);

    std::ostringstream metrics;
    const FinetuneResult result =
        run_finetune(r.store, params, r.model, r.train, labels, metrics);
    write_text(fs::path(args.out_dir) / "metrics.csv", metrics.str());
    write_text(fs::path(args.out_dir) / "resolved.cfg",
               r.run.resolved_dump());
    params.save((fs::path(args.out_dir) / "model.vprm").string());
    out << (r.train.linear_probe ? "probed " : "finetuned ") << result.steps
        << " step(s); final train accuracy " << fmt(result.train_accuracy)
        << "\n";
    return kOk;
  });
}

int run_reconstruct(const ReconstructArgs& args, std::ostream& out,
                    std::ostream& err) {
  return guard(err, [&]() {
    const VideoTokenStore store = load_store(args.store);
    const Vocabulary vocab = store.vocabulary();
    MaskingConfig cfg;
    if (args.strategy == "block") {
      cfg.strategy = MaskStrategy::kBlock;
    } else if (args.strategy == "iid") {
      cfg.strategy = MaskStrategy::kIid;
    } else {
      throw std::invalid_argument("--strategy wants block or iid, got " +
                                  args.strategy);
    }
    FillMetric metric;
    if (args.metric == "spatial") {
      metric = FillMetric::kSpatial;
    } else if (args.metric == "spatiotemporal") {
      metric = FillMetric::kSpatiotemporal;
    } else {
      throw std::invalid_argument(
          "--metric wants spatial or spatiotemporal, got " + args.metric);
    }
    cfg.num_blocks = args.blocks;
    cfg.xi = args.xi;
    if (!args.out_dir.empty()) fs::create_directories(args.out_dir);

    Rng rng(args.seed);
    out << "video_id,match_rate\n";
    for (std::size_t v = 0; v < store.videos.size(); ++v) {
      const TokenGrid& grid = store.videos[v].grid;
      const GridDims dims{grid.t_len, grid.h_len, grid.w_len};
      const MaskSet mask = sample_mask(dims, cfg, rng);
      const MaskedGrid masked = apply_mask(grid, mask, vocab);
      // retained positions only (PAD never counts)
      MaskSet retained;
      retained.dims = dims;
      for (const auto& [pos, id] : masked.targets) retained.positions.insert(pos);
      std::string rate;
      TokenGrid filled = masked.grid;
      if (retained.positions.size() == grid.size()) {
        err << "note: video " << store.videos[v].id
            << " is fully masked; no fill possible\n";
      } else if (!retained.positions.empty()) {
        filled = neighbor_fill(masked.grid, retained, vocab, metric);
        rate = fmt(fill_match_rate(filled, grid, retained));
      } else {
        rate = fmt(1.0);  // nothing masked, vacuous match
      }
      out << store.videos[v].id << "," << rate << "\n";
      if (!args.out_dir.empty()) {
        const fs::path base = fs::path(args.out_dir) / store.videos[v].id;
        write_token_pgm(grid, base.string() + "_original.pgm");
        write_token_pgm(masked.grid, base.string() + "_masked.pgm",
                        &retained.positions);
        write_token_pgm(filled, base.string() + "_filled.pgm");
      }
    }
    return kOk;
  });
}

int run_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guard(err, [&]() {
    const RunConfig run = RunConfig::from_file(args.config);
    ModelConfig model_cfg = run.model_config();
    const CropConfig crops = run.crop_config();
    const VideoTokenStore store = load_store(args.store);
    const auto labels = load_labels(args.labels);

    // classifier width comes from the checkpoint
    const NamedTensors file = read_checkpoint(args.ckpt);
    int classes = 0;
    for (const auto& [name, t] : file)
      if (name == "classifier.w") classes = t.shape()[0];
    if (classes == 0)
      throw std::runtime_error("checkpoint has no classifier head: " +
                               args.ckpt);
    model_cfg.num_classes = classes;
    ModelParams params = ModelParams::init(model_cfg);
    params.load(args.ckpt);

    const int clip_len = run.get_int("sampler.clip_len");
    std::ostringstream scores_csv;
    scores_csv << "video_id,label,predicted";
    for (int c = 0; c < classes; ++c) scores_csv << ",score" << c;
    scores_csv << "\n";
    int hits = 0, total = 0;
    for (std::size_t v = 0; v < store.videos.size(); ++v) {
      const auto label_it = labels.find(store.videos[v].id);
      if (label_it == labels.end())
        throw std::runtime_error("labels file has no entry for video " +
                                 store.videos[v].id);
      if (label_it->second >= classes)
        throw std::runtime_error("label " + std::to_string(label_it->second) +
                                 " outside the checkpoint's " +
                                 std::to_string(classes) + " classes");
      const auto score =
          multi_crop_predict(params, model_cfg, store, v, clip_len, crops);
      int best = 0;
      for (int c = 1; c < classes; ++c)
        if (score[static_cast<std::size_t>(c)] >
            score[static_cast<std::size_t>(best)])
          best = c;
      hits += best == label_it->second;
      ++total;
      scores_csv << store.videos[v].id << "," << label_it->second << ","
                 << best;
      for (int c = 0; c < classes; ++c)
        scores_csv << "," << fmt(score[static_cast<std::size_t>(c)]);
      scores_csv << "\n";
    }
    if (total == 0) throw std::runtime_error("store has no videos");
    if (!args.scores_csv.empty()) write_text(args.scores_csv, scores_csv.str());
    out << scores_csv.str();
    out << "top1," << fmt(static_cast<double>(hits) / total) << "\n";
    return kOk;
  });
}

}  // namespace vtp::cli
