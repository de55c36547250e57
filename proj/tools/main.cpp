// Command-line driver: synthetic data generation, training, caption
// evaluation, segmentation and boundary statistics.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bacap/checkpoint.hpp"
#include "bacap/data.hpp"
#include "bacap/metrics.hpp"
#include "bacap/model.hpp"
#include "bacap/training.hpp"

namespace fs = std::filesystem;
using namespace bacap;

namespace {

// Shortest decimal form that round-trips a double, for reproducible output.
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("BACAP_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(path.string() + ": cannot open for writing");
  for (const std::string& line : lines) os << line << '\n';
  if (!os) throw FormatError(path.string() + ": write failed");
}

void echo_config(const fs::path& out_dir, const std::vector<std::string>& lines) {
  for (const std::string& line : lines) std::cout << line << '\n';
  write_lines(out_dir / "config.txt", lines);
}

std::string join_indices(const std::vector<Index>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ' ';
    out += std::to_string(xs[i]);
  }
  return out;
}

int run_gen_data(const fs::path& out_dir, const SyntheticConfig& cfg) {
  fs::create_directories(out_dir);
  echo_config(out_dir, {
                           "command = gen-data",
                           "prototypes = " + std::to_string(cfg.n_prototypes),
                           "feature_dim = " + std::to_string(cfg.feature_dim),
                           "segments = " + std::to_string(cfg.segments_min) + ".." +
                               std::to_string(cfg.segments_max),
                           "segment_len = " + std::to_string(cfg.segment_len_min) + ".." +
                               std::to_string(cfg.segment_len_max),
                           "noise_sigma = " + fmt(cfg.noise_sigma),
                           "videos = " + std::to_string(cfg.n_train) + "/" +
                               std::to_string(cfg.n_val) + "/" + std::to_string(cfg.n_test),
                           "seed = " + std::to_string(cfg.seed),
                       });
  const SyntheticPaths paths = gen_synthetic(cfg, out_dir);
  std::cout << "train_manifest = " << paths.train_manifest.string() << '\n'
            << "val_manifest = " << paths.val_manifest.string() << '\n'
            << "test_manifest = " << paths.test_manifest.string() << '\n';
  return 0;
}

struct TrainCliConfig {
  fs::path train_manifest;
  fs::path val_manifest;
  fs::path out_dir;
  Index embed_dim = 512;
  Index hidden_dim = 1024;
  int min_count = 5;
  TrainConfig train;
};

int run_train(const TrainCliConfig& cli) {
  fs::create_directories(cli.out_dir);
  echo_config(cli.out_dir, {
                               "command = train",
                               "train_manifest = " + cli.train_manifest.string(),
                               "val_manifest = " + cli.val_manifest.string(),
                               "embed_dim = " + std::to_string(cli.embed_dim),
                               "hidden_dim = " + std::to_string(cli.hidden_dim),
                               "min_count = " + std::to_string(cli.min_count),
                               "batch_size = " + std::to_string(cli.train.batch_size),
                               "dropout_retain = " + fmt(cli.train.dropout_retain),
                               "max_epochs = " + std::to_string(cli.train.max_epochs),
                               "patience = " + std::to_string(cli.train.patience),
                               "seed = " + std::to_string(cli.train.seed),
                           });

  std::vector<std::string> captions;
  for (const ManifestRecord& r : load_manifest(cli.train_manifest)) captions.push_back(r.caption);
  const Vocabulary vocab = build_vocab(captions, cli.min_count);
  std::cout << "vocabulary = " << vocab.size() << " tokens\n";

  const std::vector<Sample> train_set = load_samples(cli.train_manifest, vocab);
  const std::vector<Sample> val_set = load_samples(cli.val_manifest, vocab);

  ModelDims dims;
  dims.feature_dim = train_set.front().features.dim();
  dims.embed_dim = cli.embed_dim;
  dims.hidden_dim = cli.hidden_dim;
  dims.vocab_size = vocab.size();

  Rng master(cli.train.seed);
  Rng init_rng(master.fork_seed());
  TrainConfig cfg = cli.train;
  cfg.seed = master.fork_seed();

  const ModelParams model = init_model(dims, init_rng);
  const TrainResult result = train(model, cfg, train_set, val_set);

  std::vector<std::string> csv{"epoch,train_loss,val_loss"};
  for (const EpochEntry& e : result.log) {
    csv.push_back(std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," + fmt(e.val_loss));
  }
  write_lines(cli.out_dir / "epochs.csv", csv);

  Checkpoint ck;
  ck.model = result.best_model;
  ck.vocab = vocab;
  ck.opt_grad_sq = result.best_state.grad_sq;
  ck.opt_update_sq = result.best_state.update_sq;
  save_checkpoint(cli.out_dir / "best.ckpt", ck);

  std::cout << "epochs_run = " << result.log.size() << '\n'
            << "best_epoch = " << result.best_epoch << '\n'
            << "best_val_loss = " << fmt(result.best_val_loss) << '\n'
            << "checkpoint = " << (cli.out_dir / "best.ckpt").string() << '\n';
  return 0;
}

int run_eval(const fs::path& ckpt_path, const fs::path& manifest, const fs::path& out_dir,
             int max_len) {
  fs::create_directories(out_dir);
  echo_config(out_dir, {
                           "command = eval",
                           "checkpoint = " + ckpt_path.string(),
                           "manifest = " + manifest.string(),
                           "max_len = " + std::to_string(max_len),
                       });
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const std::vector<Sample> samples = load_samples(manifest, ck.vocab);
  const EvalCorpus corpus = build_eval_corpus(ck.model, ck.vocab, samples, max_len);

  const double bleu = bleu4(corpus);
  const double rouge = rouge_l(corpus);
  const CiderResult cd = cider(corpus);
  const double loss = mean_caption_loss(ck.model, samples);

  std::vector<std::string> metrics_csv{"metric,value"};
  metrics_csv.push_back("bleu4," + fmt(bleu));
  metrics_csv.push_back("rouge_l," + fmt(rouge));
  metrics_csv.push_back("cider," + fmt(cd.mean));
  metrics_csv.push_back("mean_caption_loss," + fmt(loss));
  write_lines(out_dir / "metrics.csv", metrics_csv);

  std::vector<std::string> decode_csv{"id,candidate,reference,cider"};
  for (const auto& [id, entry] : corpus) {
    std::string cand;
    for (std::size_t i = 0; i < entry.candidate.size(); ++i) {
      if (i > 0) cand += ' ';
      cand += entry.candidate[i];
    }
    std::string ref;
    for (std::size_t i = 0; i < entry.references.front().size(); ++i) {
      if (i > 0) ref += ' ';
      ref += entry.references.front()[i];
    }
    decode_csv.push_back(id + "," + cand + "," + ref + "," + fmt(cd.per_video.at(id)));
  }
  write_lines(out_dir / "decodes.csv", decode_csv);

  std::cout << "videos = " << corpus.size() << '\n'
            << "bleu4 = " << fmt(bleu) << '\n'
            << "rouge_l = " << fmt(rouge) << '\n'
            << "cider = " << fmt(cd.mean) << '\n'
            << "mean_caption_loss = " << fmt(loss) << '\n';
  return 0;
}

// --boundaries accepts "learned", "equal:<m>" or "file:<path>" (JSON lines
//{"id": ..., "decisions": [0/1 per frame]}).
BoundaryMode mode_for(const std::string& spec, const std::string& id,
                      const std::map<std::string, std::vector<int>>& forced_by_id) {
  if (spec == "learned") return BoundaryMode::learned_test();
  if (spec.rfind("equal:", 0) == 0) {
    return BoundaryMode::equal_chunks(std::stoll(spec.substr(6)));
  }
  auto it = forced_by_id.find(id);
  if (it == forced_by_id.end()) {
    throw FormatError("boundaries file has no decisions for video '" + id + "'");
  }
  return BoundaryMode::forced_list(it->second);
}

int run_segment(const fs::path& ckpt_path, const fs::path& manifest, const fs::path& video,
                const fs::path& out_dir, const std::string& mode_flag,
                const std::string& boundaries_spec, Index tolerance) {
  if (mode_flag != "test") {
    throw CLI::ValidationError("--mode", "only deterministic 'test' segmentation is supported");
  }
  if (boundaries_spec != "learned" && boundaries_spec.rfind("equal:", 0) != 0 &&
      boundaries_spec.rfind("file:", 0) != 0) {
    throw CLI::ValidationError("--boundaries", "expected learned, equal:<m> or file:<path>");
  }
  if (manifest.empty() == video.empty()) {
    throw CLI::ValidationError("segment", "exactly one of --manifest or --video is required");
  }
  const Checkpoint ck = load_checkpoint(ckpt_path);

  // Single-file mode: print the boundary indices and exit.
  if (!video.empty()) {
    const FeatureSequence f = load_features(video);
    const EncodeOutput enc = encode(ck.model.encoder, f, BoundaryMode::learned_test());
    std::cout << "id = " << f.id << '\n'
              << "n_frames = " << f.length() << '\n'
              << "boundaries = " << join_indices(enc.result.boundaries) << '\n';
    return 0;
  }

  fs::create_directories(out_dir);
  echo_config(out_dir, {
                           "command = segment",
                           "checkpoint = " + ckpt_path.string(),
                           "manifest = " + manifest.string(),
                           "mode = " + mode_flag,
                           "boundaries = " + boundaries_spec,
                           "tolerance = " + std::to_string(tolerance),
                       });
  const std::vector<Sample> samples = load_samples(manifest, ck.vocab);

  std::map<std::string, std::vector<int>> forced_by_id;
  if (boundaries_spec.rfind("file:", 0) == 0) {
    const fs::path path = boundaries_spec.substr(5);
    std::ifstream is(path);
    if (!is) throw FormatError(path.string() + ": cannot open for reading");
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const nlohmann::json j = nlohmann::json::parse(line);
      forced_by_id[j.at("id").get<std::string>()] = j.at("decisions").get<std::vector<int>>();
    }
  }

  std::vector<std::string> csv{"id,n_frames,boundaries"};
  std::vector<std::string> f1_csv{"id,precision,recall,f1"};
  double f1_sum = 0.0;
  std::size_t f1_count = 0;
  for (const Sample& s : samples) {
    const BoundaryMode mode = mode_for(boundaries_spec, s.id, forced_by_id);
    const EncodeOutput enc = encode(ck.model.encoder, s.features, mode);
    csv.push_back(s.id + "," + std::to_string(s.features.length()) + "," +
                  join_indices(enc.result.boundaries));
    if (!s.gt_boundaries.empty() || !enc.result.boundaries.empty()) {
      const BoundaryF1 f1 = boundary_f1(enc.result.boundaries, s.gt_boundaries, tolerance);
      f1_csv.push_back(s.id + "," + fmt(f1.precision) + "," + fmt(f1.recall) + "," + fmt(f1.f1));
      f1_sum += f1.f1;
      ++f1_count;
    }
  }
  write_lines(out_dir / "boundaries.csv", csv);
  std::cout << "videos = " << samples.size() << '\n';
  if (f1_count > 0) {
    write_lines(out_dir / "boundary_f1.csv", f1_csv);
    std::cout << "mean_boundary_f1 = " << fmt(f1_sum / static_cast<double>(f1_count)) << '\n';
  }
  return 0;
}

int run_stats(const fs::path& ckpt_path, const fs::path& manifest, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  echo_config(out_dir, {
                           "command = stats",
                           "checkpoint = " + ckpt_path.string(),
                           "manifest = " + manifest.string(),
                       });
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const std::vector<Sample> samples = load_samples(manifest, ck.vocab);

  std::vector<EncodeResult> results;
  std::int64_t total_boundaries = 0;
  for (const Sample& s : samples) {
    EncodeOutput enc = encode(ck.model.encoder, s.features, BoundaryMode::learned_test());
    total_boundaries += static_cast<std::int64_t>(enc.result.boundaries.size());
    results.push_back(std::move(enc.result));
  }
  const BoundaryStats stats = boundary_statistics(results);

  std::vector<std::string> count_csv{"boundary_count,videos"};
  for (std::size_t c = 0; c < stats.count_histogram.size(); ++c) {
    count_csv.push_back(std::to_string(c) + "," + std::to_string(stats.count_histogram[c]));
  }
  write_lines(out_dir / "count_histogram.csv", count_csv);

  std::vector<std::string> pos_csv{"bin,count"};
  for (std::size_t b = 0; b < stats.position_histogram.size(); ++b) {
    pos_csv.push_back(std::to_string(b) + "," + std::to_string(stats.position_histogram[b]));
  }
  write_lines(out_dir / "position_histogram.csv", pos_csv);

  std::cout << "videos = " << samples.size() << '\n'
            << "mean_boundaries_per_video = "
            << fmt(static_cast<double>(total_boundaries) / static_cast<double>(samples.size()))
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-aware video captioning"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic segmented-video corpus");
  fs::path gen_out;
  SyntheticConfig gen_cfg;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--prototypes", gen_cfg.n_prototypes, "Number of prototype actions");
  gen->add_option("--dim", gen_cfg.feature_dim, "Feature dimension");
  gen->add_option("--segments-min", gen_cfg.segments_min, "Minimum segments per video");
  gen->add_option("--segments-max", gen_cfg.segments_max, "Maximum segments per video");
  gen->add_option("--len-min", gen_cfg.segment_len_min, "Minimum frames per segment");
  gen->add_option("--len-max", gen_cfg.segment_len_max, "Maximum frames per segment");
  gen->add_option("--sigma", gen_cfg.noise_sigma, "Frame noise standard deviation");
  gen->add_option("--train", gen_cfg.n_train, "Training videos");
  gen->add_option("--val", gen_cfg.n_val, "Validation videos");
  gen->add_option("--test", gen_cfg.n_test, "Test videos");
  gen->add_option("--seed", gen_seed, "Random seed (default: BACAP_SEED or 0)");

  // train
  auto* tr = app.add_subcommand("train", "Train a captioning model");
  TrainCliConfig tr_cfg;
  fs::path tr_data;
  std::optional<std::uint64_t> tr_seed;
  tr->add_option("--data", tr_data,
                 "Dataset directory holding train.jsonl and val.jsonl "
                 "(alternative to the explicit manifest flags)");
  tr->add_option("--train-manifest", tr_cfg.train_manifest, "Training manifest");
  tr->add_option("--val-manifest", tr_cfg.val_manifest, "Validation manifest");
  tr->add_option("--out", tr_cfg.out_dir, "Run directory")->required();
  tr->add_option("--embed", tr_cfg.embed_dim, "Embedding size");
  tr->add_option("--hidden", tr_cfg.hidden_dim, "Hidden size");
  tr->add_option("--min-count", tr_cfg.min_count, "Vocabulary minimum word count");
  tr->add_option("--batch", tr_cfg.train.batch_size, "Batch size");
  tr->add_option("--retain", tr_cfg.train.dropout_retain, "Dropout retain probability");
  tr->add_option("--epochs", tr_cfg.train.max_epochs, "Maximum epochs");
  tr->add_option("--patience", tr_cfg.train.patience, "Early-stopping patience");
  tr->add_option("--seed", tr_seed, "Random seed (default: BACAP_SEED or 0)");

  // eval
  auto* ev = app.add_subcommand("eval", "Decode captions and score them");
  fs::path ev_ckpt, ev_manifest, ev_out;
  int ev_max_len = 20;
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required();
  ev->add_option("--manifest", ev_manifest, "Evaluation manifest")->required();
  ev->add_option("--out", ev_out, "Run directory")->required();
  ev->add_option("--max-len", ev_max_len, "Maximum decoded words");

  // segment
  auto* seg = app.add_subcommand("segment", "Report boundary decisions per video");
  fs::path seg_ckpt, seg_manifest, seg_video, seg_out;
  std::string seg_mode = "test";
  std::string seg_boundaries = "learned";
  Index seg_tolerance = 2;
  seg->add_option("--checkpoint", seg_ckpt, "Model checkpoint")->required();
  seg->add_option("--manifest", seg_manifest, "Manifest (whole-corpus mode)");
  seg->add_option("--video", seg_video, "Single feature file to segment");
  seg->add_option("--out", seg_out, "Run directory (required with --manifest)");
  seg->add_option("--mode", seg_mode, "Decision mode; only 'test' (deterministic)");
  seg->add_option("--boundaries", seg_boundaries, "learned, equal:<m> or file:<path>");
  seg->add_option("--tolerance", seg_tolerance, "Matching tolerance in frames");

  // stats
  auto* st = app.add_subcommand("stats", "Boundary count and position histograms");
  fs::path st_ckpt, st_manifest, st_out;
  st->add_option("--checkpoint", st_ckpt, "Model checkpoint")->required();
  st->add_option("--manifest", st_manifest, "Manifest")->required();
  st->add_option("--out", st_out, "Run directory")->required();

  // Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage/help itself
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      gen_cfg.seed = resolve_seed(gen_seed);
      return run_gen_data(gen_out, gen_cfg);
    }
    if (tr->parsed()) {
      if (!tr_data.empty()) {
        if (!tr_cfg.train_manifest.empty() || !tr_cfg.val_manifest.empty()) {
          throw CLI::ValidationError("train", "--data excludes the explicit manifest flags");
        }
        tr_cfg.train_manifest = tr_data / "train.jsonl";
        tr_cfg.val_manifest = tr_data / "val.jsonl";
      }
      if (tr_cfg.train_manifest.empty() || tr_cfg.val_manifest.empty()) {
        throw CLI::ValidationError(
            "train", "either --data or both --train-manifest and --val-manifest are required");
      }
      tr_cfg.train.seed = resolve_seed(tr_seed);
      return run_train(tr_cfg);
    }
    if (ev->parsed()) return run_eval(ev_ckpt, ev_manifest, ev_out, ev_max_len);
    if (seg->parsed()) {
      return run_segment(seg_ckpt, seg_manifest, seg_video, seg_out, seg_mode, seg_boundaries,
                         seg_tolerance);
    }
    if (st->parsed()) return run_stats(st_ckpt, st_manifest, st_out);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
