#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bacap/encoder.hpp"
#include "bacap/tokens.hpp"

namespace bacap {

// Lowercases ASCII letters, removes punctuation characters outright (so
// "on-going" becomes "ongoing"), and splits on whitespace runs.
std::vector<std::string> tokenize(const std::string& text);

// Token ids are reserved BOS/EOS/UNK slots followed by the retained words.
class Vocabulary {
 public:
  Vocabulary();
  explicit Vocabulary(std::vector<std::string> retained_words);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  std::optional<int> id_of(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Retains words appearing at least `min_count` times across the tokenized
// captions, ordered by count (descending) then lexicographically.
Vocabulary build_vocab(const std::vector<std::string>& captions, int min_count = 5);

// BOS + per-word id (UNK when absent) + EOS.
CaptionTokens encode_caption(const Vocabulary& vocab, const std::vector<std::string>& words);

// Maps ids back to words, dropping BOS and EOS.
std::vector<std::string> words_of(const Vocabulary& vocab, const CaptionTokens& caption);

// Binary feature files: "BAFV" magic, u32 version, u32 n_frames, u32 dim
// (little-endian), then row-major float32 frames.
void save_features(const std::filesystem::path& path, const FeatureSequence& f);
FeatureSequence load_features(const std::filesystem::path& path);

// One JSON object per line; feature paths are resolved against the manifest's
// directory when relative.
struct ManifestRecord {
  std::string id;
  std::string feature_path;
  Index n_frames = 0;
  Index dim = 0;
  std::string caption;
  std::optional<std::vector<Index>> boundaries;  // ground truth, 1-based
};

std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

struct Sample {
  std::string id;
  FeatureSequence features;
  std::string caption_text;
  CaptionTokens caption;                  // encoded against the vocabulary
  std::vector<Index> gt_boundaries;       // empty when the manifest has none
};

// Loads every record's features and encodes its caption, validating the
// stored shapes against the manifest.
std::vector<Sample> load_samples(const std::filesystem::path& manifest_path,
                                 const Vocabulary& vocab);

// Synthetic corpus: each video concatenates a few segments; a segment repeats
// one unit-norm prototype plus i.i.d. Gaussian noise, and consecutive
// segments always use different prototypes. The caption names the prototype
// sequence ("action3 then action7 ..."), and ground-truth boundaries are the
// 1-based first frames of segments after the first.
struct SyntheticConfig {
  Index n_prototypes = 16;
  Index feature_dim = 32;
  Index segments_min = 2;
  Index segments_max = 4;
  Index segment_len_min = 4;
  Index segment_len_max = 8;
  double noise_sigma = 0.1;
  Index n_train = 500;
  Index n_val = 100;
  Index n_test = 100;
  std::uint64_t seed = 0;
};

struct SyntheticPaths {
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path features_dir;
};

// Writes train/val/test manifests plus feature files under out_dir; the
// output bytes are a pure function of the config.
SyntheticPaths gen_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace bacap
