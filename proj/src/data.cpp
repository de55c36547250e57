#include "bacap/data.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace bacap {

static_assert(std::endian::native == std::endian::little,
              "binary feature and checkpoint formats assume a little-endian host");

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    } else if (std::ispunct(ch)) {
      // Punctuation is deleted in place, never treated as a separator.
    } else {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

namespace {

const char* const kReservedTokens[kNumReservedTokens] = {"<bos>", "<eos>", "<unk>"};

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> retained_words) {
  tokens_.reserve(kNumReservedTokens + retained_words.size());
  for (const char* t : kReservedTokens) tokens_.emplace_back(t);
  for (std::string& w : retained_words) tokens_.push_back(std::move(w));
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw std::invalid_argument("Vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("Vocabulary: id " + std::to_string(id) + " outside size " +
                            std::to_string(size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocab(const std::vector<std::string>& captions, int min_count) {
  if (captions.empty()) throw std::invalid_argument("build_vocab: empty caption corpus");
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::map<std::string, std::int64_t> counts;
  for (const std::string& caption : captions) {
    for (const std::string& w : tokenize(caption)) counts[w] += 1;
  }
  std::vector<std::pair<std::string, std::int64_t>> retained;
  for (const auto& [word, count] : counts) {
    if (count >= min_count) retained.emplace_back(word, count);
  }
  std::sort(retained.begin(), retained.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> words;
  words.reserve(retained.size());
  for (auto& [word, count] : retained) words.push_back(std::move(word));
  return Vocabulary(std::move(words));
}

CaptionTokens encode_caption(const Vocabulary& vocab, const std::vector<std::string>& words) {
  CaptionTokens out;
  out.ids.reserve(words.size() + 2);
  out.ids.push_back(kBosId);
  for (const std::string& w : words) out.ids.push_back(vocab.id_of(w).value_or(kUnkId));
  out.ids.push_back(kEosId);
  return out;
}

std::vector<std::string> words_of(const Vocabulary& vocab, const CaptionTokens& caption) {
  std::vector<std::string> words;
  for (int id : caption.ids) {
    if (id == kBosId || id == kEosId) continue;
    words.push_back(vocab.token(id));
  }
  return words;
}

namespace {

constexpr char kFeatureMagic[4] = {'B', 'A', 'F', 'V'};
constexpr std::uint32_t kFeatureVersion = 1;

[[noreturn]] void format_fail(const std::filesystem::path& path, std::uint64_t offset,
                              const std::string& what) {
  throw FormatError(path.string() + ": " + what + " at byte " + std::to_string(offset));
}

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is, const std::filesystem::path& path, std::uint64_t offset,
                       const char* field) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    format_fail(path, offset, std::string("truncated ") + field);
  }
  return v;
}

}  // namespace

void save_features(const std::filesystem::path& path, const FeatureSequence& f) {
  if (f.frames.empty()) throw std::invalid_argument("save_features: empty feature sequence");
  const Index dim = f.dim();
  for (const Vec& frame : f.frames) {
    if (frame.size() != dim) throw std::invalid_argument("save_features: ragged frames");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(path.string() + ": cannot open for writing");
  os.write(kFeatureMagic, sizeof kFeatureMagic);
  write_u32(os, kFeatureVersion);
  write_u32(os, static_cast<std::uint32_t>(f.frames.size()));
  write_u32(os, static_cast<std::uint32_t>(dim));
  std::vector<float> row(static_cast<std::size_t>(dim));
  for (const Vec& frame : f.frames) {
    for (Index i = 0; i < dim; ++i) row[static_cast<std::size_t>(i)] = static_cast<float>(frame[i]);
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!os) throw FormatError(path.string() + ": write failed");
}

FeatureSequence load_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path.string() + ": cannot open for reading");

  char magic[4] = {};
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kFeatureMagic, sizeof magic) != 0) {
    format_fail(path, 0, "bad magic");
  }
  const std::uint32_t version = read_u32(is, path, 4, "version");
  if (version != kFeatureVersion) {
    format_fail(path, 4, "unsupported version " + std::to_string(version));
  }
  const std::uint32_t n_frames = read_u32(is, path, 8, "frame count");
  const std::uint32_t dim = read_u32(is, path, 12, "dimension");
  if (n_frames == 0 || dim == 0) format_fail(path, 8, "zero frame count or dimension");

  FeatureSequence f;
  f.id = path.stem().string();
  f.frames.reserve(n_frames);
  std::vector<float> row(dim);
  for (std::uint32_t t = 0; t < n_frames; ++t) {
    const std::uint64_t offset = 16 + static_cast<std::uint64_t>(t) * dim * sizeof(float);
    if (!is.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(float)))) {
      format_fail(path, offset, "truncated payload");
    }
    Vec frame(dim);
    for (std::uint32_t i = 0; i < dim; ++i) frame[static_cast<Index>(i)] = row[i];
    f.frames.push_back(std::move(frame));
  }
  if (is.get() != std::ifstream::traits_type::eof()) {
    format_fail(path, 16 + static_cast<std::uint64_t>(n_frames) * dim * sizeof(float),
                "trailing bytes");
  }
  return f;
}

std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError(path.string() + ": cannot open for reading");
  std::vector<ManifestRecord> records;
  std::unordered_map<std::string, std::size_t> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      ManifestRecord r;
      r.id = j.at("id").get<std::string>();
      r.feature_path = j.at("feature_path").get<std::string>();
      r.n_frames = j.at("n_frames").get<Index>();
      r.dim = j.at("dim").get<Index>();
      r.caption = j.at("caption").get<std::string>();
      if (j.contains("boundaries")) {
        r.boundaries = j.at("boundaries").get<std::vector<Index>>();
      }
      if (!seen_ids.emplace(r.id, line_no).second) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": duplicate id '" +
                          r.id + "'");
      }
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream os(path, std::ios::binary);  // binary: identical bytes on every platform
  if (!os) throw FormatError(path.string() + ": cannot open for writing");
  for (const ManifestRecord& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["feature_path"] = r.feature_path;
    j["n_frames"] = r.n_frames;
    j["dim"] = r.dim;
    j["caption"] = r.caption;
    if (r.boundaries) j["boundaries"] = *r.boundaries;
    os << j.dump() << '\n';
  }
  if (!os) throw FormatError(path.string() + ": write failed");
}

std::vector<Sample> load_samples(const std::filesystem::path& manifest_path,
                                 const Vocabulary& vocab) {
  const std::filesystem::path base = manifest_path.parent_path();
  std::vector<Sample> samples;
  for (const ManifestRecord& r : load_manifest(manifest_path)) {
    std::filesystem::path fp(r.feature_path);
    if (fp.is_relative()) fp = base / fp;
    Sample s;
    s.id = r.id;
    s.features = load_features(fp);
    s.features.id = r.id;
    if (s.features.length() != r.n_frames || s.features.dim() != r.dim) {
      throw FormatError(fp.string() + ": shape " + std::to_string(s.features.length()) + "x" +
                        std::to_string(s.features.dim()) + " does not match manifest entry " +
                        std::to_string(r.n_frames) + "x" + std::to_string(r.dim));
    }
    s.caption_text = r.caption;
    s.caption = encode_caption(vocab, tokenize(r.caption));
    if (r.boundaries) s.gt_boundaries = *r.boundaries;
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

std::string padded_index(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05lld", static_cast<long long>(i));
  return buf;
}

}  // namespace

SyntheticPaths gen_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.n_prototypes < 2) throw std::invalid_argument("gen_synthetic: need >= 2 prototypes");
  if (cfg.feature_dim < 1) throw std::invalid_argument("gen_synthetic: feature_dim must be >= 1");
  if (cfg.segments_min < 1 || cfg.segments_max < cfg.segments_min) {
    throw std::invalid_argument("gen_synthetic: bad segment count range");
  }
  if (cfg.segment_len_min < 1 || cfg.segment_len_max < cfg.segment_len_min) {
    throw std::invalid_argument("gen_synthetic: bad segment length range");
  }
  if (!(cfg.noise_sigma >= 0.0)) throw std::invalid_argument("gen_synthetic: bad noise sigma");
  if (cfg.n_train < 1 || cfg.n_val < 1 || cfg.n_test < 1) {
    throw std::invalid_argument("gen_synthetic: each split needs at least one video");
  }

  const std::filesystem::path features_dir = out_dir / "features";
  std::filesystem::create_directories(features_dir);

  Rng rng(cfg.seed);
  std::vector<Vec> prototypes;
  prototypes.reserve(static_cast<std::size_t>(cfg.n_prototypes));
  for (Index p = 0; p < cfg.n_prototypes; ++p) {
    Vec v(cfg.feature_dim);
    double norm = 0.0;
    do {
      for (Index i = 0; i < cfg.feature_dim; ++i) v[i] = rng.gaussian();
      norm = v.norm();
    } while (norm < 1e-9);
    prototypes.push_back(v / norm);
  }

  const std::pair<const char*, Index> splits[3] = {
      {"train", cfg.n_train}, {"val", cfg.n_val}, {"test", cfg.n_test}};
  SyntheticPaths paths;
  paths.features_dir = features_dir;

  for (const auto& [split, count] : splits) {
    std::vector<ManifestRecord> records;
    for (Index v = 0; v < count; ++v) {
      const std::string id = std::string(split) + "_" + padded_index(v);
      const Index k = rng.uniform_int(cfg.segments_min, cfg.segments_max);

      std::vector<Index> protos(static_cast<std::size_t>(k));
      protos[0] = rng.uniform_int(0, cfg.n_prototypes - 1);
      for (Index s = 1; s < k; ++s) {
        // Uniform over the other prototypes so adjacent segments differ.
        Index draw = rng.uniform_int(0, cfg.n_prototypes - 2);
        if (draw >= protos[static_cast<std::size_t>(s - 1)]) ++draw;
        protos[static_cast<std::size_t>(s)] = draw;
      }

      FeatureSequence f;
      f.id = id;
      std::vector<Index> boundaries;
      std::string caption;
      for (Index s = 0; s < k; ++s) {
        if (s > 0) {
          boundaries.push_back(f.length() + 1);
          caption += " then ";
        }
        caption += "action" + std::to_string(protos[static_cast<std::size_t>(s)]);
        const Index len = rng.uniform_int(cfg.segment_len_min, cfg.segment_len_max);
        const Vec& proto = prototypes[static_cast<std::size_t>(protos[static_cast<std::size_t>(s)])];
        for (Index t = 0; t < len; ++t) {
          Vec frame = proto;
          for (Index i = 0; i < cfg.feature_dim; ++i) frame[i] += cfg.noise_sigma * rng.gaussian();
          f.frames.push_back(frame);
        }
      }

      const std::string rel = "features/" + id + ".bafv";
      save_features(out_dir / rel, f);
      ManifestRecord r;
      r.id = id;
      r.feature_path = rel;
      r.n_frames = f.length();
      r.dim = f.dim();
      r.caption = caption;
      r.boundaries = boundaries;
      records.push_back(std::move(r));
    }
    const std::filesystem::path manifest = out_dir / (std::string(split) + ".jsonl");
    save_manifest(manifest, records);
    if (std::string(split) == "train") paths.train_manifest = manifest;
    if (std::string(split) == "val") paths.val_manifest = manifest;
    if (std::string(split) == "test") paths.test_manifest = manifest;
  }
  return paths;
}

}  // namespace bacap
