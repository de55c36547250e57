#include "bacap/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace bacap {

namespace {

constexpr char kMagic[10] = {'B', 'A', 'C', 'A', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagOptimizerState = 1u;

class Writer {
 public:
  Writer(const std::filesystem::path& path) : path_(path), os_(path, std::ios::binary) {
    if (!os_) throw FormatError(path_.string() + ": cannot open for writing");
  }

  void bytes(const void* data, std::size_t n) {
    os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  void tensor_section(ModelParams& params) {
    const std::vector<TensorRef> refs = tensor_refs(params);
    u32(static_cast<std::uint32_t>(refs.size()));
    for (const TensorRef& r : refs) {
      str(r.name);
      u64(static_cast<std::uint64_t>(r.rows()));
      u64(static_cast<std::uint64_t>(r.cols()));
      for (Index i = 0; i < r.rows(); ++i) {
        for (Index j = 0; j < r.cols(); ++j) {
          f64(r.mat ? (*r.mat)(i, j) : (*r.vec)[i]);
        }
      }
    }
  }

  void finish() {
    os_.flush();
    if (!os_) throw FormatError(path_.string() + ": write failed");
  }

 private:
  std::filesystem::path path_;
  std::ofstream os_;
};

class Reader {
 public:
  Reader(const std::filesystem::path& path) : path_(path), is_(path, std::ios::binary) {
    if (!is_) throw FormatError(path_.string() + ": cannot open for reading");
  }

  void bytes(void* data, std::size_t n, const char* field) {
    if (!is_.read(static_cast<char*>(data), static_cast<std::streamsize>(n))) {
      fail(std::string("truncated ") + field);
    }
    offset_ += n;
  }
  std::uint32_t u32(const char* field) {
    std::uint32_t v = 0;
    bytes(&v, sizeof v, field);
    return v;
  }
  std::uint64_t u64(const char* field) {
    std::uint64_t v = 0;
    bytes(&v, sizeof v, field);
    return v;
  }
  double f64(const char* field) {
    double v = 0;
    bytes(&v, sizeof v, field);
    return v;
  }
  std::string str(const char* field) {
    const std::uint32_t len = u32(field);
    if (len > (1u << 20)) fail(std::string("implausible length for ") + field);
    std::string s(len, '\0');
    if (len > 0) bytes(s.data(), len, field);
    return s;
  }

  void tensor_section(ModelParams& params, const char* section) {
    const std::vector<TensorRef> refs = tensor_refs(params);
    const std::uint32_t count = u32("tensor count");
    if (count != refs.size()) {
      fail(std::string(section) + ": expected " + std::to_string(refs.size()) + " tensors, found " +
           std::to_string(count));
    }
    for (const TensorRef& r : refs) {
      const std::string name = str("tensor name");
      if (name != r.name) {
        fail(std::string(section) + ": expected tensor '" + r.name + "', found '" + name + "'");
      }
      const auto rows = static_cast<Index>(u64("rows"));
      const auto cols = static_cast<Index>(u64("cols"));
      if (rows != r.rows() || cols != r.cols()) {
        fail("tensor '" + name + "': expected shape " + std::to_string(r.rows()) + "x" +
             std::to_string(r.cols()) + ", found " + std::to_string(rows) + "x" +
             std::to_string(cols));
      }
      for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
          const double v = f64("tensor payload");
          if (r.mat) {
            (*r.mat)(i, j) = v;
          } else {
            (*r.vec)[i] = v;
          }
        }
      }
    }
  }

  void expect_eof() {
    if (is_.get() != std::ifstream::traits_type::eof()) fail("trailing bytes");
  }

  [[noreturn]] void fail(const std::string& what) {
    throw FormatError(path_.string() + ": " + what + " at byte " + std::to_string(offset_));
  }

 private:
  std::filesystem::path path_;
  std::ifstream is_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  if (ck.opt_grad_sq.has_value() != ck.opt_update_sq.has_value()) {
    throw std::invalid_argument("save_checkpoint: optimizer accumulators must come as a pair");
  }
  // tensor_refs needs mutable access; work on a copy of the tensors.
  Checkpoint tmp = ck;
  const ModelDims dims = dims_of(tmp.model);
  if (dims.vocab_size != tmp.vocab.size()) {
    throw std::invalid_argument("save_checkpoint: vocabulary size " +
                                std::to_string(tmp.vocab.size()) + " does not match model output " +
                                std::to_string(dims.vocab_size));
  }

  Writer w(path);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(tmp.opt_grad_sq ? kFlagOptimizerState : 0u);
  w.u32(static_cast<std::uint32_t>(tmp.vocab.size()));
  for (const std::string& t : tmp.vocab.tokens()) w.str(t);
  w.u64(static_cast<std::uint64_t>(dims.feature_dim));
  w.u64(static_cast<std::uint64_t>(dims.embed_dim));
  w.u64(static_cast<std::uint64_t>(dims.hidden_dim));
  w.u64(static_cast<std::uint64_t>(dims.vocab_size));
  w.tensor_section(tmp.model);
  if (tmp.opt_grad_sq) {
    w.tensor_section(*tmp.opt_grad_sq);
    w.tensor_section(*tmp.opt_update_sq);
  }
  w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[sizeof kMagic] = {};
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("bad magic");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t flags = r.u32("flags");
  if ((flags & ~kFlagOptimizerState) != 0) r.fail("unknown flags " + std::to_string(flags));

  const std::uint32_t n_tokens = r.u32("vocabulary size");
  if (n_tokens < kNumReservedTokens) r.fail("vocabulary smaller than the reserved tokens");
  std::vector<std::string> tokens;
  tokens.reserve(n_tokens);
  for (std::uint32_t i = 0; i < n_tokens; ++i) tokens.push_back(r.str("vocabulary token"));
  for (int i = 0; i < kNumReservedTokens; ++i) {
    // Reserved slots are format invariants; anything else is corruption.
    static const char* const kReserved[] = {"<bos>", "<eos>", "<unk>"};
    if (tokens[static_cast<std::size_t>(i)] != kReserved[i]) r.fail("reserved token mismatch");
  }

  ModelDims dims;
  dims.feature_dim = static_cast<Index>(r.u64("feature_dim"));
  dims.embed_dim = static_cast<Index>(r.u64("embed_dim"));
  dims.hidden_dim = static_cast<Index>(r.u64("hidden_dim"));
  dims.vocab_size = static_cast<Index>(r.u64("vocab_size"));
  if (dims.vocab_size != static_cast<Index>(n_tokens)) {
    r.fail("model vocab_size does not match the stored vocabulary");
  }

  Checkpoint ck;
  ck.vocab = Vocabulary(std::vector<std::string>(tokens.begin() + kNumReservedTokens, tokens.end()));
  ck.model = make_model(dims);
  r.tensor_section(ck.model, "model");
  if (flags & kFlagOptimizerState) {
    ck.opt_grad_sq = make_model(dims);
    ck.opt_update_sq = make_model(dims);
    r.tensor_section(*ck.opt_grad_sq, "optimizer E[g^2]");
    r.tensor_section(*ck.opt_update_sq, "optimizer E[dx^2]");
  }
  r.expect_eof();
  return ck;
}

}  // namespace bacap
