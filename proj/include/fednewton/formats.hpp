#pragma once

// On-disk formats: IDX image/label pairs, LIBSVM text, and the binary shard
// file that freezes a partition (layouts in docs/formats.md).

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "fednewton/core.hpp"
#include "fednewton/datasets.hpp"
#include "fednewton/glm.hpp"

namespace fednewton {

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& what) {
  if (off + 4 > b.size()) throw FormatError(what + ": truncated header at byte " + std::to_string(off), off);
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// IDX image + label files; pixels scaled to [0, 1], labels are class indices.
inline std::vector<Sample> load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_bytes(images_path);
  const auto lab = detail::read_bytes(labels_path);
  const std::uint32_t im_magic = detail::read_be32(img, 0, images_path);
  if (im_magic != kIdxImagesMagic) throw FormatError(images_path + ": bad magic at byte 0", 0);
  const std::uint32_t lb_magic = detail::read_be32(lab, 0, labels_path);
  if (lb_magic != kIdxLabelsMagic) throw FormatError(labels_path + ": bad magic at byte 0", 0);
  const std::uint32_t count = detail::read_be32(img, 4, images_path);
  const std::uint32_t rows = detail::read_be32(img, 8, images_path);
  const std::uint32_t cols = detail::read_be32(img, 12, images_path);
  const std::uint32_t label_count = detail::read_be32(lab, 4, labels_path);
  if (label_count != count)
    throw FormatError(labels_path + ": label count " + std::to_string(label_count) + " differs from image count " +
                          std::to_string(count),
                      4);
  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t img_need = 16 + std::size_t{count} * pixels;
  if (img.size() < img_need)
    throw FormatError(images_path + ": truncated payload, file ends at byte " + std::to_string(img.size()) +
                          ", need " + std::to_string(img_need),
                      img.size());
  if (lab.size() < 8 + std::size_t{count})
    throw FormatError(labels_path + ": truncated payload, file ends at byte " + std::to_string(lab.size()), lab.size());

  std::vector<Sample> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample& s = out[i];
    s.features.resize(pixels);
    const unsigned char* px = img.data() + 16 + i * pixels;
    for (std::size_t k = 0; k < pixels; ++k) s.features[k] = px[k] / 255.0;
    s.label = lab[8 + i];
  }
  return out;
}

/// `label idx:val ...` lines with 1-based indices <= dim; absent indices are 0.
inline std::vector<Sample> load_libsvm(std::istream& in, std::size_t dim) {
  require(dim >= 1, "load_libsvm: dim must be >= 1");
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw FormatError("libsvm line " + std::to_string(lineno) + ": " + why, lineno);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    Sample s;
    s.features.assign(dim, 0.0);
    char* end = nullptr;
    s.label = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail("bad label '" + tok + "'");
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0) fail("expected idx:val, got '" + tok + "'");
      const std::string idx_s = tok.substr(0, colon);
      const std::string val_s = tok.substr(colon + 1);
      const long idx = std::strtol(idx_s.c_str(), &end, 10);
      if (*end != '\0') fail("bad index '" + idx_s + "'");
      if (idx < 1 || static_cast<std::size_t>(idx) > dim)
        fail("index " + idx_s + " outside [1, " + std::to_string(dim) + "]");
      const double val = std::strtod(val_s.c_str(), &end);
      if (val_s.empty() || *end != '\0') fail("bad value '" + val_s + "'");
      s.features[static_cast<std::size_t>(idx - 1)] = val;
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Sample> load_libsvm(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_libsvm(in, dim);
}

// Shard file: little-endian, see docs/formats.md.
inline constexpr char kShardMagic[4] = {'F', 'N', 'S', 'D'};
inline constexpr std::uint32_t kShardVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }

  std::string bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> b) : bytes_(std::move(b)) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("shard file truncated at byte " + std::to_string(pos_), pos_);
  }

  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t task_code(const Task& t) {
  switch (t.kind) {
    case TaskKind::Regression: return 0;
    case TaskKind::BinaryClassification: return 1;
    case TaskKind::MultiClass: return 2;
  }
  return 0;
}

}  // namespace detail

inline std::string encode_shards(const FederatedDataset& ds) {
  ds.validate();
  detail::ByteWriter w;
  w.raw(kShardMagic, 4);
  w.u32(kShardVersion);
  w.u32(static_cast<std::uint32_t>(ds.shards.size()));
  w.u32(static_cast<std::uint32_t>(ds.dim));
  w.u32(detail::task_code(ds.task));
  w.u32(static_cast<std::uint32_t>(ds.task.classes));
  w.u32(static_cast<std::uint32_t>(ds.provenance.size()));
  w.raw(ds.provenance.data(), ds.provenance.size());
  for (const WorkerData& wd : ds.shards) {
    w.u64(wd.train.size());
    w.u64(wd.validation.size());
    for (const Shard* part : {&wd.train, &wd.validation})
      for (const Sample& s : *part) {
        w.f64(s.label);
        for (double x : s.features) w.f64(x);
      }
  }
  return std::move(w.bytes);
}

inline FederatedDataset decode_shards(std::vector<unsigned char> bytes) {
  detail::ByteReader r(std::move(bytes));
  if (r.raw(4) != std::string(kShardMagic, 4)) throw FormatError("shard file: bad magic at byte 0", 0);
  const std::uint32_t version = r.u32();
  if (version != kShardVersion) throw FormatError("shard file: unsupported version " + std::to_string(version), 4);
  FederatedDataset ds;
  const std::uint32_t n = r.u32();
  ds.dim = r.u32();
  const std::size_t task_at = r.pos();
  const std::uint32_t code = r.u32();
  ds.task.classes = r.u32();
  switch (code) {
    case 0: ds.task.kind = TaskKind::Regression; break;
    case 1: ds.task.kind = TaskKind::BinaryClassification; break;
    case 2: ds.task.kind = TaskKind::MultiClass; break;
    default: throw FormatError("shard file: unknown task code " + std::to_string(code), task_at);
  }
  ds.provenance = r.raw(r.u32());
  for (std::uint32_t i = 0; i < n; ++i) {
    WorkerData wd;
    const std::uint64_t n_train = r.u64();
    const std::uint64_t n_val = r.u64();
    for (Shard* part : {&wd.train, &wd.validation}) {
      const std::uint64_t count = part == &wd.train ? n_train : n_val;
      for (std::uint64_t k = 0; k < count; ++k) {
        Sample s;
        s.label = r.f64();
        s.features.resize(ds.dim);
        for (double& x : s.features) x = r.f64();
        part->push_back(std::move(s));
      }
    }
    ds.shards.push_back(std::move(wd));
  }
  if (!r.at_end()) throw FormatError("shard file: trailing bytes at " + std::to_string(r.pos()), r.pos());
  return ds;
}

/// Writes via a temporary file and rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void save_shards(const std::string& path, const FederatedDataset& ds) { write_file_atomic(path, encode_shards(ds)); }

inline FederatedDataset load_shards(const std::string& path) { return decode_shards(detail::read_bytes(path)); }

}  // namespace fednewton
