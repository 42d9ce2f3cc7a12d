#include "w2s/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <json.hpp>

#include "w2s/error.hpp"

namespace w2s {
namespace {

constexpr char kMatrixMagic[4] = {'W', '2', 'S', 'M'};
constexpr char kLabelMagic[4] = {'W', '2', 'S', 'L'};

class Writer {
 public:
  void bytes(const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out_.push_back(static_cast<std::byte>(data[i]));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

std::uint32_t load_u32(std::span<const std::byte> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::to_integer<std::uint8_t>(b[at + i])) << (8 * i);
  return v;
}

std::uint64_t load_u64(std::span<const std::byte> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::to_integer<std::uint8_t>(b[at + i])) << (8 * i);
  return v;
}

void check_header(std::span<const std::byte> bytes, const char (&magic)[4],
                  std::size_t header_bytes, const char* kind) {
  if (bytes.size() < 4) {
    throw ParseError(ParseFailure::kTruncated,
                     std::string(kind) + " file shorter than its magic");
  }
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw ParseError(ParseFailure::kBadMagic,
                     std::string("expected ") + std::string(magic, 4) + " header");
  }
  if (bytes.size() < header_bytes) {
    throw ParseError(ParseFailure::kTruncated,
                     std::string(kind) + " header needs " + std::to_string(header_bytes) +
                         " bytes, file has " + std::to_string(bytes.size()));
  }
  const std::uint32_t version = load_u32(bytes, 4);
  if (version != kFormatVersion) {
    throw ParseError(ParseFailure::kBadVersion,
                     "version " + std::to_string(version) + ", only version 1 is supported");
  }
}

// a * b * 4, or nullopt-like max on overflow.
std::uint64_t payload_bytes(std::uint64_t a, std::uint64_t b) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (a != 0 && b > kMax / a) return kMax;
  const std::uint64_t n = a * b;
  if (n > kMax / 4) return kMax;
  return n * 4;
}

}  // namespace

void LabelSet::validate() const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_names.size()) {
      throw IndexError("label " + std::to_string(labels[i]) + " at position " +
                       std::to_string(i) + " exceeds " +
                       std::to_string(class_names.size()) + " class names");
    }
  }
}

std::vector<std::string> LabelSet::default_names(std::size_t k) {
  std::vector<std::string> names;
  names.reserve(k);
  for (std::size_t j = 0; j < k; ++j) names.push_back("class_" + std::to_string(j));
  return names;
}

std::vector<std::byte> encode_matrix(const Matrix& matrix) {
  Writer w;
  w.bytes(kMatrixMagic, 4);
  w.u32(kFormatVersion);
  w.u64(matrix.rows());
  w.u64(matrix.cols());
  for (double v : matrix.values()) w.f32(static_cast<float>(v));
  return w.take();
}

Matrix decode_matrix(std::span<const std::byte> bytes) {
  check_header(bytes, kMatrixMagic, kMatrixHeaderBytes, "W2SM");
  const std::uint64_t rows = load_u64(bytes, 8);
  const std::uint64_t cols = load_u64(bytes, 16);
  const std::uint64_t payload = payload_bytes(rows, cols);
  const std::uint64_t available = bytes.size() - kMatrixHeaderBytes;
  if (available < payload) {
    throw ParseError(ParseFailure::kTruncated,
                     std::to_string(rows) + "x" + std::to_string(cols) + " matrix needs " +
                         std::to_string(payload) + " payload bytes, file has " +
                         std::to_string(available));
  }
  if (available > payload) {
    throw ParseError(ParseFailure::kTrailingBytes,
                     std::to_string(available - payload) + " bytes after payload");
  }
  std::vector<double> values(rows * cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(load_u32(bytes, kMatrixHeaderBytes + 4 * i));
  }
  return Matrix(rows, cols, std::move(values));
}

std::vector<std::byte> encode_labels(const LabelSet& labels) {
  labels.validate();
  Writer w;
  w.bytes(kLabelMagic, 4);
  w.u32(kFormatVersion);
  w.u64(labels.labels.size());
  for (std::uint32_t v : labels.labels) w.u32(v);
  const std::string footer = nlohmann::json{{"classes", labels.class_names}}.dump();
  w.bytes(footer.data(), footer.size());
  w.u32(static_cast<std::uint32_t>(footer.size()));
  return w.take();
}

LabelSet decode_labels(std::span<const std::byte> bytes) {
  check_header(bytes, kLabelMagic, kLabelHeaderBytes, "W2SL");
  const std::uint64_t count = load_u64(bytes, 8);
  const std::uint64_t payload = payload_bytes(count, 1);
  const std::uint64_t available = bytes.size() - kLabelHeaderBytes;
  if (payload > available || available - payload < 4) {
    throw ParseError(ParseFailure::kTruncated,
                     std::to_string(count) + " labels plus footer need more than " +
                         std::to_string(available) + " bytes");
  }
  const std::uint64_t footer_len = load_u32(bytes, bytes.size() - 4);
  const std::uint64_t expected = payload + footer_len + 4;
  if (available < expected) {
    throw ParseError(ParseFailure::kTruncated,
                     "footer of " + std::to_string(footer_len) + " bytes does not fit");
  }
  if (available > expected) {
    throw ParseError(ParseFailure::kTrailingBytes,
                     std::to_string(available - expected) + " unexpected bytes");
  }

  LabelSet out;
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.labels[i] = load_u32(bytes, kLabelHeaderBytes + 4 * i);
  }
  const auto* footer_begin =
      reinterpret_cast<const char*>(bytes.data()) + kLabelHeaderBytes + payload;
  try {
    const auto footer = nlohmann::json::parse(footer_begin, footer_begin + footer_len);
    if (!footer.is_object() || !footer.contains("classes") || !footer["classes"].is_array()) {
      throw ParseError(ParseFailure::kBadFooter, "footer lacks a \"classes\" array");
    }
    out.class_names = footer["classes"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseFailure::kBadFooter, e.what());
  }
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (out.labels[i] >= out.class_names.size()) {
      throw ParseError(ParseFailure::kLabelOutOfRange,
                       "label " + std::to_string(out.labels[i]) + " at position " +
                           std::to_string(i) + " but only " +
                           std::to_string(out.class_names.size()) + " classes");
    }
  }
  return out;
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading", path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed", path.string());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed", path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void write_matrix(const std::filesystem::path& path, const Matrix& matrix) {
  write_file(path, encode_matrix(matrix));
}

Matrix read_matrix(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_matrix(bytes);
  } catch (const ParseError& e) {
    throw ParseError(e.failure(), path.string() + ": " + e.detail());
  }
}

void write_labels(const std::filesystem::path& path, const LabelSet& labels) {
  write_file(path, encode_labels(labels));
}

LabelSet read_labels(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_labels(bytes);
  } catch (const ParseError& e) {
    throw ParseError(e.failure(), path.string() + ": " + e.detail());
  }
}

}  // namespace w2s
