#pragma once

// Binary carriers for embeddings, logits, prototypes and labels.
//
// W2SM (matrix), little-endian throughout:
//   "W2SM" | u32 version = 1 | u64 rows | u64 cols | rows*cols f32, row-major
//   file length is exactly 24 + 4 * rows * cols.
//
// W2SL (labels):
//   "W2SL" | u32 version = 1 | u64 count | count u32 class indices
//   | UTF-8 JSON footer {"classes": [names...]} | u32 footer byte length
//
// In memory values are doubles; writing narrows to float32, so a
// write -> read -> write cycle is byte-identical.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "w2s/matrix.hpp"

namespace w2s {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 24;
inline constexpr std::size_t kLabelHeaderBytes = 16;

struct LabelSet {
  std::vector<std::uint32_t> labels;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t classes() const noexcept { return class_names.size(); }

  /// Throws IndexError when a label is >= classes().
  void validate() const;

  /// Names "class_0" .. "class_{k-1}".
  static std::vector<std::string> default_names(std::size_t k);

  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

std::vector<std::byte> encode_matrix(const Matrix& matrix);
Matrix decode_matrix(std::span<const std::byte> bytes);

std::vector<std::byte> encode_labels(const LabelSet& labels);
LabelSet decode_labels(std::span<const std::byte> bytes);

void write_matrix(const std::filesystem::path& path, const Matrix& matrix);
Matrix read_matrix(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, const LabelSet& labels);
LabelSet read_labels(const std::filesystem::path& path);

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace w2s
