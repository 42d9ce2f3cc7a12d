#include "w2s/error.hpp"

namespace w2s {

const char* to_string(ParseFailure failure) noexcept {
  switch (failure) {
    case ParseFailure::kBadMagic: return "bad magic";
    case ParseFailure::kBadVersion: return "unsupported version";
    case ParseFailure::kTruncated: return "truncated payload";
    case ParseFailure::kTrailingBytes: return "trailing bytes";
    case ParseFailure::kBadFooter: return "malformed footer";
    case ParseFailure::kLabelOutOfRange: return "label out of range";
  }
  return "unknown parse failure";
}

}  // namespace w2s
