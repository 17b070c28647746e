#include "reponet/types.hpp"

namespace reponet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidClassCount: return "invalid-class-count";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kLabel: return "label";
    case ErrorCode::kDegenerateFeature: return "degenerate-feature";
    case ErrorCode::kMargin: return "margin";
    case ErrorCode::kStructural: return "structural";
    case ErrorCode::kCache: return "cache";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kCountMismatch: return "count-mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace reponet
