#include "petprior/error.hpp"

namespace petprior {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMissingFile: return "missing_file";
    case ErrorCode::kCorruptHeader: return "corrupt_header";
    case ErrorCode::kMultiChannel: return "multi_channel";
    case ErrorCode::kInvariant: return "invariant_violation";
    case ErrorCode::kGridMismatch: return "grid_mismatch";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kDegenerateInput: return "degenerate_input";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kUnpaired: return "unpaired_files";
    case ErrorCode::kDuplicate: return "duplicate_case";
    case ErrorCode::kUnreachable: return "unreachable_target";
    case ErrorCode::kLeakage: return "leakage";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kUntrained: return "untrained_network";
    case ErrorCode::kStaleCache: return "stale_cache";
    case ErrorCode::kMissingResidual: return "missing_residual";
    case ErrorCode::kChannelOrder: return "channel_order";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kDependency: return "dependency";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
  }
  return "unknown";
}

}  // namespace petprior
