#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace reponet {

// Row-major so that one row is one sample / one class vector.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

enum class ErrorCode {
  kInvalidClassCount,
  kDimension,
  kLabel,
  kDegenerateFeature,
  kMargin,
  kStructural,
  kCache,
  kEmptyDataset,
  kBadMagic,
  kTruncated,
  kCountMismatch,
  kIo,
  kConfig,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace reponet
