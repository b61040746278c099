#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace silvaflux {

enum class ErrorCode {
  ParseError,
  MissingFile,
  InvalidInput,
  UnknownProduct,
  NegativeQuantity,
  Infeasible,
  NotConverged,
  UnbalancedInputs,
  RerouteExceedsFlow,
  UnknownEndpoint,
  CapExceeded,
  UnbalancedEdit,
  NegativeStock,
  UnclassifiedNode,
  YearMismatch,
  ZeroReference,
  EmptyGraph,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; the code drives CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string path = {},
        std::size_t row = 0)
      : std::runtime_error(message), code_(code), path_(std::move(path)), row_(row) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }
  // 1-based line number in `path`, 0 when not applicable.
  std::size_t row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  std::string path_;
  std::size_t row_;
};

}  // namespace silvaflux
