#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace batchedit {

/// Transport-level error category. Every library failure maps to exactly one.
enum class ErrorCode { bad_request, not_found, conflict, solver_failed, internal };

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::bad_request: return "bad_request";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::solver_failed: return "solver_failed";
    case ErrorCode::internal: return "internal";
  }
  return "internal";
}

inline constexpr int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::bad_request: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::solver_failed:
    case ErrorCode::internal: return 500;
  }
  return 500;
}

/// Base of all errors thrown by the library. `kind` names the precise
/// failure (ZeroDirection, DimensionMismatch, ...), `code` its category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string kind, const std::string& message)
      : std::runtime_error(message), code_(code), kind_(std::move(kind)) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCode code_;
  std::string kind_;
};

struct ZeroDirection : Error {
  explicit ZeroDirection(const std::string& msg = "direction has (near) zero length")
      : Error(ErrorCode::bad_request, "ZeroDirection", msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg)
      : Error(ErrorCode::bad_request, "DimensionMismatch", msg) {}
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& msg)
      : Error(ErrorCode::bad_request, "InvalidArgument", msg) {}
};

struct NotFound : Error {
  explicit NotFound(const std::string& msg) : Error(ErrorCode::not_found, "NotFound", msg) {}
};

struct ChainBroken : Error {
  explicit ChainBroken(const std::string& msg)
      : Error(ErrorCode::conflict, "ChainBroken", msg) {}
};

struct MissingDirection : Error {
  MissingDirection() : Error(ErrorCode::conflict, "MissingDirection", "no fitted direction; run fit first") {}
};

struct MissingExample : Error {
  MissingExample() : Error(ErrorCode::conflict, "MissingExample", "no example edit set") {}
};

struct NoTestLatents : Error {
  NoTestLatents() : Error(ErrorCode::conflict, "NoTestLatents", "session has no test latents") {}
};

struct MissingAlphas : Error {
  MissingAlphas() : Error(ErrorCode::conflict, "MissingAlphas", "session has not been transferred") {}
};

/// Optimisation diverged. Carries whatever trace was accumulated.
struct NonFinite : Error {
  explicit NonFinite(const std::string& msg) : Error(ErrorCode::solver_failed, "NonFinite", msg) {}
};

namespace detail {

inline void require_same_dim(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b) {
    throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(a) +
                            " does not match " + std::to_string(b));
  }
}

}  // namespace detail

}  // namespace batchedit
