#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace hiddenscan {

enum class Errc {
  ViewUnavailable,
  NotFound,
  PermissionDenied,
  NotADirectory,
  UnsupportedProbe,
  InvalidArgument,
  PidSpaceTooLarge,
  Io,
};

const char* to_string(Errc code);

struct Error {
  Errc code = Errc::Io;
  std::string detail;
};

// Value-or-error for view reads. Reads fail routinely (processes exit,
// permissions differ), so they are not exceptions.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : state_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(Error error) : state_(std::move(error)) {}  // NOLINT(google-explicit-constructor)

  bool ok() const { return std::holds_alternative<T>(state_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::logic_error(std::string("Result holds error: ") + to_string(error().code));
    return std::get<T>(state_);
  }
  T& value() & {
    if (!ok()) throw std::logic_error(std::string("Result holds error: ") + to_string(error().code));
    return std::get<T>(state_);
  }
  T&& value() && {
    if (!ok()) throw std::logic_error(std::string("Result holds error: ") + to_string(error().code));
    return std::get<T>(std::move(state_));
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  const Error& error() const { return std::get<Error>(state_); }

  T value_or(T fallback) const { return ok() ? std::get<T>(state_) : std::move(fallback); }

 private:
  std::variant<T, Error> state_;
};

inline Error make_error(Errc code, std::string detail = {}) { return Error{code, std::move(detail)}; }

}  // namespace hiddenscan
