#pragma once

#include <optional>
#include <utility>

#include "nsca/error.hpp"

namespace nsca::test {

/// Error code thrown by `call`, empty when nothing throws.
template <class F>
std::optional<ErrorCode> code_of(F&& call) {
  try {
    std::forward<F>(call)();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace nsca::test
