#pragma once

#include <optional>

#include "fracbench/error.hpp"

namespace fracbench::testing {

template <typename Fn>
std::optional<ErrorCode> thrown_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace fracbench::testing

#define EXPECT_FB_ERROR(statement, error_code) \
  EXPECT_EQ(::fracbench::testing::thrown_code([&] { statement; }), std::optional(::fracbench::ErrorCode::error_code))
