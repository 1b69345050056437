#pragma once

#include <doctest.h>

#include <functional>

#include "rgwalk/error.hpp"

/// Code of the rgwalk::Error thrown by f; fails the test if nothing is thrown.
inline rgwalk::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const rgwalk::Error& e) {
    return e.code();
  }
  FAIL("no rgwalk::Error thrown");
  return rgwalk::ErrorCode::IoError;
}
