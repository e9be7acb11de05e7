// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tdx {

/// Base error for every contract violation surfaced by the library.
class TdxError : public std::runtime_error {
  public:
    explicit TdxError(const std::string& what) : std::runtime_error(what) {}
};

/// Shape or dimension mismatch; message names both shapes.
class ShapeError : public TdxError {
  public:
    explicit ShapeError(const std::string& what) : TdxError(what) {}
};

/// Non-finite value detected where finite math was required.
class NumericError : public TdxError {
  public:
    explicit NumericError(const std::string& what) : TdxError(what) {}
};

/// Malformed or truncated on-disk container.
class FormatError : public TdxError {
  public:
    explicit FormatError(const std::string& what) : TdxError(what) {}
};

} // namespace tdx
