// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uvsplat {

enum class ErrorKind {
    MalformedRecord,
    MissingTexCoords,
    IndexOutOfRange,
    InvalidMesh,
    CoordOutOfDomain,
    EmptyGaussianSet,
    InvalidBackground,
    InvalidCamera,
    ShapeMismatch,
    EmptyTargets,
    NonFiniteLoss,
    LineOutOfBounds,
    InvalidConfig,
    BadFormat,
    IoError,
};

std::string_view toString(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so that
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(std::string(toString(kind)) + ": " + message), mKind(kind) {}

    ErrorKind kind() const noexcept { return mKind; }

  private:
    ErrorKind mKind;
};

} // namespace uvsplat
