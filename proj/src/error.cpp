// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/error.hpp"

namespace uvsplat {

std::string_view
toString(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::MissingTexCoords: return "MissingTexCoords";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::InvalidMesh: return "InvalidMesh";
    case ErrorKind::CoordOutOfDomain: return "CoordOutOfDomain";
    case ErrorKind::EmptyGaussianSet: return "EmptyGaussianSet";
    case ErrorKind::InvalidBackground: return "InvalidBackground";
    case ErrorKind::InvalidCamera: return "InvalidCamera";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyTargets: return "EmptyTargets";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::LineOutOfBounds: return "LineOutOfBounds";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::BadFormat: return "BadFormat";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace uvsplat
