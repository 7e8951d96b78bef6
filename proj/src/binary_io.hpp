// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian primitive IO shared by the binary file formats.
#pragma once

#include "uvsplat/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace uvsplat::detail {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

template <typename T>
void
writeLe(std::ostream &out, T value) {
    out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <typename T>
T
readLe(std::istream &in, const char *what) {
    T value{};
    in.read(reinterpret_cast<char *>(&value), sizeof(T));
    if (!in)
        throw Error(ErrorKind::BadFormat, std::string("truncated stream while reading ") + what);
    return value;
}

inline void
expectMagic(std::istream &in, const char (&magic)[5]) {
    char buf[4] = {};
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0)
        throw Error(ErrorKind::BadFormat, std::string("missing magic '") + magic + "'");
}

} // namespace uvsplat::detail
