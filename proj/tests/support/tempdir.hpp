// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace uvsplat::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        mPath = std::filesystem::temp_directory_path() /
                ("uvsplat_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(mPath);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(mPath, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    std::string file(const std::string &name) const { return (mPath / name).string(); }
    const std::filesystem::path &path() const { return mPath; }

  private:
    std::filesystem::path mPath;
};

} // namespace uvsplat::testing
