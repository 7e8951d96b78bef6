// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

namespace uvsplat {

/// Caps the OpenMP worker count. Values < 1 are ignored.
void setThreadCount(int threads);
int threadCount();

/// Applies GG_THREADS from the environment, if set. Returns the active count.
int applyThreadEnv();

} // namespace uvsplat
