// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace uvsplat {

void
setThreadCount(int threads) {
    if (threads >= 1)
        omp_set_num_threads(threads);
}

int
threadCount() {
    return omp_get_max_threads();
}

int
applyThreadEnv() {
    if (const char *env = std::getenv("GG_THREADS")) {
        try {
            setThreadCount(std::stoi(env));
        } catch (const std::exception &) {
            // Unparseable values leave the OpenMP default in place.
        }
    }
    return threadCount();
}

} // namespace uvsplat
