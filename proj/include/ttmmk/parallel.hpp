#pragma once

namespace ttmmk {

/// Environment variable overriding the OpenMP worker count.
inline constexpr const char* kThreadsEnvVar = "TTMMK_NUM_THREADS";

/// Applies TTMMK_NUM_THREADS if set; returns the resulting worker count.
int configure_threads_from_env();

void set_num_threads(int n);
int max_threads();

}  // namespace ttmmk
