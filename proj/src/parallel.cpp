#include "ttmmk/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ttmmk/error.hpp"

namespace ttmmk {

void set_num_threads(int n) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "worker count must be >= 1");
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int configure_threads_from_env() {
  if (const char* raw = std::getenv(kThreadsEnvVar); raw != nullptr && *raw != '\0') {
    int n = 0;
    try {
      n = std::stoi(raw);
    } catch (const std::exception&) {
      fail(ErrorCode::Parse, std::string(kThreadsEnvVar) + " is not an integer");
    }
    set_num_threads(n);
  }
  return max_threads();
}

}  // namespace ttmmk
