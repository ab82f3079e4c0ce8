#include "reco/threading.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace reco {

void set_num_threads(int n) {
#ifdef _OPENMP
  // n <= 0 restores the hardware default.
  omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

} // namespace reco
