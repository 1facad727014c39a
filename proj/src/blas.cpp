#include "blas.hpp"

#include <mutex>

namespace spg::blas {

void ensure_deterministic() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

}  // namespace spg::blas
