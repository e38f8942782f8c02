#include "towerlab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace towerlab {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TOWERLAB_WORKERS")) {
    try {
      const int value = std::stoi(env);
      if (value > 0) return value;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

}  // namespace towerlab
