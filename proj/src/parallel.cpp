#include "metarisk/parallel.hpp"

#include <cstdlib>
#include <string>

namespace metarisk {

unsigned default_jobs() {
  if (const char* env = std::getenv("META_RISK_LAB_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace metarisk
