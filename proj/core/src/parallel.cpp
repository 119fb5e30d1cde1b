#include "cislunar/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

namespace cislunar {

unsigned worker_count() {
  unsigned requested = 0;
  if (const char* env = std::getenv("CISLUNAR_TASKER_THREADS")) {
    const std::string_view text(env);
    unsigned value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc() && end == text.data() + text.size()) requested = value;
  }
  if (requested == 0) requested = std::max(1u, std::thread::hardware_concurrency());
  return requested;
}

}  // namespace cislunar
