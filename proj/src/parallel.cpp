#include "famlab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace famlab {

std::size_t worker_count() {
    if (const char* env = std::getenv("FAMLAB_THREADS")) {
        try {
            const long value = std::stol(env);
            if (value > 0) return static_cast<std::size_t>(value);
        } catch (...) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace famlab
