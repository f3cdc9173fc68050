#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace sdde::detail {

// Runs `body(k)` for k in [0, count) across OpenMP threads and rethrows the
// exception of the lowest failing k, so error reporting does not depend on
// scheduling.
template<typename Body>
void parallel_for(std::size_t count, Body&& body)
{
   std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic, 16)
   for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) {
      try {
         body(static_cast<std::size_t>(k));
      } catch (...) {
         errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
   }
   for (auto& e : errors) {
      if (e) {
         std::rethrow_exception(e);
      }
   }
}

} // namespace sdde::detail
