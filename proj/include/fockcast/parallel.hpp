#pragma once

#include <cstddef>
#include <functional>

namespace fockcast {

/// Sets the number of worker threads used by parallel_for (at least 1).
void set_thread_count(int n);
int thread_count();

/// Calls body(begin, end) over [0, n) split into fixed chunks of `chunk` items.
/// Chunk boundaries do not depend on the thread count, so any per-chunk
/// partial result merged in chunk order is reproducible bit for bit.
void parallel_for(std::size_t n, std::size_t chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

/// Number of chunks parallel_for uses for (n, chunk).
inline std::size_t chunk_count(std::size_t n, std::size_t chunk) {
    return chunk == 0 ? 0 : (n + chunk - 1) / chunk;
}

}  // namespace fockcast
