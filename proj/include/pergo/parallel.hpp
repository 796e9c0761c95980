#pragma once

#include <cstddef>
#include <functional>

namespace pergo {

//! Number of worker threads used by parallel loops. Defaults to the
//! PERGO_THREADS environment variable, else the hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);

//! Runs body(i) for i in [0, n). Work items must be independent; results
//! never depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace pergo
