#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ctrlrand {

enum class Backend { serial, openmp };

/// How data-parallel loops run. Results never depend on the choice: every
/// kernel writes disjoint outputs and reductions are done afterwards in
/// index order.
struct Execution {
    Backend backend = Backend::openmp;
    int threads = 0; ///< 0: OpenMP default

    static Execution serial() { return {Backend::serial, 1}; }
    static Execution parallel(int threads = 0) { return {Backend::openmp, threads}; }
};

int available_threads();

namespace detail {

/// Keeps the first exception thrown inside a parallel region.
class FirstError {
public:
    template <class Fn>
    void run(Fn&& fn) noexcept
    {
        try {
            fn();
        } catch (...) {
            std::lock_guard lock(mutex_);
            if (!error_) {
                error_ = std::current_exception();
            }
        }
    }
    void rethrow() const
    {
        if (error_) {
            std::rethrow_exception(error_);
        }
    }

private:
    std::mutex mutex_;
    std::exception_ptr error_;
};

} // namespace detail

/// Reference loop.
template <class Fn>
void for_each_index_serial(std::size_t n, Fn&& fn)
{
    for (std::size_t i = 0; i < n; ++i) {
        fn(i);
    }
}

/// OpenMP loop with static scheduling; the first exception is rethrown on the
/// calling thread after the region ends.
template <class Fn>
void for_each_index_omp(std::size_t n, int threads, Fn&& fn)
{
#ifdef _OPENMP
    detail::FirstError err;
    const auto count = static_cast<std::int64_t>(n);
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t i = 0; i < count; ++i) {
        err.run([&] { fn(static_cast<std::size_t>(i)); });
    }
    err.rethrow();
#else
    (void)threads;
    for_each_index_serial(n, fn);
#endif
}

template <class Fn>
void for_each_index(const Execution& exec, std::size_t n, Fn&& fn)
{
    if (exec.backend == Backend::serial) {
        for_each_index_serial(n, fn);
    } else {
        for_each_index_omp(n, exec.threads, fn);
    }
}

} // namespace ctrlrand
