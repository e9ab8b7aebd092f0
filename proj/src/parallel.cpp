#include "oploc/parallel.hpp"

#include <cstdlib>
#include <string>

namespace oploc {

namespace {
std::atomic<unsigned> g_default_threads{0};
}

unsigned resolve_thread_count(int requested)
{
    if (requested > 0) return static_cast<unsigned>(requested);
    if (const char* env = std::getenv("OPLOC_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
            // fall through to hardware count
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

void set_default_threads(unsigned n)
{
    g_default_threads.store(n);
}

unsigned default_threads()
{
    const unsigned n = g_default_threads.load();
    return n == 0 ? resolve_thread_count() : n;
}

} // namespace oploc
