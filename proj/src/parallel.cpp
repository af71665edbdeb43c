#include "fplap/parallel.hpp"

namespace fpl {

namespace {
std::atomic<unsigned> thread_cap{0};
}

void set_max_threads(unsigned n)
{
  thread_cap = n;
}

unsigned max_threads()
{
  const unsigned cap = thread_cap;
  if (cap != 0)
    return cap;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

} // namespace fpl
