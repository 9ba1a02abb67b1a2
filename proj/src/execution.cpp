#include "ctrlrand/execution.hpp"

namespace ctrlrand {

int available_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace ctrlrand
