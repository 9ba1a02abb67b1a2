#pragma once

#include <cstdio>
#include <string>

namespace ctrlrand {

/// Round-trippable text for a double ("%.17g"; nan prints as "nan").
inline std::string g17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace ctrlrand
