#ifndef STOPFLOW_VERSION_HPP
#define STOPFLOW_VERSION_HPP

namespace stopflow {

constexpr const char* kVersion = "0.1.0";

}

#endif
