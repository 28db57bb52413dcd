#pragma once

#include <stdexcept>
#include <string>

namespace cantorlab {

enum class Errc {
    AddressRange,          // invalid interval/row address
    Domain,                // argument outside the mathematical domain
    Resource,              // enumeration/graph budget exceeded
    Boundary,              // no first-large cube in the requested direction
    Connectivity,          // graph query between disconnected components
    Precondition,          // structural precondition violated
    ExceptionalParameter,  // t hit a construction midpoint; caller resamples
    Convergence,           // iterative solver stalled
    Capacity,              // parameter solver cap reached
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace cantorlab
