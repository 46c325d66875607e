#ifndef DCP_ERRORS_HPP
#define DCP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dcp {

// invalid construction parameter (non-positive rate, bad config field, ...)
struct parameter_error : std::invalid_argument {
    explicit parameter_error(const std::string& what) : std::invalid_argument(what) {}
};

// argument outside a function's mathematical domain (e.g. conjugate at y > 0)
struct domain_error : std::invalid_argument {
    explicit domain_error(const std::string& what) : std::invalid_argument(what) {}
};

// solver could not produce a valid solution (bracket missing, invariant violated)
struct solver_error : std::runtime_error {
    explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

// simulation aborted (non-finite state); message carries the step index
struct simulation_error : std::runtime_error {
    explicit simulation_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dcp

#endif
