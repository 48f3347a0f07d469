#pragma once

#include <stdexcept>
#include <string>

namespace oodrt {

// Bad argument values or mismatched shapes supplied by a caller.
struct argument_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Model or run configuration that cannot be realized (shape composition,
// unknown config keys, invalid enumerations).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse, e.g. backward without a forward cache.
struct usage_error : std::logic_error {
    using std::logic_error::logic_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training produced non-finite values. `epoch` is 1-based, 0 when unknown.
struct training_error : std::runtime_error {
    training_error(const std::string& what, int epoch = 0)
        : std::runtime_error(what), epoch(epoch) {}
    int epoch;
};

struct projection_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct overload_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pipeline task threw; `task` names it.
struct pipeline_error : std::runtime_error {
    pipeline_error(const std::string& task, const std::string& what)
        : std::runtime_error("task '" + task + "' failed: " + what), task(task) {}
    std::string task;
};

}  // namespace oodrt
