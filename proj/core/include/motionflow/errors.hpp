#pragma once

#include <stdexcept>
#include <string>

namespace motionflow {

// Thrown when an optimization loop produces a non-finite loss. Carries the
// pyramid level (-1 when not applicable) and the iteration index.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, int level, long iteration)
        : std::runtime_error(what), level(level), iteration(iteration) {}

    int level = -1;
    long iteration = 0;
};

// Thrown when a sequence cannot be processed end to end, e.g. an unlabeled
// frame that no labeled anchor can reach.
class PipelineError : public std::runtime_error {
public:
    explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail
}  // namespace motionflow
