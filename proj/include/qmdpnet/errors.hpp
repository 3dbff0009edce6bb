#ifndef QMDPNET_ERRORS_HPP
#define QMDPNET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qmdpnet {

// Posterior (or normalization input) lost essentially all mass; for the
// filter this means the observation was impossible under the model. The
// caller decides how to recover.
class DegenerateBeliefError : public std::runtime_error {
public:
    explicit DegenerateBeliefError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed external input: .pomdp text, PGM bytes, dataset/model files.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Bad run configuration (CLI / JSON config); maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Operation requires the tied planner variant (K expansion and transfer).
class UnsupportedVariantError : public std::runtime_error {
public:
    explicit UnsupportedVariantError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qmdpnet

#endif
