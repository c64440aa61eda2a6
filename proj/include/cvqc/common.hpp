// common.hpp -- error types and the seeded random stream shared by all modules.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvqc {

inline constexpr const char* kVersion = "0.1.0";

// Every failure that should reach the CLI maps to one of these; the exit code
// is chosen by the category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParamError : public Error {
public:
    using Error::Error;
};

class GenerationError : public ParamError {
public:
    using ParamError::ParamError;
};

class ResourceError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class DecodeError : public InputError {
public:
    using InputError::InputError;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Explicit seeded stream. All sampling in the library goes through one of
// these; there is no ambient randomness.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uniform_int_distribution<std::int64_t> dist(lo, hi);
        return dist(engine_);
    }

    double uniform01() {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        return dist(engine_);
    }

    int bit() { return static_cast<int>(uniform_int(0, 1)); }

    double normal() {
        std::normal_distribution<double> dist(0.0, 1.0);
        return dist(engine_);
    }

    // Index drawn from a discrete distribution given by non-negative weights.
    std::size_t discrete(const std::vector<double>& weights) {
        std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
        return dist(engine_);
    }

    // Seed for an independent child stream.
    std::uint64_t derive_seed() { return next_u64(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace cvqc
