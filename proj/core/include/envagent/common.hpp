#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace envagent {

/// Output identifier produced by a program or expected by a test case.
using Symbol = std::uint32_t;

/// Exact rational used wherever a check must hold without tolerance.
using Rational = boost::multiprecision::cpp_rational;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class UnsupportedMode : public Error {
public:
    using Error::Error;
};

class DegenerateDistribution : public Error {
public:
    using Error::Error;
};

/// Derives an independent generator from a base seed and a key path, e.g.
/// `stream_rng(seed, {task, round})`. Streams depend only on the keys, so a
/// unit of work draws the same numbers whichever thread runs it.
Rng stream_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {});

/// Mixes a key path into a single 64-bit seed (splitmix64 chain).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// Uniform real in [0, 1).
double uniform01(Rng& rng);

/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write results into pre-sized slots so the
/// outcome does not depend on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x);
    [[nodiscard]] double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

/// Exact conversion; every finite double is a dyadic rational.
Rational to_rational(double x);

double to_double(const Rational& q);

}  // namespace envagent
