#include "envagent/common.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace envagent {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

Rng stream_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    const std::uint64_t s = derive_seed(seed, keys);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    return Rng(seq);
}

double uniform01(Rng& rng) {
    // 53 random mantissa bits; identical on every platform, unlike
    // std::uniform_real_distribution.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
    if (n == 0) throw InvalidInput("uniform_index: empty range");
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(rng);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min(threads, n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void CompensatedSum::add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
        carry_ += (sum_ - t) + x;
    } else {
        carry_ += (x - t) + sum_;
    }
    sum_ = t;
}

Rational to_rational(double x) {
    if (!std::isfinite(x)) throw InvalidInput("to_rational: non-finite value");
    int exponent = 0;
    const double mantissa = std::frexp(x, &exponent);
    // mantissa * 2^53 is an integer for any double.
    const auto scaled = static_cast<long long>(std::ldexp(mantissa, 53));
    Rational q(scaled);
    exponent -= 53;
    boost::multiprecision::cpp_int two_pow = 1;
    two_pow <<= std::abs(exponent);
    if (exponent >= 0) {
        q *= Rational(two_pow);
    } else {
        q /= Rational(two_pow);
    }
    return q;
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

}  // namespace envagent
