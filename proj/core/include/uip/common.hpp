#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace uip {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Bad inputs: shape mismatches, out-of-range parameters, malformed configs.
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

/// A solver left its admissible range (divergence, singular regression, NaNs).
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

/// Format a double with 17 significant digits (round-trip exact).
std::string format_full(double x);

/// FNV-1a over a byte view; used for cache keys.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 1469598103934665603ULL);

inline bool nearly_equal(double a, double b, double tol) {
    return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

} // namespace uip
