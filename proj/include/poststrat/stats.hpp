#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace poststrat {

double mean(std::span<const double> xs);
/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> xs);

/// Linear-interpolation percentile (type 7): h = (n-1)q on the sorted values.
double quantile_type7(std::vector<double> xs, double q);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

std::uint64_t fnv1a64(std::span<const char> bytes);
std::string fnv1a64_hex(std::span<const char> bytes);

}  // namespace poststrat
