#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace performa {

/// log(sum_i exp(v_i)) with the usual max-subtraction guard.
double log_sum_exp(std::span<const double> v);

/// Stable softmax; -inf entries map to exact zeros.
std::vector<double> softmax(std::span<const double> logits);

/// Index of the largest entry, ties broken by lowest index.
int argmax_lowest(std::span<const double> v);

/// Derives an independent sub-seed from (base, salt) via splitmix64.
uint64_t mix_seed(uint64_t base, uint64_t salt);

/// "%.10g" formatting shared by the CSV layer.
std::string format_double(double v);
std::string join_doubles(std::span<const double> v, char sep = ';');

}  // namespace performa
