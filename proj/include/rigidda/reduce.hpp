// Deterministic pairwise (tree) reductions.
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>

namespace rigidda {

// Pairwise summation over a contiguous range. Leaves of up to 8 elements are
// summed left to right, so the result depends only on the input order.
template <typename T>
T pairwise_sum(std::span<const T> values, T zero) {
  if (values.size() <= 8) {
    T acc = zero;
    for (const T& v : values) acc = acc + v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half), zero) + pairwise_sum(values.subspan(half), zero);
}

inline double pairwise_sum(const Eigen::Ref<const Eigen::ArrayXd>& values) {
  return pairwise_sum(std::span<const double>(values.data(), std::size_t(values.size())), 0.0);
}

inline double pairwise_mean(const Eigen::Ref<const Eigen::ArrayXd>& values) {
  return values.size() == 0 ? 0.0 : pairwise_sum(values) / double(values.size());
}

}  // namespace rigidda
