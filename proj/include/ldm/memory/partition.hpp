#pragma once

#include <cstddef>
#include <vector>

#include "ldm/error.hpp"

namespace ldm::memory {

/// Consecutive batches of `batch_size`; the last one may be shorter.
template <class T>
std::vector<std::vector<T>> partition_trajectories(const std::vector<T>& items, std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorCode::ConfigError, "batch size must be at least 1");
  if (items.empty()) fail(ErrorCode::EmptyInput, "no trajectories to partition");
  std::vector<std::vector<T>> batches;
  for (std::size_t start = 0; start < items.size(); start += batch_size) {
    auto end = std::min(items.size(), start + batch_size);
    batches.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(start), items.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace ldm::memory
