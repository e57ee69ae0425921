/// @file grid.hpp
/// @brief Dense enumeration of the inventory grid for the exact solvers.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rfqmm {

/// Product grid prod_i [-L_i, L_i], row-major with the first bond slowest
/// and each coordinate ascending. Only meant for low dimension; construction
/// refuses more than 1e7 points.
class InventoryGrid {
 public:
  explicit InventoryGrid(std::vector<int> limits);

  int dim() const { return static_cast<int>(limits_.size()); }
  int64_t size() const { return size_; }
  const std::vector<int>& limits() const { return limits_; }

  int64_t index(std::span<const int> units) const;
  std::vector<int> units(int64_t idx) const;
  void units(int64_t idx, std::span<int> out) const;
  int unit_at(int64_t idx, int bond) const;

  /// Index after a fill on (bond, side); -1 if the move is blocked.
  int64_t neighbor(int64_t idx, int bond, int side) const;

 private:
  std::vector<int> limits_;
  std::vector<int64_t> stride_;
  int64_t size_ = 0;
};

}  // namespace rfqmm
