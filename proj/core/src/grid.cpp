#include "rfqmm/grid.hpp"

#include <stdexcept>

#include "rfqmm/model.hpp"

namespace rfqmm {

namespace {
constexpr int64_t kMaxPoints = 10'000'000;
}

InventoryGrid::InventoryGrid(std::vector<int> limits)
    : limits_(std::move(limits)) {
  if (limits_.empty()) throw std::invalid_argument("InventoryGrid: empty");
  int d = dim();
  stride_.assign(d, 1);
  size_ = 1;
  for (int k = d - 1; k >= 0; --k) {
    if (limits_[k] < 1) {
      throw std::invalid_argument("InventoryGrid: limits must be >= 1");
    }
    stride_[k] = size_;
    int64_t n = 2 * static_cast<int64_t>(limits_[k]) + 1;
    if (size_ > kMaxPoints / n) {
      throw std::invalid_argument("InventoryGrid: more than 1e7 points");
    }
    size_ *= n;
  }
}

int64_t InventoryGrid::index(std::span<const int> units) const {
  int64_t idx = 0;
  for (int k = 0; k < dim(); ++k) {
    int u = units[k];
    if (u < -limits_[k] || u > limits_[k]) {
      throw std::out_of_range("InventoryGrid::index: unit out of bounds");
    }
    idx += (u + limits_[k]) * stride_[k];
  }
  return idx;
}

std::vector<int> InventoryGrid::units(int64_t idx) const {
  std::vector<int> out(dim());
  units(idx, out);
  return out;
}

void InventoryGrid::units(int64_t idx, std::span<int> out) const {
  for (int k = 0; k < dim(); ++k) {
    out[k] = static_cast<int>(idx / stride_[k]) % (2 * limits_[k] + 1) -
             limits_[k];
  }
}

int InventoryGrid::unit_at(int64_t idx, int bond) const {
  return static_cast<int>(idx / stride_[bond]) % (2 * limits_[bond] + 1) -
         limits_[bond];
}

int64_t InventoryGrid::neighbor(int64_t idx, int bond, int side) const {
  int u = unit_at(idx, bond);
  if (side == kBid) {
    if (u >= limits_[bond]) return -1;
    return idx + stride_[bond];
  }
  if (u <= -limits_[bond]) return -1;
  return idx - stride_[bond];
}

}  // namespace rfqmm
