#pragma once

#include <cstddef>
#include <vector>

namespace blowfish {

// A d-dimensional product domain [k_1] x ... x [k_d], linearized row-major
// (last dimension varies fastest).
class Domain {
 public:
  static constexpr std::size_t kMaxCells = 100000;

  explicit Domain(std::vector<std::size_t> dims);

  std::size_t total() const { return total_; }
  std::size_t ndims() const { return dims_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  std::size_t index_of(const std::vector<std::size_t>& coords) const;
  std::vector<std::size_t> coords_of(std::size_t index) const;

  bool operator==(const Domain& other) const { return dims_ == other.dims_; }

 private:
  std::vector<std::size_t> dims_;
  std::size_t total_ = 0;
};

}  // namespace blowfish
