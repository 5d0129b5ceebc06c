#include "blowfish/domain.hpp"

#include <stdexcept>
#include <string>

namespace blowfish {

Domain::Domain(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw std::invalid_argument("domain needs at least one dimension");
  total_ = 1;
  for (std::size_t d : dims_) {
    if (d == 0) throw std::invalid_argument("domain dimensions must be positive");
    if (total_ > kMaxCells / d) {
      throw std::invalid_argument("domain exceeds the " + std::to_string(kMaxCells) +
                                  " cell cap");
    }
    total_ *= d;
  }
}

std::size_t Domain::index_of(const std::vector<std::size_t>& coords) const {
  if (coords.size() != dims_.size()) {
    throw std::invalid_argument("coordinate arity " + std::to_string(coords.size()) +
                                " does not match " + std::to_string(dims_.size()) +
                                " dimensions");
  }
  std::size_t index = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (coords[i] >= dims_[i]) {
      throw std::invalid_argument("coordinate " + std::to_string(coords[i]) +
                                  " out of bounds for dimension of size " +
                                  std::to_string(dims_[i]));
    }
    index = index * dims_[i] + coords[i];
  }
  return index;
}

std::vector<std::size_t> Domain::coords_of(std::size_t index) const {
  if (index >= total_) {
    throw std::invalid_argument("cell index " + std::to_string(index) +
                                " out of bounds for domain of " + std::to_string(total_) +
                                " cells");
  }
  std::vector<std::size_t> coords(dims_.size(), 0);
  for (std::size_t i = dims_.size(); i-- > 0;) {
    coords[i] = index % dims_[i];
    index /= dims_[i];
  }
  return coords;
}

}  // namespace blowfish
