#ifndef HPO_SRC_AUTODIFF_BROADCAST_H_
#define HPO_SRC_AUTODIFF_BROADCAST_H_

#include <cstddef>
#include <vector>

#include "hpo/autodiff/tensor.h"

namespace hpo::ad::internal {

// Maps each linear index of the broadcast output to the linear index of one
// input.
class BroadcastMap {
 public:
  BroadcastMap(const Shape& in, const Shape& out);

  bool identity() const { return kind_ == Kind::kIdentity; }
  bool scalar() const { return kind_ == Kind::kScalar; }
  std::size_t operator[](std::size_t i) const {
    switch (kind_) {
      case Kind::kIdentity:
        return i;
      case Kind::kScalar:
        return 0;
      default:
        return offsets_[i];
    }
  }

 private:
  enum class Kind { kIdentity, kScalar, kGeneral };
  Kind kind_;
  std::vector<std::size_t> offsets_;
};

}  // namespace hpo::ad::internal

#endif  // HPO_SRC_AUTODIFF_BROADCAST_H_
