#include "hashlab/tensor.hpp"

namespace hashlab {

Index numel(const Shape& shape) {
  if (shape.empty()) return 0;
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool shape_valid(const Shape& shape) {
  if (shape.empty()) return false;
  for (Index e : shape) {
    if (e <= 0) return false;
  }
  return true;
}

}  // namespace hashlab
