#include "vvmc/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vvmc {

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::min() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : data) m = v < m ? v : m;
  return m;
}

double Tensor::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : data) m = v > m ? v : m;
  return m;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (a.shape != b.shape) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch " +
                                shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
}

}  // namespace vvmc
