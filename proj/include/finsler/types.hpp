#pragma once

#include <vector>

namespace finsler {

// Point of the slit tangent bundle in a chart: x on the manifold, y != 0.
struct BasePoint {
  std::vector<double> x;
  std::vector<double> y;

  int n() const { return static_cast<int>(x.size()); }
  std::vector<double> xy() const {
    std::vector<double> out = x;
    out.insert(out.end(), y.begin(), y.end());
    return out;
  }
};

}  // namespace finsler
