#include "mtwae/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "mtwae/error.hpp"

namespace mtwae {

std::vector<BDT> circle_ensemble(int n) {
  if (n < 1) throw InvalidArgument("circle ensemble needs at least one member");
  std::vector<BDT> out;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * i / n;
    BDT b;
    b.normalized = true;
    b.branches.push_back({0.0, 1.0, kNoParent});
    b.branches.push_back({0.3 + 0.12 * std::cos(t), 0.7 + 0.12 * std::sin(t), 0});
    b.branches.push_back({0.45 + 0.08 * std::cos(2.0 * t), 0.65 + 0.08 * std::sin(2.0 * t), 0});
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace mtwae
