#include "apnn/tape.hpp"

#include <cmath>

namespace apnn {

GradCheck check_gradient(const std::function<double(const double*)>& f,
                         std::vector<double>& theta,
                         const std::vector<double>& grad, double h,
                         std::span<const uint32_t> components) {
  GradCheck out;
  auto probe = [&](std::size_t i) {
    double keep = theta[i];
    theta[i] = keep + h;
    double fp = f(theta.data());
    theta[i] = keep - h;
    double fm = f(theta.data());
    theta[i] = keep;
    double fd = (fp - fm) / (2.0 * h);
    double rel =
        std::abs(grad[i] - fd) / (std::abs(grad[i]) + std::abs(fd) + 1e-8);
    if (rel > out.max_rel_err) {
      out.max_rel_err = rel;
      out.worst = i;
    }
  };
  if (components.empty()) {
    for (std::size_t i = 0; i < theta.size(); ++i) probe(i);
  } else {
    for (uint32_t i : components) probe(i);
  }
  return out;
}

}  // namespace apnn
