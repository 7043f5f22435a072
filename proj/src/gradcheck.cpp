#include "park/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "park/rng.hpp"

namespace park {

double finite_diff_check(const std::function<Tensor()>& f,
                         std::span<Tensor> params,
                         const FiniteDiffOptions& opt) {
  GradMap grads;
  {
    Tensor loss = f();
    if (!std::isfinite(loss.item()))
      throw std::invalid_argument("finite_diff_check: non-finite loss");
    backward(loss, &grads);
  }

  int64_t total = 0;
  for (const Tensor& p : params) total += p.size();
  const bool sample = total > opt.sample_threshold;

  double max_rel = 0.0;
  Rng rng = Rng::keyed(opt.seed, 0x9d5f);
  for (Tensor& p : params) {
    const std::vector<double>* g = grads.find(p);
    const int64_t n = p.size();
    std::vector<int64_t> coords;
    if (sample && n > opt.max_coords) {
      for (int i = 0; i < opt.max_coords; ++i)
        coords.push_back(static_cast<int64_t>(rng.below(n)));
    } else {
      coords.resize(n);
      for (int64_t i = 0; i < n; ++i) coords[i] = i;
    }
    for (int64_t c : coords) {
      const double analytic = g ? (*g)[c] : 0.0;
      std::vector<double>& data = p.leaf_data();
      const double saved = data[c];
      data[c] = saved + opt.step;
      const double fp = f().item();
      data[c] = saved - opt.step;
      const double fm = f().item();
      data[c] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::invalid_argument("finite_diff_check: non-finite loss");
      const double numeric = (fp - fm) / (2.0 * opt.step);
      const double rel =
          std::fabs(analytic - numeric) / std::max(1.0, std::fabs(analytic));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace park
