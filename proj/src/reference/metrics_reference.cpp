#include <cmath>

#include "roomforge/error.hpp"
#include "roomforge/reference.hpp"

namespace roomforge::reference {

metrics::GaussianStats gaussian_stats(const metrics::FeatureSet& f) {
  if (f.n < 2) throw ValidationError("gaussian stats need at least 2 samples");
  metrics::GaussianStats s;
  s.d = f.d;
  s.mean.assign(f.d, 0.0);
  for (std::size_t c = 0; c < f.d; ++c) {
    for (std::size_t r = 0; r < f.n; ++r) {
      const double v = f.values[r * f.d + c];
      if (!std::isfinite(v)) throw ValidationError("feature matrix holds non-finite values");
      s.mean[c] += v;
    }
    s.mean[c] /= static_cast<double>(f.n);
  }
  s.covariance.assign(f.d * f.d, 0.0);
  for (std::size_t i = 0; i < f.d; ++i) {
    for (std::size_t j = 0; j < f.d; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < f.n; ++r) {
        acc += (f.values[r * f.d + i] - s.mean[i]) * (f.values[r * f.d + j] - s.mean[j]);
      }
      s.covariance[i * f.d + j] = acc / static_cast<double>(f.n - 1);
    }
  }
  for (std::size_t i = 0; i < f.d; ++i) {
    for (std::size_t j = i + 1; j < f.d; ++j) {
      const double sym = 0.5 * (s.covariance[i * f.d + j] + s.covariance[j * f.d + i]);
      s.covariance[i * f.d + j] = s.covariance[j * f.d + i] = sym;
    }
  }
  return s;
}

}  // namespace roomforge::reference
