#include "craft/sampler.hpp"

namespace craft {

std::vector<double> sample_x0(const EpsMlp& m, std::span<const double> cond,
                              const NoiseSchedule& s, RngStream rng,
                              const SamplerOptions& opt) {
  return ancestral_sample(
      [&](std::span<const double> x_t, int t) {
        return m.predict(x_t, t, cond);
      },
      m.arch().data_dim, s, rng, opt);
}

}  // namespace craft
