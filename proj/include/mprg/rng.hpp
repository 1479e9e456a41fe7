#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace mprg {

// Role tags for seed derivation. Values are part of the reproducibility
// contract; append only.
enum class StreamRole : std::uint64_t {
  signal = 1,
  measurements = 2,
  restart = 3,
  projection = 4,
  weights = 5,
  monte_carlo = 6,
};

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based substream id: folds each id into the base with splitmix64.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids);

inline std::uint64_t derive_seed(std::uint64_t base, StreamRole role,
                                 std::initializer_list<std::uint64_t> ids = {}) {
  std::uint64_t s = derive_seed(base, {static_cast<std::uint64_t>(role)});
  return ids.size() == 0 ? s : derive_seed(s, ids);
}

// mt19937_64 output is fixed by the standard; the normal sampler is written
// out here (Box-Muller) so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal();

  Eigen::VectorXd normal_vector(Eigen::Index n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mprg
