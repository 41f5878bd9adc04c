#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsindy/rng.hpp"
#include "wsindy/types.hpp"

namespace wsindy {

// Particle trajectory data for M independent experiments observed at L common
// times.  Positions are stored flat in [experiment][time][particle][component]
// order so one (experiment, time) snapshot is a contiguous N*d block.
struct ParticleDataset {
  int n_experiments = 0;  // M
  int n_times = 0;        // L
  int n_particles = 0;    // N
  int dim = 0;            // d
  std::vector<double> times;      // size L, strictly increasing
  std::vector<double> positions;  // size M*L*N*d

  std::size_t snapshot_offset(int m, int l) const {
    return ((static_cast<std::size_t>(m) * n_times + l) * n_particles) * dim;
  }

  std::span<const double> snapshot(int m, int l) const {
    return {positions.data() + snapshot_offset(m, l),
            static_cast<std::size_t>(n_particles) * dim};
  }

  std::span<double> snapshot(int m, int l) {
    return {positions.data() + snapshot_offset(m, l),
            static_cast<std::size_t>(n_particles) * dim};
  }

  std::size_t total_values() const {
    return static_cast<std::size_t>(n_experiments) * n_times * n_particles * dim;
  }

  void validate() const {
    if (n_experiments < 1 || n_times < 1 || n_particles < 1) {
      throw std::invalid_argument("dataset: M, L, N must be positive");
    }
    if (dim < 1 || dim > kMaxDim) {
      throw std::invalid_argument("dataset: dim must be 1 or 2");
    }
    if (times.size() != static_cast<std::size_t>(n_times)) {
      throw std::invalid_argument("dataset: times length mismatch");
    }
    for (int l = 1; l < n_times; ++l) {
      if (!(times[l] > times[l - 1])) {
        throw std::invalid_argument("dataset: times must be strictly increasing");
      }
    }
    if (positions.size() != total_values()) {
      throw std::invalid_argument("dataset: position buffer size mismatch");
    }
  }
};

// Root-mean-square over every scalar position entry.
inline double position_rms(const ParticleDataset& data) {
  double acc = 0.0;
  for (double v : data.positions) acc += v * v;
  return std::sqrt(acc / static_cast<double>(data.positions.size()));
}

// Observation model: every scalar coordinate receives i.i.d. Gaussian noise
// with standard deviation eps * RMS(positions).  eps == 0 returns an exact copy.
inline ParticleDataset add_extrinsic_noise(const ParticleDataset& data, double eps,
                                           std::uint64_t seed) {
  data.validate();
  if (eps < 0.0) throw std::invalid_argument("add_extrinsic_noise: eps must be >= 0");
  ParticleDataset out = data;
  if (eps == 0.0) return out;
  const double scale = eps * position_rms(data);
  RngStream rng(derive_seed(seed, stream::kExtrinsic));
  for (double& v : out.positions) v += scale * rng.normal();
  return out;
}

// Binary layout (native little-endian):
//   bytes 0..7   magic "WSPDAT1\0"
//   u64          M, L, N, d
//   f64[L]       observation times
//   f64[M*L*N*d] positions, [experiment][time][particle][component]
inline void save_dataset(const ParticleDataset& data, const std::string& path) {
  data.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
  const char magic[8] = {'W', 'S', 'P', 'D', 'A', 'T', '1', '\0'};
  os.write(magic, 8);
  const std::uint64_t dims[4] = {
      static_cast<std::uint64_t>(data.n_experiments),
      static_cast<std::uint64_t>(data.n_times),
      static_cast<std::uint64_t>(data.n_particles),
      static_cast<std::uint64_t>(data.dim)};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  os.write(reinterpret_cast<const char*>(data.times.data()),
           static_cast<std::streamsize>(data.times.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(data.positions.data()),
           static_cast<std::streamsize>(data.positions.size() * sizeof(double)));
  if (!os) throw std::runtime_error("save_dataset: write failed for " + path);
}

inline ParticleDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
  char magic[8] = {};
  is.read(magic, 8);
  if (std::memcmp(magic, "WSPDAT1", 7) != 0) {
    throw std::runtime_error("load_dataset: bad magic in " + path);
  }
  std::uint64_t dims[4] = {};
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!is) throw std::runtime_error("load_dataset: truncated header in " + path);
  ParticleDataset data;
  data.n_experiments = static_cast<int>(dims[0]);
  data.n_times = static_cast<int>(dims[1]);
  data.n_particles = static_cast<int>(dims[2]);
  data.dim = static_cast<int>(dims[3]);
  if (data.n_experiments < 1 || data.n_times < 1 || data.n_particles < 1 ||
      data.dim < 1 || data.dim > kMaxDim) {
    throw std::runtime_error("load_dataset: implausible header in " + path);
  }
  data.times.resize(data.n_times);
  is.read(reinterpret_cast<char*>(data.times.data()),
          static_cast<std::streamsize>(data.times.size() * sizeof(double)));
  data.positions.resize(data.total_values());
  is.read(reinterpret_cast<char*>(data.positions.data()),
          static_cast<std::streamsize>(data.positions.size() * sizeof(double)));
  if (!is) throw std::runtime_error("load_dataset: truncated payload in " + path);
  data.validate();
  return data;
}

}  // namespace wsindy
