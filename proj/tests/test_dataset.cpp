#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <wsindy/dataset.hpp>
#include <wsindy/rng.hpp>

using namespace wsindy;

namespace {

ParticleDataset synthetic(int m, int l, int n, int d, std::uint64_t seed) {
  ParticleDataset data;
  data.n_experiments = m;
  data.n_times = l;
  data.n_particles = n;
  data.dim = d;
  data.times.resize(l);
  for (int i = 0; i < l; ++i) data.times[i] = 0.1 * i;
  data.positions.resize(data.total_values());
  RngStream rng(derive_seed(seed, stream::kSynthetic));
  for (double& x : data.positions) x = rng.normal();
  data.validate();
  return data;
}

}  // namespace

TEST_CASE("dataset validation rejects inconsistent shapes") {
  ParticleDataset data = synthetic(2, 3, 4, 2, 1);
  REQUIRE_NOTHROW(data.validate());

  ParticleDataset bad = data;
  bad.positions.pop_back();
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = data;
  bad.times[1] = bad.times[0];
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = data;
  bad.dim = 3;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = data;
  bad.n_particles = 0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("snapshot views address the expected block") {
  ParticleDataset data = synthetic(2, 3, 4, 2, 2);
  const auto snap = data.snapshot(1, 2);
  REQUIRE(snap.size() == 8);
  REQUIRE(snap.data() == data.positions.data() + ((1 * 3 + 2) * 4) * 2);
}

TEST_CASE("dataset file round trip is exact") {
  const ParticleDataset data = synthetic(3, 5, 7, 2, 3);
  const std::string path = "dataset_roundtrip.bin";
  save_dataset(data, path);
  const ParticleDataset back = load_dataset(path);
  REQUIRE(back.n_experiments == data.n_experiments);
  REQUIRE(back.n_times == data.n_times);
  REQUIRE(back.n_particles == data.n_particles);
  REQUIRE(back.dim == data.dim);
  REQUIRE(back.times == data.times);
  REQUIRE(back.positions == data.positions);
  std::remove(path.c_str());
}

TEST_CASE("loading a corrupted header fails") {
  const ParticleDataset data = synthetic(1, 2, 3, 1, 4);
  const std::string path = "dataset_corrupt.bin";
  save_dataset(data, path);
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputc('X', f);
    std::fclose(f);
  }
  REQUIRE_THROWS(load_dataset(path));
  std::remove(path.c_str());
}

TEST_CASE("zero measurement noise returns an identical copy") {
  const ParticleDataset data = synthetic(2, 4, 5, 1, 5);
  const ParticleDataset noisy = add_extrinsic_noise(data, 0.0, 99);
  REQUIRE(noisy.positions == data.positions);
}

TEST_CASE("measurement noise has the requested relative amplitude") {
  const ParticleDataset data = synthetic(4, 10, 500, 2, 6);
  const double eps = 0.1;
  const ParticleDataset noisy = add_extrinsic_noise(data, eps, 7);
  const double rms = position_rms(data);
  REQUIRE(rms > 0.0);
  double sum2 = 0.0;
  for (std::size_t i = 0; i < data.positions.size(); ++i) {
    const double d = noisy.positions[i] - data.positions[i];
    sum2 += d * d;
  }
  const double noise_rms = std::sqrt(sum2 / static_cast<double>(data.positions.size()));
  const double ratio = noise_rms / rms;
  REQUIRE(ratio > 0.095);
  REQUIRE(ratio < 0.105);
}

TEST_CASE("measurement noise is reproducible and seed dependent") {
  const ParticleDataset data = synthetic(1, 3, 50, 2, 8);
  const ParticleDataset a = add_extrinsic_noise(data, 0.05, 11);
  const ParticleDataset b = add_extrinsic_noise(data, 0.05, 11);
  const ParticleDataset c = add_extrinsic_noise(data, 0.05, 12);
  REQUIRE(a.positions == b.positions);
  REQUIRE(a.positions != c.positions);
}
