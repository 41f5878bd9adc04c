#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "wsindy/dataset.hpp"
#include "wsindy/models.hpp"
#include "wsindy/rng.hpp"

namespace wsindy {

struct SimConfig {
  int n_particles = 0;   // N
  int n_experiments = 1; // M
  int n_times = 0;       // L observation times, t_l = l * subsample * dt_fine
  double dt_fine = 0.0;  // integrator step
  int subsample = 1;     // fine steps between recorded observations
  std::uint64_t seed = 0;
  int threads = 1;       // parallelism across experiments

  void validate() const {
    if (n_particles < 1 || n_experiments < 1 || n_times < 1) {
      throw std::invalid_argument("sim: N, M, L must be positive");
    }
    if (!(dt_fine > 0.0)) throw std::invalid_argument("sim: dt_fine must be > 0");
    if (subsample < 1) throw std::invalid_argument("sim: subsample must be >= 1");
  }
};

namespace detail {

// pair[i] = sum_j (x_i - x_j) - sign(x_i - x_j).  The linear part telescopes
// to n x_i - sum_j x_j and the sign part counts order statistics, so one sort
// evaluates the sum exactly in O(n log n); the total is accumulated in sorted
// order, which also makes the result independent of particle labeling.
inline void pair_sums_qanr(const std::vector<double>& x, int n,
                           std::vector<double>& pair) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return x[a] < x[b]; });
  double total = 0.0;
  for (int k = 0; k < n; ++k) total += x[order[k]];
  int k = 0;
  while (k < n) {
    int e = k;
    while (e + 1 < n && x[order[e + 1]] == x[order[k]]) ++e;
    const double sign_sum = static_cast<double>(k - (n - 1 - e));
    for (int t = k; t <= e; ++t) {
      const int i = order[t];
      pair[i] = n * x[i] - total - sign_sum;
    }
    k = e + 1;
  }
}

inline void pair_sums_log(const std::vector<double>& x, int n, double delta,
                          std::vector<double>& pair) {
  constexpr double inv2pi = 1.0 / (2.0 * std::numbers::pi);
  const double d2 = delta * delta;
  for (int i = 0; i < n; ++i) {
    const double xi = x[2 * i];
    const double yi = x[2 * i + 1];
    double ax = 0.0, ay = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double dx = xi - x[2 * j];
      const double dy = yi - x[2 * j + 1];
      const double r2 = dx * dx + dy * dy;
      double s;
      if (r2 >= d2) {
        s = inv2pi / r2;
      } else if (r2 > 0.0) {
        s = inv2pi / (delta * std::sqrt(r2));
      } else {
        s = 0.0;
      }
      const double gx = s * dx;
      const double gy = s * dy;
      ax += gx;
      ay += gy;
      pair[2 * j] -= gx;
      pair[2 * j + 1] -= gy;
    }
    pair[2 * i] += ax;
    pair[2 * i + 1] += ay;
  }
}

inline void pair_sums_generic(const std::vector<double>& x, int n, int dim,
                              const std::function<VecD(const VecD&)>& grad,
                              std::vector<double>& pair) {
  for (int i = 0; i < n; ++i) {
    VecD xi{0.0, 0.0};
    for (int k = 0; k < dim; ++k) xi[k] = x[i * dim + k];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;  // gradK(0) = 0 by convention
      VecD d{0.0, 0.0};
      for (int k = 0; k < dim; ++k) d[k] = xi[k] - x[j * dim + k];
      const VecD g = grad(d);
      for (int k = 0; k < dim; ++k) pair[i * dim + k] += g[k];
    }
  }
}

inline void run_experiment(const IpsModel& model, const SimConfig& cfg,
                           std::vector<double> x, int m, ParticleDataset& out) {
  const int n = cfg.n_particles;
  const int dim = model.dim;
  const double dt = cfg.dt_fine;
  const double sqrt_dt = std::sqrt(dt);
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool has_pair = model.pair_kind != PairKind::none;
  const bool has_local = static_cast<bool>(model.local_grad);
  const bool has_noise = static_cast<bool>(model.diffusivity);

  RngStream noise(derive_seed(cfg.seed, stream::kBrownian, static_cast<std::uint64_t>(m)));
  std::vector<double> pair(has_pair ? x.size() : 0, 0.0);

  auto record = [&](int l) {
    auto snap = out.snapshot(m, l);
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!std::isfinite(x[k])) {
        throw std::runtime_error("simulate: non-finite state in experiment " +
                                 std::to_string(m) + " at time index " +
                                 std::to_string(l) + "; reduce dt_fine or check the model");
      }
      snap[k] = x[k];
    }
  };

  record(0);
  for (int l = 1; l < cfg.n_times; ++l) {
    for (int s = 0; s < cfg.subsample; ++s) {
      if (has_pair) {
        std::fill(pair.begin(), pair.end(), 0.0);
        switch (model.pair_kind) {
          case PairKind::quad_attract_newt_repel:
            pair_sums_qanr(x, n, pair);
            break;
          case PairKind::log_cutoff:
            pair_sums_log(x, n, model.cutoff_delta, pair);
            break;
          default:
            pair_sums_generic(x, n, dim, model.interaction_grad, pair);
            break;
        }
      }
      for (int i = 0; i < n; ++i) {
        VecD xi{0.0, 0.0};
        for (int k = 0; k < dim; ++k) xi[k] = x[i * dim + k];
        VecD drift{0.0, 0.0};
        if (has_pair) {
          for (int k = 0; k < dim; ++k) drift[k] -= inv_n * pair[i * dim + k];
        }
        if (has_local) {
          const VecD gv = model.local_grad(xi);
          for (int k = 0; k < dim; ++k) drift[k] -= gv[k];
        }
        VecD kick{0.0, 0.0};
        if (has_noise) {
          VecD z{0.0, 0.0};
          for (int k = 0; k < dim; ++k) z[k] = noise.normal();
          kick = mat_vec(model.diffusivity(xi), z, dim);
        }
        for (int k = 0; k < dim; ++k) {
          x[i * dim + k] += drift[k] * dt + sqrt_dt * kick[k];
        }
      }
    }
    record(l);
  }
}

// Runs f(0..count-1); work items must write to disjoint state.
inline void parallel_for(int count, int threads, const std::function<void(int)>& f) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          f(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

// Euler-Maruyama integration of the interacting particle system, recording
// every `subsample`-th state.  Experiments are statistically independent; each
// draws its initial condition and Brownian increments from streams keyed by
// (seed, purpose, experiment), so results do not depend on thread scheduling.
inline ParticleDataset simulate(const IpsModel& model, const InitialDistribution& init,
                                const SimConfig& cfg) {
  cfg.validate();
  init.validate();
  validate_model(model);
  if (init.dim != model.dim) {
    throw std::invalid_argument("simulate: init and model dimension mismatch");
  }

  ParticleDataset out;
  out.n_experiments = cfg.n_experiments;
  out.n_times = cfg.n_times;
  out.n_particles = cfg.n_particles;
  out.dim = model.dim;
  out.times.resize(cfg.n_times);
  const double dt_obs = cfg.dt_fine * cfg.subsample;
  for (int l = 0; l < cfg.n_times; ++l) out.times[l] = l * dt_obs;
  out.positions.assign(out.total_values(), 0.0);

  detail::parallel_for(cfg.n_experiments, cfg.threads, [&](int m) {
    RngStream init_rng(
        derive_seed(cfg.seed, stream::kInitial, static_cast<std::uint64_t>(m)));
    std::vector<double> x(static_cast<std::size_t>(cfg.n_particles) * model.dim);
    for (int i = 0; i < cfg.n_particles; ++i) {
      const VecD p = init.sample(init_rng);
      for (int k = 0; k < model.dim; ++k) x[i * model.dim + k] = p[k];
    }
    detail::run_experiment(model, cfg, std::move(x), m, out);
  });
  return out;
}

// Single-experiment variant with explicit initial positions (flat N*d buffer);
// used by deterministic closed-form checks.
inline ParticleDataset simulate_from(const IpsModel& model,
                                     const std::vector<double>& initial_positions,
                                     const SimConfig& cfg) {
  cfg.validate();
  validate_model(model);
  if (cfg.n_experiments != 1) {
    throw std::invalid_argument("simulate_from: single experiment only");
  }
  if (initial_positions.size() !=
      static_cast<std::size_t>(cfg.n_particles) * model.dim) {
    throw std::invalid_argument("simulate_from: initial position buffer size mismatch");
  }

  ParticleDataset out;
  out.n_experiments = 1;
  out.n_times = cfg.n_times;
  out.n_particles = cfg.n_particles;
  out.dim = model.dim;
  out.times.resize(cfg.n_times);
  const double dt_obs = cfg.dt_fine * cfg.subsample;
  for (int l = 0; l < cfg.n_times; ++l) out.times[l] = l * dt_obs;
  out.positions.assign(out.total_values(), 0.0);
  detail::run_experiment(model, cfg, initial_positions, 0, out);
  return out;
}

}  // namespace wsindy
