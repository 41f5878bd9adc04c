#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsindy/dataset.hpp"
#include "wsindy/types.hpp"

namespace wsindy {

// Uniform cell-centered grid over the rectangular domain
// D = prod_a [origin_a, origin_a + n_a * h].  The bin width h is shared by all
// axes; cell centers are origin + (i + 1/2) h.
struct Grid {
  int dim = 1;
  double h = 0.0;
  std::array<double, kMaxDim> origin{0.0, 0.0};
  std::array<int, kMaxDim> n{0, 1};  // n[a] = 1 for axes past dim

  int cells() const {
    int c = 1;
    for (int a = 0; a < dim; ++a) c *= n[a];
    return c;
  }

  double center(int axis, int i) const { return origin[axis] + (i + 0.5) * h; }

  double extent(int axis) const { return n[axis] * h; }

  double volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= extent(a);
    return v;
  }

  double cell_volume() const { return std::pow(h, dim); }

  // Flat row-major cell index of a point, or -1 if it falls outside D.
  // Cells are half-open boxes [edge, edge + h) per axis.
  int cell_of(const double* x) const {
    int idx = 0;
    for (int a = 0; a < dim; ++a) {
      const int i = static_cast<int>(std::floor((x[a] - origin[a]) / h));
      if (i < 0 || i >= n[a]) return -1;
      idx = idx * n[a] + i;
    }
    return idx;
  }

  bool same_geometry(const Grid& other) const {
    if (dim != other.dim || h != other.h) return false;
    for (int a = 0; a < dim; ++a) {
      if (origin[a] != other.origin[a] || n[a] != other.n[a]) return false;
    }
    return true;
  }
};

// Domain selection rule: per axis, D_a = [mean_a - 3 s_a, mean_a + 3 s_a] with
// mean and sample standard deviation pooled over every experiment, time and
// particle.  All axes share one bin width; the largest per-axis requirement
// 6 s_a / bins wins and the other extents are widened (still centered on the
// mean) so each axis keeps exactly `bins` cells.
// With pooled_std = true a single standard deviation pooled across axes is
// used instead of per-axis values (the domain is then a cube).
inline Grid build_domain(const ParticleDataset& data, int bins_per_dim = 0,
                         bool pooled_std = false) {
  data.validate();
  const int dim = data.dim;
  if (bins_per_dim == 0) bins_per_dim = (dim == 1) ? 256 : 128;
  if (bins_per_dim < 2) throw std::invalid_argument("build_domain: bins must be >= 2");

  const std::size_t count = data.total_values() / dim;
  std::array<double, kMaxDim> mean{0.0, 0.0};
  std::array<double, kMaxDim> sq{0.0, 0.0};
  for (std::size_t i = 0; i < count; ++i) {
    for (int a = 0; a < dim; ++a) mean[a] += data.positions[i * dim + a];
  }
  for (int a = 0; a < dim; ++a) mean[a] /= static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (int a = 0; a < dim; ++a) {
      const double d = data.positions[i * dim + a] - mean[a];
      sq[a] += d * d;
    }
  }
  std::array<double, kMaxDim> stddev{0.0, 0.0};
  if (pooled_std) {
    double total = 0.0;
    for (int a = 0; a < dim; ++a) total += sq[a];
    const double s = std::sqrt(total / static_cast<double>(count * dim - 1));
    for (int a = 0; a < dim; ++a) stddev[a] = s;
  } else {
    for (int a = 0; a < dim; ++a) {
      stddev[a] = std::sqrt(sq[a] / static_cast<double>(count - 1));
    }
  }
  for (int a = 0; a < dim; ++a) {
    if (!std::isfinite(stddev[a]) || stddev[a] <= 0.0) {
      throw std::invalid_argument(
          "build_domain: degenerate data (zero spread along axis " +
          std::to_string(a) + ")");
    }
  }

  double h = 0.0;
  for (int a = 0; a < dim; ++a) h = std::max(h, 6.0 * stddev[a] / bins_per_dim);

  Grid grid;
  grid.dim = dim;
  grid.h = h;
  for (int a = 0; a < dim; ++a) {
    grid.n[a] = bins_per_dim;
    grid.origin[a] = mean[a] - 0.5 * bins_per_dim * h;
  }
  return grid;
}

// Piecewise-constant density estimate of one particle snapshot: the value on
// cell B is (number of particles in B) / (N h^d).  Particles outside D are
// dropped; the field then integrates to the retained fraction.
inline std::vector<double> histogram(std::span<const double> snapshot, int n_particles,
                                     const Grid& grid) {
  if (snapshot.size() != static_cast<std::size_t>(n_particles) * grid.dim) {
    throw std::invalid_argument("histogram: snapshot size mismatch");
  }
  std::vector<double> values(grid.cells(), 0.0);
  for (int i = 0; i < n_particles; ++i) {
    const int c = grid.cell_of(snapshot.data() + static_cast<std::size_t>(i) * grid.dim);
    if (c >= 0) values[c] += 1.0;
  }
  const double scale = 1.0 / (n_particles * grid.cell_volume());
  for (double& v : values) v *= scale;
  return values;
}

// Density on a fixed grid for all L observation times (one experiment or an
// average over experiments).  values is laid out [time][cell row-major].
struct HistogramField {
  Grid grid;
  std::vector<double> times;
  std::vector<double> values;

  int n_times() const { return static_cast<int>(times.size()); }

  std::span<const double> slice(int l) const {
    return {values.data() + static_cast<std::size_t>(l) * grid.cells(),
            static_cast<std::size_t>(grid.cells())};
  }

  std::span<double> slice(int l) {
    return {values.data() + static_cast<std::size_t>(l) * grid.cells(),
            static_cast<std::size_t>(grid.cells())};
  }

  // Integral of the slice; equals the fraction of particles retained in D.
  double mass(int l) const {
    double acc = 0.0;
    for (double v : slice(l)) acc += v;
    return acc * grid.cell_volume();
  }
};

inline HistogramField histogram_experiment(const ParticleDataset& data, int m,
                                           const Grid& grid) {
  HistogramField field;
  field.grid = grid;
  field.times = data.times;
  field.values.reserve(static_cast<std::size_t>(data.n_times) * grid.cells());
  for (int l = 0; l < data.n_times; ++l) {
    const auto slice = histogram(data.snapshot(m, l), data.n_particles, grid);
    field.values.insert(field.values.end(), slice.begin(), slice.end());
  }
  return field;
}

inline HistogramField average_histograms(const std::vector<HistogramField>& fields) {
  if (fields.empty()) throw std::invalid_argument("average_histograms: no fields");
  const HistogramField& first = fields.front();
  for (const auto& f : fields) {
    if (!f.grid.same_geometry(first.grid) || f.times != first.times) {
      throw std::invalid_argument("average_histograms: mismatched grids or times");
    }
  }
  HistogramField out = first;
  for (std::size_t k = 1; k < fields.size(); ++k) {
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      out.values[i] += fields[k].values[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(fields.size());
  for (double& v : out.values) v *= inv;
  return out;
}

// Averaged density over all experiments of a dataset (the single field the
// weak system is assembled from).
inline HistogramField density_field(const ParticleDataset& data, const Grid& grid) {
  HistogramField acc = histogram_experiment(data, 0, grid);
  for (int m = 1; m < data.n_experiments; ++m) {
    const HistogramField f = histogram_experiment(data, m, grid);
    for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += f.values[i];
  }
  const double inv = 1.0 / data.n_experiments;
  for (double& v : acc.values) v *= inv;
  return acc;
}

// Sidecar text header + raw little-endian float64 payload.
inline void export_field(const HistogramField& field, const std::string& base_path) {
  {
    std::ofstream meta(base_path + ".meta");
    if (!meta) throw std::runtime_error("export_field: cannot open " + base_path + ".meta");
    meta << "wsindy-field 1\n";
    meta << "dim " << field.grid.dim << "\n";
    meta << "n";
    for (int a = 0; a < field.grid.dim; ++a) meta << " " << field.grid.n[a];
    meta << "\norigin";
    meta.precision(17);
    for (int a = 0; a < field.grid.dim; ++a) meta << " " << field.grid.origin[a];
    meta << "\nh " << field.grid.h << "\n";
    meta << "ntimes " << field.n_times() << "\ntimes";
    for (double t : field.times) meta << " " << t;
    meta << "\nlayout values[time][cell-row-major] float64\n";
  }
  std::ofstream os(base_path + ".bin", std::ios::binary);
  if (!os) throw std::runtime_error("export_field: cannot open " + base_path + ".bin");
  os.write(reinterpret_cast<const char*>(field.values.data()),
           static_cast<std::streamsize>(field.values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("export_field: write failed");
}

inline HistogramField load_field(const std::string& base_path) {
  std::ifstream meta(base_path + ".meta");
  if (!meta) throw std::runtime_error("load_field: cannot open " + base_path + ".meta");
  HistogramField field;
  std::string tag;
  int version = 0;
  meta >> tag >> version;
  if (tag != "wsindy-field" || version != 1) {
    throw std::runtime_error("load_field: bad header in " + base_path + ".meta");
  }
  int ntimes = 0;
  while (meta >> tag) {
    if (tag == "dim") {
      meta >> field.grid.dim;
    } else if (tag == "n") {
      for (int a = 0; a < field.grid.dim; ++a) meta >> field.grid.n[a];
    } else if (tag == "origin") {
      for (int a = 0; a < field.grid.dim; ++a) meta >> field.grid.origin[a];
    } else if (tag == "h") {
      meta >> field.grid.h;
    } else if (tag == "ntimes") {
      meta >> ntimes;
    } else if (tag == "times") {
      field.times.resize(ntimes);
      for (int l = 0; l < ntimes; ++l) meta >> field.times[l];
    } else if (tag == "layout") {
      break;
    }
  }
  std::ifstream is(base_path + ".bin", std::ios::binary);
  if (!is) throw std::runtime_error("load_field: cannot open " + base_path + ".bin");
  field.values.resize(static_cast<std::size_t>(ntimes) * field.grid.cells());
  is.read(reinterpret_cast<char*>(field.values.data()),
          static_cast<std::streamsize>(field.values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("load_field: truncated payload");
  return field;
}

}  // namespace wsindy
