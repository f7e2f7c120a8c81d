#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "srcnpat/errors.hpp"

namespace srcnpat {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// Uniform square-cell grid. Node (i, j) sits at
//   (origin.x + (i - (nx-1)/2) dx, origin.y + (j - (ny-1)/2) dx),
// so `origin` is the physical coordinate of the grid center.
struct Grid2D {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double dx = 0.0;
  Point2 origin{};

  Grid2D() = default;
  Grid2D(std::size_t nx_, std::size_t ny_, double dx_, Point2 origin_ = {})
      : nx(nx_), ny(ny_), dx(dx_), origin(origin_) {
    validate();
  }

  void validate() const {
    if (nx < 3 || ny < 3) throw ValidationError("Grid2D: nx and ny must be >= 3");
    if (!(dx > 0.0) || !std::isfinite(dx)) throw ValidationError("Grid2D: dx must be positive");
    if (!std::isfinite(origin.x) || !std::isfinite(origin.y))
      throw ValidationError("Grid2D: origin must be finite");
  }

  double x(std::size_t i) const {
    return origin.x + (static_cast<double>(i) - 0.5 * static_cast<double>(nx - 1)) * dx;
  }
  double y(std::size_t j) const {
    return origin.y + (static_cast<double>(j) - 0.5 * static_cast<double>(ny - 1)) * dx;
  }
  double extent_x() const { return static_cast<double>(nx) * dx; }
  double extent_y() const { return static_cast<double>(ny) * dx; }

  // Fractional node coordinates of a physical point.
  double index_x(double px) const { return (px - origin.x) / dx + 0.5 * static_cast<double>(nx - 1); }
  double index_y(double py) const { return (py - origin.y) / dx + 0.5 * static_cast<double>(ny - 1); }

  bool operator==(const Grid2D&) const = default;
};

// The central square where phantoms live: 20.1 mm wide by default, centered on
// the grid origin. A node belongs to it iff its center is within half_width of
// the origin along both axes.
struct IndexRange {
  std::size_t i0 = 0, i1 = 0;  // inclusive
  std::size_t j0 = 0, j1 = 0;
  std::size_t rows() const { return i1 - i0 + 1; }
  std::size_t cols() const { return j1 - j0 + 1; }
  bool contains(std::size_t i, std::size_t j) const { return i >= i0 && i <= i1 && j >= j0 && j <= j1; }
};

inline constexpr double kPhantomRegionWidth = 20.1e-3;

inline IndexRange phantom_region(const Grid2D& g, double width = kPhantomRegionWidth) {
  // Slack of 1e-9 cells keeps nodes sitting exactly on the boundary.
  const double reach = 0.5 * width / g.dx + 1e-9;
  auto span = [&](std::size_t n) {
    const double mid = 0.5 * static_cast<double>(n - 1);
    const double lo = std::max(0.0, std::ceil(mid - reach));
    const double hi = std::min(static_cast<double>(n - 1), std::floor(mid + reach));
    if (hi < lo) throw GeometryError("phantom region is empty on this grid");
    return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi));
  };
  const auto [i0, i1] = span(g.nx);
  const auto [j0, j1] = span(g.ny);
  return {i0, i1, j0, j1};
}

// Initial pressure (or a reconstruction) sampled on a grid, in pascals.
// values(i, j) is the node at (grid.x(i), grid.y(j)).
struct PressureField {
  Grid2D grid;
  Matrix values;

  PressureField() = default;
  explicit PressureField(const Grid2D& g) : grid(g), values(Matrix::Zero(g.nx, g.ny)) {}
  PressureField(const Grid2D& g, Matrix v) : grid(g), values(std::move(v)) { validate(); }

  void validate() const {
    grid.validate();
    if (static_cast<std::size_t>(values.rows()) != grid.nx || static_cast<std::size_t>(values.cols()) != grid.ny)
      throw DimensionError("PressureField: value matrix does not match grid");
    if (!all_finite(values)) throw ValidationError("PressureField: non-finite value");
  }

  // Sub-field over an index range; the sub-grid keeps the physical placement.
  PressureField crop(const IndexRange& r) const {
    const double ci = 0.5 * static_cast<double>(r.i0 + r.i1);
    const double cj = 0.5 * static_cast<double>(r.j0 + r.j1);
    const double ox = grid.origin.x + (ci - 0.5 * static_cast<double>(grid.nx - 1)) * grid.dx;
    const double oy = grid.origin.y + (cj - 0.5 * static_cast<double>(grid.ny - 1)) * grid.dx;
    Grid2D sub(r.rows(), r.cols(), grid.dx, {ox, oy});
    return PressureField(sub, values.block(r.i0, r.j0, r.rows(), r.cols()));
  }
};

// Samples `src` at each node of `target` using the nearest source node.
// Nodes falling outside the source grid are zero.
inline PressureField resample_nearest(const PressureField& src, const Grid2D& target) {
  PressureField out(target);
  for (std::size_t i = 0; i < target.nx; ++i) {
    const double fi = std::round(src.grid.index_x(target.x(i)));
    for (std::size_t j = 0; j < target.ny; ++j) {
      const double fj = std::round(src.grid.index_y(target.y(j)));
      if (fi < 0 || fj < 0 || fi >= static_cast<double>(src.grid.nx) || fj >= static_cast<double>(src.grid.ny)) continue;
      out.values(i, j) = src.values(static_cast<Eigen::Index>(fi), static_cast<Eigen::Index>(fj));
    }
  }
  return out;
}

struct AcousticMedium {
  double sound_speed = 1500.0;  // m/s
  double density = 1000.0;      // kg/m^3

  void validate() const {
    if (!(sound_speed > 0.0) || !std::isfinite(sound_speed)) throw ValidationError("AcousticMedium: sound_speed must be > 0");
    if (!(density > 0.0) || !std::isfinite(density)) throw ValidationError("AcousticMedium: density must be > 0");
  }
};

// Thermodynamic description of the photoacoustic source. The solver works
// from the resulting initial pressure (instantaneous heating), so these fields
// are carried as metadata only.
struct SourceModel {
  double thermal_expansion = 0.0;  // beta, 1/K; 0 = not provided
  double specific_heat = 0.0;      // C_p, J/(kg K); 0 = not provided
  std::string heating = "instantaneous";

  void validate() const {
    if (thermal_expansion < 0.0) throw ValidationError("SourceModel: thermal expansion must be > 0 when provided");
    if (specific_heat < 0.0) throw ValidationError("SourceModel: specific heat must be > 0 when provided");
  }
};

struct TransducerResponse {
  double center_frequency = 2.25e6;   // Hz
  double fractional_bandwidth = 0.70;  // FWHM / center frequency
  bool enabled = true;

  void validate() const {
    if (!(center_frequency > 0.0)) throw ValidationError("TransducerResponse: center_frequency must be > 0");
    if (!(fractional_bandwidth > 0.0 && fractional_bandwidth < 2.0))
      throw ValidationError("TransducerResponse: fractional_bandwidth must lie in (0, 2)");
  }
};

// Equiangular ring of point detectors. Detector i sits at angle 2*pi*i/count + phase.
struct DetectorArray {
  std::size_t count = 100;
  double radius = 22e-3;
  Point2 center{};
  double phase = 0.0;
  TransducerResponse response{};

  void validate() const {
    if (count < 1) throw ValidationError("DetectorArray: count must be >= 1");
    if (!(radius > 0.0)) throw ValidationError("DetectorArray: radius must be > 0");
    response.validate();
  }

  double angle(std::size_t i) const {
    return 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(count) + phase;
  }
  std::vector<double> angles() const {
    std::vector<double> a(count);
    for (std::size_t i = 0; i < count; ++i) a[i] = angle(i);
    return a;
  }
  Point2 position(std::size_t i) const {
    const double a = angle(i);
    return {center.x + radius * std::cos(a), center.y + radius * std::sin(a)};
  }
  std::vector<Point2> positions() const {
    std::vector<Point2> p(count);
    for (std::size_t i = 0; i < count; ++i) p[i] = position(i);
    return p;
  }
  DetectorArray with_count(std::size_t n) const {
    DetectorArray d = *this;
    d.count = n;
    return d;
  }
};

// Boundary pressure time series: rows are time samples, columns detectors.
struct Sinogram {
  Matrix data;
  double dt = 5e-8;
  double t0 = 0.0;

  Sinogram() = default;
  Sinogram(Matrix d, double dt_, double t0_ = 0.0) : data(std::move(d)), dt(dt_), t0(t0_) { validate(); }

  std::size_t samples() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t detectors() const { return static_cast<std::size_t>(data.cols()); }

  void validate() const {
    if (data.rows() < 1 || data.cols() < 1) throw DimensionError("Sinogram: needs at least one sample and one detector");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("Sinogram: dt must be > 0");
    if (!std::isfinite(t0)) throw ValidationError("Sinogram: t0 must be finite");
    if (!all_finite(data)) throw ValidationError("Sinogram: non-finite entry");
  }
};

inline void require_same_shape(const Sinogram& a, const Sinogram& b, const char* what) {
  if (a.data.rows() != b.data.rows() || a.data.cols() != b.data.cols())
    throw DimensionError(std::string(what) + ": sinogram shapes differ");
}

}  // namespace srcnpat
