#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "srcnpat/core.hpp"
#include "srcnpat/io.hpp"
#include "srcnpat/rng.hpp"

namespace srcnpat {

enum class PhantomKind { disk, derenzo, vessel, image_import };

inline std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::disk: return "disk";
    case PhantomKind::derenzo: return "derenzo";
    case PhantomKind::vessel: return "vessel";
    case PhantomKind::image_import: return "image";
  }
  return "unknown";
}

inline PhantomKind phantom_kind_from_string(const std::string& s) {
  if (s == "disk") return PhantomKind::disk;
  if (s == "derenzo") return PhantomKind::derenzo;
  if (s == "vessel") return PhantomKind::vessel;
  if (s == "image" || s == "image-import") return PhantomKind::image_import;
  throw ValidationError("unknown phantom kind '" + s + "'");
}

struct DiskParams {
  Point2 center{};
  double radius = 2e-3;
};

struct DerenzoParams {
  // One radius per 60 degree sector, strictly decreasing.
  std::array<double, 6> radii{1.2e-3, 1.0e-3, 0.8e-3, 0.6e-3, 0.45e-3, 0.3e-3};
  double rotation = 0.0;      // radians, applied to the whole layout
  double outer_radius = 9.8e-3;  // circles must lie inside this radius
};

struct VesselParams {
  std::size_t trunks = 2;
  double step_length = 0.25e-3;   // m
  double turn_sigma = 0.12;       // rad per step, heading noise
  double branch_probability = 0.1;
  std::size_t min_generations = 2;
  std::size_t max_generations = 4;
  double max_width_px = 6.0;
  double min_width_px = 2.0;
  std::size_t trunk_steps = 90;
  std::size_t max_segments = 48;
};

struct ImageImportParams {
  std::filesystem::path path;
  unsigned threshold = 128;
};

struct PhantomSpec {
  PhantomKind kind = PhantomKind::disk;
  double amplitude = 1000.0;  // Pa
  std::uint64_t seed = 0;
  DiskParams disk{};
  DerenzoParams derenzo{};
  VesselParams vessel{};
  ImageImportParams image{};

  void validate() const {
    if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw ValidationError("PhantomSpec: amplitude must be > 0");
  }
};

namespace detail {

struct Region {
  IndexRange idx;
  double half_width;
};

inline Region region_of(const Grid2D& g) { return {phantom_region(g), 0.5 * kPhantomRegionWidth}; }

// Lights every node whose center lies within `radius` of `c`, restricted to
// the phantom region. The nearest node to `c` is lit even when the circle is
// smaller than a cell.
inline void stamp_circle(Matrix& v, const Grid2D& g, const IndexRange& r, Point2 c, double radius, double amplitude,
                         bool light_center) {
  const double fi = g.index_x(c.x), fj = g.index_y(c.y);
  const double reach = radius / g.dx + 1.0;
  const auto lo_i = static_cast<long>(std::max<double>(static_cast<double>(r.i0), std::floor(fi - reach)));
  const auto hi_i = static_cast<long>(std::min<double>(static_cast<double>(r.i1), std::ceil(fi + reach)));
  const auto lo_j = static_cast<long>(std::max<double>(static_cast<double>(r.j0), std::floor(fj - reach)));
  const auto hi_j = static_cast<long>(std::min<double>(static_cast<double>(r.j1), std::ceil(fj + reach)));
  const double r2 = radius * radius;
  for (long i = lo_i; i <= hi_i; ++i)
    for (long j = lo_j; j <= hi_j; ++j) {
      const double ddx = g.x(static_cast<std::size_t>(i)) - c.x;
      const double ddy = g.y(static_cast<std::size_t>(j)) - c.y;
      if (ddx * ddx + ddy * ddy <= r2) v(i, j) = amplitude;
    }
  if (light_center) {
    const double ci = std::round(fi), cj = std::round(fj);
    if (ci >= static_cast<double>(r.i0) && ci <= static_cast<double>(r.i1) && cj >= static_cast<double>(r.j0) &&
        cj <= static_cast<double>(r.j1))
      v(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(cj)) = amplitude;
  }
}

inline bool inside_region(Point2 p, double radius, double half_width) {
  const double tol = 1e-12;
  return std::abs(p.x) + radius <= half_width + tol && std::abs(p.y) + radius <= half_width + tol;
}

}  // namespace detail

inline PressureField make_disk(Point2 center, double radius, double amplitude, const Grid2D& grid) {
  grid.validate();
  if (!(amplitude > 0.0)) throw ValidationError("make_disk: amplitude must be > 0");
  if (radius < 0.0) throw ValidationError("make_disk: radius must be >= 0");
  const auto reg = detail::region_of(grid);
  const Point2 rel{center.x - grid.origin.x, center.y - grid.origin.y};
  if (!detail::inside_region(rel, radius, reg.half_width))
    throw GeometryError("make_disk: disk exceeds the phantom region");
  PressureField f(grid);
  if (radius > 0.0) detail::stamp_circle(f.values, grid, reg.idx, center, radius, amplitude, false);
  return f;
}

// Circle centers of the Derenzo layout, relative to the grid origin.
// Each sector holds a triangular lattice of equal circles with center spacing
// of twice the diameter, apex pointing at the origin.
struct DerenzoCircle {
  Point2 center;
  double radius;
  std::size_t sector;
};

inline std::vector<DerenzoCircle> derenzo_layout(const DerenzoParams& p) {
  for (std::size_t s = 0; s < 6; ++s) {
    if (!(p.radii[s] > 0.0)) throw ValidationError("make_derenzo: sector radii must be positive");
    if (s > 0 && !(p.radii[s] < p.radii[s - 1])) throw ValidationError("make_derenzo: sector radii must decrease");
  }
  std::vector<DerenzoCircle> out;
  for (std::size_t s = 0; s < 6; ++s) {
    const double r = p.radii[s];
    const double spacing = 4.0 * r;
    const double theta = p.rotation + static_cast<double>(s) * std::numbers::pi / 3.0;
    const Point2 axis{std::cos(theta), std::sin(theta)};
    const Point2 perp{-axis.y, axis.x};
    // With the first circle at 2r the triangular packing is inscribed in the
    // 60 degree wedge: every row's outer circles touch the sector edges.
    const double apex = 2.0 * r;
    const std::size_t before = out.size();
    for (std::size_t row = 0;; ++row) {
      const double d = apex + static_cast<double>(row) * spacing * std::sqrt(3.0) / 2.0;
      if (d + r > p.outer_radius) break;
      bool any = false;
      for (std::size_t m = 0; m <= row; ++m) {
        const double v = (static_cast<double>(m) - 0.5 * static_cast<double>(row)) * spacing;
        const Point2 c{d * axis.x + v * perp.x, d * axis.y + v * perp.y};
        if (std::hypot(c.x, c.y) + r <= p.outer_radius) {
          out.push_back({c, r, s});
          any = true;
        }
      }
      if (!any) break;
    }
    if (out.size() == before) throw GeometryError("make_derenzo: sector " + std::to_string(s) + " overflows the phantom region");
  }
  return out;
}

inline PressureField make_derenzo(const PhantomSpec& spec, const Grid2D& grid) {
  spec.validate();
  grid.validate();
  const auto reg = detail::region_of(grid);
  if (spec.derenzo.outer_radius > reg.half_width + 1e-12)
    throw GeometryError("make_derenzo: outer radius exceeds the phantom region");
  PressureField f(grid);
  for (const auto& c : derenzo_layout(spec.derenzo)) {
    const Point2 at{grid.origin.x + c.center.x, grid.origin.y + c.center.y};
    detail::stamp_circle(f.values, grid, reg.idx, at, c.radius, spec.amplitude, true);
  }
  return f;
}

// Branching biased random walk: every walker keeps its heading with small
// Gaussian turns, stamps a disk of its width each step, and spawns a thinner
// child with `branch_probability` until the generation limit is reached.
inline PressureField make_vessel(const PhantomSpec& spec, const Grid2D& grid) {
  spec.validate();
  grid.validate();
  const auto& vp = spec.vessel;
  if (vp.trunks < 1) throw ValidationError("make_vessel: trunks must be >= 1");
  if (!(vp.step_length > 0.0)) throw ValidationError("make_vessel: step_length must be > 0");
  if (vp.min_generations < 1 || vp.max_generations < vp.min_generations)
    throw ValidationError("make_vessel: generation range is invalid");
  if (!(vp.min_width_px > 0.0) || vp.max_width_px < vp.min_width_px)
    throw ValidationError("make_vessel: width range is invalid");

  const auto reg = detail::region_of(grid);
  const double half = reg.half_width;
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> turn(0.0, vp.turn_sigma);
  const auto generations = vp.min_generations + static_cast<std::size_t>(
      std::floor(unit(rng) * static_cast<double>(vp.max_generations - vp.min_generations + 1)));

  struct Walker {
    Point2 pos;
    double heading;
    std::size_t generation;
    std::size_t steps;
  };
  std::vector<Walker> pending;
  for (std::size_t t = 0; t < vp.trunks; ++t) {
    // Trunks enter from a random point on the region boundary, heading inward.
    const double side_angle = 2.0 * std::numbers::pi * unit(rng);
    const double margin = 0.9 * half;
    const Point2 start{margin * std::cos(side_angle), margin * std::sin(side_angle)};
    const double heading = side_angle + std::numbers::pi + (unit(rng) - 0.5) * 0.8;
    pending.push_back({start, heading, 0, vp.trunk_steps});
  }

  PressureField f(grid);
  std::size_t segments = 0;
  const double width_step = generations > 1 ? (vp.max_width_px - vp.min_width_px) / static_cast<double>(generations - 1) : 0.0;
  while (!pending.empty() && segments < vp.max_segments) {
    Walker w = pending.back();
    pending.pop_back();
    ++segments;
    const double width_px = std::max(vp.min_width_px, vp.max_width_px - width_step * static_cast<double>(w.generation));
    const double radius = 0.5 * width_px * grid.dx;
    for (std::size_t s = 0; s < w.steps; ++s) {
      if (std::abs(w.pos.x) > half || std::abs(w.pos.y) > half) break;
      detail::stamp_circle(f.values, grid, reg.idx, {grid.origin.x + w.pos.x, grid.origin.y + w.pos.y}, radius,
                           spec.amplitude, true);
      if (w.generation + 1 < generations && unit(rng) < vp.branch_probability) {
        const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
        const double spread = (0.5 + 0.5 * unit(rng)) * std::numbers::pi / 3.0;
        const auto child_steps = std::max<std::size_t>(8, static_cast<std::size_t>(0.6 * static_cast<double>(w.steps - s)));
        pending.push_back({w.pos, w.heading + side * spread, w.generation + 1, child_steps});
      }
      w.heading += turn(rng);
      // Half-width steps keep consecutive stamps overlapping, so every walk
      // is one connected stroke.
      const double step = std::min(vp.step_length, radius);
      w.pos.x += step * std::cos(w.heading);
      w.pos.y += step * std::sin(w.heading);
    }
  }
  return f;
}

// Loads an 8-bit graymap, resamples it onto the phantom region by nearest
// neighbour, and binarizes: pixel >= threshold becomes `amplitude`. Image rows
// map to the grid's x index.
inline PressureField import_image(const std::filesystem::path& path, unsigned threshold, double amplitude,
                                  const Grid2D& grid) {
  grid.validate();
  if (!(amplitude > 0.0)) throw ValidationError("import_image: amplitude must be > 0");
  GrayImage img;
  try {
    img = read_pgm(path);
  } catch (const FormatError& e) {
    throw IoError("import_image: '" + path.string() + "' is not a readable graymap: " + e.what());
  }
  if (img.maxval > 255) throw IoError("import_image: expected an 8-bit graymap, got maxval " + std::to_string(img.maxval));
  const auto reg = phantom_region(grid);
  PressureField f(grid);
  const std::size_t rows = reg.rows(), cols = reg.cols();
  for (std::size_t a = 0; a < rows; ++a) {
    const std::size_t src_r = std::min(img.height - 1, a * img.height / rows);
    for (std::size_t b = 0; b < cols; ++b) {
      const std::size_t src_c = std::min(img.width - 1, b * img.width / cols);
      if (img.at(src_r, src_c) >= threshold)
        f.values(static_cast<Eigen::Index>(reg.i0 + a), static_cast<Eigen::Index>(reg.j0 + b)) = amplitude;
    }
  }
  return f;
}

inline PressureField make_phantom(const PhantomSpec& spec, const Grid2D& grid) {
  switch (spec.kind) {
    case PhantomKind::disk: return make_disk(spec.disk.center, spec.disk.radius, spec.amplitude, grid);
    case PhantomKind::derenzo: return make_derenzo(spec, grid);
    case PhantomKind::vessel: return make_vessel(spec, grid);
    case PhantomKind::image_import: return import_image(spec.image.path, spec.image.threshold, spec.amplitude, grid);
  }
  throw ValidationError("make_phantom: unknown kind");
}

}  // namespace srcnpat
