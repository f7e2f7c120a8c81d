#pragma once

#include <cmath>
#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "srcnpat/core.hpp"
#include "srcnpat/fft.hpp"

namespace srcnpat {

struct SolverConfig {
  std::size_t time_steps = 512;
  double dt = 5e-8;
  std::size_t pml_width = 20;  // minimum absorbing layer, grid points
  double pml_alpha = 2.0;      // nepers per grid point at the outer edge
  double record_start = 0.0;   // time of the first recorded sample
  // Grow the absorbing layer until the padded size factors into 2, 3, 5, 7.
  bool pml_auto = true;
  // Band-limit p0 with a radial Blackman window before propagating it.
  bool smooth_p0 = true;
  // Forward run: sample the pressure at each detector's exact position with a
  // separable Kaiser-windowed sinc instead of reading the nearest node.
  bool interpolate_detectors = true;

  void validate() const {
    if (time_steps < 1) throw ValidationError("SolverConfig: time_steps must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("SolverConfig: dt must be > 0");
    if (pml_width < 10) throw ValidationError("SolverConfig: pml_width must be >= 10");
    if (!(pml_alpha >= 0.0)) throw ValidationError("SolverConfig: pml_alpha must be >= 0");
    if (record_start < 0.0) throw ValidationError("SolverConfig: record_start must be >= 0");
    const double k0 = std::round(record_start / dt);
    if (std::abs(k0 * dt - record_start) > 1e-6 * dt)
      throw ValidationError("SolverConfig: record_start must be a multiple of dt");
  }

  void validate_for(const Grid2D& grid, const AcousticMedium& medium, const DetectorArray* detectors = nullptr) const {
    validate();
    grid.validate();
    medium.validate();
    const double cfl = medium.sound_speed * dt / grid.dx;
    if (cfl > 1.0) throw SolverError("CFL number " + std::to_string(cfl) + " exceeds 1");
    if (detectors != nullptr) {
      // The record must at least cover travel from the ring center to the ring.
      const double travel = medium.sound_speed * (record_start + static_cast<double>(time_steps) * dt);
      if (travel < detectors->radius)
        throw ValidationError("SolverConfig: time_steps*dt too short for a wave to reach the detector ring");
    }
  }

  std::size_t first_record_index() const { return static_cast<std::size_t>(std::llround(record_start / dt)); }
};

// Snapshot handed to an observer after every time step. Arrays cover the
// padded grid (n0 x n1, row-major); `interior` locates the un-padded grid.
struct StepState {
  std::size_t step;
  std::size_t n0, n1;
  IndexRange interior;
  std::span<const double> p, ux, uy;
};

using StepObserver = std::function<void(const StepState&)>;

struct DetectorNode {
  std::size_t i, j;
};

// Maps each detector to its nearest grid node; throws if any lies off the grid.
inline std::vector<DetectorNode> detector_nodes(const DetectorArray& det, const Grid2D& grid) {
  det.validate();
  std::vector<DetectorNode> nodes(det.count);
  for (std::size_t d = 0; d < det.count; ++d) {
    const Point2 p = det.position(d);
    const double fi = std::round(grid.index_x(p.x));
    const double fj = std::round(grid.index_y(p.y));
    if (fi < 0 || fj < 0 || fi > static_cast<double>(grid.nx - 1) || fj > static_cast<double>(grid.ny - 1))
      throw GeometryError("detector " + std::to_string(d) + " lies outside the simulation interior");
    nodes[d] = {static_cast<std::size_t>(fi), static_cast<std::size_t>(fj)};
  }
  return nodes;
}

// Separable band-limited interpolation weights around an off-grid point.
struct DetectorStencil {
  static constexpr int kRadius = 8;
  static constexpr double kBeta = 8.0;
  std::size_t i0 = 0, j0 = 0;  // node of the first tap on each axis
  std::array<double, 2 * kRadius> wx{}, wy{};
};

inline double kaiser_sinc(double u) {
  constexpr double R = DetectorStencil::kRadius;
  if (std::abs(u) >= R) return 0.0;
  const double q = u / R;
  const double sinc = u == 0.0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
  return sinc * std::cyl_bessel_i(0.0, DetectorStencil::kBeta * std::sqrt(1.0 - q * q)) /
         std::cyl_bessel_i(0.0, DetectorStencil::kBeta);
}

// Stencils in the index space of a grid padded by (wx, wy) nodes per side.
inline std::vector<DetectorStencil> detector_stencils(const DetectorArray& det, const Grid2D& grid, std::size_t pad_x,
                                                      std::size_t pad_y) {
  det.validate();
  constexpr int R = DetectorStencil::kRadius;
  std::vector<DetectorStencil> out(det.count);
  for (std::size_t d = 0; d < det.count; ++d) {
    const Point2 p = det.position(d);
    const double fi = grid.index_x(p.x) + static_cast<double>(pad_x);
    const double fj = grid.index_y(p.y) + static_cast<double>(pad_y);
    const double bi = std::floor(fi) - (R - 1), bj = std::floor(fj) - (R - 1);
    if (bi < 0 || bj < 0 || bi + 2 * R > static_cast<double>(grid.nx + 2 * pad_x) ||
        bj + 2 * R > static_cast<double>(grid.ny + 2 * pad_y))
      throw GeometryError("detector " + std::to_string(d) + " is too close to the grid edge for interpolation");
    auto& st = out[d];
    st.i0 = static_cast<std::size_t>(bi);
    st.j0 = static_cast<std::size_t>(bj);
    for (int a = 0; a < 2 * R; ++a) {
      st.wx[static_cast<std::size_t>(a)] = kaiser_sinc(fi - (bi + a));
      st.wy[static_cast<std::size_t>(a)] = kaiser_sinc(fj - (bj + a));
    }
  }
  return out;
}

// Radially symmetric Blackman window applied in k-space, then rescaled so
// the peak magnitude is unchanged. Suppresses the Gibbs ringing a binary
// phantom would otherwise launch from its edges.
inline PressureField smooth_field(const PressureField& f) {
  f.validate();
  const double peak = f.values.cwiseAbs().maxCoeff();
  if (peak == 0.0) return f;
  const std::size_t n0 = f.grid.nx, n1 = f.grid.ny, nc1 = n1 / 2 + 1;
  fft::Real2D plan(n0, n1);
  auto re = fft::allocate<double>(plan.real_size());
  auto cx = fft::allocate<std::complex<double>>(plan.complex_size());
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) re[i * n1 + j] = f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  plan.forward(re.get(), cx.get());
  const double norm = 1.0 / static_cast<double>(n0 * n1);
  for (std::size_t a = 0; a < n0; ++a) {
    const double ka = (2 * a < n0 ? static_cast<double>(a) : static_cast<double>(a) - static_cast<double>(n0)) /
                      (0.5 * static_cast<double>(n0));
    for (std::size_t b = 0; b < nc1; ++b) {
      const double kb = static_cast<double>(b) / (0.5 * static_cast<double>(n1));
      const double r = std::hypot(ka, kb);
      const double w = r > 1.0 ? 0.0
                               : 0.42 + 0.5 * std::cos(std::numbers::pi * r) + 0.08 * std::cos(2.0 * std::numbers::pi * r);
      cx[a * nc1 + b] *= w * norm;
    }
  }
  plan.backward(cx.get(), re.get());
  PressureField out(f.grid);
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = re[i * n1 + j];
  const double smoothed_peak = out.values.cwiseAbs().maxCoeff();
  if (smoothed_peak > 0.0) out.values *= peak / smoothed_peak;
  return out;
}

// First-order k-space pseudospectral solver for the homogeneous, lossless
// acoustic equations
//   du/dt = -grad(p)/rho,  drho/dt = -rho div(u),  p = c^2 rho
// on a staggered grid, with a split-field PML wrapped around the interior.
// Spatial derivatives are spectral; the sinc(c k dt / 2) factor makes the
// time stepping exact for a homogeneous medium.
class KspaceSolver {
 public:
  KspaceSolver(const Grid2D& grid, const AcousticMedium& medium, const SolverConfig& cfg)
      : grid_(grid), medium_(medium), cfg_(cfg) {
    cfg_.validate_for(grid_, medium_);
    wx_ = layer_width(grid_.nx);
    wy_ = layer_width(grid_.ny);
    n0_ = grid_.nx + 2 * wx_;
    n1_ = grid_.ny + 2 * wy_;
    nc1_ = n1_ / 2 + 1;
    fft_ = std::make_unique<fft::Real2D>(n0_, n1_);
    build_operators();
    build_pml();
    const std::size_t nr = n0_ * n1_, nc = n0_ * nc1_;
    p_ = fft::allocate<double>(nr);
    ux_ = fft::allocate<double>(nr);
    uy_ = fft::allocate<double>(nr);
    rhox_ = fft::allocate<double>(nr);
    rhoy_ = fft::allocate<double>(nr);
    gx_ = fft::allocate<double>(nr);
    gy_ = fft::allocate<double>(nr);
    spec_ = fft::allocate<std::complex<double>>(nc);
    tmp_ = fft::allocate<std::complex<double>>(nc);
  }

  std::size_t padded_nx() const { return n0_; }
  std::size_t padded_ny() const { return n1_; }
  std::size_t pml_x() const { return wx_; }
  std::size_t pml_y() const { return wy_; }
  const Grid2D& grid() const { return grid_; }

  // Propagates p0 (with zero particle velocity) and records the pressure at
  // each detector. Sample k is the pressure at record_start + k dt.
  Sinogram forward(const PressureField& p0, const DetectorArray& det, const StepObserver& observe = {}) {
    if (!(p0.grid == grid_)) throw GeometryError("simulate_forward: p0 is not defined on the solver grid");
    p0.validate();
    cfg_.validate_for(grid_, medium_, &det);
    const auto nodes = padded(detector_nodes(det, grid_));
    std::vector<DetectorStencil> stencils;
    if (cfg_.interpolate_detectors) stencils = detector_stencils(det, grid_, wx_, wy_);
    reset();
    const PressureField source = cfg_.smooth_p0 ? smooth_field(p0) : p0;
    const double c2 = medium_.sound_speed * medium_.sound_speed;
    for (std::size_t i = 0; i < grid_.nx; ++i)
      for (std::size_t j = 0; j < grid_.ny; ++j) {
        const std::size_t k = (i + wx_) * n1_ + (j + wy_);
        const double v = source.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        p_[k] = v;
        rhox_[k] = rhoy_[k] = v / (2.0 * c2);
      }
    // u(-dt/2) = +dt/(2 rho) grad p0, so the first update gives
    // u(dt/2) = -u(-dt/2) and du/dt = 0 at t = 0.
    gradient(p_.get());
    const double half = cfg_.dt / (2.0 * medium_.density);
    for (std::size_t k = 0; k < n0_ * n1_; ++k) {
      ux_[k] = half * gx_[k];
      uy_[k] = half * gy_[k];
    }

    const std::size_t first = cfg_.first_record_index();
    const std::size_t T = cfg_.time_steps;
    Matrix data(T, det.count);
    auto record = [&](std::size_t time_index) {
      if (time_index < first) return;
      const auto row = static_cast<Eigen::Index>(time_index - first);
      for (std::size_t d = 0; d < nodes.size(); ++d)
        data(row, static_cast<Eigen::Index>(d)) = stencils.empty() ? p_[nodes[d]] : sample(stencils[d]);
    };
    record(0);
    notify(observe, 0);
    for (std::size_t n = 1; n < first + T; ++n) {
      step({}, {}, n);
      record(n);
      notify(observe, n);
    }
    return Sinogram(std::move(data), cfg_.dt, cfg_.record_start);
  }

  // Re-propagates the time-reversed record: starting from a quiescent field,
  // the detector nodes are held at the recorded pressure for times
  // (T-1) dt, ..., dt, 0. The pressure left on the grid is the t = 0 estimate.
  PressureField time_reverse(const Sinogram& s, const DetectorArray& det, const StepObserver& observe = {}) {
    s.validate();
    if (s.detectors() != det.count) throw DimensionError("time_reversal: sinogram columns differ from detector count");
    if (std::abs(s.dt - cfg_.dt) > 1e-9 * cfg_.dt)
      throw ValidationError("time_reversal: sinogram dt differs from the solver dt");
    const auto nodes = padded(detector_nodes(det, grid_));
    reset();
    const double k0d = std::round(s.t0 / s.dt);
    if (k0d < 0.0 || std::abs(k0d * s.dt - s.t0) > 1e-6 * s.dt)
      throw ValidationError("time_reversal: t0 must be a non-negative multiple of dt");
    const auto k0 = static_cast<std::size_t>(k0d);
    const std::size_t total = k0 + s.samples();
    const double scale = 1.0 / (2.0 * medium_.sound_speed * medium_.sound_speed);
    std::vector<double> values(nodes.size());
    for (std::size_t n = 0; n < total; ++n) {
      const std::size_t time_index = total - 1 - n;
      // Samples before t0 were not recorded and are enforced as zero.
      for (std::size_t d = 0; d < nodes.size(); ++d)
        values[d] = time_index >= k0 ? s.data(static_cast<Eigen::Index>(time_index - k0), static_cast<Eigen::Index>(d)) * scale
                                    : 0.0;
      step(nodes, values, n);
      notify(observe, n);
    }
    PressureField out(grid_);
    for (std::size_t i = 0; i < grid_.nx; ++i)
      for (std::size_t j = 0; j < grid_.ny; ++j)
        out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p_[(i + wx_) * n1_ + (j + wy_)];
    return out;
  }

 private:
  std::size_t layer_width(std::size_t n) const {
    std::size_t w = cfg_.pml_width;
    if (cfg_.pml_auto)
      while (fft::next_smooth(n + 2 * w) != n + 2 * w) ++w;
    return w;
  }

  double sample(const DetectorStencil& st) const {
    double acc = 0.0;
    for (std::size_t a = 0; a < st.wx.size(); ++a) {
      const double* row = p_.get() + (st.i0 + a) * n1_ + st.j0;
      double r = 0.0;
      for (std::size_t b = 0; b < st.wy.size(); ++b) r += st.wy[b] * row[b];
      acc += st.wx[a] * r;
    }
    return acc;
  }

  std::vector<std::size_t> padded(const std::vector<DetectorNode>& nodes) const {
    std::vector<std::size_t> out(nodes.size());
    for (std::size_t d = 0; d < nodes.size(); ++d) out[d] = (nodes[d].i + wx_) * n1_ + (nodes[d].j + wy_);
    return out;
  }

  static double wavenumber(std::size_t m, std::size_t n, double dx) {
    const auto sm = static_cast<double>(m);
    const auto sn = static_cast<double>(n);
    const double idx = (2 * m < n) ? sm : sm - sn;
    return 2.0 * std::numbers::pi * idx / (sn * dx);
  }

  void build_operators() {
    const std::size_t nc = n0_ * nc1_;
    dx_pos_.resize(nc);
    dx_neg_.resize(nc);
    dy_pos_.resize(nc);
    dy_neg_.resize(nc);
    const double dx = grid_.dx;
    const double norm = 1.0 / static_cast<double>(n0_ * n1_);
    const std::complex<double> I(0.0, 1.0);
    for (std::size_t a = 0; a < n0_; ++a) {
      const double kx = wavenumber(a, n0_, dx);
      for (std::size_t b = 0; b < nc1_; ++b) {
        const double ky = wavenumber(b, n1_, dx);
        const double k = std::hypot(kx, ky);
        const double arg = 0.5 * medium_.sound_speed * k * cfg_.dt;
        const double kappa = arg == 0.0 ? 1.0 : std::sin(arg) / arg;
        const std::size_t q = a * nc1_ + b;
        dx_pos_[q] = norm * kappa * I * kx * std::exp(I * (0.5 * kx * dx));
        dx_neg_[q] = norm * kappa * I * kx * std::exp(-I * (0.5 * kx * dx));
        dy_pos_[q] = norm * kappa * I * ky * std::exp(I * (0.5 * ky * dx));
        dy_neg_[q] = norm * kappa * I * ky * std::exp(-I * (0.5 * ky * dx));
      }
    }
  }

  // Per-half-step decay exp(-sigma dt / 2) with sigma rising as the fourth
  // power of depth into the layer.
  std::vector<double> profile(std::size_t n, std::size_t w, double shift) const {
    std::vector<double> out(n + 2 * w);
    const double first = static_cast<double>(w);
    const double last = static_cast<double>(w + n - 1);
    const double peak = cfg_.pml_alpha * medium_.sound_speed / grid_.dx;
    for (std::size_t m = 0; m < out.size(); ++m) {
      const double s = static_cast<double>(m) + shift;
      const double depth = std::max({0.0, first - s, s - last});
      const double sigma = peak * std::pow(depth / static_cast<double>(w), 4);
      out[m] = std::exp(-0.5 * sigma * cfg_.dt);
    }
    return out;
  }

  void build_pml() {
    pml_x_ = profile(grid_.nx, wx_, 0.0);
    pml_xs_ = profile(grid_.nx, wx_, 0.5);
    pml_y_ = profile(grid_.ny, wy_, 0.0);
    pml_ys_ = profile(grid_.ny, wy_, 0.5);
  }

  void reset() {
    const std::size_t nr = n0_ * n1_;
    for (auto* a : {p_.get(), ux_.get(), uy_.get(), rhox_.get(), rhoy_.get()}) std::fill(a, a + nr, 0.0);
  }

  void apply(const std::vector<std::complex<double>>& op, double* out) {
    const std::size_t nc = n0_ * nc1_;
    for (std::size_t q = 0; q < nc; ++q) tmp_[q] = op[q] * spec_[q];
    fft_->backward(tmp_.get(), out);
  }

  // gx_, gy_ <- staggered forward derivatives of `field`.
  void gradient(double* field) {
    fft_->forward(field, spec_.get());
    apply(dx_pos_, gx_.get());
    apply(dy_pos_, gy_.get());
  }

  void step(const std::vector<std::size_t>& dirichlet, const std::vector<double>& rho_values, std::size_t n) {
    const double dt = cfg_.dt;
    const double rho0 = medium_.density;
    const double c2 = medium_.sound_speed * medium_.sound_speed;

    gradient(p_.get());
    for (std::size_t a = 0; a < n0_; ++a) {
      const double px = pml_xs_[a];
      double* ux = ux_.get() + a * n1_;
      double* uy = uy_.get() + a * n1_;
      const double* gx = gx_.get() + a * n1_;
      const double* gy = gy_.get() + a * n1_;
      for (std::size_t b = 0; b < n1_; ++b) {
        ux[b] = px * (px * ux[b] - dt / rho0 * gx[b]);
        const double py = pml_ys_[b];
        uy[b] = py * (py * uy[b] - dt / rho0 * gy[b]);
      }
    }

    fft_->forward(ux_.get(), spec_.get());
    apply(dx_neg_, gx_.get());
    fft_->forward(uy_.get(), spec_.get());
    apply(dy_neg_, gy_.get());

    bool finite = true;
    for (std::size_t a = 0; a < n0_; ++a) {
      const double px = pml_x_[a];
      double* rx = rhox_.get() + a * n1_;
      double* ry = rhoy_.get() + a * n1_;
      double* p = p_.get() + a * n1_;
      const double* dux = gx_.get() + a * n1_;
      const double* duy = gy_.get() + a * n1_;
      for (std::size_t b = 0; b < n1_; ++b) {
        const double py = pml_y_[b];
        rx[b] = px * (px * rx[b] - dt * rho0 * dux[b]);
        ry[b] = py * (py * ry[b] - dt * rho0 * duy[b]);
        p[b] = c2 * (rx[b] + ry[b]);
        finite = finite && std::isfinite(p[b]);
      }
    }
    for (std::size_t d = 0; d < dirichlet.size(); ++d) {
      const std::size_t k = dirichlet[d];
      rhox_[k] = rhoy_[k] = rho_values[d];
      p_[k] = c2 * (rhox_[k] + rhoy_[k]);
    }
    if (!finite) throw SolverError("non-finite pressure during time stepping", n);
  }

  void notify(const StepObserver& observe, std::size_t n) const {
    if (!observe) return;
    const std::size_t nr = n0_ * n1_;
    StepState st{n, n0_, n1_, IndexRange{wx_, wx_ + grid_.nx - 1, wy_, wy_ + grid_.ny - 1},
                 std::span<const double>(p_.get(), nr), std::span<const double>(ux_.get(), nr),
                 std::span<const double>(uy_.get(), nr)};
    observe(st);
  }

  Grid2D grid_;
  AcousticMedium medium_;
  SolverConfig cfg_;
  std::size_t wx_ = 0, wy_ = 0, n0_ = 0, n1_ = 0, nc1_ = 0;
  std::unique_ptr<fft::Real2D> fft_;
  std::vector<std::complex<double>> dx_pos_, dx_neg_, dy_pos_, dy_neg_;
  std::vector<double> pml_x_, pml_xs_, pml_y_, pml_ys_;
  fft::AlignedBuffer<double> p_, ux_, uy_, rhox_, rhoy_, gx_, gy_;
  fft::AlignedBuffer<std::complex<double>> spec_, tmp_;
};

// Zero-phase Gaussian band-pass applied to every detector column: unit gain at
// the center frequency, full width at half maximum = fractional_bandwidth * fc.
inline Sinogram apply_transducer_response(const Sinogram& s, const TransducerResponse& r) {
  s.validate();
  r.validate();
  const std::size_t T = s.samples(), D = s.detectors();
  fft::Columns1D plan(T, D);
  auto re = fft::allocate<double>(T * D);
  auto cx = fft::allocate<std::complex<double>>(plan.bins() * D);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) re[t * D + d] = s.data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d));
  plan.forward(re.get(), cx.get());
  const double fwhm = r.fractional_bandwidth * r.center_frequency;
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const double df = 1.0 / (static_cast<double>(T) * s.dt);
  for (std::size_t k = 0; k < plan.bins(); ++k) {
    const double f = static_cast<double>(k) * df;
    const double gain = std::exp(-0.5 * std::pow((f - r.center_frequency) / sigma, 2)) / static_cast<double>(T);
    for (std::size_t d = 0; d < D; ++d) cx[k * D + d] *= gain;
  }
  plan.backward(cx.get(), re.get());
  Matrix out(T, D);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = re[t * D + d];
  return Sinogram(std::move(out), s.dt, s.t0);
}

// Phantom -> sinogram. The transducer response is applied afterwards when
// the detector array has it enabled.
inline Sinogram simulate_forward(const PressureField& p0, const AcousticMedium& medium, const DetectorArray& detectors,
                                 const SolverConfig& cfg, const StepObserver& observe = {}) {
  KspaceSolver solver(p0.grid, medium, cfg);
  Sinogram s = solver.forward(p0, detectors, observe);
  return detectors.response.enabled ? apply_transducer_response(s, detectors.response) : s;
}

// Sinogram -> initial pressure estimate on `recon_grid`, cropped to the
// phantom region. Only the absorbing-layer settings of `cfg` are used; the
// step count and dt come from the sinogram.
inline PressureField time_reversal_reconstruct(const Sinogram& s, const DetectorArray& detectors, const Grid2D& recon_grid,
                                               const AcousticMedium& medium, SolverConfig cfg = {}) {
  s.validate();
  cfg.time_steps = s.samples();
  cfg.dt = s.dt;
  cfg.record_start = 0.0;
  KspaceSolver solver(recon_grid, medium, cfg);
  PressureField full = solver.time_reverse(s, detectors);
  return full.crop(phantom_region(recon_grid));
}

}  // namespace srcnpat
