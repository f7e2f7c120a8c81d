#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "srcnpat/core.hpp"

namespace srcnpat {

namespace detail {
inline void require_same_extent(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(what) + ": shape " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}
}  // namespace detail

inline double rmse(const Matrix& target, const Matrix& recon) {
  detail::require_same_extent(target, recon, "rmse");
  if (target.size() == 0) throw DimensionError("rmse: empty input");
  return std::sqrt((target - recon).squaredNorm() / static_cast<double>(target.size()));
}
inline double rmse(const PressureField& target, const PressureField& recon) { return rmse(target.values, recon.values); }
inline double rmse(const Sinogram& target, const Sinogram& recon) { return rmse(target.data, recon.data); }

// Peak is the maximum of the target. Identical inputs give +infinity.
inline double psnr(const Matrix& target, const Matrix& recon) {
  detail::require_same_extent(target, recon, "psnr");
  const double peak = target.maxCoeff();
  if (!(peak > 0.0)) throw ValidationError("psnr: undefined peak, target maximum is not positive");
  const double e = rmse(target, recon);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(peak / e);
}
inline double psnr(const PressureField& target, const PressureField& recon) { return psnr(target.values, recon.values); }
inline double psnr(const Sinogram& target, const Sinogram& recon) { return psnr(target.data, recon.data); }

inline double measured_snr(const Sinogram& clean, const Sinogram& noisy) {
  detail::require_same_extent(clean.data, noisy.data, "measured_snr");
  const double ps = clean.data.squaredNorm();
  if (!(ps > 0.0)) throw ValidationError("measured_snr: clean signal is all zero");
  const double pn = (noisy.data - clean.data).squaredNorm();
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ps / pn);
}

struct MetricsRow {
  std::string method;
  double snr_db = 0.0;
  double rmse = 0.0;
  double psnr_db = 0.0;
};

class MetricsReport {
 public:
  std::string reference;

  const std::vector<MetricsRow>& rows() const { return rows_; }

  void add(MetricsRow row) {
    if (!(row.rmse >= 0.0)) throw ValidationError("metrics: rmse must be >= 0");
    if (row.method.empty() || row.method.find_first_of(",\n\"") != std::string::npos)
      throw ValidationError("metrics: method id must be non-empty and free of commas, quotes and newlines");
    for (const auto& r : rows_)
      if (r.method == row.method && r.snr_db == row.snr_db)
        throw ValidationError("metrics: duplicate row for method '" + row.method + "' at " + format_number(row.snr_db) + " dB");
    rows_.push_back(std::move(row));
  }

  const MetricsRow* find(const std::string& method, double snr_db) const {
    for (const auto& r : rows_)
      if (r.method == method && r.snr_db == snr_db) return &r;
    return nullptr;
  }

  static constexpr const char* kHeader = "method,snr_db,rmse,psnr_db";

  static std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  static std::string format_row(const MetricsRow& r) {
    return r.method + "," + format_number(r.snr_db) + "," + format_number(r.rmse) + "," + format_number(r.psnr_db);
  }

  std::string to_csv() const {
    std::string out = std::string(kHeader) + "\n";
    for (const auto& r : rows_) out += format_row(r) + "\n";
    return out;
  }

  void write_csv(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << to_csv();
  }

 private:
  std::vector<MetricsRow> rows_;
};

// Appends one row, writing the header first if the file is new or empty.
inline void append_metrics_row(const std::filesystem::path& path, const MetricsRow& row) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open '" + path.string() + "' for appending");
  if (fresh) out << MetricsReport::kHeader << "\n";
  out << MetricsReport::format_row(row) << "\n";
}

}  // namespace srcnpat
