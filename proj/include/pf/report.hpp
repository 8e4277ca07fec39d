#pragma once

#include "pf/burgers.hpp"
#include "pf/forensics.hpp"
#include "pf/io.hpp"
#include "pf/lab.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace pf {

/// Files produced by one command, kept in memory until written together.
class OutputSet {
 public:
  void add(std::string name, std::string content);
  /// Recorded in the manifest without a hash (e.g. wall-clock timings).
  void add_volatile(std::string name, std::string content);

  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }
  bool contains(const std::string& name) const;
  const std::string& content(const std::string& name) const;

  /// Writes every file atomically under `dir` and returns the manifest
  /// listing them with their FNV-1a hashes.
  nlohmann::json write_all(const std::filesystem::path& dir, nlohmann::json manifest) const;

 private:
  std::vector<std::pair<std::string, std::string>> files_;
  std::vector<std::string> volatile_;
};

/// Manifest skeleton: tool, version and command, plus the given fields.
nlohmann::json manifest_base(const std::string& command);

/// A finite number, or null with an entry in `nulls` explaining why.
nlohmann::json finite_or_null(double v, const std::string& path, nlohmann::json& nulls);

/// Summary JSON plus per-layer CSVs (and SVG quick looks when asked).
OutputSet analysis_outputs(const WeightDump& dump, const NetworkReport& report,
                           const std::vector<ContrastStats>& contrast, bool svg);

nlohmann::json analysis_summary(const WeightDump& dump, const NetworkReport& report,
                                const std::vector<ContrastStats>& contrast);

std::string snapshot_csv(const FieldSnapshot& s);
/// Reads a `t,x,u` CSV written by snapshot_csv; all rows must share t.
FieldSnapshot parse_snapshot_csv(std::string_view text);

std::string history_csv(const TrainingHistory& h);

// ---------------------------------------------------------------------------
// Minimal SVG line/scatter plots

class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);
  SvgPlot& line(const Vector& x, const Vector& y, const std::string& color);
  SvgPlot& points(const Vector& x, const Vector& y, const std::string& color);
  SvgPlot& circle(double cx, double cy, double r, const std::string& color);
  SvgPlot& log_y(bool on = true);
  SvgPlot& equal_aspect(bool on = true);
  std::string render() const;

 private:
  struct Series {
    Vector x, y;
    std::string color;
    bool dots;
  };
  struct Circle {
    double cx, cy, r;
    std::string color;
  };
  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  std::vector<Circle> circles_;
  bool log_y_ = false;
  bool equal_ = false;
};

}  // namespace pf
