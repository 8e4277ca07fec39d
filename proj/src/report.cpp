#include "pf/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace pf {
namespace {

using nlohmann::json;

constexpr const char* kToolName = "pinnlab";
constexpr const char* kToolVersion = "1.0.0";

std::string short_num(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 3);
  return std::string(buf, ptr);
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

json fit_json(const DistributionFit& f, const std::string& path, json& nulls) {
  return {{"n", f.n},
          {"mu", finite_or_null(f.mu, path + ".mu", nulls)},
          {"sigma", finite_or_null(f.sigma, path + ".sigma", nulls)},
          {"theta", finite_or_null(f.theta, path + ".theta", nulls)},
          {"alpha", finite_or_null(f.alpha, path + ".alpha", nulls)},
          {"beta", finite_or_null(f.beta, path + ".beta", nulls)},
          {"kurtosis", finite_or_null(f.kurtosis, path + ".kurtosis", nulls)},
          {"n_modes", f.n_modes},
          {"gen_gaussian_fit_ok", f.gg_ok},
          {"low_confidence", f.low_confidence}};
}

json vector_json(const Vector& v, const std::string& path, json& nulls) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(finite_or_null(v(i), path + "[" + std::to_string(i) + "]", nulls));
  return out;
}

Vector density_grid(const Kde& kde) {
  const double pad = 3.0 * std::sqrt(kde.theta);
  return Vector::LinSpaced(512, kde.samples.minCoeff() - pad, kde.samples.maxCoeff() + pad);
}

std::string layer_prefix(Index layer) { return "layer" + std::to_string(layer); }

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

// ---------------------------------------------------------------------------

void OutputSet::add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

void OutputSet::add_volatile(std::string name, std::string content) {
  volatile_.push_back(name);
  add(std::move(name), std::move(content));
}

bool OutputSet::contains(const std::string& name) const {
  return std::any_of(files_.begin(), files_.end(), [&](const auto& f) { return f.first == name; });
}

const std::string& OutputSet::content(const std::string& name) const {
  for (const auto& f : files_)
    if (f.first == name) return f.second;
  throw Error(ErrorKind::Configuration, "no output named '" + name + "'");
}

json OutputSet::write_all(const std::filesystem::path& dir, json manifest) const {
  json outputs = json::object();
  json unhashed = json::array();
  for (const auto& [name, content] : files_) {
    write_file_atomic(dir / name, content);
    if (std::find(volatile_.begin(), volatile_.end(), name) != volatile_.end())
      unhashed.push_back(name);
    else
      outputs[name] = hex64(fnv1a(content));
  }
  manifest["outputs"] = outputs;
  manifest["volatile_outputs"] = unhashed;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

json manifest_base(const std::string& command) {
  return {{"tool", kToolName}, {"version", kToolVersion}, {"command", command},
          {"dump_format_version", kDumpFormatVersion}};
}

json finite_or_null(double v, const std::string& path, json& nulls) {
  if (std::isfinite(v)) return v;
  nulls.push_back({{"path", path}, {"reason", std::isnan(v) ? "nan" : "infinite"}});
  return nullptr;
}

json analysis_summary(const WeightDump& dump, const NetworkReport& report, const std::vector<ContrastStats>& contrast) {
  json nulls = json::array();
  json layers = json::array();
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    const LayerReport& r = report.layers[i];
    const std::string p = "layers[" + std::to_string(i) + "]";
    const Index k = std::min(kStructureHalfwidth, r.rows - 1);
    const bool random_like = !r.structured && !r.drop.fires;
    json layer = {
        {"layer", r.layer},
        {"rows", r.rows},
        {"cols", r.cols},
        {"weights", fit_json(r.weights, p + ".weights", nulls)},
        {"bias", fit_json(r.bias, p + ".bias", nulls)},
        {"spectrum",
         {{"radius", finite_or_null(r.radius, p + ".spectrum.radius", nulls)},
          {"outliers", r.outliers},
          {"inside_1p1_radius", finite_or_null(r.inside_fraction, p + ".spectrum.inside_1p1_radius", nulls)},
          {"sigma_max", finite_or_null(r.sigma_max, p + ".spectrum.sigma_max", nulls)},
          {"sigma_max_below_one", r.sigma_max < 1.0},
          {"drop",
           {{"top", vector_json(r.drop.top, p + ".drop.top", nulls)},
            {"baseline_mean", vector_json(r.drop.baseline_mean, p + ".drop.baseline_mean", nulls)},
            {"baseline_std", vector_json(r.drop.baseline_std, p + ".drop.baseline_std", nulls)},
            {"z", vector_json(r.drop.z, p + ".drop.z", nulls)},
            {"margin", finite_or_null(r.drop.margin, p + ".drop.margin", nulls)},
            {"threshold_z", kDropThreshold},
            {"fires", r.drop.fires}}}}},
        {"band_energy",
         {{"halfwidth", k},
          {"plain", finite_or_null(r.band_energy(k), p + ".band_energy.plain", nulls)},
          {"periodic", finite_or_null(r.band_energy_periodic(k), p + ".band_energy.periodic", nulls)},
          {"baseline_plain", finite_or_null(r.baseline_band_energy, p + ".band_energy.baseline_plain", nulls)},
          {"baseline_periodic",
           finite_or_null(r.baseline_band_energy_periodic, p + ".band_energy.baseline_periodic", nulls)},
          {"structured", r.structured}}},
        {"verdict", r.structured ? "structured" : (random_like ? "consistent with random baseline"
                                                               : "unstructured, singular-value outliers")},
    };
    if (i < contrast.size()) {
      layer["contrast"] = {
          {"negative_fraction", finite_or_null(contrast[i].negative_fraction, p + ".contrast.negative_fraction", nulls)},
          {"row_sum_mean", finite_or_null(contrast[i].row_sum_mean, p + ".contrast.row_sum_mean", nulls)},
          {"row_sum_rms_deviation",
           finite_or_null(contrast[i].row_sum_rms_deviation, p + ".contrast.row_sum_rms_deviation", nulls)}};
    }
    layers.push_back(layer);
  }
  json summary = {
      {"config_hash", hex64(config_hash(dump.config))},
      {"seed", dump.config.seed},
      {"steps_completed", dump.steps_completed},
      {"layers", layers},
      {"mean_radius", finite_or_null(report.mean_radius, "mean_radius", nulls)},
      {"radius_rel_spread", finite_or_null(report.radius_rel_spread, "radius_rel_spread", nulls)},
      {"all_sigma_max_below_one", report.all_sigma_below_one},
  };
  summary["null_reasons"] = nulls;
  return summary;
}

OutputSet analysis_outputs(const WeightDump& dump, const NetworkReport& report,
                           const std::vector<ContrastStats>& contrast, bool svg) {
  OutputSet out;
  out.add("summary.json", analysis_summary(dump, report, contrast).dump(2) + "\n");

  SvgPlot eig("Eigenvalues of normalized hidden layers", "Re", "Im");
  SvgPlot sv("Singular values", "index", "sigma");
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    const LayerReport& r = report.layers[i];
    const std::string pre = layer_prefix(r.layer);
    const std::string color = kPalette[i % std::size(kPalette)];

    CsvTable ev({"re", "im"});
    for (Index j = 0; j < r.eigenvalues.size(); ++j) ev.row({r.eigenvalues(j).real(), r.eigenvalues(j).imag()});
    out.add(pre + "_eigenvalues.csv", ev.text());

    CsvTable s({"index", "sigma"});
    for (Index j = 0; j < r.singular_values.size(); ++j) s.row({static_cast<double>(j), r.singular_values(j)});
    out.add(pre + "_singular_values.csv", s.text());

    CsvTable band({"halfwidth", "plain", "periodic"});
    for (Index j = 0; j < r.band_energy.size(); ++j)
      band.row({static_cast<double>(j), r.band_energy(j), r.band_energy_periodic(j)});
    out.add(pre + "_band_energy.csv", band.text());

    SvgPlot dens("Layer " + std::to_string(r.layer) + " entry densities", "value", "density");
    for (const auto& [kind, kde] : {std::pair<std::string, const Kde*>{"weight", &r.weight_kde},
                                    std::pair<std::string, const Kde*>{"bias", &r.bias_kde}}) {
      const Vector x = density_grid(*kde);
      const Vector y = kde->density(x);
      CsvTable d({"x", "density"});
      for (Index j = 0; j < x.size(); ++j) d.row({x(j), y(j)});
      out.add(pre + "_" + kind + "_density.csv", d.text());
      dens.line(x, y, kind == "weight" ? "#1f77b4" : "#d62728");
    }

    if (svg) {
      out.add(pre + "_density.svg", dens.render());
      Vector re(r.eigenvalues.size()), im(r.eigenvalues.size());
      for (Index j = 0; j < re.size(); ++j) {
        re(j) = r.eigenvalues(j).real();
        im(j) = r.eigenvalues(j).imag();
      }
      eig.points(re, im, color);
      sv.line(Vector::LinSpaced(r.singular_values.size(), 0.0, static_cast<double>(r.singular_values.size() - 1)),
              r.singular_values, color);
    }
  }
  if (svg && !report.layers.empty()) {
    eig.circle(0.0, 0.0, 1.0, "#000000").equal_aspect();
    out.add("eigenvalues.svg", eig.render());
    out.add("singular_values.svg", sv.render());
  }
  return out;
}

std::string snapshot_csv(const FieldSnapshot& s) {
  CsvTable t({"t", "x", "u"});
  for (Index i = 0; i < s.grid.size(); ++i) t.row({s.t, s.grid(i), s.u(i)});
  return t.text();
}

FieldSnapshot parse_snapshot_csv(std::string_view text) {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::Configuration, "snapshot CSV: " + why); };
  const auto eol = text.find('\n');
  if (eol == std::string_view::npos || text.substr(0, eol) != "t,x,u") fail("expected header 't,x,u'");
  text.remove_prefix(eol + 1);
  std::vector<double> x, u;
  double t = std::numeric_limits<double>::quiet_NaN();
  while (!text.empty()) {
    const auto end = text.find('\n');
    std::string_view line = text.substr(0, end);
    text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
    if (line.empty()) continue;
    double v[3];
    const char* p = line.data();
    const char* stop = line.data() + line.size();
    for (int c = 0; c < 3; ++c) {
      const auto [ptr, ec] = std::from_chars(p, stop, v[c]);
      if (ec != std::errc()) fail("unreadable number in '" + std::string(line) + "'");
      p = ptr;
      if (c < 2) {
        if (p == stop || *p != ',') fail("expected three columns in '" + std::string(line) + "'");
        ++p;
      }
    }
    if (p != stop) fail("trailing characters in '" + std::string(line) + "'");
    if (std::isnan(t)) t = v[0];
    if (v[0] != t) throw Error(ErrorKind::GridMismatch, "snapshot CSV mixes several times");
    x.push_back(v[1]);
    u.push_back(v[2]);
  }
  if (x.empty()) fail("no rows");
  FieldSnapshot s;
  s.t = t;
  s.grid = Eigen::Map<Vector>(x.data(), static_cast<Index>(x.size()));
  s.u = Eigen::Map<Vector>(u.data(), static_cast<Index>(u.size()));
  return s;
}

std::string history_csv(const TrainingHistory& h) {
  CsvTable t({"step", "total", "residual", "ic", "bc"});
  for (const HistoryRecord& r : h.records)
    t.row({static_cast<double>(r.step), r.loss.total, r.loss.residual, r.loss.ic, r.loss.bc});
  return t.text();
}

// ---------------------------------------------------------------------------

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

SvgPlot& SvgPlot::line(const Vector& x, const Vector& y, const std::string& color) {
  series_.push_back({x, y, color, false});
  return *this;
}

SvgPlot& SvgPlot::points(const Vector& x, const Vector& y, const std::string& color) {
  series_.push_back({x, y, color, true});
  return *this;
}

SvgPlot& SvgPlot::circle(double cx, double cy, double r, const std::string& color) {
  circles_.push_back({cx, cy, r, color});
  return *this;
}

SvgPlot& SvgPlot::log_y(bool on) {
  log_y_ = on;
  return *this;
}

SvgPlot& SvgPlot::equal_aspect(bool on) {
  equal_ = on;
  return *this;
}

std::string SvgPlot::render() const {
  constexpr double W = 640, H = 440, left = 70, right = 20, top = 40, bottom = 50;
  auto ty = [&](double y) { return log_y_ ? std::log10(y) : y; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series_) {
    for (Index i = 0; i < s.x.size(); ++i) {
      const double yy = ty(s.y(i));
      if (!std::isfinite(s.x(i)) || !std::isfinite(yy)) continue;
      x0 = std::min(x0, s.x(i));
      x1 = std::max(x1, s.x(i));
      y0 = std::min(y0, yy);
      y1 = std::max(y1, yy);
    }
  }
  for (const Circle& c : circles_) {
    x0 = std::min(x0, c.cx - c.r);
    x1 = std::max(x1, c.cx + c.r);
    y0 = std::min(y0, c.cy - c.r);
    y1 = std::max(y1, c.cy + c.r);
  }
  if (!(x1 > x0)) { x0 -= 1; x1 += 1; }
  if (!(y1 > y0)) { y0 -= 1; y1 += 1; }
  const double pw = W - left - right, ph = H - top - bottom;
  if (equal_) {
    const double scale = std::max((x1 - x0) / pw, (y1 - y0) / ph);
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    x0 = cx - 0.5 * scale * pw;
    x1 = cx + 0.5 * scale * pw;
    y0 = cy - 0.5 * scale * ph;
    y1 = cy + 0.5 * scale * ph;
  }
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"440\" font-family=\"sans-serif\" "
                    "font-size=\"12\">\n<rect width=\"640\" height=\"440\" fill=\"white\"/>\n";
  out += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape_xml(title_) + "</text>\n";
  out += "<rect x=\"" + short_num(left) + "\" y=\"" + short_num(top) + "\" width=\"" + short_num(pw) +
         "\" height=\"" + short_num(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    out += "<text x=\"" + short_num(px(xv)) + "\" y=\"" + short_num(top + ph + 16) + "\" text-anchor=\"middle\">" +
           short_num(xv) + "</text>\n";
    const std::string label = log_y_ ? "1e" + short_num(yv) : short_num(yv);
    out += "<text x=\"" + short_num(left - 6) + "\" y=\"" + short_num(py(yv) + 4) + "\" text-anchor=\"end\">" + label +
           "</text>\n";
  }
  out += "<text x=\"" + short_num(left + pw / 2) + "\" y=\"" + short_num(H - 10) + "\" text-anchor=\"middle\">" +
         escape_xml(x_label_) + "</text>\n";
  out += "<text x=\"16\" y=\"" + short_num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         short_num(top + ph / 2) + ")\">" + escape_xml(y_label_) + "</text>\n";

  for (const Circle& c : circles_)
    out += "<ellipse cx=\"" + short_num(px(c.cx)) + "\" cy=\"" + short_num(py(c.cy)) + "\" rx=\"" +
           short_num(c.r / (x1 - x0) * pw) + "\" ry=\"" + short_num(c.r / (y1 - y0) * ph) +
           "\" fill=\"none\" stroke=\"" + c.color + "\" stroke-dasharray=\"4 3\"/>\n";
  for (const Series& s : series_) {
    if (s.dots) {
      for (Index i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(ty(s.y(i)))) continue;
        out += "<circle cx=\"" + short_num(px(s.x(i))) + "\" cy=\"" + short_num(py(ty(s.y(i)))) +
               "\" r=\"1.8\" fill=\"" + s.color + "\"/>\n";
      }
    } else {
      out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.4\" points=\"";
      for (Index i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(ty(s.y(i)))) continue;
        out += short_num(px(s.x(i))) + "," + short_num(py(ty(s.y(i)))) + " ";
      }
      out += "\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace pf
