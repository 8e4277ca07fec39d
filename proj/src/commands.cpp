#include "pf/commands.hpp"

#include "pf/burgers.hpp"
#include "pf/forensics.hpp"
#include "pf/io.hpp"
#include "pf/lab.hpp"
#include "pf/report.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <ostream>

namespace pf {
namespace {

using nlohmann::json;

int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    log << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

std::string time_tag(double t) { return format_double(t); }

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Configuration: return kExitBadConfig;
    case ErrorKind::Divergence:
    case ErrorKind::Instability: return kExitUnstable;
    case ErrorKind::CorruptDump: return kExitCorruptDump;
    case ErrorKind::UnderResolved: return kExitUnderResolved;
    case ErrorKind::GridMismatch: return kExitGridMismatch;
    default: return kExitFailure;
  }
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("PF_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return ".";
}

int cmd_train(const TrainArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    PinnConfig config;
    json inputs = json::object();
    if (!args.config.empty()) {
      const std::string text = read_file(args.config);
      inputs["config"] = {{"path", args.config.string()}, {"fnv1a", hex64(fnv1a(text))}};
      config = parse_config(text);
    }
    for (const std::string& kv : args.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::Configuration, "override '" + kv + "' is not key=value");
      set_config_key(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.validate();
    const auto dir = resolve_output_dir(args.out);
    log << "config hash " << hex64(config_hash(config)) << ", " << config.steps << " steps, output " << dir.string()
        << "\n";

    json manifest = manifest_base("train");
    manifest["config_hash"] = hex64(config_hash(config));
    manifest["seed"] = config.seed;
    manifest["inputs"] = inputs;

    auto progress = [&](const HistoryRecord& r) {
      if (args.quiet) return;
      log << "step " << r.step << "  loss " << format_double(r.loss.total) << "  (res " << format_double(r.loss.residual)
          << ", ic " << format_double(r.loss.ic) << ", bc " << format_double(r.loss.bc) << ")  "
          << format_double(std::round(r.wall_seconds * 10.0) / 10.0) << " s\n";
    };
    auto emit = [&](const TrainResult& result, const std::string& dump_name) {
      WeightDump dump{config, result.params, result.history, result.steps_completed};
      OutputSet out;
      out.add(dump_name, encode_dump(dump));
      out.add("config.txt", format_config(config));
      out.add("history.csv", history_csv(result.history));
      CsvTable timing({"step", "wall_seconds"});
      for (const auto& r : result.history.records) timing.row({static_cast<double>(r.step), r.wall_seconds});
      out.add_volatile("timing.csv", timing.text());
      out.write_all(dir, manifest);
    };

    try {
      const TrainResult result = train(config, progress);
      emit(result, "model.pfw");
      log << "wrote " << (dir / "model.pfw").string() << "\n";
      return static_cast<int>(kExitOk);
    } catch (const DivergenceError& e) {
      manifest["diverged"] = e.what();
      emit(e.checkpoint(), "checkpoint.pfw");
      log << "error (divergence): " << e.what() << "; last finite checkpoint at "
          << (dir / "checkpoint.pfw").string() << "\n";
      return static_cast<int>(kExitUnstable);
    }
  });
}

int cmd_analyze(const AnalyzeArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    const std::string bytes = [&] {
      try {
        return read_file(args.dump);
      } catch (const Error& e) {
        throw Error(ErrorKind::CorruptDump, e.what());
      }
    }();
    const WeightDump dump = decode_dump(bytes);
    const NetworkReport report = analyze_network(dump.params, args.seed);
    const auto contrast = transformer_vs_boltzmann_contrast(dump.params);
    const OutputSet out = analysis_outputs(dump, report, contrast, args.svg);

    json manifest = manifest_base("analyze");
    manifest["config_hash"] = hex64(config_hash(dump.config));
    manifest["seed"] = dump.config.seed;
    manifest["analysis_seed"] = args.seed;
    manifest["inputs"] = {{"dump", {{"path", args.dump.string()}, {"fnv1a", hex64(fnv1a(bytes))}}}};
    const auto dir = resolve_output_dir(args.out);
    out.write_all(dir, manifest);

    for (std::size_t i = 0; i < report.layers.size(); ++i) {
      const LayerReport& r = report.layers[i];
      log << "layer " << r.layer << ": kurtosis " << format_double(r.weights.kurtosis) << ", beta "
          << format_double(r.weights.beta) << ", sigma_max " << format_double(r.sigma_max) << ", radius "
          << format_double(r.radius) << (r.structured ? ", structured" : "") << (r.drop.fires ? ", drop" : "")
          << ", negative fraction " << format_double(contrast[i].negative_fraction) << "\n";
    }
    log << "radius spread " << format_double(report.radius_rel_spread) << ", all sigma_max < 1: "
        << (report.all_sigma_below_one ? "yes" : "no") << "\nwrote " << (dir / "summary.json").string() << "\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_kernel(const KernelArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    if (args.n < 2) throw Error(ErrorKind::Configuration, "kernel grid needs n >= 2");
    KernelSpec spec;
    spec.n = args.n;
    spec.nu = args.nu;
    spec.h = args.h > 0.0 ? args.h : args.h_cells * spec.dx();
    const Vector grid = periodic_grid(spec.n);
    if (args.u_field == "sin") {
      spec.u_field = (2.0 * kPi * grid.array()).sin();
    } else if (args.u_field != "zero") {
      const FieldSnapshot s = parse_snapshot_csv(read_file(args.u_field));
      if (s.grid.size() != spec.n || (s.grid - grid).cwiseAbs().maxCoeff() > 1e-12)
        throw Error(ErrorKind::GridMismatch, "u-field snapshot grid differs from the kernel grid");
      spec.u_field = s.u;
    }
    const Matrix m = burgers_kernel_matrix(spec);

    std::vector<std::string> header{"row"};
    for (Index j = 0; j < spec.n; ++j) header.push_back("c" + std::to_string(j));
    CsvTable matrix(header);
    for (Index i = 0; i < spec.n; ++i) {
      std::vector<double> row{static_cast<double>(i)};
      for (Index j = 0; j < spec.n; ++j) row.push_back(m(i, j));
      matrix.row(row);
    }
    CsvTable band({"halfwidth", "plain", "periodic"});
    for (Index k = 0; k < spec.n; ++k) band.row({static_cast<double>(k), band_energy(m, k), band_energy(m, k, true)});

    const Index k10 = std::min<Index>(10, spec.n - 1);
    const Index k5h = std::min<Index>(static_cast<Index>(std::ceil(5.0 * spec.h / spec.dx() - 1e-9)), spec.n - 1);
    json summary = {
        {"n", spec.n},
        {"rows", m.rows()},
        {"cols", m.cols()},
        {"h", spec.h},
        {"dx", spec.dx()},
        {"h_over_dx", spec.h / spec.dx()},
        {"nu", spec.nu},
        {"u_field", args.u_field},
        {"max_asymmetry", (m - m.transpose()).cwiseAbs().maxCoeff()},
        {"band_energy",
         {{"k10", {{"halfwidth", k10}, {"plain", band_energy(m, k10)}, {"periodic", band_energy(m, k10, true)}}},
          {"k5h", {{"halfwidth", k5h}, {"plain", band_energy(m, k5h)}, {"periodic", band_energy(m, k5h, true)}}}}},
    };
    OutputSet out;
    out.add("kernel_matrix.csv", matrix.text());
    out.add("kernel_band_energy.csv", band.text());
    out.add("kernel.json", summary.dump(2) + "\n");
    json manifest = manifest_base("kernel");
    manifest["parameters"] = {{"n", spec.n}, {"h", spec.h}, {"nu", spec.nu}, {"u_field", args.u_field}};
    const auto dir = resolve_output_dir(args.out);
    out.write_all(dir, manifest);
    log << "W_Bur matrix " << m.rows() << " x " << m.cols() << ", h/dx " << format_double(spec.h / spec.dx())
        << ", band energy k=" << k10 << ": " << format_double(band_energy(m, k10, true)) << " (periodic), "
        << format_double(band_energy(m, k10)) << " (plain)\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_oracle(const OracleArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    BurgersProblem p;
    p.nu = args.nu;
    p.n_x = args.n;
    p.cfl = args.cfl;
    p.times = args.times;
    if (args.advection == "none")
      p.advection = Advection::None;
    else if (args.advection != "burgers")
      throw Error(ErrorKind::Configuration, "advection must be 'burgers' or 'none', got '" + args.advection + "'");
    if (p.n_x < 64 || !(p.nu > 0.0) || !(p.cfl > 0.0 && p.cfl <= 0.5))
      throw Error(ErrorKind::Configuration, "oracle needs n >= 64, nu > 0 and 0 < cfl <= 0.5");
    const auto u0 = [](double x) { return std::sin(2.0 * kPi * x); };
    const auto snaps = solve_burgers(p, u0);

    OutputSet out;
    json rows = json::array();
    BurgersProblem start = p;
    start.times = {0.0};
    const double mean0 = grid_mean(solve_burgers(start, u0).front());
    for (const FieldSnapshot& s : snaps) {
      out.add("oracle_t" + time_tag(s.t) + ".csv", snapshot_csv(s));
      double grad = 0.0;
      for (Index i = 0; i < s.u.size(); ++i)
        grad = std::max(grad, std::abs(s.u((i + 1) % s.u.size()) - s.u(i)) / (s.grid(1) - s.grid(0)));
      rows.push_back({{"t", s.t},
                      {"mean", grid_mean(s)},
                      {"mean_drift", grid_mean(s) - mean0},
                      {"energy", grid_energy(s)},
                      {"max_abs_u", s.u.cwiseAbs().maxCoeff()},
                      {"max_gradient", grad}});
      log << "t=" << format_double(s.t) << "  mean drift " << format_double(grid_mean(s) - mean0) << "  energy "
          << format_double(grid_energy(s)) << "  max|u_x| " << format_double(grad) << "\n";
    }
    json summary = {{"nu", p.nu}, {"n_x", p.n_x}, {"cfl", p.cfl}, {"advection", args.advection}, {"snapshots", rows}};
    out.add("oracle.json", summary.dump(2) + "\n");
    json manifest = manifest_base("oracle");
    manifest["parameters"] = {{"nu", p.nu}, {"n_x", p.n_x}, {"cfl", p.cfl}, {"advection", args.advection}};
    out.write_all(resolve_output_dir(args.out), manifest);
    return static_cast<int>(kExitOk);
  });
}

int cmd_compare(const CompareArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    if (args.snapshots.empty()) throw Error(ErrorKind::Configuration, "compare needs at least one snapshot CSV");
    const WeightDump dump = load_dump(args.dump);
    const Interval xd = dump.config.x_domain, td = dump.config.t_domain;

    CsvTable table({"t", "n_x", "rel_l2_error"});
    std::string md = "| t | n_x | relative L2 error |\n|---|---|---|\n";
    json inputs = json::array();
    for (const auto& path : args.snapshots) {
      const std::string text = read_file(path);
      inputs.push_back({{"path", path.string()}, {"fnv1a", hex64(fnv1a(text))}});
      const FieldSnapshot oracle = parse_snapshot_csv(text);
      const Index n = oracle.grid.size();
      const double dx = n > 1 ? oracle.grid(1) - oracle.grid(0) : 0.0;
      bool uniform = n > 1 && dx > 0.0;
      for (Index i = 1; uniform && i < n; ++i)
        uniform = std::abs(oracle.grid(i) - oracle.grid(i - 1) - dx) <= 1e-9 * (1.0 + std::abs(dx));
      if (!uniform) throw Error(ErrorKind::GridMismatch, path.string() + ": grid is not uniform and increasing");
      if (oracle.grid(0) < xd.lo - 1e-12 || oracle.grid(n - 1) > xd.hi + 1e-12)
        throw Error(ErrorKind::GridMismatch, path.string() + ": grid leaves the trained x domain");
      if (oracle.t < td.lo - 1e-12 || oracle.t > td.hi + 1e-12)
        throw Error(ErrorKind::GridMismatch, path.string() + ": time leaves the trained t domain");

      FieldSnapshot pred{oracle.t, oracle.grid, predict_field(dump.params, oracle.grid, oracle.t)};
      const double err = relative_l2_error(pred, oracle);
      table.row({oracle.t, static_cast<double>(n), err});
      md += "| " + format_double(oracle.t) + " | " + std::to_string(n) + " | " + format_double(err) + " |\n";
      log << "t=" << format_double(oracle.t) << "  relative L2 error " << format_double(err) << "\n";
    }
    OutputSet out;
    out.add("compare.csv", table.text());
    out.add("compare.md", md);
    json manifest = manifest_base("compare");
    manifest["config_hash"] = hex64(config_hash(dump.config));
    manifest["seed"] = dump.config.seed;
    manifest["inputs"] = {{"dump", args.dump.string()}, {"snapshots", inputs}};
    out.write_all(resolve_output_dir(args.out), manifest);
    return static_cast<int>(kExitOk);
  });
}

}  // namespace pf
