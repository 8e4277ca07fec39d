// pinnlab: train Burgers PINNs, dissect their weights, and build the
// comparison kernels and reference solutions.

#include "pf/commands.hpp"

#include <CLI11.hpp>

#include <malloc.h>

#include <iostream>

int main(int argc, char** argv) {
  // Training churns through large, short-lived activation buffers; keeping
  // them on the heap avoids an mmap/munmap pair per allocation.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"pinnlab - Burgers PINN training and weight forensics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pinnlab 1.0.0");

  pf::TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a PINN and write model.pfw, history.csv and manifest.json");
  t->add_option("config", train.config, "key=value config file")->check(CLI::ExistingFile);
  t->add_option("--set", train.overrides, "Override a config key (key=value), repeatable");
  t->add_option("-o,--out", train.out, "Output directory (default: $PF_OUTPUT_DIR or .)");
  t->add_flag("-q,--quiet", train.quiet, "Suppress progress lines");

  pf::AnalyzeArgs analyze;
  auto* a = app.add_subcommand("analyze", "Run the weight-forensics battery on a dump");
  a->add_option("dump", analyze.dump, "Weight dump (.pfw)")->required();
  a->add_option("-o,--out", analyze.out, "Output directory (default: $PF_OUTPUT_DIR or .)");
  a->add_option("--seed", analyze.seed, "Seed for baselines and cross-validation folds");
  bool no_svg = false;
  a->add_flag("--no-svg", no_svg, "Skip the SVG quick-look plots");

  pf::KernelArgs kernel;
  auto* k = app.add_subcommand("kernel", "Assemble the Burgers weight kernel matrix");
  k->add_option("--nu", kernel.nu, "Viscosity");
  k->add_option("-n", kernel.n, "Grid nodes");
  k->add_option("--width", kernel.h, "Kernel width h (absolute)");
  k->add_option("--h-cells", kernel.h_cells, "Kernel width in grid spacings (used when --width is absent)");
  k->add_option("--u-field", kernel.u_field, "zero, sin, or a t,x,u snapshot CSV");
  k->add_option("-o,--out", kernel.out, "Output directory (default: $PF_OUTPUT_DIR or .)");

  pf::OracleArgs oracle;
  auto* o = app.add_subcommand("oracle", "Finite-difference reference solution for u0 = sin(2 pi x)");
  o->add_option("--nu", oracle.nu, "Viscosity");
  o->add_option("-n", oracle.n, "Grid nodes");
  o->add_option("--cfl", oracle.cfl, "Step safety factor in (0, 0.5]");
  o->add_option("--times", oracle.times, "Snapshot times")->delimiter(',');
  o->add_option("--advection", oracle.advection, "burgers or none");
  o->add_option("-o,--out", oracle.out, "Output directory (default: $PF_OUTPUT_DIR or .)");

  pf::CompareArgs compare;
  auto* c = app.add_subcommand("compare", "Relative L2 error of a trained network against snapshots");
  c->add_option("dump", compare.dump, "Weight dump (.pfw)")->required();
  c->add_option("snapshots", compare.snapshots, "Snapshot CSVs (t,x,u)")->required();
  c->add_option("-o,--out", compare.out, "Output directory (default: $PF_OUTPUT_DIR or .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pf::kExitBadConfig;
  }

  if (*t) return pf::cmd_train(train, std::cerr);
  if (*a) {
    analyze.svg = !no_svg;
    return pf::cmd_analyze(analyze, std::cerr);
  }
  if (*k) return pf::cmd_kernel(kernel, std::cerr);
  if (*o) return pf::cmd_oracle(oracle, std::cerr);
  return pf::cmd_compare(compare, std::cerr);
}
