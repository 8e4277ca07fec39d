#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// Regression checks on the trained reference networks in fixtures/.

#include "pf/burgers.hpp"
#include "pf/io.hpp"

#include <filesystem>
#include <map>

using namespace pf;

namespace {

const WeightDump& reference(std::uint64_t seed = 42) {
  static std::map<std::uint64_t, WeightDump> cache;
  auto it = cache.find(seed);
  if (it == cache.end())
    it = cache.emplace(seed, load_dump(std::filesystem::path(PF_FIXTURE_DIR) / ("seed" + std::to_string(seed)) /
                                       "model.pfw")).first;
  return it->second;
}

}  // namespace

TEST_CASE("reference fixtures match the default config") {
  for (std::uint64_t seed : {42, 43, 44}) {
    PinnConfig c;
    c.seed = seed;
    const WeightDump& d = reference(seed);
    CHECK(config_hash(d.config) == config_hash(c));
    CHECK(d.steps_completed == c.steps);
    CHECK(d.history.records.back().loss.total < 1e-3);
  }
}

TEST_CASE("reference network reproduces the initial condition") {
  const Vector x = periodic_grid(400);
  const Vector u = predict_field(reference().params, x, 0.0);
  CHECK((u - (2.0 * kPi * x.array()).sin().matrix()).cwiseAbs().maxCoeff() < 5e-2);
}

TEST_CASE("reference network puts the shock at x = 0.5") {
  const Vector x = periodic_grid(1000);
  const Vector u = predict_field(reference().params, x, 0.5);
  Index steepest = 0;
  double slope = 0;
  for (Index i = 0; i + 1 < x.size(); ++i) {
    const double s = std::abs(u(i + 1) - u(i)) * 1000.0;
    if (s > slope) {
      slope = s;
      steepest = i;
    }
  }
  CHECK(std::abs(x(steepest) - 0.5) < 0.01);
  CHECK(slope > 20.0);
}

TEST_CASE("adam loss is non-increasing over 500-step windows within 10%") {
  for (std::uint64_t seed : {42, 43, 44}) {
    const auto& records = reference(seed).history.records;
    for (std::size_t i = 0; i + 1 < records.size(); ++i) {
      if (records[i + 1].step - records[i].step != 500) continue;
      INFO("seed " << seed << ", steps " << records[i].step << " -> " << records[i + 1].step);
      CHECK(records[i + 1].loss.total <= 1.1 * records[i].loss.total);
    }
  }
}
