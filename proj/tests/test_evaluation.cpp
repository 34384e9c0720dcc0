#include "helpers.hpp"

#include "tsr/evaluation.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace tsr;
using tsr::test::close;

namespace {

DensityGrid grid(double rho, double dt = 0.01, double dx = 0.001, double T = 2.0, double L = 3.0) {
  const int nt = static_cast<int>(std::lround(T / dt)) + 1;
  const int nx = static_cast<int>(std::lround(L / dx));
  return DensityGrid(0.0, dt, 0.5 * dx, dx, nt, nx, rho);
}

DensityEstimate constant(double value) {
  return [value](std::span<const double> t, std::span<const double>) { return std::vector<double>(t.size(), value); };
}

DensityEstimate shifted(const DensityGrid& truth, double delta) {
  return [&truth, delta](std::span<const double> t, std::span<const double> x) {
    std::vector<double> out(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) out[k] = truth.interpolate(t[k], x[k]) + delta;
    return out;
  };
}

RegionBounds fixed(double lo, double hi) {
  return [lo, hi](double) { return std::make_pair(lo, hi); };
}

DensityGrid wavy() {
  DensityGrid g = grid(0.0, 0.02, 0.01);
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < g.nx; ++j) g.at(n, j) = 0.5 + 0.3 * std::sin(2.0 * g.position(j) - g.time(n));
  return g;
}

}  // namespace

TEST_CASE("generalization error of a constant offset") {
  const DensityGrid truth = grid(0.5);
  CHECK(generalization_error(truth, constant(0.5), fixed(0.5, 2.5)) == 0.0);
  CHECK(generalization_error(truth, constant(0.3), fixed(0.5, 2.5)) == doctest::Approx(0.04 * 2.0 * 2.0).epsilon(1e-12));
  // A widening region integrates its width: int_0^2 (0.5 + t) dt = 3.
  const RegionBounds widening = [](double t) { return std::make_pair(0.5, 1.0 + t); };
  CHECK(generalization_error(truth, constant(0.4), widening) == doctest::Approx(0.01 * 3.0).epsilon(1e-10));
  // Bounds are clipped to the road.
  CHECK(generalization_error(truth, constant(0.4), fixed(-1.0, 9.0)) == doctest::Approx(0.01 * 3.0 * 2.0).epsilon(1e-10));
}

TEST_CASE("generalization error matches a closed-form integral") {
  DensityGrid truth = grid(0.0, 0.01, 0.0005);
  for (int n = 0; n < truth.nt; ++n)
    for (int j = 0; j < truth.nx; ++j) truth.at(n, j) = 0.2 * truth.position(j);
  // int_0^2 int_0.5^2.5 (0.2 x)^2 dx dt = 0.04 * 2 * (2.5^3 - 0.5^3) / 3
  const double exact = 0.04 * 2.0 * (std::pow(2.5, 3) - std::pow(0.5, 3)) / 3.0;
  CHECK(close(generalization_error(truth, constant(0.0), fixed(0.5, 2.5)), exact, 1e-6, 0.0));
}

TEST_CASE("generalization error is quadratic in the error and additive in time") {
  const DensityGrid truth = wavy();
  const double base = generalization_error(truth, shifted(truth, 0.05), fixed(0.3, 2.7));
  CHECK(generalization_error(truth, shifted(truth, 0.1), fixed(0.3, 2.7)) == doctest::Approx(4.0 * base).epsilon(1e-10));
  CHECK(generalization_error(truth, shifted(truth, -0.05), fixed(0.3, 2.7)) == doctest::Approx(base).epsilon(1e-12));
  const double first = generalization_error(truth, shifted(truth, 0.05), fixed(0.3, 2.7), 0.0, 1.0);
  const double second = generalization_error(truth, shifted(truth, 0.05), fixed(0.3, 2.7), 1.0, 2.0);
  CHECK(first + second == doctest::Approx(base).epsilon(1e-12));
  CHECK(generalization_error(truth, shifted(truth, 0.0), fixed(0.3, 2.7)) <= 1e-28);
  CHECK_THROWS_AS(generalization_error(truth, constant(0.1), fixed(1.0, 1.0)), std::domain_error);
}

TEST_CASE("probe region follows the outermost vehicles") {
  TrajectorySet probes;
  for (int i = 0; i < 3; ++i) {
    Trajectory tr;
    tr.id = i;
    tr.t = {0.0, 1.0, 2.0};
    tr.y = {0.2 + 0.4 * i, 0.5 + 0.4 * i, 0.8 + 0.6 * i};
    probes.vehicles.push_back(tr);
  }
  const RegionBounds b = probe_region(probes);
  CHECK(b(0.0).first == doctest::Approx(0.2));
  CHECK(b(0.0).second == doctest::Approx(1.0));
  CHECK(b(1.5).first == doctest::Approx(0.65));
  CHECK(b(1.5).second == doctest::Approx(0.5 * (1.3 + 2.0)));
  CHECK_THROWS_AS(probe_region(TrajectorySet{}), std::invalid_argument);
}

TEST_CASE("velocity error") {
  const VelocityModel g = VelocityModel::greenshields(1.0);
  CHECK(velocity_error([&g](double r) { return g.velocity(r); }, g) == 0.0);
  CHECK(velocity_error([&g](double r) { return g.velocity(r) + 0.1; }, g) == doctest::Approx(0.1));
  // 1 - r against 1 - r^2 differs by at most one quarter at r = 1/2.
  CHECK(velocity_error([](double r) { return 1.0 - r * r; }, g) == doctest::Approx(0.25));

  ParameterSet ps = tsr::test::random_parameters(2);
  tsr::test::set_greenshields_velocity(ps, 1.0);
  CHECK(velocity_error(ps, g) <= 1e-12);
  const ParameterSet other = tsr::test::random_parameters(3);
  CHECK(velocity_error(other, g) ==
        doctest::Approx(velocity_error([&other](double r) { return velocity_forward(other, r); }, g)).epsilon(1e-12));
}

TEST_CASE("reconstruction export") {
  const ParameterSet ps = tsr::test::random_parameters(11, 2);
  GridSpec spec{0.0, 0.5, 7, 0.2, 0.25, 9};
  const Reconstruction r = export_reconstruction(ps, spec);
  CHECK(r.density.nt == 7);
  CHECK(r.density.nx == 9);
  for (int n = 0; n < 7; ++n)
    for (int j = 0; j < 9; ++j) CHECK(r.density.at(n, j) == doctest::Approx(density_forward(ps, 0.5 * n, 0.2 + 0.25 * j)).epsilon(1e-14));
  REQUIRE(r.trajectories.vehicles.size() == 2);
  for (int i = 0; i < 2; ++i)
    for (int n = 0; n < 7; ++n) CHECK(r.trajectories.vehicles[i].y[n] == doctest::Approx(trajectory_forward(ps, i, 0.5 * n)).epsilon(1e-14));

  const auto dir = std::filesystem::temp_directory_path() / "tsr_export_test";
  write_reconstruction(r, dir);
  const DensityGrid back = DensityGrid::read_csv(dir / "reconstruction_density.csv");
  CHECK(back.nt == 7);
  CHECK(back.nx == 9);
  for (std::size_t k = 0; k < back.values.size(); ++k) CHECK(back.values[k] == doctest::Approx(r.density.values[k]).epsilon(1e-8));
  const TrajectorySet trs = TrajectorySet::read_csv(dir / "reconstruction_trajectories.csv");
  CHECK(trs.vehicles.size() == 2);
  std::filesystem::remove_all(dir);

  GridSpec outside = spec;
  outside.nt = 8;
  CHECK_THROWS_AS(export_reconstruction(ps, outside), std::domain_error);
  CHECK_THROWS_AS(export_reconstruction(ps, GridSpec{}), std::invalid_argument);
}

TEST_CASE("studies run every combination and survive failures") {
  int calls = 0;
  auto runner = [&calls](const std::string& c, std::uint64_t seed, bool pretrain) {
    ++calls;
    if (c == "b" && seed == 7 && !pretrain) throw std::runtime_error("diverged");
    EvaluationResult r;
    r.ge = 0.01 * static_cast<double>(seed) + (pretrain ? 0.0 : 1.0);
    r.time_s = 2.0;
    return r;
  };
  int progress = 0;
  const StudySummary s = run_study({"a", "b"}, {5, 6, 7}, runner, [&progress](const EvaluationResult&) { ++progress; });
  CHECK(calls == 12);
  CHECK(progress == 12);
  CHECK(s.results.size() == 12);
  const auto groups = s.groups();
  CHECK(groups.size() == 4);
  const GroupStats a = s.group("a", true);
  CHECK(a.runs == 3);
  CHECK(a.failures == 0);
  CHECK(a.mean == doctest::Approx(0.06));
  CHECK(a.variance == doctest::Approx(1e-4));
  CHECK(a.mean_time_s == 2.0);
  const GroupStats bn = s.group("b", false);
  CHECK(bn.runs == 2);
  CHECK(bn.failures == 1);
  CHECK(bn.mean == doctest::Approx(1.055));
  CHECK_THROWS_AS(s.group("c", true), std::out_of_range);

  std::stringstream ss;
  s.write_csv(ss);
  const StudySummary back = StudySummary::read_csv(ss);
  REQUIRE(back.results.size() == 12);
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(back.results[k].case_name == s.results[k].case_name);
    CHECK(back.results[k].seed == s.results[k].seed);
    CHECK(back.results[k].ok == s.results[k].ok);
    if (s.results[k].ok) CHECK(back.results[k].ge == s.results[k].ge);
  }
  CHECK(back.group("b", false).failures == 1);
  std::ostringstream table;
  s.write_table(table);
  CHECK(table.str().find("mean GE") != std::string::npos);
  CHECK_THROWS_AS(run_study({"a"}, {1}, runner), std::invalid_argument);
}
