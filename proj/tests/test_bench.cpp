#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pnpg/bench.hpp"
#include "pnpg/errors.hpp"
#include "pnpg/projector.hpp"
#include "test_util.hpp"

using namespace pnpg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pnpg_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// results.csv with the wall_seconds column blanked.
std::string without_timing(const std::string& csv) {
  std::stringstream in(csv), out;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    if (cols.size() == 11) cols[9] = "";
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    out << '\n';
  }
  return out.str();
}

ExperimentSpec small_skyline() {
  ExperimentSpec spec;
  spec.family = Family::SkylineGaussian;
  spec.p = 256;
  spec.ratio = 0.4;
  spec.a_grid = {-4, -2};
  spec.seeds = {1, 2};
  spec.solvers = {"pnpg", "npgs"};
  spec.max_iter = 300;
  return spec;
}

}  // namespace

TEST_CASE("skyline signal") {
  const Vector x = gen_skyline(1024);
  CHECK((x.array() >= 0.0).all());
  CHECK(x == gen_skyline(1024));
  CHECK(x.maxCoeff() > 0.0);
  const double e = top_coefficient_energy(WaveletSpec::line(WaveletFamily::Daubechies4, 3, 1024), x, 0.05);
  CHECK(e >= 0.98);
  CHECK_THROWS_AS(gen_skyline(32), InputError);
  CHECK_THROWS_AS(gen_skyline(1000), InputError);
  CHECK(gen_skyline(64).size() == 64);
}

TEST_CASE("PET phantom") {
  for (int n : {32, 64, 128}) {
    const PetPhantom ph = gen_pet_phantom(n, 3);
    CHECK((ph.activity.array() >= 0.0).all());
    CHECK((ph.attenuation.array() >= 0.0).all());
    CHECK(ph.activity.sum() > 0.0);
    // Corners lie outside the body ellipse.
    CHECK(ph.activity[0] == 0.0);
    CHECK(ph.activity[n * n - 1] == 0.0);
    CHECK(ph.activity == gen_pet_phantom(n, 3).activity);
  }
  CHECK(gen_pet_phantom(32, 1).activity != gen_pet_phantom(32, 2).activity);
  CHECK_THROWS_AS(gen_pet_phantom(48, 1), InputError);
}

TEST_CASE("Poisson simulation") {
  auto g = build_line_projector(32, 30, 32);
  const PetPhantom ph = gen_pet_phantom(32, 1);

  const PoissonSimulation zero = simulate_poisson(g, Vector::Zero(32 * 32), 1e6, 1);
  CHECK(zero.y.isZero());
  CHECK(zero.intercept.isZero());

  const double target = 1e6;
  const PoissonSimulation sim = simulate_poisson(g, ph.activity, target, 4);
  const Vector mean = apply(*sim.phi, ph.activity);
  CHECK(mean.sum() == doctest::Approx(target).epsilon(1e-12));
  CHECK((mean + sim.intercept).sum() == doctest::Approx(1.1 * target).epsilon(1e-12));
  CHECK(sim.intercept[0] == doctest::Approx(target / (10.0 * mean.size())));
  const double expected = 1.1 * target;
  CHECK(std::abs(sim.y.sum() - expected) <= 5.0 * std::sqrt(expected));
  for (Eigen::Index k = 0; k < sim.y.size(); ++k) CHECK(sim.y[k] == std::floor(sim.y[k]));
  CHECK(sim.y == simulate_poisson(g, ph.activity, target, 4).y);

  auto neg = std::make_shared<DenseOperator>(-Matrix::Identity(2, 2));
  CHECK_THROWS_AS(simulate_poisson(neg, Vector::Ones(2), 10.0, 1), InputError);
}

TEST_CASE("noiseless Gaussian measurements and RSE") {
  auto phi = gaussian_sensing(5, 8, 1);
  const Vector x = gen_skyline(64).head(8) + Vector::Ones(8);
  CHECK(simulate_gaussian_noiseless(*phi, Vector::Zero(8)).isZero());
  CHECK((simulate_gaussian_noiseless(*phi, 2 * x) - 2 * simulate_gaussian_noiseless(*phi, x)).norm() <= 1e-12);
  CHECK(simulate_gaussian_noiseless(*phi, x).size() == 5);

  CHECK(rse(x, x) == 0.0);
  CHECK(rse(Vector::Zero(8), x) == doctest::Approx(1.0));
  CHECK(rse(2 * x, x) == doctest::Approx(1.0));
  CHECK_THROWS_AS(rse(x, Vector::Zero(8)), InputError);
}

TEST_CASE("spec validation and parsing") {
  ExperimentSpec spec = small_skyline();
  CHECK_NOTHROW(spec.validate());
  spec.a_grid.clear();
  CHECK_THROWS_AS(spec.validate(), InputError);
  spec = small_skyline();
  spec.seeds.clear();
  CHECK_THROWS_AS(spec.validate(), InputError);
  spec = small_skyline();
  spec.solvers = {"spiral"};
  CHECK_THROWS_AS(spec.validate(), InputError);
  CHECK(parse_family("pet") == Family::PetPoisson);
  CHECK_THROWS_AS(parse_family("mri"), InputError);
  CHECK(parse_penalty("tv") == PenaltyChoice::TV);
}

TEST_CASE("best-a selection") {
  std::vector<RunResult> runs;
  auto add = [&](const char* solver, double a, double r) {
    RunResult x;
    x.solver = solver;
    x.a = a;
    x.rse = r;
    runs.push_back(x);
  };
  add("pnpg", -2, 0.3);
  add("pnpg", -2, 0.1);
  add("pnpg", -1, 0.15);
  add("pnpg", -1, 0.16);
  add("npgs", -3, 0.5);
  add("npgs", -1, 0.5);
  const auto best = best_a(runs);
  REQUIRE(best.size() == 2);
  CHECK(best[0].solver == "pnpg");
  CHECK(best[0].a == -1);
  CHECK(best[0].mean_rse == doctest::Approx(0.155));
  CHECK(best[1].a == -3);  // tie goes to the smaller a
}

TEST_CASE("singleton sweep yields one row per solver") {
  ExperimentSpec spec = small_skyline();
  spec.a_grid = {-3};
  spec.seeds = {1};
  const SweepResult res = run_sweep(spec);
  REQUIRE(res.runs.size() == 2);
  CHECK(res.runs[0].solver == "pnpg");
  CHECK(res.runs[1].solver == "npgs");
  for (const auto& r : res.runs) {
    CHECK(r.error.empty());
    CHECK(r.iterations == static_cast<int>(r.trace.records.size()));
  }
}

TEST_CASE("failed runs are recorded and the sweep continues") {
  ExperimentSpec spec;
  spec.family = Family::PetPoisson;
  spec.counts = 1e4;
  spec.a_grid = {0};
  spec.seeds = {1};
  spec.solvers = {"gfb", "pnpg"};
  spec.max_iter = 20;
  const SweepResult res = run_sweep(spec);
  REQUIRE(res.runs.size() == 2);
  CHECK_FALSE(res.runs[0].error.empty());
  CHECK(std::isnan(res.runs[0].rse));
  CHECK(res.runs[1].error.empty());
}

TEST_CASE("export layout and round trip") {
  SweepResult empty;
  empty.spec = small_skyline();
  const fs::path d0 = scratch("empty");
  export_results(empty, d0);
  CHECK(slurp(d0 / "results.csv") == results_csv_header() + "\n");
  CHECK(read_results_csv(d0 / "results.csv").empty());

  const ExperimentSpec spec = small_skyline();
  const SweepResult res = run_sweep(spec);
  const fs::path d1 = scratch("one");
  export_results(res, d1);
  const auto rows = read_results_csv(d1 / "results.csv");
  REQUIRE(rows.size() == res.runs.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].rse == res.runs[k].rse);
    CHECK(rows[k].solver == res.runs[k].solver);
    std::ifstream t(d1 / "traces" / ("run_" + std::to_string(k) + ".csv"));
    int lines = 0;
    for (std::string l; std::getline(t, l);) ++lines;
    CHECK(lines - 1 == res.runs[k].iterations);
  }
  const ExperimentSpec back = load_manifest(d1 / "manifest.json");
  CHECK(back.a_grid == spec.a_grid);
  CHECK(back.seeds == spec.seeds);
  CHECK(back.solvers == spec.solvers);
  CHECK(back.p == spec.p);
  CHECK(back.ratio == spec.ratio);
  CHECK(back.max_iter == spec.max_iter);

  CHECK_THROWS(export_results(res, "/proc/definitely/not/writable"));
}

TEST_CASE("sweeps are reproducible and thread-count independent") {
  ExperimentSpec spec = small_skyline();
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  export_results(run_sweep(spec), a);
  spec.threads = 3;
  export_results(run_sweep(spec), b);
  CHECK(without_timing(slurp(a / "results.csv")) == without_timing(slurp(b / "results.csv")));
}

TEST_CASE("NPGS at u = U returns the zero signal") {
  ExperimentSpec spec = small_skyline();
  spec.a_grid = {0};
  spec.seeds = {1};
  spec.solvers = {"npgs"};
  const SweepResult res = run_sweep(spec);
  CHECK(res.runs[0].rse == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("TV beats l1 on PET at high counts") {
  ExperimentSpec spec;
  spec.family = Family::PetPoisson;
  spec.counts = 1e6;
  spec.a_grid = {-1, 0, 1};
  spec.seeds = {1};
  spec.solvers = {"pnpg"};
  spec.reg = PenaltyChoice::TV;
  const double tv = best_a(run_sweep(spec).runs).at(0).mean_rse;
  spec.reg = PenaltyChoice::L1;
  const double l1 = best_a(run_sweep(spec).runs).at(0).mean_rse;
  CHECK(tv < l1);
}

TEST_CASE("continuation reaches a tight objective with fewer evaluations") {
  ExperimentSpec spec;
  spec.family = Family::SkylineGaussian;
  const Instance inst = build_instance(spec, 1);
  const double u = 1e-5 * inst.weight_scale;
  const SolveResult plain = run_solver("pnpg", inst, u, spec);
  const SolveResult cont = run_solver("pnpg_cont", inst, u, spec);
  double fstar = INFINITY;
  for (const auto* r : {&plain, &cont}) {
    for (const auto& rec : r->trace.records) fstar = std::min(fstar, rec.f);
  }
  const double target = fstar + 1e-6 * plain.trace.initial_f;
  auto evals = [&](const SolveResult& r) {
    for (const auto& rec : r.trace.records) {
      if (rec.weight == u && rec.f <= target) return rec.nll_evals;
    }
    return -1LL;
  };
  const long long e_plain = evals(plain), e_cont = evals(cont);
  REQUIRE(e_plain > 0);
  REQUIRE(e_cont > 0);
  CHECK(e_cont < e_plain);
}
