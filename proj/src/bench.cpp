#include "pnpg/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "pnpg/projector.hpp"
#include "pnpg/wavelet.hpp"

namespace pnpg {

namespace {

bool is_power_of_two(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

int log2_exact(Eigen::Index n) {
  int k = 0;
  while ((Eigen::Index{1} << k) < n) ++k;
  return k;
}

// Shapes on t in [0, 1).
double triangle(double t, double centre, double half_width, double height) {
  return std::max(0.0, height * (1.0 - std::abs(t - centre) / half_width));
}
double rectangle(double t, double lo, double hi, double height) {
  return (t >= lo && t < hi) ? height : 0.0;
}
double sinusoid(double t, double lo, double hi, double height) {
  return (t >= lo && t < hi) ? height * std::sin(M_PI * (t - lo) / (hi - lo)) : 0.0;
}
double parabola(double t, double lo, double hi, double height) {
  if (t < lo || t >= hi) return 0.0;
  const double mid = 0.5 * (lo + hi);
  const double w = 0.5 * (hi - lo);
  return height * (1.0 - (t - mid) * (t - mid) / (w * w));
}

struct Ellipse {
  double cx, cy, ax, ay;
  bool contains(double x, double y) const {
    const double u = (x - cx) / ax;
    const double v = (y - cy) / ay;
    return u * u + v * v <= 1.0;
  }
};

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{seed, salt};
  return std::mt19937_64(seq);
}

}  // namespace

Vector gen_skyline(Eigen::Index p) {
  if (p < 64 || !is_power_of_two(p)) throw InputError("gen_skyline: p must be a power of two >= 64");
  Vector x(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(p);
    x[k] = std::max({triangle(t, 0.15, 0.06, 1.0), rectangle(t, 0.30, 0.36, 0.8),
                     sinusoid(t, 0.50, 0.58, 1.2), parabola(t, 0.72, 0.80, 0.9)});
  }
  return x;
}

PetPhantom gen_pet_phantom(int grid_n, std::uint64_t seed) {
  if (grid_n != 32 && grid_n != 64 && grid_n != 128) {
    throw InputError("gen_pet_phantom: grid_n must be 32, 64 or 128");
  }
  const Ellipse body{0.0, 0.0, 0.85, 0.6};
  const Ellipse lungs[2] = {{-0.4, 0.05, 0.25, 0.35}, {0.4, 0.05, 0.25, 0.35}};
  const Ellipse heart{0.12, -0.1, 0.18, 0.15};
  const Ellipse spine{0.0, -0.45, 0.1, 0.1};
  // Roughly 2 attenuation lengths across the body.
  const double kappa_body = 2.0 / (0.85 * grid_n);

  std::mt19937_64 rng = stream(seed, 0x5eed);
  std::uniform_real_distribution<double> ux(-0.55, 0.55);
  std::uniform_real_distribution<double> uy(-0.35, 0.35);
  std::vector<Ellipse> lesions;
  for (int k = 0; k < 3; ++k) {
    const double r = 0.06 + 0.02 * k;
    lesions.push_back({ux(rng), uy(rng), r, r});
  }

  PetPhantom out;
  const Eigen::Index n = grid_n;
  out.activity = Vector::Zero(n * n);
  out.attenuation = Vector::Zero(n * n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const double x = (c + 0.5) / n * 2.0 - 1.0;
      const double y = 1.0 - (r + 0.5) / n * 2.0;
      if (!body.contains(x, y)) continue;
      double act = 1.0;
      double mu = kappa_body;
      if (lungs[0].contains(x, y) || lungs[1].contains(x, y)) {
        act = 0.3;
        mu = 0.3 * kappa_body;
      }
      if (spine.contains(x, y)) {
        act = 0.5;
        mu = 1.8 * kappa_body;
      }
      if (heart.contains(x, y)) act = 3.0;
      for (const Ellipse& e : lesions) {
        if (e.contains(x, y)) act = 5.0;
      }
      out.activity[r * n + c] = act;
      out.attenuation[r * n + c] = mu;
    }
  }
  return out;
}

PoissonSimulation simulate_poisson(OperatorPtr phi, const Vector& x, double target_counts,
                                   std::uint64_t seed) {
  if (!phi) throw InputError("simulate_poisson: null operator");
  if (!(target_counts > 0.0) || !std::isfinite(target_counts)) {
    throw InputError("simulate_poisson: target counts must be positive");
  }
  const Vector mean0 = apply(*phi, x);
  if ((mean0.array() < 0.0).any()) throw InputError("simulate_poisson: negative mean");
  const double total = mean0.sum();

  PoissonSimulation sim;
  sim.scale = total > 0.0 ? target_counts / total : 1.0;
  sim.phi = sim.scale == 1.0 ? phi : std::make_shared<ScaledOperator>(phi, sim.scale);
  const Vector mean = sim.scale * mean0;
  const auto n = static_cast<double>(mean.size());
  sim.intercept = Vector::Constant(mean.size(), mean.sum() / (10.0 * n));

  std::mt19937_64 rng = stream(seed, 0x9015);
  sim.y.resize(mean.size());
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const double lam = mean[k] + sim.intercept[k];
    if (lam <= 0.0) {
      sim.y[k] = 0.0;
      continue;
    }
    std::poisson_distribution<long long> draw(lam);
    sim.y[k] = static_cast<double>(draw(rng));
  }
  return sim;
}

Vector simulate_gaussian_noiseless(const LinearOperator& phi, const Vector& x) {
  return apply(phi, x);
}

double rse(const Vector& xhat, const Vector& xtrue) {
  if (xhat.size() != xtrue.size()) throw InputError("rse: length mismatch");
  const double den = xtrue.squaredNorm();
  if (!(den > 0.0)) throw InputError("rse: true signal is zero");
  return (xhat - xtrue).squaredNorm() / den;
}

double top_coefficient_energy(const WaveletSpec& spec, const Vector& x, double fraction) {
  Vector c = dwt_forward(spec, x).cwiseAbs2();
  const double total = c.sum();
  if (!(total > 0.0)) throw InputError("top_coefficient_energy: zero signal");
  std::sort(c.data(), c.data() + c.size(), std::greater<double>());
  const auto keep = static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(c.size())));
  return c.head(keep).sum() / total;
}

const char* to_string(Family f) {
  return f == Family::PetPoisson ? "pet" : "skyline";
}

const char* to_string(PenaltyChoice r) { return r == PenaltyChoice::L1 ? "l1" : "tv"; }

Family parse_family(const std::string& s) {
  if (s == "pet") return Family::PetPoisson;
  if (s == "skyline") return Family::SkylineGaussian;
  throw InputError("unknown family '" + s + "' (expected pet or skyline)");
}

PenaltyChoice parse_penalty(const std::string& s) {
  if (s == "l1") return PenaltyChoice::L1;
  if (s == "tv") return PenaltyChoice::TV;
  throw InputError("unknown regularizer '" + s + "' (expected l1 or tv)");
}

bool is_known_solver(const std::string& name) {
  static const char* known[] = {"pnpg", "pnpg_inf", "pnpg_cont", "npgs", "at", "gfb", "pds"};
  return std::find(std::begin(known), std::end(known), name) != std::end(known);
}

void ExperimentSpec::validate() const {
  if (a_grid.empty()) throw InputError("ExperimentSpec: a-grid is empty");
  if (seeds.empty()) throw InputError("ExperimentSpec: seeds are empty");
  if (solvers.empty()) throw InputError("ExperimentSpec: solver list is empty");
  for (const auto& s : solvers) {
    if (!is_known_solver(s)) throw InputError("ExperimentSpec: unknown solver '" + s + "'");
  }
  for (double a : a_grid) {
    if (!std::isfinite(a)) throw InputError("ExperimentSpec: non-finite a");
  }
  if (family == Family::PetPoisson) {
    if (grid_n != 32 && grid_n != 64 && grid_n != 128) {
      throw InputError("ExperimentSpec: grid_n must be 32, 64 or 128");
    }
    if (n_views < 1 || n_radial < 1) throw InputError("ExperimentSpec: bad projector size");
    if (!(counts > 0.0)) throw InputError("ExperimentSpec: counts must be positive");
  } else {
    if (p < 64 || !is_power_of_two(p)) throw InputError("ExperimentSpec: p must be a power of two >= 64");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw InputError("ExperimentSpec: ratio must be in (0, 1]");
  }
  if (!(epsilon > 0.0) || max_iter < 1 || at_period < 1 || threads < 1) {
    throw InputError("ExperimentSpec: invalid solver limits");
  }
}

Instance build_instance(const ExperimentSpec& spec, std::uint64_t seed) {
  if (spec.family == Family::PetPoisson) {
    const int n = spec.grid_n;
    const PetPhantom ph = gen_pet_phantom(n, seed);
    auto gamma = build_line_projector(n, spec.n_views, spec.n_radial);
    std::mt19937_64 rng = stream(seed, 0xeff1);
    std::normal_distribution<double> eff(0.0, std::sqrt(0.3));
    Vector c(gamma->rows());
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = eff(rng);
    auto phi = build_pet_sensing(gamma, ph.attenuation, c, 1.0);
    PoissonSimulation sim = simulate_poisson(phi, ph.activity, spec.counts, seed);

    NllModel model = NllModel::poisson_identity(sim.phi, sim.y, sim.intercept);
    const ConvexSet set = ConvexSet::nonnegative();
    Regularizer reg =
        spec.reg == PenaltyChoice::L1
            ? Regularizer::l1_analysis(
                  std::make_shared<WaveletOperator>(
                      WaveletSpec::square(WaveletFamily::Haar, std::min(6, log2_exact(n)), n)),
                  set, 1.0)
            : Regularizer::tv(GridShape{n, n}, set, 1.0);

    // Count-matched backprojection.
    const Vector bp = adjoint_apply(*sim.phi, sim.y);
    const double denom = apply(*sim.phi, bp).sum();
    const double s = denom > 0.0 ? sim.y.sum() / denom : 1.0;
    Vector x0 = set.project(s * bp);
    return Instance{seed, std::move(model), std::move(reg), std::move(x0), ph.activity, 1.0};
  }

  const Eigen::Index p = spec.p;
  const auto rows = static_cast<Eigen::Index>(std::lround(spec.ratio * static_cast<double>(p)));
  const Vector truth = gen_skyline(p);
  auto phi = gaussian_sensing(rows, p, seed);
  Vector y = simulate_gaussian_noiseless(*phi, truth);
  Vector x0 = adjoint_apply(*phi, y) / static_cast<double>(p);
  NllModel model = NllModel::gaussian(phi, std::move(y));
  const ConvexSet set = ConvexSet::nonnegative();
  Regularizer reg =
      spec.reg == PenaltyChoice::L1
          ? Regularizer::l1_analysis(
                std::make_shared<WaveletOperator>(
                    WaveletSpec::line(WaveletFamily::Daubechies4, 3, p)),
                set, 1.0)
          : Regularizer::tv(GridShape{1, p}, set, 1.0);
  const double U = weight_upper_bound(model, reg);
  return Instance{seed, std::move(model), std::move(reg), std::move(x0), truth, U};
}

SolveResult run_solver(const std::string& solver, const Instance& inst, double weight,
                       const ExperimentSpec& spec) {
  const Regularizer reg = inst.reg.with_weight(weight);
  SolverConfig cfg;
  cfg.epsilon = spec.epsilon;
  cfg.max_iter = spec.max_iter;
  if (solver == "pnpg") return pnpg_solve(inst.model, reg, inst.x0, cfg);
  if (solver == "pnpg_inf") {
    cfg.n = kInfinitePatience;
    return pnpg_solve(inst.model, reg, inst.x0, cfg);
  }
  if (solver == "pnpg_cont") {
    cfg.continuation = ContinuationConfig{};
    return continuation_solve(inst.model, reg, inst.x0, cfg);
  }
  if (solver == "npgs") return npgs_solve(inst.model, reg, inst.x0, cfg);
  if (solver == "at") return at_solve(inst.model, reg, inst.x0, cfg, spec.at_period);
  if (solver == "gfb") {
    GfbParams gp;
    gp.epsilon = spec.epsilon;
    gp.max_iter = spec.max_iter;
    return gfb_solve(inst.model, reg, inst.x0, gp);
  }
  if (solver == "pds") {
    PdsParams pp;
    pp.epsilon = spec.epsilon;
    pp.max_iter = spec.max_iter;
    return pds_solve(inst.model, reg, inst.x0, pp);
  }
  throw InputError("run_solver: unknown solver '" + solver + "'");
}

SweepResult run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<Instance> instances;
  instances.reserve(spec.seeds.size());
  for (std::uint64_t seed : spec.seeds) instances.push_back(build_instance(spec, seed));

  SweepResult out;
  out.spec = spec;
  for (const auto& solver : spec.solvers) {
    for (double a : spec.a_grid) {
      for (std::uint64_t seed : spec.seeds) {
        RunResult r;
        r.run_id = static_cast<int>(out.runs.size());
        r.solver = solver;
        r.a = a;
        r.seed = seed;
        out.runs.push_back(std::move(r));
      }
    }
  }

  const std::size_t n_seeds = spec.seeds.size();
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < out.runs.size(); k = next++) {
      RunResult& r = out.runs[k];
      const Instance& inst = instances[k % n_seeds];
      r.weight = std::pow(10.0, r.a) * inst.weight_scale;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        SolveResult s = run_solver(r.solver, inst, r.weight, spec);
        r.rse = rse(s.x, inst.truth);
        r.f_final = s.trace.records.empty() ? s.trace.initial_f : s.trace.records.back().f;
        r.iterations = static_cast<int>(s.trace.records.size());
        r.nll_evals = s.trace.nll_evals;
        r.converged = s.trace.converged;
        r.trace = std::move(s.trace);
      } catch (const std::exception& e) {
        r.error = e.what();
        r.rse = r.f_final = std::numeric_limits<double>::quiet_NaN();
      }
      r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int n_threads =
      static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(spec.threads), out.runs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

std::vector<BestA> best_a(const std::vector<RunResult>& runs) {
  // solver -> a -> (sum, count), in first-seen solver order.
  std::vector<std::string> order;
  std::map<std::string, std::map<double, std::pair<double, int>>> acc;
  for (const auto& r : runs) {
    if (!acc.count(r.solver)) order.push_back(r.solver);
    auto& slot = acc[r.solver][r.a];
    if (!r.error.empty() || !std::isfinite(r.rse)) continue;
    slot.first += r.rse;
    slot.second += 1;
  }
  std::vector<BestA> out;
  for (const auto& solver : order) {
    BestA best{solver, 0.0, std::numeric_limits<double>::infinity(), 0};
    for (const auto& [a, sc] : acc[solver]) {
      if (sc.second == 0) continue;
      const double mean = sc.first / sc.second;
      if (mean < best.mean_rse) best = {solver, a, mean, sc.second};
    }
    out.push_back(best);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string results_csv_header() {
  return "run_id,family,solver,a,seed,rse,f_final,iterations,nll_evals,wall_seconds,converged";
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return f;
}

void close_out(std::ofstream& f, const std::filesystem::path& path) {
  f.close();
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::string csv_escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void export_results(const SweepResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "traces", ec);
  if (ec) throw std::runtime_error("cannot create " + (dir / "traces").string() + ": " + ec.message());
  const ExperimentSpec& spec = result.spec;
  const char* family = to_string(spec.family);

  {
    const auto path = dir / "results.csv";
    auto f = open_out(path);
    f << results_csv_header() << '\n';
    for (const auto& r : result.runs) {
      f << r.run_id << ',' << family << ',' << r.solver << ',' << format_double(r.a) << ','
        << r.seed << ',' << format_double(r.rse) << ',' << format_double(r.f_final) << ','
        << r.iterations << ',' << r.nll_evals << ',' << format_double(r.wall_seconds) << ','
        << (r.converged ? 1 : 0) << '\n';
    }
    close_out(f, path);
  }
  {
    const auto path = dir / "failures.csv";
    auto f = open_out(path);
    f << "run_id,message\n";
    for (const auto& r : result.runs) {
      if (!r.error.empty()) f << r.run_id << ',' << csv_escape(r.error) << '\n';
    }
    close_out(f, path);
  }

  // Best objective seen for each (a, seed) across solvers.
  std::map<std::pair<double, std::uint64_t>, double> best;
  for (const auto& r : result.runs) {
    auto key = std::make_pair(r.a, r.seed);
    auto it = best.emplace(key, std::numeric_limits<double>::infinity()).first;
    for (const auto& rec : r.trace.records) {
      if (std::isfinite(rec.f)) it->second = std::min(it->second, rec.f);
    }
  }
  for (const auto& r : result.runs) {
    if (!r.error.empty()) continue;
    const double fbest = best.at({r.a, r.seed});
    const auto path = dir / "traces" / ("run_" + std::to_string(r.run_id) + ".csv");
    auto f = open_out(path);
    f << "iteration,f,delta_f_vs_best,beta,theta,restart,inner_iters,eps_hat,cum_nll_evals,seconds\n";
    for (const auto& rec : r.trace.records) {
      f << rec.iteration << ',' << format_double(rec.f) << ',' << format_double(rec.f - fbest)
        << ',' << format_double(rec.beta) << ',' << format_double(rec.theta) << ','
        << to_string(rec.restart) << ',' << rec.inner_iterations << ','
        << format_double(rec.eps_hat) << ',' << rec.nll_evals << ','
        << format_double(rec.seconds) << '\n';
    }
    close_out(f, path);
  }

  nlohmann::json m;
  m["tool_version"] = kToolVersion;
  m["family"] = family;
  m["reg"] = to_string(spec.reg);
  if (spec.family == Family::PetPoisson) {
    m["grid_n"] = spec.grid_n;
    m["n_views"] = spec.n_views;
    m["n_radial"] = spec.n_radial;
    m["counts"] = spec.counts;
  } else {
    m["p"] = spec.p;
    m["ratio"] = spec.ratio;
  }
  m["a_grid"] = spec.a_grid;
  m["seeds"] = spec.seeds;
  m["solvers"] = spec.solvers;
  m["epsilon"] = spec.epsilon;
  m["max_iter"] = spec.max_iter;
  m["at_period"] = spec.at_period;
  m["threads"] = spec.threads;
  m["runs"] = result.runs.size();
  const auto path = dir / "manifest.json";
  auto f = open_out(path);
  f << m.dump(2) << '\n';
  close_out(f, path);
}

ExperimentSpec load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json m;
  try {
    f >> m;
  } catch (const std::exception& e) {
    throw InputError("malformed manifest " + path.string() + ": " + e.what());
  }
  ExperimentSpec spec;
  try {
    spec.family = parse_family(m.at("family").get<std::string>());
    spec.reg = parse_penalty(m.at("reg").get<std::string>());
    if (spec.family == Family::PetPoisson) {
      spec.grid_n = m.at("grid_n").get<int>();
      spec.n_views = m.at("n_views").get<int>();
      spec.n_radial = m.at("n_radial").get<int>();
      spec.counts = m.at("counts").get<double>();
    } else {
      spec.p = m.at("p").get<Eigen::Index>();
      spec.ratio = m.at("ratio").get<double>();
    }
    spec.a_grid = m.at("a_grid").get<std::vector<double>>();
    spec.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
    spec.solvers = m.at("solvers").get<std::vector<std::string>>();
    spec.epsilon = m.at("epsilon").get<double>();
    spec.max_iter = m.at("max_iter").get<int>();
    spec.at_period = m.at("at_period").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest " + path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

std::vector<RunResult> read_results_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != results_csv_header()) {
    throw InputError(path.string() + ": unexpected header");
  }
  std::vector<RunResult> out;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1) {
      cols.push_back(line.substr(start, pos - start));
    }
    cols.push_back(line.substr(start));
    if (cols.size() != 11) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected 11 columns");
    }
    RunResult r;
    try {
      r.run_id = std::stoi(cols[0]);
      r.solver = cols[2];
      r.a = std::stod(cols[3]);
      r.seed = std::stoull(cols[4]);
      r.rse = std::stod(cols[5]);
      r.f_final = std::stod(cols[6]);
      r.iterations = std::stoi(cols[7]);
      r.nll_evals = std::stoll(cols[8]);
      r.wall_seconds = std::stod(cols[9]);
      r.converged = cols[10] == "1";
    } catch (const std::exception&) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    if (!std::isfinite(r.rse)) r.error = "failed";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pnpg
