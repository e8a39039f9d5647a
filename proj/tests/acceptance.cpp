// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "htspec/htspec.hpp"

using namespace htspec;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail, double seconds) {
  std::printf("%s criterion %d (%s): %s [%.1f s]\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  failures += !pass;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string describe(const std::vector<Verdict>& vs) {
  std::ostringstream os;
  os.precision(4);
  for (std::size_t i = 0; i < vs.size(); ++i)
    os << (i ? "; " : "") << vs[i].criterion << "=" << vs[i].observed << (vs[i].pass ? "" : " (out of range)");
  return os.str();
}

bool all_pass(const std::vector<Verdict>& vs) {
  for (const auto& v : vs)
    if (!v.pass) return false;
  return true;
}

ExperimentConfig poisson_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.n = 500;
  c.rho = 1.0;
  c.law = TailLaw::pareto(1.0);
  c.sparsity = SparsitySpec::bernoulli(1.0);
  c.replicates = 200;
  c.top_k = 5;
  c.master_seed = 1;
  return c;
}

ExperimentConfig edge_config(ExperimentKind kind, std::size_t reps) {
  ExperimentConfig c;
  c.kind = kind;
  c.n = 1024;
  c.rho = 1.0;
  c.law = TailLaw::pareto(8.0, true);
  c.sparsity = SparsitySpec::bernoulli(1.0);
  c.replicates = reps;
  c.top_k = 5;
  c.master_seed = 1;
  return c;
}

/// Integral of the MP density by the midpoint rule in t, x = lo + h (1 - cos t).
double mp_mass(double rho) {
  const auto [lo, hi] = mp_edges(rho);
  const double h = 0.5 * (hi - lo);
  const int steps = 200000;
  const double dt = std::numbers::pi / steps;
  double s = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = (k + 0.5) * dt;
    const double x = lo + h * (1.0 - std::cos(t));
    if (x > 0.0) s += mp_density(x, rho) * h * std::sin(t);
  }
  return s * dt;
}

}  // namespace

int main() {
  // 1. Exact invariants.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_invariant_suite(1, 500, 100);
    const double secs = seconds_since(t0);
    std::ostringstream os;
    for (const auto& [name, t] : rep.checks) os << name << " " << t.passed << "/" << t.checked << "; ";
    os << "runtime < 60 s";
    report(1, "exact invariant suite", rep.all_pass() && secs < 60.0, os.str(), secs);
  }

  // 2. Lanczos against the dense solver.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_solver_cross_validation(1, 100);
    const double secs = seconds_since(t0);
    std::ostringstream os;
    os << rep.instances << " instances, max relative eigenvalue error " << rep.max_relative_error
       << " (<= 1e-8), min alignment " << rep.min_alignment << " over " << rep.aligned_pairs
       << " pairs (>= 1 - 1e-6), near-degenerate pairs excluded " << rep.degenerate_pairs << ", redrawn "
       << rep.skipped;
    report(2, "solver cross-validation", rep.pass() && secs < 60.0, os.str(), secs);
  }

  std::vector<std::pair<ExperimentConfig, std::string>> reruns;
  auto keep = [&](const ExperimentConfig& c, const ExperimentReport& r) { reruns.emplace_back(c, r.to_json(false).dump()); };

  // 3. Poisson regime.
  {
    const auto cfg = poisson_config(ExperimentKind::Poisson);
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_experiment(cfg);
    const double secs = seconds_since(t0);
    keep(cfg, rep);
    report(3, "Poisson regime, alpha=1 n=500 200 replicates", all_pass(rep.verdicts) && secs <= 300.0,
           describe(rep.verdicts), secs);
  }

  // 4. Edge regime, dense path.
  {
    const auto cfg = edge_config(ExperimentKind::Edge, 40);
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_experiment(cfg);
    const double secs = seconds_since(t0);
    keep(cfg, rep);
    const double mean_l1 = rep.aggregates["lambda1_over_n_mu"]["mean"];
    const bool a = mean_l1 >= 3.4 && mean_l1 <= 4.6;
    std::ostringstream os;
    os.precision(4);
    os << "mean lambda1/n=" << mean_l1 << " in [3.4, 4.6]; " << describe(rep.verdicts);
    report(4, "edge regime, alpha=8 n=1024 40 replicates", a && all_pass(rep.verdicts) && secs <= 300.0, os.str(),
           secs);
  }

  // 5. Hermitian analogs.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto heavy_cfg = poisson_config(ExperimentKind::Hermitian);
    const auto heavy = run_experiment(heavy_cfg);
    keep(heavy_cfg, heavy);
    const auto light_cfg = edge_config(ExperimentKind::Hermitian, 40);
    const auto light = run_experiment(light_cfg);
    keep(light_cfg, light);
    const double secs = seconds_since(t0);
    const double mean_l1 = light.aggregates["lambda1_over_n_mu"]["mean"];
    const bool b = mean_l1 >= 1.7 && mean_l1 <= 2.3;
    std::ostringstream os;
    os.precision(4);
    os << "alpha=1: " << describe(heavy.verdicts) << " | alpha=8: mean lambda1/sqrt(n)=" << mean_l1
       << " in [1.7, 2.3]; " << describe(light.verdicts);
    report(5, "Hermitian analogs", all_pass(heavy.verdicts) && b && all_pass(light.verdicts) && secs <= 300.0,
           os.str(), secs);
  }

  // 6. Truncation bound.
  {
    auto cfg = edge_config(ExperimentKind::Truncation, 50);
    cfg.gamma = 0.2;
    cfg.gamma_prime = 0.5;
    cfg.kappa = 1.5;
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_experiment(cfg);
    const double secs = seconds_since(t0);
    keep(cfg, rep);
    report(6, "truncation bound, alpha=8 n=1024 50 replicates", all_pass(rep.verdicts) && secs <= 240.0,
           describe(rep.verdicts), secs);
  }

  // 7. Limit-law unit values.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto edges = mp_edges(1.0);
    const bool e = edges.first == 0.0 && edges.second == 4.0;
    const double dens = mp_density(2.0, 1.0);
    const bool d = std::abs(dens - 1.0 / (2.0 * std::numbers::pi)) <= 1e-12;
    const double m1 = mp_mass(1.0), m2 = mp_mass(0.5);
    const bool m = std::abs(m1 - 1.0) <= 1e-8 && std::abs(m2 - 1.0) <= 1e-8;
    const double c = c_np(TailLaw::pareto(2.0), 100, 100, 1.0);
    const bool cc = std::abs(c - 100.0) <= 1e-9;
    const bool pp = pp_mean_count(2.0, 4.0, IntensityKind::Covariance) == 0.25;
    std::ostringstream os;
    os.precision(17);
    os << "mp_edges(1)=(" << edges.first << ", " << edges.second << "); mp_density(2,1)-1/(2pi)="
       << dens - 1.0 / (2.0 * std::numbers::pi) << "; integral-1 = " << m1 - 1.0 << " (rho=1), " << m2 - 1.0
       << " (rho=0.5); c_np=" << c << "; pp_mean_count(2,4)=" << pp_mean_count(2.0, 4.0, IntensityKind::Covariance);
    report(7, "limit-law unit values", e && d && m && cc && pp, os.str(), seconds_since(t0));
  }

  // 8. Reproducibility: every experiment above re-run with a different
  // worker count, plus a phase sweep, compared by hash of the timing-free JSON.
  {
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream os;
    bool ok = true;
    for (auto [cfg, first] : reruns) {
      cfg.workers = 3;
      const auto again = run_experiment(cfg).to_json(false).dump();
      const auto h1 = std::hash<std::string>{}(first), h2 = std::hash<std::string>{}(again);
      ok = ok && first == again;
      os << to_string(cfg.kind) << (cfg.law.alpha() > 2 ? "/light" : "/heavy") << " " << std::hex << h1
         << (h1 == h2 ? " == " : " != ") << h2 << std::dec << "; ";
    }
    SweepConfig sw;
    sw.alphas = parse_grid("1:9:2");
    sw.mus = parse_grid("0.25:1:0.25");
    sw.n = 150;
    sw.replicates = 4;
    sw.workers = 1;
    const auto s1 = run_phase_sweep(sw).to_json().dump();
    sw.workers = 3;
    const auto s2 = run_phase_sweep(sw).to_json().dump();
    ok = ok && s1 == s2;
    os << "sweep " << std::hex << std::hash<std::string>{}(s1) << (s1 == s2 ? " == " : " != ")
       << std::hash<std::string>{}(s2) << std::dec;
    report(8, "reproducibility", ok, os.str(), seconds_since(t0));
  }

  std::printf("%s: %d criterion failure(s)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
