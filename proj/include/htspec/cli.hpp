#pragma once

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "htspec/dense_eigen.hpp"
#include "htspec/ensemble.hpp"
#include "htspec/experiments.hpp"
#include "htspec/lanczos.hpp"
#include "htspec/sparse_matrix.hpp"
#include "htspec/verification.hpp"

namespace htspec::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kVerdictFailure = 2 };

/// Law and mask flags shared by `sample` and `experiment`.
struct EnsembleFlags {
  double alpha = 1.0;
  double mu = 1.0;
  double rho = 1.0;
  std::size_t n = 500;
  std::string sv = "constant";
  double c = 1.0;
  double beta = 0.0;
  double support_min = 1.0;
  std::string standardize = "auto";
  std::string mask = "bernoulli";
  std::size_t halfwidth = 1;
  std::size_t count = 1;

  void add_to(CLI::App& app, bool alpha_required) {
    auto* a = app.add_option("--alpha", alpha, "tail exponent")->check(CLI::PositiveNumber);
    if (alpha_required) a->required();
    app.add_option("--mu", mu, "sparsity exponent in [0, 1]")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app.add_option("--rho", rho, "aspect ratio p/n in (0, 1]")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app.add_option("--n", n, "column count")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--sv", sv, "slowly varying factor")->check(CLI::IsMember({"constant", "log_power"}))->capture_default_str();
    app.add_option("--c", c, "slowly varying constant")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--beta", beta, "log-power exponent (log_power only)")->capture_default_str();
    app.add_option("--support-min", support_min, "smallest magnitude of the law")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--standardize", standardize, "divide by sqrt(E x^2); auto means on iff alpha > 2")
        ->check(CLI::IsMember({"auto", "on", "off"}))
        ->capture_default_str();
    app.add_option("--mask", mask, "sparsity mask")->check(CLI::IsMember({"bernoulli", "band", "fixed"}))->capture_default_str();
    app.add_option("--halfwidth", halfwidth, "band halfwidth (band mask)")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--count", count, "nonzeros per row (fixed mask)")->check(CLI::PositiveNumber)->capture_default_str();
  }

  TailLaw law() const {
    SlowlyVarying s = ConstantSV{c};
    if (sv == "log_power") s = LogPowerSV{c, beta};
    const bool on = standardize == "on" || (standardize == "auto" && alpha > 2.0);
    if (standardize == "on" && alpha <= 2.0)
      throw std::invalid_argument("--standardize on requires --alpha > 2 (the variance is infinite)");
    return TailLaw(alpha, s, support_min, on);
  }

  SparsitySpec sparsity() const {
    if (mask == "band") return SparsitySpec::band(halfwidth, mu);
    if (mask == "fixed") return SparsitySpec::fixed_count(count, mu);
    return SparsitySpec::bernoulli(mu);
  }
};

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

inline void write_vectors_csv(const std::string& path, const SpectralResult& r) {
  auto f = open_out(path);
  f << std::setprecision(17);
  for (std::size_t l = 0; l < r.eigenvectors.size(); ++l) f << (l ? "," : "") << 'v' << l + 1;
  f << '\n';
  const std::size_t dim = r.eigenvectors.empty() ? 0 : r.eigenvectors[0].size();
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t l = 0; l < r.eigenvectors.size(); ++l) f << (l ? "," : "") << r.eigenvectors[l][i];
    f << '\n';
  }
}

inline SpectralResult truncate(SpectralResult r, std::size_t k) {
  if (r.eigenvalues.size() > k) r.eigenvalues.resize(k);
  if (r.eigenvectors.size() > k) r.eigenvectors.resize(k);
  if (r.residual_norms.size() > k) r.residual_norms.resize(k);
  return r;
}

}  // namespace detail

/// Parses argv and runs the chosen subcommand. Returns 0 on success, 2 when
/// a verdict or exact invariant fails and 1 on usage, config or regime errors.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sparse heavy-tailed random matrices: sampling, extreme spectra and regime experiments", "htspec"};
  app.set_config("--config", "", "INI file with [subcommand] sections of key = value lines");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  app.require_subcommand(1);

  // sample
  auto* sample = app.add_subcommand("sample", "draw one matrix and write it as CSV");
  EnsembleFlags sample_flags;
  sample_flags.add_to(*sample, true);
  std::uint64_t sample_seed = 0;
  std::string sample_out;
  bool sample_hermitian = false;
  sample->add_option("--seed", sample_seed, "seed")->capture_default_str();
  sample->add_option("--out", sample_out, "output CSV path")->required();
  sample->add_flag("--hermitian", sample_hermitian, "symmetric n x n matrix instead of p x n");

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "top eigenpairs of M M^T (or of M when symmetric)");
  std::string spec_in, spec_out, spec_vectors;
  std::size_t spec_k = 5;
  bool spec_dense = false, spec_symmetric = false;
  double spec_tol = 1e-10;
  std::uint64_t spec_seed = 0;
  spectrum->add_option("--in", spec_in, "input CSV")->required();
  spectrum->add_option("--topk", spec_k, "number of eigenpairs")->check(CLI::Range(1, 50))->capture_default_str();
  spectrum->add_flag("--dense", spec_dense, "dense solver instead of Lanczos");
  spectrum->add_flag("--symmetric", spec_symmetric, "treat a CSV without shape line as symmetric");
  spectrum->add_option("--tol", spec_tol, "Lanczos relative tolerance")->check(CLI::Range(1e-12, 1.0))->capture_default_str();
  spectrum->add_option("--seed", spec_seed, "Lanczos start-vector seed")->capture_default_str();
  spectrum->add_option("--out", spec_out, "JSON output path (stdout if absent)");
  spectrum->add_option("--vectors", spec_vectors, "eigenvector CSV path, one vector per column");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "replicated regime experiment");
  EnsembleFlags exp_flags;
  exp_flags.add_to(*experiment, true);
  std::string exp_kind, exp_out, exp_csv, exp_beta_grid;
  ExperimentConfig exp_cfg;
  std::optional<double> exp_gamma, exp_gamma_prime;
  bool exp_no_dense = false;
  experiment->add_option("kind", exp_kind, "poisson | edge | hermitian | truncation")
      ->required()
      ->check(CLI::IsMember({"poisson", "edge", "hermitian", "truncation"}));
  experiment->add_option("--reps", exp_cfg.replicates, "replicates")->check(CLI::PositiveNumber)->capture_default_str();
  experiment->add_option("--topk", exp_cfg.top_k, "eigenpairs per replicate")->check(CLI::Range(1, 50))->capture_default_str();
  experiment->add_option("--seed", exp_cfg.master_seed, "master seed")->capture_default_str();
  experiment->add_option("--tol", exp_cfg.tol, "Lanczos relative tolerance")->check(CLI::Range(1e-12, 1.0))->capture_default_str();
  experiment->add_option("--thresholds", exp_cfg.thresholds, "Poisson count thresholds (>= 0.5)")->delimiter(',');
  experiment->add_flag("--no-dense", exp_no_dense, "skip the dense spectrum (and the ESD) in the edge experiment");
  experiment->add_option("--bins", exp_cfg.esd_bins, "ESD histogram bins")->check(CLI::PositiveNumber)->capture_default_str();
  experiment->add_option("--beta-grid", exp_beta_grid, "localization exponents lo:hi:step (default 0.1:0.5:0.1)");
  experiment->add_option("--eta", exp_cfg.eta, "localization mass deficit in (0, 1]")->capture_default_str();
  experiment->add_option("--gamma", exp_gamma, "truncation level exponent (default: midpoint of (mu/(2(alpha-1)), mu/2))");
  experiment->add_option("--gamma-prime", exp_gamma_prime, "norm threshold exponent (default mu/2)");
  experiment->add_option("--kappa", exp_cfg.kappa, "norm threshold factor")->capture_default_str();
  experiment->add_option("--workers", exp_cfg.workers, "worker threads (0: available parallelism)")->capture_default_str();
  experiment->add_option("--out", exp_out, "JSON report path");
  experiment->add_option("--csv", exp_csv, "per-replicate CSV path");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "phase-diagram grid over alpha x mu");
  std::string sw_alpha, sw_mu, sw_out, sw_json;
  SweepConfig sw_cfg;
  sweep->add_option("--alpha-grid", sw_alpha, "lo:hi:step")->required();
  sweep->add_option("--mu-grid", sw_mu, "lo:hi:step")->required();
  sweep->add_option("--n", sw_cfg.n, "column count")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--rho", sw_cfg.rho, "aspect ratio")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sweep->add_option("--reps", sw_cfg.replicates, "replicates per cell")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--seed", sw_cfg.master_seed, "master seed")->capture_default_str();
  sweep->add_option("--workers", sw_cfg.workers, "worker threads (0: available parallelism)")->capture_default_str();
  sweep->add_option("--out", sw_out, "grid CSV path (stdout if absent)");
  sweep->add_option("--json", sw_json, "grid JSON path");

  // verify
  auto* verify = app.add_subcommand("verify", "exact-invariant suite and solver cross-validation");
  std::uint64_t v_seed = 1;
  std::size_t v_instances = 500, v_localization = 100, v_solver = 100;
  verify->add_option("--seed", v_seed, "seed")->capture_default_str();
  verify->add_option("--instances", v_instances, "random instances for the invariant suite")->capture_default_str();
  verify->add_option("--localization-instances", v_localization, "brute-forced localization-bound instances")->capture_default_str();
  verify->add_option("--solver-instances", v_solver, "Lanczos vs dense instances")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*sample) {
      EnsembleSpec spec;
      spec.law = sample_flags.law();
      spec.sparsity = sample_flags.sparsity();
      spec.seed = sample_seed;
      if (sample_hermitian) {
        spec.shape = HermitianShape{sample_flags.n};
      } else {
        spec.shape = RectangularShape{sample_flags.n, sample_flags.rho};
      }
      const SparseMatrix m = sample_matrix(spec);
      write_csv(sample_out, m);
      out << "wrote " << m.rows() << "x" << m.cols() << " matrix with " << m.logical_entry_count() << " entries to "
          << sample_out << '\n';
      return kOk;
    }

    if (*spectrum) {
      const SparseMatrix m = read_csv(spec_in, spec_symmetric);
      if (spec_k > m.rows()) throw std::invalid_argument("--topk exceeds the matrix dimension " + std::to_string(m.rows()));
      SpectralResult r;
      if (spec_dense) {
        r = detail::truncate(eig_dense_symmetric(m.symmetric() ? m.to_dense() : gram_dense(m)), spec_k);
      } else {
        r = top_eigs(m, spec_k, spec_tol, spec_seed);
      }
      const auto j = r.to_json();
      if (spec_out.empty()) {
        out << j.dump(2) << '\n';
      } else {
        detail::open_out(spec_out) << j.dump(2) << '\n';
      }
      if (!spec_vectors.empty()) detail::write_vectors_csv(spec_vectors, r);
      return kOk;
    }

    if (*experiment) {
      exp_cfg.kind = parse_experiment_kind(exp_kind);
      exp_cfg.n = exp_flags.n;
      exp_cfg.rho = exp_flags.rho;
      exp_cfg.law = exp_flags.law();
      exp_cfg.sparsity = exp_flags.sparsity();
      exp_cfg.dense = !exp_no_dense;
      if (!exp_beta_grid.empty()) exp_cfg.beta_grid = parse_grid(exp_beta_grid);
      exp_cfg.gamma = exp_gamma;
      exp_cfg.gamma_prime = exp_gamma_prime;
      const ExperimentReport rep = run_experiment(exp_cfg);
      if (!exp_out.empty()) detail::open_out(exp_out) << rep.to_json().dump(2) << '\n';
      if (!exp_csv.empty()) {
        auto f = detail::open_out(exp_csv);
        rep.write_csv(f);
      }
      out << "experiment " << exp_kind << ": " << rep.records.size() << " replicates, regime "
          << rep.aggregates["regime"].get<std::string>() << '\n';
      for (const auto& v : rep.verdicts)
        out << (v.pass ? "PASS " : "FAIL ") << v.criterion << " observed=" << v.observed << " range=[" << v.lo << ", "
            << v.hi << "]\n";
      return rep.all_pass() ? kOk : kVerdictFailure;
    }

    if (*sweep) {
      sw_cfg.alphas = parse_grid(sw_alpha);
      sw_cfg.mus = parse_grid(sw_mu);
      const SweepReport rep = run_phase_sweep(sw_cfg);
      if (sw_out.empty()) {
        rep.write_csv(out);
      } else {
        auto f = detail::open_out(sw_out);
        rep.write_csv(f);
        out << "wrote " << rep.cells.size() << " cells to " << sw_out << '\n';
      }
      if (!sw_json.empty()) detail::open_out(sw_json) << rep.to_json().dump(2) << '\n';
      return kOk;
    }

    if (*verify) {
      const auto inv = run_invariant_suite(v_seed, v_instances, v_localization);
      for (const auto& [name, t] : inv.checks)
        out << (t.all() ? "PASS " : "FAIL ") << name << ' ' << t.passed << '/' << t.checked << '\n';
      bool ok = inv.all_pass();
      if (v_solver > 0) {
        const auto sc = run_solver_cross_validation(v_seed, v_solver);
        out << (sc.pass() ? "PASS " : "FAIL ") << "solver_cross_validation " << sc.instances
            << " instances, max relative error " << sc.max_relative_error << ", min alignment " << sc.min_alignment
            << '\n';
        ok = ok && sc.pass();
      }
      return ok ? kOk : kVerdictFailure;
    }
  } catch (const InvariantViolation& e) {
    err << "invariant violated: " << e.what() << '\n';
    return kVerdictFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace htspec::cli
