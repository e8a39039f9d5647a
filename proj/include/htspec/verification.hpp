#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "htspec/dense_eigen.hpp"
#include "htspec/ensemble.hpp"
#include "htspec/lanczos.hpp"
#include "htspec/localization.hpp"
#include "htspec/rng.hpp"
#include "htspec/spectral.hpp"

namespace htspec {

struct CheckTally {
  std::size_t checked = 0;
  std::size_t passed = 0;
  double worst = 0.0;  ///< largest violation-style margin seen (check specific)

  void record(bool ok, double margin = 0.0) {
    ++checked;
    passed += ok;
    worst = std::max(worst, margin);
  }
  bool all() const noexcept { return passed == checked; }
};

struct InvariantSuiteReport {
  std::uint64_t seed = 0;
  std::size_t instances = 0;
  std::map<std::string, CheckTally> checks;
  double elapsed_ms = 0.0;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& kv) { return kv.second.all(); });
  }

  nlohmann::json to_json() const {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [name, t] : checks) c[name] = {{"checked", t.checked}, {"passed", t.passed}, {"worst", t.worst}};
    return {{"seed", seed}, {"instances", instances}, {"checks", c}, {"pass", all_pass()}};
  }
};

namespace detail {

/// Small random rectangular instance: n in [2, max_n], p in [1, n], alpha in
/// [0.5, 6], mu in [0, 1], with occasional band / fixed-count masks,
/// log-power tails and standardization.
inline EnsembleSpec random_instance(std::uint64_t seed, std::size_t max_n) {
  IndexStream s(seed, StreamTag::Instance);
  const std::size_t n = 2 + static_cast<std::size_t>(s.uniform() * static_cast<double>(max_n - 1));
  const std::size_t p = 1 + static_cast<std::size_t>(s.uniform() * static_cast<double>(n));
  const double alpha = 0.5 + 5.5 * s.uniform();
  const double mu = s.uniform();
  const double sv_pick = s.uniform();
  const double mask_pick = s.uniform();
  const bool standardize = alpha > 2.0 && s.uniform() < 0.5;
  SlowlyVarying sv = ConstantSV{1.0};
  if (sv_pick < 0.25) sv = LogPowerSV{1.0, std::min(alpha, 1.0)};
  EnsembleSpec e;
  e.shape = RectangularShape{n, static_cast<double>(p) / static_cast<double>(n)};
  e.law = TailLaw(alpha, sv, 1.0, standardize);
  if (mask_pick < 0.15) {
    e.sparsity = SparsitySpec::band(1 + static_cast<std::size_t>(s.uniform() * 3.0), mu);
  } else if (mask_pick < 0.3) {
    e.sparsity = SparsitySpec::fixed_count(1 + static_cast<std::size_t>(s.uniform() * static_cast<double>(n)), mu);
  } else {
    e.sparsity = SparsitySpec::bernoulli(mu);
  }
  e.seed = mix64(seed);
  return e;
}

inline std::size_t pick(IndexStream& s, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(s.uniform() * static_cast<double>(n)));
}

inline std::vector<double> random_unit(IndexStream& s, std::size_t n) {
  std::vector<double> v(n);
  double nn = 0.0;
  while (nn == 0.0) {
    for (double& x : v) x = 2.0 * s.uniform() - 1.0;
    nn = norm2(v);
  }
  for (double& x : v) x /= nn;
  return v;
}

}  // namespace detail

/// Exact-invariant suite on randomized small instances: Rayleigh and norm
/// bounds, the three interlacing inequalities, the eigen-perturbation bound
/// and the localization bound on brute-forced Hermitian instances.
inline InvariantSuiteReport run_invariant_suite(std::uint64_t seed, std::size_t instances = 500,
                                                std::size_t localization_instances = 100) {
  const auto t0 = std::chrono::steady_clock::now();
  InvariantSuiteReport rep;
  rep.seed = seed;
  rep.instances = instances;
  auto& rayleigh = rep.checks["rayleigh_bound"];
  auto& norm = rep.checks["norm_bound"];
  auto& row = rep.checks["interlacing_row_deletion"];
  auto& col = rep.checks["interlacing_col_deletion"];
  auto& herm = rep.checks["interlacing_hermitian_minor"];
  auto& pert_a = rep.checks["perturbation_nearest_eigenvalue"];
  auto& pert_b = rep.checks["perturbation_eigenvector"];
  auto& loc = rep.checks["localization_bound"];

  for (std::size_t k = 0; k < instances; ++k) {
    const std::uint64_t s = derive_replicate_seed(seed, k);
    const auto spec = detail::random_instance(s, 40);
    const SparseMatrix m = sample_matrix(spec);
    IndexStream pick(s, StreamTag::Instance, 1);
    const DenseMatrix sigma = gram_dense(m);
    const SpectralResult full = eig_dense_symmetric(sigma);
    const double lambda1 = full.eigenvalues.front();
    const double scale = std::max(lambda1, std::numeric_limits<double>::min());

    const double lower = rayleigh_lower_bound(m);
    rayleigh.record(lambda1 >= lower - 1e-9 * scale, std::max(0.0, lower - lambda1) / scale);
    const double upper = norm_upper_bound(m);
    norm.record(lambda1 <= upper * (1.0 + 1e-9), std::max(0.0, lambda1 - upper) / scale);

    if (m.rows() >= 2) {
      const auto r = check_row_deletion(m, detail::pick(pick, m.rows()));
      row.record(r.holds, r.max_violation / scale);
      const auto h = check_hermitian_minor(sigma, detail::pick(pick, m.rows()));
      herm.record(h.holds, h.max_violation / scale);
    }
    if (m.rows() < m.cols()) {
      const auto c = check_col_deletion(m, detail::pick(pick, m.cols()));
      col.record(c.holds, c.max_violation / scale);
    }
    for (int trial = 0; trial < 3; ++trial) {
      const auto v = detail::random_unit(pick, m.rows());
      const auto pc = perturbation_check(sigma, v, full);
      pert_a.record(pc.part_a_holds, std::max(0.0, pc.nearest_eig_distance - pc.epsilon) / std::max(1.0, scale));
      if (pc.part_b_evaluated) pert_b.record(pc.part_b_holds, std::max(0.0, pc.part_b_lhs - pc.part_b_rhs));
    }
    // Near-eigenvectors exercise the eigenvector part of the bound as well.
    if (m.rows() >= 2) {
      auto v = full.eigenvectors[detail::pick(pick, m.rows())];
      const auto w = detail::random_unit(pick, m.rows());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += 1e-3 * w[i];
      const double nv = detail::norm2(v);
      for (double& x : v) x /= nv;
      const auto pc = perturbation_check(sigma, v, full);
      pert_a.record(pc.part_a_holds, std::max(0.0, pc.nearest_eig_distance - pc.epsilon) / std::max(1.0, scale));
      if (pc.part_b_evaluated) pert_b.record(pc.part_b_holds, std::max(0.0, pc.part_b_lhs - pc.part_b_rhs));
    }
  }

  // Localization bound: dominant eigenpair of a heavy-tailed Hermitian matrix
  // of dimension <= 12 with L <= 3, eta chosen just above 1 - m(L).
  std::size_t attempts = 0;
  while (loc.checked < localization_instances && attempts < 100 * localization_instances) {
    const std::uint64_t s = derive_replicate_seed(seed ^ 0x4C454D4DULL, attempts++);
    IndexStream st(s, StreamTag::Instance);
    const std::size_t d = 4 + detail::pick(st, 9);
    const std::size_t L = 1 + detail::pick(st, 3);
    const double alpha = 0.5 + st.uniform();
    const EnsembleSpec spec{HermitianShape{d}, TailLaw::pareto(alpha), SparsitySpec::bernoulli(1.0), mix64(s)};
    const DenseMatrix h = sample_matrix(spec).to_dense();
    const auto eig = eig_dense_symmetric(h);
    const std::size_t top = std::abs(eig.eigenvalues.front()) >= std::abs(eig.eigenvalues.back()) ? 0 : d - 1;
    const auto& v = eig.eigenvectors[top];
    const double eta = 1.0 - top_mass(v, L) + 1e-6;
    if (!(eta > 0.0 && eta < 1.0)) continue;
    const auto b = localization_bound_check(h, eig.eigenvalues[top], v, L, eta);
    if (!b.preconditions_met) continue;
    loc.record(b.holds, std::max(0.0, b.lhs - b.rhs) / std::max(1.0, b.rhs));
  }

  rep.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

struct SolverCrossReport {
  std::uint64_t seed = 0;
  std::size_t instances = 0;
  std::size_t skipped = 0;          ///< draws rejected for a top-5 spectrum spanning > 1e5
  double max_relative_error = 0.0;  ///< max_l |lambda_l^lanczos - lambda_l^dense| / |lambda_l^dense|
  double min_alignment = 1.0;       ///< min |<v_lanczos, v_dense>| over well-separated pairs
  std::size_t aligned_pairs = 0;
  std::size_t degenerate_pairs = 0;  ///< excluded from the alignment check
  bool all_converged = true;
  double elapsed_ms = 0.0;

  bool pass(double eig_tol = 1e-8, double align_tol = 1e-6) const {
    return all_converged && max_relative_error <= eig_tol && min_alignment >= 1.0 - align_tol;
  }

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"instances", instances},
            {"skipped", skipped},
            {"max_relative_error", max_relative_error},
            {"min_alignment", min_alignment},
            {"aligned_pairs", aligned_pairs},
            {"degenerate_pairs", degenerate_pairs},
            {"all_converged", all_converged},
            {"pass", pass()}};
  }
};

/// Lanczos top-k against the dense solver on random Gram matrices with
/// p, n <= max_n. Pairs whose eigenvalue lies within 1e-8 lambda_1 of a
/// neighbor have no well-defined eigenvector and skip the alignment check.
/// Draws whose k-th eigenvalue is below 1e-5 lambda_1 are replaced, since a
/// relative error is meaningless near the roundoff floor of either solver.
inline SolverCrossReport run_solver_cross_validation(std::uint64_t seed, std::size_t instances = 100,
                                                     std::size_t k = 5, std::size_t max_n = 50) {
  const auto t0 = std::chrono::steady_clock::now();
  SolverCrossReport rep;
  rep.seed = seed;
  std::size_t draw = 0;
  while (rep.instances < instances) {
    const std::uint64_t s = derive_replicate_seed(seed, draw++);
    IndexStream st(s, StreamTag::Instance);
    const std::size_t n = k + detail::pick(st, max_n - k + 1);
    const std::size_t p = k + detail::pick(st, n - k + 1);
    const double alpha = 1.5 + 4.5 * st.uniform();
    const double mu = 0.5 + 0.5 * st.uniform();
    const EnsembleSpec spec{RectangularShape{n, static_cast<double>(p) / static_cast<double>(n)},
                            TailLaw::pareto(alpha), SparsitySpec::bernoulli(mu), mix64(s)};
    const SparseMatrix m = sample_matrix(spec);
    const auto dense = eig_dense_symmetric(gram_dense(m));
    const double l1 = dense.eigenvalues.front();
    if (!(l1 > 0.0) || dense.eigenvalues[k - 1] < 1e-5 * l1) {
      ++rep.skipped;
      continue;
    }
    const auto lz = top_eigs(m, k, 1e-12, stream_row_key(s, StreamTag::Solver, 0));
    rep.all_converged = rep.all_converged && lz.converged;
    for (std::size_t l = 0; l < k; ++l) {
      const double ref = dense.eigenvalues[l];
      rep.max_relative_error = std::max(rep.max_relative_error, std::abs(lz.eigenvalues[l] - ref) / std::abs(ref));
      const double gap_prev = l > 0 ? dense.eigenvalues[l - 1] - ref : std::numeric_limits<double>::infinity();
      const double gap_next = l + 1 < dense.eigenvalues.size() ? ref - dense.eigenvalues[l + 1]
                                                               : std::numeric_limits<double>::infinity();
      if (std::min(gap_prev, gap_next) <= 1e-8 * l1) {
        ++rep.degenerate_pairs;
        continue;
      }
      const double a = std::abs(detail::dot(lz.eigenvectors[l], dense.eigenvectors[l]));
      rep.min_alignment = std::min(rep.min_alignment, a);
      ++rep.aligned_pairs;
    }
    ++rep.instances;
  }
  rep.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace htspec
