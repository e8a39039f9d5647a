#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "htspec/dense_eigen.hpp"
#include "htspec/ensemble.hpp"
#include "htspec/lanczos.hpp"
#include "htspec/limit_laws.hpp"
#include "htspec/localization.hpp"
#include "htspec/rng.hpp"
#include "htspec/sparse_matrix.hpp"
#include "htspec/spectral.hpp"
#include "htspec/stats.hpp"

namespace htspec {

enum class ExperimentKind { Poisson, Edge, Hermitian, Truncation };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Poisson: return "poisson";
    case ExperimentKind::Edge: return "edge";
    case ExperimentKind::Hermitian: return "hermitian";
    case ExperimentKind::Truncation: return "truncation";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  if (s == "poisson") return ExperimentKind::Poisson;
  if (s == "edge") return ExperimentKind::Edge;
  if (s == "hermitian") return ExperimentKind::Hermitian;
  if (s == "truncation") return ExperimentKind::Truncation;
  throw std::invalid_argument("unknown experiment kind '" + std::string(s) + "'");
}

/// The configuration asks an experiment to run outside the hypotheses it tests.
class RegimeMismatchError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An exact inequality failed inside a replicate; the experiment aborts.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline nlohmann::json law_json(const TailLaw& law) {
  nlohmann::json sv;
  if (const auto* k = std::get_if<ConstantSV>(&law.slowly_varying())) {
    sv = {{"kind", "constant"}, {"c", k->c}};
  } else {
    const auto& lp = std::get<LogPowerSV>(law.slowly_varying());
    sv = {{"kind", "log_power"}, {"c", lp.c}, {"beta", lp.beta}};
  }
  return {{"alpha", law.alpha()},
          {"slowly_varying", sv},
          {"support_min", law.support_min()},
          {"standardized", law.standardized()},
          {"scale", law.scale()}};
}

inline nlohmann::json sparsity_json(const SparsitySpec& s) {
  nlohmann::json j = {{"mu", s.mu}};
  if (std::holds_alternative<BernoulliMask>(s.kind)) {
    j["mask"] = "bernoulli";
  } else if (const auto* b = std::get_if<BandMask>(&s.kind)) {
    j["mask"] = "band";
    j["halfwidth"] = b->halfwidth;
  } else {
    j["mask"] = "fixed_count";
    j["count"] = std::get<FixedCountMask>(s.kind).count;
  }
  return j;
}

inline double median(std::vector<double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(x.begin(), x.end());
  const std::size_t h = x.size() / 2;
  return x.size() % 2 ? x[h] : 0.5 * (x[h - 1] + x[h]);
}

/// Linear-interpolation quantile (type 7).
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double mean(const std::vector<double>& x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double stddev(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

/// L = floor(dim^beta), at least 1; the epsilon keeps exact powers exact.
inline std::size_t support_size(std::size_t dim, double beta) {
  const double l = std::floor(std::pow(static_cast<double>(dim), beta) + 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(l), 1, dim);
}

/// The same CSR arrays viewed as a plain rectangular matrix, so that
/// top_eigs works on M M^T instead of M.
inline SparseMatrix rectangular_view(const SparseMatrix& m) {
  if (!m.symmetric()) return m;
  return SparseMatrix::from_csr(m.rows(), m.cols(), m.row_offsets(), m.col_indices(), m.values(), false);
}

}  // namespace detail

/// Worker count: `requested` (0 means available parallelism), capped by the
/// HTSPEC_WORKERS environment variable when set.
inline std::size_t resolve_workers(std::size_t requested) {
  std::size_t w = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("HTSPEC_WORKERS"); env && *env) {
    std::size_t cap = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec != std::errc() || ptr != s.data() + s.size() || cap == 0)
      throw std::invalid_argument("HTSPEC_WORKERS must be a positive integer");
    w = std::min(w, cap);
  }
  return w;
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
/// exception in index order is rethrown after all workers have joined.
template <class F>
void parallel_for_index(std::size_t count, std::size_t workers, F&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t w = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(count, 1));
  if (w <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < w; ++t) pool.emplace_back(body);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Poisson;
  std::size_t n = 500;
  double rho = 1.0;  ///< ignored for the Hermitian kind
  TailLaw law = TailLaw::pareto(1.0);
  SparsitySpec sparsity = SparsitySpec::bernoulli(1.0);
  std::size_t replicates = 200;
  std::size_t top_k = 5;
  std::vector<double> thresholds{0.5, 1.0, 2.0, 4.0};  ///< Poisson count thresholds, each >= 0.5
  std::uint64_t master_seed = 1;
  double tol = 1e-10;
  bool dense = true;  ///< full dense spectrum for the ESD when p <= kDefaultDenseLimit
  std::size_t esd_bins = 60;
  std::vector<double> beta_grid{0.1, 0.2, 0.3, 0.4, 0.5};
  double eta = 0.3;
  std::optional<double> gamma;        ///< truncation exponent of the level n^gamma
  std::optional<double> gamma_prime;  ///< exponent of the norm threshold
  double kappa = 1.5;
  std::size_t workers = 0;  ///< 0: available parallelism; never affects results

  bool hermitian() const noexcept { return kind == ExperimentKind::Hermitian; }
  double alpha() const noexcept { return law.alpha(); }
  double mu() const noexcept { return sparsity.mu; }
  double effective_rho() const noexcept { return hermitian() ? 1.0 : rho; }
  std::size_t p() const { return hermitian() ? n : rows_for(n, rho); }

  RegimeParams regime() const { return make_regime(alpha(), mu(), effective_rho(), n); }
  Regime regime_class() const { return classify_regime(alpha(), mu()); }

  EnsembleSpec ensemble(std::uint64_t seed) const {
    EnsembleSpec e;
    if (hermitian()) {
      e.shape = HermitianShape{n};
    } else {
      e.shape = RectangularShape{n, rho};
    }
    e.law = law;
    e.sparsity = sparsity;
    e.seed = seed;
    return e;
  }

  /// Defaults: gamma' = mu/2 and gamma at the midpoint of (mu/(2(alpha-1)), mu/2).
  double resolved_gamma_prime() const { return gamma_prime.value_or(mu() / 2.0); }
  double resolved_gamma() const {
    if (gamma) return *gamma;
    return 0.5 * (mu() / (2.0 * (alpha() - 1.0)) + mu() / 2.0);
  }

  void validate() const {
    ensemble(0).validate();
    if (replicates == 0) throw std::invalid_argument("replicates must be at least 1");
    const std::size_t cap = std::min<std::size_t>(p(), kMaxTopK);
    if (top_k == 0 || top_k > cap)
      throw std::invalid_argument("top_k must lie in [1, min(p, 50)] = [1, " + std::to_string(cap) + "]");
    if (!(tol >= 1e-12)) throw std::invalid_argument("tol must be at least 1e-12");
    for (double x : thresholds)
      if (!(x >= 0.5) || !std::isfinite(x)) throw std::invalid_argument("count thresholds must be finite and >= 0.5");
    for (double b : beta_grid)
      if (!(b > 0.0 && b <= 1.0)) throw std::invalid_argument("beta grid values must lie in (0, 1]");
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0, 1]");
    if (esd_bins == 0) throw std::invalid_argument("esd_bins must be positive");

    const Regime reg = regime_class();
    const std::string where = " (alpha = " + std::to_string(alpha()) + ", mu = " + std::to_string(mu()) +
                              ", threshold 2(1+1/mu) = " + std::to_string(regime_threshold(mu())) + ")";
    switch (kind) {
      case ExperimentKind::Poisson:
        if (reg != Regime::Poissonian)
          throw RegimeMismatchError("regime mismatch: poisson experiment needs alpha < 2(1+1/mu)" + where);
        break;
      case ExperimentKind::Edge:
        if (reg != Regime::Edge)
          throw RegimeMismatchError("regime mismatch: edge experiment needs alpha > 2(1+1/mu)" + where);
        if (!law.standardized())
          throw RegimeMismatchError("edge experiment needs a standardized law (mean zero, variance one)");
        break;
      case ExperimentKind::Hermitian:
        if (reg == Regime::Critical)
          throw RegimeMismatchError("regime mismatch: alpha = 2(1+1/mu) is critical, no limit applies" + where);
        if (reg == Regime::Edge && !law.standardized())
          throw RegimeMismatchError("hermitian edge experiment needs a standardized law (mean zero, variance one)");
        break;
      case ExperimentKind::Truncation: {
        if (!(alpha() > 2.0)) throw RegimeMismatchError("truncation experiment needs alpha > 2");
        if (!law.standardized())
          throw RegimeMismatchError("truncation experiment needs a standardized law (mean zero, variance one)");
        const double g = resolved_gamma(), gp = resolved_gamma_prime();
        if (!(g > 0.0)) throw RegimeMismatchError("truncation hypothesis violated: gamma > 0");
        if (!(gp > g)) throw RegimeMismatchError("truncation hypothesis violated: gamma' > gamma");
        if (!(gp >= mu() / 2.0)) throw RegimeMismatchError("truncation hypothesis violated: gamma' >= mu/2");
        if (!(kappa > 0.0)) throw RegimeMismatchError("truncation hypothesis violated: kappa > 0");
        break;
      }
    }
  }

  /// Echo of every result-determining field; `workers` is left out on purpose.
  nlohmann::json to_json() const {
    nlohmann::json j = {{"kind", to_string(kind)},
                        {"n", n},
                        {"p", p()},
                        {"rho", effective_rho()},
                        {"law", detail::law_json(law)},
                        {"sparsity", detail::sparsity_json(sparsity)},
                        {"replicates", replicates},
                        {"top_k", top_k},
                        {"thresholds", thresholds},
                        {"master_seed", master_seed},
                        {"tol", tol},
                        {"regime", to_string(regime_class())},
                        {"regime_threshold", mu() == 0.0 ? nlohmann::json(nullptr) : nlohmann::json(regime_threshold(mu()))}};
    if (kind == ExperimentKind::Edge || kind == ExperimentKind::Hermitian) {
      j["dense"] = dense;
      j["esd_bins"] = esd_bins;
      j["beta_grid"] = beta_grid;
      j["eta"] = eta;
    }
    if (kind == ExperimentKind::Truncation) {
      j["gamma"] = resolved_gamma();
      j["gamma_prime"] = resolved_gamma_prime();
      j["kappa"] = kappa;
    }
    return j;
  }
};

// ---------------------------------------------------------------------------
// Replicate analysis

/// Quantities shared by every replicate of one experiment.
struct ReplicateContext {
  ExperimentKind kind = ExperimentKind::Poisson;
  Regime regime = Regime::Poissonian;
  std::size_t n = 0;
  std::size_t p = 0;
  double rho = 1.0;
  double mu = 1.0;
  std::size_t top_k = 1;
  double tol = 1e-10;
  double c = 1.0;           ///< c_np, or c_n for the Hermitian kind
  double edge_scale = 1.0;  ///< (1+sqrt(rho))^2 n^mu, or 2 n^(mu/2) for the Hermitian kind
  bool dense = true;
  std::size_t esd_bins = 60;
  std::vector<double> beta_grid;  ///< always contains 0.3
  double eta = 0.3;
  double level = 0.0;           ///< truncation level n^gamma
  double norm_threshold = 0.0;  ///< kappa n^(2 gamma') (1+sqrt(rho))^2
};

inline ReplicateContext make_context(const ExperimentConfig& cfg) {
  cfg.validate();
  ReplicateContext ctx;
  ctx.kind = cfg.kind;
  ctx.regime = cfg.regime_class();
  ctx.n = cfg.n;
  ctx.p = cfg.p();
  ctx.rho = cfg.effective_rho();
  ctx.mu = cfg.mu();
  ctx.top_k = cfg.top_k;
  ctx.tol = cfg.tol;
  const double nn = static_cast<double>(cfg.n);
  if (cfg.hermitian()) {
    ctx.c = c_n(cfg.law, cfg.n, ctx.mu);
    ctx.edge_scale = 2.0 * std::pow(nn, ctx.mu / 2.0);
  } else {
    ctx.c = c_np(cfg.law, cfg.n, ctx.p, ctx.mu);
    ctx.edge_scale = mp_edges(ctx.rho).second * std::pow(nn, ctx.mu);
  }
  ctx.dense = cfg.dense;
  ctx.esd_bins = cfg.esd_bins;
  ctx.beta_grid = cfg.beta_grid;
  ctx.beta_grid.push_back(0.3);
  std::sort(ctx.beta_grid.begin(), ctx.beta_grid.end());
  ctx.beta_grid.erase(std::unique(ctx.beta_grid.begin(), ctx.beta_grid.end()), ctx.beta_grid.end());
  ctx.eta = cfg.eta;
  if (cfg.kind == ExperimentKind::Truncation) {
    ctx.level = std::pow(nn, cfg.resolved_gamma());
    ctx.norm_threshold = cfg.kappa * std::pow(nn, 2.0 * cfg.resolved_gamma_prime()) * mp_edges(ctx.rho).second;
  }
  return ctx;
}

struct ReplicateRecord {
  std::size_t r = 0;
  std::uint64_t seed = 0;
  std::vector<double> eigs;
  std::vector<RankedEntry> entries;
  std::vector<double> ratio_entry;  ///< lambda_l / |m_l|^2, or lambda_l / |m_l| for the Hermitian kind
  std::vector<double> ratio_edge;   ///< lambda_l / edge_scale
  std::vector<double> points;       ///< lambda_l / c^2, or lambda_l / c for the Hermitian kind
  std::vector<double> loc_dist;     ///< distance of v_l to its basis (or pair) vector
  std::vector<double> residuals;    ///< ||r_l|| / c^2 (covariance Poisson only)
  std::vector<std::size_t> support;  ///< L = floor(dim^beta) per beta
  std::vector<double> mass;         ///< top-L mass of v_1 per beta
  std::vector<bool> localized;      ///< mass > 1 - eta per beta
  double ipr = std::numeric_limits<double>::quiet_NaN();
  double norm_inf = 0.0;
  double norm_one = 0.0;
  double esd_ks = std::numeric_limits<double>::quiet_NaN();
  double hat_norm = std::numeric_limits<double>::quiet_NaN();
  double prime_inf_ratio = std::numeric_limits<double>::quiet_NaN();
  double prime_one_ratio = std::numeric_limits<double>::quiet_NaN();
  bool exceeded = false;
  bool ambiguous_pairing = false;
  bool empty_remainder = false;
  bool converged = true;
  double elapsed_ms = 0.0;

  nlohmann::json to_json(bool with_timing = true) const {
    nlohmann::json ents = nlohmann::json::array();
    for (const auto& e : entries)
      ents.push_back({{"i", e.i}, {"j", e.j}, {"magnitude", e.magnitude}, {"theta", e.theta}});
    nlohmann::json loc = {{"distance", loc_dist}, {"ipr", ipr}};
    if (!support.empty()) {
      loc["L"] = support;
      loc["mass"] = mass;
      loc["localized"] = localized;
    }
    nlohmann::json j = {{"r", r},
                        {"seed", seed},
                        {"eigs", eigs},
                        {"entries", ents},
                        {"ratios", {{"entry", ratio_entry}, {"edge", ratio_edge}}},
                        {"points", points},
                        {"localization", loc},
                        {"norms", {{"inf", norm_inf}, {"one", norm_one}}},
                        {"flags",
                         {{"ambiguous_pairing", ambiguous_pairing},
                          {"empty_remainder", empty_remainder},
                          {"converged", converged}}}};
    if (!residuals.empty()) j["residuals"] = residuals;
    if (!std::isnan(esd_ks)) j["esd_ks"] = esd_ks;
    if (!std::isnan(hat_norm))
      j["truncation"] = {{"hat_norm", hat_norm},
                         {"exceeded", exceeded},
                         {"prime_inf_ratio", empty_remainder ? nlohmann::json(nullptr) : nlohmann::json(prime_inf_ratio)},
                         {"prime_one_ratio", empty_remainder ? nlohmann::json(nullptr) : nlohmann::json(prime_one_ratio)}};
    if (with_timing) j["elapsed_ms"] = elapsed_ms;
    return j;
  }
};

namespace detail {

inline void require_bounds(const SparseMatrix& m, double lambda1, const std::string& tag) {
  const double lower = rayleigh_lower_bound(m);
  const double upper = norm_upper_bound(m);
  if (lambda1 < lower * (1.0 - 1e-9))
    throw InvariantViolation(tag + ": Rayleigh bound violated (" + std::to_string(lambda1) + " < " +
                           std::to_string(lower) + ")");
  if (lambda1 > upper * (1.0 + 1e-9))
    throw InvariantViolation(tag + ": norm bound violated (" + std::to_string(lambda1) + " > " +
                           std::to_string(upper) + ")");
}

/// Entries whose magnitude is within 1e-6 (relative) of a neighbor make the
/// eigenvalue-to-entry pairing ambiguous.
inline bool near_tie(const std::vector<RankedEntry>& e) {
  for (std::size_t l = 1; l < e.size(); ++l)
    if (e[l - 1].magnitude - e[l].magnitude < 1e-6 * e[l - 1].magnitude) return true;
  return false;
}

inline void localization_curve(ReplicateRecord& rec, const std::vector<double>& v1, const ReplicateContext& ctx) {
  for (double b : ctx.beta_grid) {
    const std::size_t L = support_size(v1.size(), b);
    rec.support.push_back(L);
    rec.mass.push_back(top_mass(v1, L));
    rec.localized.push_back(is_localized(v1, L, ctx.eta));
  }
  rec.ipr = inverse_participation_ratio(v1);
}

inline double entry_distance(const std::vector<double>& v, const RankedEntry& e, bool hermitian) {
  if (hermitian && e.i != e.j) return distance_to_pair_vector(v, e.i, e.j, e.theta);
  return distance_to_basis_vector(v, e.i);
}

}  // namespace detail

/// Measures one sampled (or planted) matrix. Throws InvariantViolation when an
/// exact inequality fails, which aborts the experiment.
inline ReplicateRecord analyze_replicate(const SparseMatrix& m, const ReplicateContext& ctx, std::size_t r = 0,
                                         std::uint64_t seed = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool herm = ctx.kind == ExperimentKind::Hermitian;
  if (herm != m.symmetric()) throw std::invalid_argument("matrix symmetry does not match the experiment kind");
  const std::string tag = "replicate " + std::to_string(r);
  const std::uint64_t solver_seed = stream_row_key(seed, StreamTag::Solver, r);
  const bool edge_like = ctx.kind == ExperimentKind::Edge || (herm && ctx.regime == Regime::Edge);

  ReplicateRecord rec;
  rec.r = r;
  rec.seed = seed;
  const auto nrm = norms(m);
  rec.norm_inf = nrm.inf_norm;
  rec.norm_one = nrm.one_norm;
  rec.entries = top_entries(m, ctx.top_k).entries;
  rec.ambiguous_pairing = detail::near_tie(rec.entries);

  std::vector<std::vector<double>> vecs;
  if (ctx.kind == ExperimentKind::Truncation) {
    const auto full = top_eigs(m, 1, ctx.tol, solver_seed);
    rec.converged = full.converged;
    rec.eigs = full.eigenvalues;
    const auto split = truncate_split(m, ctx.level);
    if (split.kept.nnz() > 0) {
      const auto hat = top_eigs(split.kept, 1, ctx.tol, solver_seed ^ 1);
      rec.hat_norm = hat.eigenvalues[0];
      rec.converged = rec.converged && hat.converged;
    } else {
      rec.hat_norm = 0.0;
    }
    rec.exceeded = rec.hat_norm >= ctx.norm_threshold;
    const double top = rec.entries.empty() ? 0.0 : rec.entries[0].magnitude;
    rec.empty_remainder = split.remainder.nnz() == 0;
    if (rec.empty_remainder) {
      rec.prime_inf_ratio = rec.prime_one_ratio = 0.0;
    } else {
      const auto pn = norms(split.remainder);
      rec.prime_inf_ratio = pn.inf_norm / top;
      rec.prime_one_ratio = pn.one_norm / top;
    }
    const double hat_inf = split.kept.nnz() ? norms(split.kept).inf_norm : 0.0;
    const double prime_inf = rec.empty_remainder ? 0.0 : norms(split.remainder).inf_norm;
    if (hat_inf + prime_inf < rec.norm_inf * (1.0 - 1e-12))
      throw InvariantViolation(tag + ": triangle inequality on the truncation split violated");
  } else if (ctx.kind == ExperimentKind::Edge) {
    if (ctx.dense && ctx.p <= kDefaultDenseLimit) {
      const auto full = eigvals_dense_symmetric(gram_dense(m));
      rec.eigs.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(ctx.top_k));
      rec.esd_ks = esd(full, std::pow(static_cast<double>(ctx.n), ctx.mu), ctx.esd_bins, ctx.rho).ks_to_mp;
      const auto v1 = top_eigs(m, 1, ctx.tol, solver_seed);
      rec.converged = v1.converged;
      vecs = v1.eigenvectors;
    } else {
      const auto res = top_eigs(m, ctx.top_k, ctx.tol, solver_seed);
      rec.converged = res.converged;
      rec.eigs = res.eigenvalues;
      vecs = res.eigenvectors;
    }
  } else {
    const auto res = top_eigs(m, ctx.top_k, ctx.tol, solver_seed);
    rec.converged = res.converged;
    rec.eigs = res.eigenvalues;
    vecs = res.eigenvectors;
  }

  // Exact bounds on the top eigenvalue.
  if (herm) {
    // Rayleigh quotient of the pair vector (e_i + sign e_j)/sqrt 2 of the top entry.
    if (rec.eigs[0] > rec.norm_inf * (1.0 + 1e-9)) throw InvariantViolation(tag + ": norm bound violated");
    if (!rec.entries.empty()) {
      const auto& e = rec.entries[0];
      const double q = e.i == e.j ? m.at(e.i, e.i) : e.magnitude + 0.5 * (m.at(e.i, e.i) + m.at(e.j, e.j));
      if (rec.eigs[0] < q - 1e-9 * rec.norm_inf) throw InvariantViolation(tag + ": Rayleigh bound violated");
    }
  } else {
    detail::require_bounds(m, rec.eigs[0], tag);
  }

  const std::size_t pairs = std::min(rec.eigs.size(), rec.entries.size());
  for (std::size_t l = 0; l < pairs; ++l) {
    const double mag = rec.entries[l].magnitude;
    rec.ratio_entry.push_back(rec.eigs[l] / (herm ? mag : mag * mag));
  }
  for (double lam : rec.eigs) {
    rec.ratio_edge.push_back(lam / ctx.edge_scale);
    rec.points.push_back(lam / (herm ? ctx.c : ctx.c * ctx.c));
  }
  for (std::size_t l = 0; l < std::min(vecs.size(), rec.entries.size()); ++l)
    rec.loc_dist.push_back(detail::entry_distance(vecs[l], rec.entries[l], herm));

  if (ctx.kind == ExperimentKind::Poisson) {
    for (std::size_t l = 0; l < rec.entries.size(); ++l) {
      const auto& e = rec.entries[l];
      std::vector<double> basis(m.rows(), 0.0);
      basis[e.i] = 1.0;
      auto res = gram_matvec(m, basis);
      res[e.i] -= e.magnitude * e.magnitude;
      rec.residuals.push_back(detail::norm2(res) / (ctx.c * ctx.c));
    }
  }
  if (edge_like && !vecs.empty()) detail::localization_curve(rec, vecs[0], ctx);

  rec.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Reports

struct Verdict {
  std::string criterion;
  bool pass = false;
  double observed = 0.0;
  double lo = 0.0;  ///< pass iff lo <= observed <= hi
  double hi = 0.0;

  nlohmann::json to_json() const {
    return {{"criterion", criterion}, {"pass", pass}, {"observed", observed}, {"lo", lo}, {"hi", hi}};
  }
};

inline Verdict make_verdict(std::string name, double observed, double lo, double hi) {
  return {std::move(name), observed >= lo && observed <= hi, observed, lo, hi};
}

struct SpotCheck {
  std::size_t replicate = 0;
  std::size_t deleted_row = 0;
  InterlacingReport report;

  nlohmann::json to_json() const {
    return {{"replicate", replicate},
            {"deleted_row", deleted_row},
            {"holds", report.holds},
            {"max_violation", report.max_violation},
            {"comparisons", report.comparisons}};
  }
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ReplicateRecord> records;
  nlohmann::json aggregates;
  std::vector<Verdict> verdicts;
  double elapsed_ms = 0.0;

  bool all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }

  nlohmann::json to_json(bool with_timing = true) const {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : records) reps.push_back(r.to_json(with_timing));
    nlohmann::json ver = nlohmann::json::array();
    for (const auto& v : verdicts) ver.push_back(v.to_json());
    nlohmann::json j = {{"config", config.to_json()}, {"replicates", reps}, {"aggregates", aggregates}, {"verdicts", ver}};
    if (with_timing) j["timing"] = {{"total_ms", elapsed_ms}};
    return j;
  }

  void write_csv(std::ostream& os) const {
    auto num = [&os](double v) {
      if (std::isnan(v)) {
        os << "nan";
      } else {
        os << v;
      }
    };
    const auto prec = os.precision(17);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    os << "r,lambda1,entry1_sq,ratio_entry,ratio_edge,loc_dist,norm_inf,norm_one\n";
    for (const auto& r : records) {
      const double mag = r.entries.empty() ? nan : r.entries[0].magnitude;
      os << r.r << ',';
      num(r.eigs.empty() ? nan : r.eigs[0]);
      os << ',';
      num(mag * mag);
      os << ',';
      num(r.ratio_entry.empty() ? nan : r.ratio_entry[0]);
      os << ',';
      num(r.ratio_edge.empty() ? nan : r.ratio_edge[0]);
      os << ',';
      num(r.loc_dist.empty() ? nan : r.loc_dist[0]);
      os << ',';
      num(r.norm_inf);
      os << ',';
      num(r.norm_one);
      os << '\n';
    }
    os.precision(prec);
  }
};

/// Acceptance bounds applied by fold_report.
namespace rules {
inline constexpr double kMedianRatioTol = 0.1;
inline constexpr double kKsFrechetMax = 0.12;
inline constexpr double kCountTol = 0.3;
inline constexpr double kBasisDistance = 0.2;
inline constexpr double kBasisFraction = 0.8;
inline constexpr double kPairDistance = 0.25;
inline constexpr double kPairFraction = 0.75;
inline constexpr double kEdgeRatioTol = 0.15;
inline constexpr double kEsdKsMax = 0.08;
inline constexpr double kDelocBeta = 0.3;
inline constexpr double kLocalizedFrequencyMax = 0.1;
inline constexpr double kExceedanceMax = 0.05;
inline constexpr double kPrimeRatioMax = 1.2;
inline constexpr double kPrimeFraction = 0.9;
}  // namespace rules

/// Aggregates and verdicts as a pure fold over the records in index order.
inline ExperimentReport fold_report(const ExperimentConfig& cfg, std::vector<ReplicateRecord> records,
                                    const std::optional<SpotCheck>& spot) {
  ExperimentReport rep;
  rep.config = cfg;
  rep.records = std::move(records);
  const auto& recs = rep.records;
  const bool herm = cfg.hermitian();
  const Regime regime = cfg.regime_class();
  const bool poisson_like = cfg.kind == ExperimentKind::Poisson || (herm && regime == Regime::Poissonian);
  const bool edge_like = cfg.kind == ExperimentKind::Edge || (herm && regime == Regime::Edge);
  nlohmann::json& agg = rep.aggregates;
  agg["replicates"] = recs.size();
  agg["regime"] = to_string(regime);

  std::size_t ambiguous = 0, unconverged = 0;
  for (const auto& r : recs) {
    ambiguous += r.ambiguous_pairing;
    unconverged += !r.converged;
  }
  agg["ambiguous_pairing_count"] = ambiguous;
  agg["unconverged_count"] = unconverged;

  // Ratio statistics per rank; ambiguous replicates only count for l = 1.
  std::vector<double> med_entry, mean_edge, sd_edge;
  for (std::size_t l = 0; l < cfg.top_k; ++l) {
    std::vector<double> re, rg;
    for (const auto& r : recs) {
      if (l < r.ratio_entry.size() && (l == 0 || !r.ambiguous_pairing)) re.push_back(r.ratio_entry[l]);
      if (l < r.ratio_edge.size()) rg.push_back(r.ratio_edge[l]);
    }
    if (re.empty() && rg.empty()) break;
    med_entry.push_back(detail::median(re));
    mean_edge.push_back(detail::mean(rg));
    sd_edge.push_back(detail::stddev(rg));
  }
  std::vector<double> r1;
  for (const auto& r : recs)
    if (!r.ratio_entry.empty()) r1.push_back(r.ratio_entry[0]);
  agg["ratio_entry"] = {{"median", med_entry}, {"q05", detail::quantile(r1, 0.05)}, {"q95", detail::quantile(r1, 0.95)}};
  agg["ratio_edge"] = {{"mean", mean_edge}, {"sd", sd_edge}};
  std::vector<double> lam1;
  for (const auto& r : recs)
    if (!r.eigs.empty()) lam1.push_back(r.eigs[0] / std::pow(static_cast<double>(cfg.n), herm ? cfg.mu() / 2 : cfg.mu()));
  agg["lambda1_over_n_mu"] = {{"mean", detail::mean(lam1)}, {"sd", detail::stddev(lam1)}};

  if (poisson_like) {
    const double shape = herm ? cfg.alpha() : cfg.alpha() / 2.0;
    const IntensityKind ik = herm ? IntensityKind::Hermitian : IntensityKind::Covariance;
    std::vector<double> p1;
    std::vector<std::vector<double>> pts;
    for (const auto& r : recs) {
      if (!r.points.empty()) p1.push_back(r.points[0]);
      pts.push_back(r.points);
    }
    const double ks = ks_statistic(p1, [shape](double t) { return frechet_cdf(t, shape); });
    agg["ks_frechet"] = {{"shape", shape}, {"distance", ks}, {"critical_95", ks_critical_95(p1.size())}};
    std::vector<double> th = cfg.thresholds;
    if (std::find(th.begin(), th.end(), 1.0) == th.end()) th.push_back(1.0);
    std::sort(th.begin(), th.end());
    nlohmann::json counts = nlohmann::json::array();
    double count1 = 0.0, expected1 = 0.0;
    for (const auto& c : poisson_count_test(pts, th, cfg.alpha(), ik)) {
      counts.push_back({{"threshold", c.threshold},
                        {"observed_mean", c.observed_mean},
                        {"observed_variance", c.observed_variance},
                        {"expected", c.expected},
                        {"z_score", c.z_score}});
      if (c.threshold == 1.0) {
        count1 = c.observed_mean;
        expected1 = c.expected;
      }
    }
    agg["poisson_counts"] = counts;
    const double dist_max = herm ? rules::kPairDistance : rules::kBasisDistance;
    std::vector<double> d1;
    for (const auto& r : recs)
      if (!r.loc_dist.empty()) d1.push_back(r.loc_dist[0]);
    const double frac =
        d1.empty() ? 0.0
                   : static_cast<double>(std::count_if(d1.begin(), d1.end(), [&](double d) { return d <= dist_max; })) /
                         static_cast<double>(recs.size());
    agg["localization"] = {{"distance_median", detail::median(d1)}, {"distance_max", dist_max}, {"fraction_within", frac}};
    if (cfg.kind == ExperimentKind::Poisson) {
      std::vector<double> res1;
      for (const auto& r : recs)
        if (!r.residuals.empty()) res1.push_back(r.residuals[0]);
      agg["residual_median"] = detail::median(res1);
    }

    rep.verdicts.push_back(make_verdict("median_ratio_entry", med_entry.empty() ? 0.0 : med_entry[0],
                                        1.0 - rules::kMedianRatioTol, 1.0 + rules::kMedianRatioTol));
    rep.verdicts.push_back(make_verdict("ks_frechet", ks, 0.0, rules::kKsFrechetMax));
    rep.verdicts.push_back(make_verdict("mean_count_x1", count1, expected1 - rules::kCountTol, expected1 + rules::kCountTol));
    rep.verdicts.push_back(make_verdict(herm ? "pair_localization_fraction" : "localization_fraction", frac,
                                        herm ? rules::kPairFraction : rules::kBasisFraction, 1.0));
  }

  if (edge_like) {
    const std::size_t nb = recs.empty() ? 0 : recs[0].support.size();
    std::vector<double> freq(nb, 0.0), mass(nb, 0.0);
    for (const auto& r : recs)
      for (std::size_t b = 0; b < r.support.size() && b < nb; ++b) {
        freq[b] += r.localized[b];
        mass[b] += r.mass[b];
      }
    for (std::size_t b = 0; b < nb; ++b) {
      freq[b] /= static_cast<double>(recs.size());
      mass[b] /= static_cast<double>(recs.size());
    }
    const std::vector<double> betas = make_context(cfg).beta_grid;
    std::vector<std::size_t> supports;
    for (std::size_t b = 0; b < nb; ++b) supports.push_back(recs[0].support[b]);
    agg["localization"] = {{"beta", betas}, {"L", supports}, {"eta", cfg.eta}, {"frequency", freq}, {"mean_mass", mass}};
    double deloc = 0.0;
    for (std::size_t b = 0; b < nb && b < betas.size(); ++b)
      if (betas[b] == rules::kDelocBeta) deloc = freq[b];
    rep.verdicts.push_back(make_verdict("mean_ratio_edge", mean_edge.empty() ? 0.0 : mean_edge[0],
                                        1.0 - rules::kEdgeRatioTol, 1.0 + rules::kEdgeRatioTol));
    std::vector<double> ks;
    for (const auto& r : recs)
      if (!std::isnan(r.esd_ks)) ks.push_back(r.esd_ks);
    if (!ks.empty()) {
      agg["esd_ks"] = {{"mean", detail::mean(ks)}, {"max", *std::max_element(ks.begin(), ks.end())}};
      rep.verdicts.push_back(make_verdict("mean_esd_ks", detail::mean(ks), 0.0, rules::kEsdKsMax));
    } else if (cfg.kind == ExperimentKind::Edge) {
      agg["esd_ks"] = "not evaluated (dense path off or p above the dense limit)";
    }
    rep.verdicts.push_back(make_verdict("localization_frequency", deloc, 0.0, rules::kLocalizedFrequencyMax));
  }

  if (cfg.kind == ExperimentKind::Truncation) {
    std::size_t exceeded = 0, empty = 0, within = 0;
    std::vector<double> hat, inf_ratio, one_ratio;
    for (const auto& r : recs) {
      exceeded += r.exceeded;
      empty += r.empty_remainder;
      within += r.prime_inf_ratio <= rules::kPrimeRatioMax;
      hat.push_back(r.hat_norm);
      if (!r.empty_remainder) {
        inf_ratio.push_back(r.prime_inf_ratio);
        one_ratio.push_back(r.prime_one_ratio);
      }
    }
    const double reps = static_cast<double>(recs.size());
    const auto ctx = make_context(cfg);
    agg["truncation"] = {{"level", ctx.level},
                         {"norm_threshold", ctx.norm_threshold},
                         {"hat_norm_mean", detail::mean(hat)},
                         {"hat_norm_max", hat.empty() ? 0.0 : *std::max_element(hat.begin(), hat.end())},
                         {"exceedance_frequency", static_cast<double>(exceeded) / reps},
                         {"empty_remainder_count", empty},
                         {"prime_inf_ratio_median", detail::median(inf_ratio)},
                         {"prime_one_ratio_median", detail::median(one_ratio)},
                         {"prime_inf_within_fraction", static_cast<double>(within) / reps}};
    rep.verdicts.push_back(make_verdict("exceedance_frequency", static_cast<double>(exceeded) / reps, 0.0,
                                        rules::kExceedanceMax));
    rep.verdicts.push_back(make_verdict("prime_inf_ratio_fraction", static_cast<double>(within) / reps,
                                        rules::kPrimeFraction, 1.0));
  }

  if (spot) {
    agg["interlacing_spot_check"] = spot->to_json();
    rep.verdicts.push_back(make_verdict("interlacing_spot_check", spot->report.holds ? 1.0 : 0.0, 1.0, 1.0));
  }
  return rep;
}

/// Row-deletion interlacing on replicate `rec`: top-k Gram eigenvalues of M
/// against those of M without the row of the largest entry.
inline SpotCheck interlacing_spot_check(const SparseMatrix& m, const ReplicateRecord& rec, std::size_t k) {
  SpotCheck s;
  s.replicate = rec.r;
  s.deleted_row = rec.entries.empty() ? 0 : rec.entries[0].i;
  const auto view = detail::rectangular_view(m);
  const std::size_t kk = std::min(k, view.rows() - 1);
  if (kk == 0) return s;
  const std::uint64_t seed = stream_row_key(rec.seed, StreamTag::Solver, rec.r + 7);
  const auto parent = top_eigs(view, kk, 1e-12, seed, view.rows());
  const auto minor = top_eigs(delete_row(view, s.deleted_row), kk, 1e-12, seed, view.rows() - 1);
  s.report = check_interlacing(parent.eigenvalues, minor.eigenvalues, InterlacingMode::RowDeletion, 1e-9, true);
  return s;
}

inline std::size_t spot_check_index(const ExperimentConfig& cfg) {
  return static_cast<std::size_t>(mix64(cfg.master_seed ^ 0x5350u) % cfg.replicates);
}

/// Shared driver: samples every replicate from its derived seed, analyzes
/// them on the worker pool and folds the records in index order.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const ReplicateContext ctx = make_context(cfg);
  const std::size_t spot_r = spot_check_index(cfg);
  std::vector<ReplicateRecord> records(cfg.replicates);
  std::optional<SpotCheck> spot;
  parallel_for_index(cfg.replicates, resolve_workers(cfg.workers), [&](std::size_t r) {
    const std::uint64_t seed = derive_replicate_seed(cfg.master_seed, r);
    const SparseMatrix m = sample_matrix(cfg.ensemble(seed));
    records[r] = analyze_replicate(m, ctx, r, seed);
    if (r == spot_r) spot = interlacing_spot_check(m, records[r], cfg.top_k);
  });
  auto rep = fold_report(cfg, std::move(records), spot);
  rep.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline ExperimentReport run_poisson_experiment(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::Poisson;
  return run_experiment(cfg);
}

inline ExperimentReport run_edge_experiment(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::Edge;
  return run_experiment(cfg);
}

inline ExperimentReport run_hermitian_experiment(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::Hermitian;
  return run_experiment(cfg);
}

inline ExperimentReport run_truncation_experiment(ExperimentConfig cfg, std::optional<double> gamma,
                                                  std::optional<double> gamma_prime, double kappa) {
  cfg.kind = ExperimentKind::Truncation;
  if (gamma) cfg.gamma = gamma;
  if (gamma_prime) cfg.gamma_prime = gamma_prime;
  cfg.kappa = kappa;
  return run_experiment(cfg);
}

// ---------------------------------------------------------------------------
// Phase sweep

/// Parses "lo:hi:step" (or a single value) into an inclusive grid.
inline std::vector<double> parse_grid(std::string_view s) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = s.find(':', start);
    const std::string_view tok = s.substr(start, colon == std::string_view::npos ? s.size() - start : colon - start);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
      throw std::invalid_argument("grid '" + std::string(s) + "' must be lo:hi:step with finite numbers");
    parts.push_back(v);
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3) throw std::invalid_argument("grid '" + std::string(s) + "' must be lo:hi:step");
  const double lo = parts[0], hi = parts[1], step = parts[2];
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("grid '" + std::string(s) + "' needs lo <= hi and step > 0");
  const double count = std::floor((hi - lo) / step + 1e-9) + 1.0;
  if (count > 1e4) throw std::invalid_argument("grid '" + std::string(s) + "' has more than 10^4 points");
  std::vector<double> g;
  for (std::size_t k = 0; k < static_cast<std::size_t>(count); ++k) g.push_back(lo + static_cast<double>(k) * step);
  return g;
}

struct SweepConfig {
  std::vector<double> alphas;
  std::vector<double> mus;
  std::size_t n = 200;
  double rho = 1.0;
  std::size_t replicates = 10;
  std::uint64_t master_seed = 1;
  double tol = 1e-10;
  std::size_t workers = 0;

  void validate() const {
    if (alphas.empty() || mus.empty()) throw std::invalid_argument("sweep grids must be nonempty");
    for (double a : alphas)
      if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("alpha grid values must be positive");
    for (double m : mus)
      if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("mu grid values must lie in [0, 1]");
    if (replicates == 0) throw std::invalid_argument("replicates must be at least 1");
    if (!(tol >= 1e-12)) throw std::invalid_argument("tol must be at least 1e-12");
    EnsembleSpec{RectangularShape{n, rho}, TailLaw::pareto(1.0), SparsitySpec::bernoulli(0.5), 0}.validate();
  }

  nlohmann::json to_json() const {
    return {{"alphas", alphas}, {"mus", mus}, {"n", n}, {"rho", rho}, {"replicates", replicates},
            {"master_seed", master_seed}, {"tol", tol}};
  }
};

struct SweepCell {
  double alpha = 0.0;
  double mu = 0.0;
  Regime regime = Regime::Poissonian;
  double median_ratio_entry = 0.0;
  double median_ratio_edge = 0.0;
  double median_loc_dist = 0.0;
};

struct SweepReport {
  SweepConfig config;
  std::vector<SweepCell> cells;  ///< alpha-major order

  void write_csv(std::ostream& os) const {
    const auto prec = os.precision(17);
    os << "alpha,mu,regime,median_ratio_entry,median_ratio_edge,median_loc_dist\n";
    for (const auto& c : cells)
      os << c.alpha << ',' << c.mu << ',' << to_string(c.regime) << ',' << c.median_ratio_entry << ','
         << c.median_ratio_edge << ',' << c.median_loc_dist << '\n';
    os.precision(prec);
  }

  nlohmann::json to_json() const {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : cells)
      cs.push_back({{"alpha", c.alpha},
                    {"mu", c.mu},
                    {"regime", to_string(c.regime)},
                    {"median_ratio_entry", c.median_ratio_entry},
                    {"median_ratio_edge", c.median_ratio_edge},
                    {"median_loc_dist", c.median_loc_dist}});
    return {{"config", config.to_json()}, {"cells", cs}};
  }
};

/// Top eigenpair against the largest entry for every (alpha, mu) cell. Laws
/// with alpha > 2 are standardized so the edge ratio is meaningful.
inline SweepReport run_phase_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t cells = cfg.alphas.size() * cfg.mus.size();
  const std::size_t total = cells * cfg.replicates;
  std::vector<double> entry(total), edge(total), dist(total);
  parallel_for_index(total, resolve_workers(cfg.workers), [&](std::size_t idx) {
    const std::size_t cell = idx / cfg.replicates, r = idx % cfg.replicates;
    const double a = cfg.alphas[cell / cfg.mus.size()], mu = cfg.mus[cell % cfg.mus.size()];
    const std::uint64_t seed = derive_replicate_seed(derive_replicate_seed(cfg.master_seed, cell), r);
    const EnsembleSpec spec{RectangularShape{cfg.n, cfg.rho}, TailLaw::pareto(a, a > 2.0), SparsitySpec::bernoulli(mu), seed};
    const SparseMatrix m = sample_matrix(spec);
    const auto top = top_entries(m, 1).entries;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (top.empty()) {
      entry[idx] = edge[idx] = dist[idx] = nan;
      return;
    }
    const auto res = top_eigs(m, 1, cfg.tol, stream_row_key(seed, StreamTag::Solver, r));
    const double lam = res.eigenvalues[0];
    entry[idx] = lam / (top[0].magnitude * top[0].magnitude);
    edge[idx] = lam / (mp_edges(cfg.rho).second * std::pow(static_cast<double>(cfg.n), mu));
    dist[idx] = distance_to_basis_vector(res.eigenvectors[0], top[0].i);
  });
  SweepReport rep;
  rep.config = cfg;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    auto collect = [&](const std::vector<double>& v) {
      std::vector<double> out;
      for (std::size_t r = 0; r < cfg.replicates; ++r)
        if (!std::isnan(v[cell * cfg.replicates + r])) out.push_back(v[cell * cfg.replicates + r]);
      return detail::median(out);
    };
    SweepCell c;
    c.alpha = cfg.alphas[cell / cfg.mus.size()];
    c.mu = cfg.mus[cell % cfg.mus.size()];
    c.regime = classify_regime(c.alpha, c.mu);
    c.median_ratio_entry = collect(entry);
    c.median_ratio_edge = collect(edge);
    c.median_loc_dist = collect(dist);
    rep.cells.push_back(c);
  }
  return rep;
}

}  // namespace htspec
