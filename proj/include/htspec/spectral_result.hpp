#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace htspec {

enum class SolverKind { Dense, Lanczos };

/// Eigenpairs sorted by nonincreasing eigenvalue. Eigenvectors are unit
/// vectors whose largest-magnitude coordinate is positive.
struct SpectralResult {
  std::vector<double> eigenvalues;
  std::vector<std::vector<double>> eigenvectors;  ///< empty when values only
  std::vector<double> residual_norms;             ///< ||A v - lambda v|| per pair
  SolverKind solver = SolverKind::Dense;
  std::size_t iterations = 0;
  std::size_t restarts = 0;
  bool converged = true;  ///< false marks a partial Lanczos result
  bool complete = false;  ///< full spectrum available

  nlohmann::json to_json() const {
    return {{"eigenvalues", eigenvalues},
            {"residuals", residual_norms},
            {"solver", solver == SolverKind::Dense ? "dense" : "lanczos"},
            {"iterations", iterations},
            {"restarts", restarts},
            {"converged", converged}};
  }
};

/// Flips v so its largest-magnitude coordinate (first on ties) is positive.
inline void fix_sign(std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (!v.empty() && v[best] < 0.0)
    for (double& x : v) x = -x;
}

}  // namespace htspec
