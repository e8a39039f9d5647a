#pragma once

#include "htspec/rng.hpp"
#include "htspec/quadrature.hpp"
#include "htspec/tail_law.hpp"
#include "htspec/sparse_matrix.hpp"
#include "htspec/ensemble.hpp"
#include "htspec/spectral_result.hpp"
#include "htspec/dense_eigen.hpp"
#include "htspec/lanczos.hpp"
#include "htspec/spectral.hpp"
#include "htspec/localization.hpp"
#include "htspec/limit_laws.hpp"
#include "htspec/stats.hpp"
#include "htspec/experiments.hpp"
#include "htspec/verification.hpp"
