/*
 * Reference TDCI dynamics: a(t + dt) = exp(-i H(t) dt) a(t) with the
 * left-endpoint Hamiltonian, P = a a^H, Q = reduce_density(P).  The delay
 * propagators use exactly the same per-step exponentials.
 */
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rdm/ci_model.hpp"

namespace rdm {

/// exp(-i H(s dt) dt), the propagator from step s to s + 1.
CMatrix step_propagator(const CiSystem& system, Index step, double dt);

/// exp(i H^T dt) kron exp(-i H dt): vec(P(t+dt)) = L vec(P(t)).
CMatrix liouville_step(const CMatrix& h, double dt);

struct GroundTruthRun {
    double dt = 0.0;
    std::vector<CVector> a;  ///< a(0) ... a(n_steps)

    Index n_steps() const { return static_cast<Index>(a.size()) - 1; }
};

/// a(0) defaults to e_1.
GroundTruthRun propagate_coefficients(const CiSystem& system, double dt, Index n_steps,
                                      const std::optional<CVector>& a0 = std::nullopt);

std::vector<CMatrix> full_density_series(const GroundTruthRun& run);
std::vector<CMatrix> reduced_density_series(const GroundTruthRun& run, const BTensor& b);

/// |lambda_j(t) - lambda_j(0)|, eigenvalues sorted descending.
std::vector<RVector> eigenvalue_drift(const std::vector<CMatrix>& q_series);

/// Entries (i <= j, 0-based) of P that vanish because max_t |a_i(t)| < tol
/// or max_t |a_j(t)| < tol.  A proposal only; nothing applies it.
std::vector<std::pair<Index, Index>> detect_zero_pattern(const GroundTruthRun& run,
                                                         double tol = 1e-12);

/// CSV: t, then Re/Im of each a_j.
void write_coefficients_csv(const GroundTruthRun& run, const std::string& path);

}  // namespace rdm
