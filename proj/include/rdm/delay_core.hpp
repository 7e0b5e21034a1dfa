/*
 * Time-delay closure for a reduced observable y = R z of a linear system
 * z(t+1) = A(t) z(t).  The stacked history (y(t), y(t-k), ..., y(t-lk))
 * equals M(t) z(t); when M(t) has full column rank the pseudoinverse
 * recovers z(t) and hence y(t+1) = R A(t) M(t)^+ Y(t).
 *
 * Also a reference propagator for the projected (memory-kernel) form of
 * the same system with a fixed unitary A.
 */
#pragma once

#include <deque>
#include <vector>

#include "rdm/numkit.hpp"

namespace rdm {

struct DelayConfig {
    Index ell = 0;     ///< number of memory blocks beyond the current one
    Index stride = 1;  ///< k: spacing of memory blocks in steps
    double r_tol = 1e-12;

    void validate() const;
    Index depth() const { return ell * stride; }
};

/// Row-full-rank m x n matrix R (m < n unless it is invertible).
class ReductionMap {
public:
    explicit ReductionMap(CMatrix r);
    const CMatrix& matrix() const { return r_; }
    Index rows() const { return r_.rows(); }
    Index cols() const { return r_.cols(); }

private:
    CMatrix r_;
};

/// Last l*k step propagators and last l*k+1 reduced vectors, newest first.
/// For a non-unitary system the inverse of each propagator is stored at
/// push time; pushing a propagator with condition number above 1e12 throws.
class HistoryBuffer {
public:
    HistoryBuffer(Index dim, const DelayConfig& cfg, bool unitary = true);

    /// Record A(s) after the state has advanced from s to s+1.
    void push_propagator(const CMatrix& a);
    /// Record y(s) for the newest time s.
    void push_observation(const CVector& y);

    Index propagator_depth() const { return static_cast<Index>(back_.size()); }
    Index observation_depth() const { return static_cast<Index>(obs_.size()); }
    bool warmed_up() const;

    /// A(t-j)^{-1} (the adjoint for unitary systems), j >= 1.
    const CMatrix& inverse_propagator(Index j) const;
    /// y(t-j), j >= 0.
    const CVector& observation(Index j) const;
    /// (y(t), y(t-k), ..., y(t-lk)) stacked.
    CVector stacked_observations() const;

    const DelayConfig& config() const { return cfg_; }
    Index dim() const { return dim_; }

private:
    Index dim_;
    DelayConfig cfg_;
    bool unitary_;
    std::deque<CMatrix> back_;
    std::deque<CVector> obs_;
};

/// (l+1)m x n stack whose block j maps z(t) to y(t - jk).
CMatrix build_M(const HistoryBuffer& history, const ReductionMap& r, const DelayConfig& cfg);

struct StepDiagnostics {
    Index effective_rank = 0;
    double condition_number = 0.0;
    double residual = 0.0;
    bool rank_deficient = false;  ///< effective rank below the unknown count
};

struct DelayStep {
    CVector y_next;
    StepDiagnostics diag;
};

/// y(t+1) = R A(t) M(t)^+ Y(t).  Rank deficiency is reported, not fatal.
DelayStep propagate_y(const HistoryBuffer& history, const ReductionMap& r, const CMatrix& a_t,
                      const DelayConfig& cfg);

/// Rows spanning the orthogonal complement of R's row space, so that
/// [R; R~] is invertible (unitary when R has orthonormal rows).
CMatrix complete_reduction_basis(const ReductionMap& r);

/// Which terms of the memory sum are kept at step t, where t are available.
struct MemoryWindow {
    enum class Kind { All, Newest, NewestHalf };
    Kind kind = Kind::All;
    Index terms = 0;  ///< used by Newest

    static MemoryWindow all() { return {}; }
    static MemoryWindow newest(Index n) { return {Kind::Newest, n}; }
    /// ceil(t/2) newest terms at step t.
    static MemoryWindow newest_half() { return {Kind::NewestHalf, 0}; }
    Index kept(Index t) const;
};

struct MzResult {
    std::vector<CVector> y;      ///< y(0) ... y(steps)
    bool diverged = false;       ///< |y(t)| exceeded 1e3 |y(0)|
    Index diverged_at = -1;      ///< first step where that happened
};

/// Projected propagation with a fixed unitary a and completion R~:
/// y(t+1) = B11 y(t) + sum_{s<t} B12 B22^s B21 y(t-1-s) + B12 B22^t y~(0).
/// The window selects which memory terms are summed; the inhomogeneous
/// term is kept regardless.
MzResult mori_zwanzig_propagate(const CMatrix& a, const ReductionMap& r, const CMatrix& r_tilde,
                                const CVector& y0, const CVector& ytilde0, Index steps,
                                MemoryWindow window = MemoryWindow::all());

/// Same, completing R with complete_reduction_basis(r).
MzResult mori_zwanzig_propagate(const CMatrix& a, const ReductionMap& r, const CVector& y0,
                                const CVector& ytilde0, Index steps,
                                MemoryWindow window = MemoryWindow::all());

}  // namespace rdm
