/*
 * Delay propagation of the 1RDM Q(t) with the structure of P preserved.
 *
 * History Q(t), Q(t-k), ..., Q(t-lk) determines P(t) through
 *
 *     M(t) vec P(t) = q(t),    block j of M(t) = B~ (C_jk^T kron A_jk),
 *
 * where A_m = U(t-m)^H ... U(t-1)^H maps P(t) back to P(t-m) and C_m is
 * its adjoint.  P is written in the real Hermitian basis S^1..S^{N_C^2},
 * the trace coordinate is eliminated, and declared zeros are dropped, so
 * the unknown is a real vector x- and the reconstructed P is Hermitian,
 * has unit trace and has the declared zeros, whatever the solve returns.
 *
 * The solve is a real least-squares problem.  Q-side rows are mapped to
 * the isometric real coordinates of a Hermitian K x K matrix (diagonal,
 * sqrt2 Re and sqrt2 Im of the strict upper triangle), which has the same
 * singular values and residual norm as the complex system restricted to
 * real x-.
 */
#pragma once

#include <deque>
#include <utility>
#include <vector>

#include "rdm/ci_model.hpp"
#include "rdm/delay_core.hpp"

namespace rdm {

/// Diagonal indicators, then symmetric pairs (1,2)..(1,N)(2,3).., then the
/// antisymmetric pairs (i at (a,b), -i at (b,a)) in the same order.
class HermitianBasis {
public:
    enum class Kind { Diagonal, Symmetric, Antisymmetric };

    explicit HermitianBasis(Index n_c);

    Index dim() const { return n_; }
    Index size() const { return n_ * n_; }
    Index n_pairs() const { return static_cast<Index>(pairs_.size()); }
    std::pair<Index, Index> pair(Index p) const { return pairs_[static_cast<std::size_t>(p)]; }

    Kind kind(Index j) const;
    CMatrix matrix(Index j) const;
    /// N_C^2 x N_C^2, column j = vec(S^j).
    const CMatrix& s_tilde() const { return s_tilde_; }

    RVector coords(const CMatrix& z) const;
    CMatrix from_coords(const RVector& x) const;
    /// v_j = sum_{kl} g_{kl} S^j_{kl}: the linear functional P -> sum g_kl P_kl
    /// written in basis coordinates.
    CVector functional(const CMatrix& g) const;

private:
    Index n_;
    std::vector<std::pair<Index, Index>> pairs_;
    CMatrix s_tilde_;
};

/// Trace elimination plus declared zero entries of P.
class ConstraintSpec {
public:
    /// zero_pairs are 0-based (i, j) with i <= j.
    explicit ConstraintSpec(Index n_c, std::vector<std::pair<Index, Index>> zero_pairs = {},
                            double trace_value = 1.0);

    Index n_c() const { return n_; }
    double trace_value() const { return trace_; }
    /// Basis coordinate of the eliminated diagonal; N_C - 1 unless that
    /// diagonal is a declared zero.
    Index pivot() const { return pivot_; }
    const std::vector<Index>& deleted() const { return deleted_; }
    /// Kept coordinates in order; x- is indexed by position in this list.
    const std::vector<Index>& kept() const { return kept_; }
    Index reduced_size() const { return static_cast<Index>(kept_.size()); }
    const std::vector<std::pair<Index, Index>>& zero_pairs() const { return zeros_; }

    /// x = A(x-): trace coordinate restored, zeros reinserted.
    RVector expand(const RVector& x_minus) const;
    RVector restrict_coords(const RVector& x) const;

private:
    Index n_;
    double trace_;
    std::vector<std::pair<Index, Index>> zeros_;
    Index pivot_ = 0;
    std::vector<Index> deleted_;
    std::vector<Index> kept_;
    std::vector<bool> is_diag_;
};

template <typename Mat, typename Vec>
struct ConstrainedSystem {
    Mat m;  ///< M'': rows x (N_C^2 - 1 - D)
    Vec b;  ///< q - trace * (M S~)[:, pivot]
};

/// From coordinate-space columns (M S~) and stacked history q.
ConstrainedSystem<CMatrix, CVector> assemble_from_coordinate_columns(const CMatrix& ms,
                                                                     const ConstraintSpec& spec,
                                                                     const CVector& q_hist);
ConstrainedSystem<RMatrix, RVector> assemble_from_coordinate_columns(const RMatrix& ms,
                                                                     const ConstraintSpec& spec,
                                                                     const RVector& q_hist);

/// M'' and b from M (rows x N_C^2) and q.
ConstrainedSystem<CMatrix, CVector> assemble_constrained_system(const CMatrix& m,
                                                                const HermitianBasis& basis,
                                                                const ConstraintSpec& spec,
                                                                const CVector& q_hist);

/// Isometric real coordinates of a Hermitian K x K matrix: diagonal, then
/// sqrt2 Re / sqrt2 Im of each strict-upper entry (row-wise).
RVector hermitian_isometric_coords(const CMatrix& q);
/// The same map applied row-block-wise to the K^2 complex rows (column-
/// major (b, c) order) of each block of m, for real right factors.
RMatrix hermitian_isometric_rows(const CMatrix& m, Index k);

enum class PropagationMode { Constrained, Raw };

struct StepRecord {
    Index step = 0;  ///< index of the Q produced
    double residual = 0.0;
    Index effective_rank = 0;
    Index unknowns = 0;
    double condition_number = 0.0;
    double trace_q = 0.0;
    double trace_p = 0.0;
    double hermiticity_defect_p = 0.0;
    double min_eigenvalue_p = 0.0;  ///< reported, not enforced
    bool rank_deficient = false;
};

/// Stateful propagator.  Feed exact history with reset()/advance_known()
/// until warmed_up(), then call step() once per time step.
class QPropagator {
public:
    QPropagator(const BTensor& b, const DelayConfig& cfg, PropagationMode mode,
                ConstraintSpec spec);

    /// Start from Q(0).
    void reset(const CMatrix& q0);
    /// Append U(t) and the known Q(t+1) (warm start).
    void advance_known(const CMatrix& u, const CMatrix& q_next);
    bool warmed_up() const;

    /// Q(t+1) from history and U(t) = exp(-i H(t) dt).
    StepRecord step(const CMatrix& u);
    StepRecord step_hamiltonian(const CMatrix& h_t, double dt);

    const CMatrix& current() const { return qs_.front(); }
    Index time_index() const { return t_; }
    /// P reconstructed in the last step.
    const CMatrix& last_p() const { return last_p_; }

    /// Complex M(t), (l+1)K^2 x N_C^2, for the current history.
    CMatrix build_M() const;
    /// Stacked vec(Q(t)), vec(Q(t-k)), ... (column-major).
    CVector stacked_history() const;
    /// Real constrained system actually solved by step().
    ConstrainedSystem<RMatrix, RVector> real_system() const;

    const HermitianBasis& basis() const { return basis_; }
    const ConstraintSpec& constraints() const { return spec_; }
    const DelayConfig& config() const { return cfg_; }

private:
    std::vector<CMatrix> back_products() const;
    void push(const CMatrix& u, const CMatrix& q_next);

    BTensor b_;
    DelayConfig cfg_;
    PropagationMode mode_;
    ConstraintSpec spec_;
    HermitianBasis basis_;
    Index k_;
    Index nc_;
    std::vector<CMatrix> slices_;  ///< G^{bc}, index b + c K
    std::deque<CMatrix> us_;       ///< U(t-1), U(t-2), ...
    std::deque<CMatrix> qs_;       ///< Q(t), Q(t-1), ...
    CMatrix last_p_;
    Index t_ = -1;
};

struct SchurReport {
    std::vector<Index> columns;  ///< G, 0-based columns of B~
    Index schur_rank = 0;
    Index required = 0;  ///< K^2
    bool condition_holds = false;
};

/// For l = 1: chooses K^2 independent columns G of B~ by pivoted QR and
/// checks whether D1^{-G} - D1^G (B~^G)^{-1} B~^{-G} has rank K^2, which
/// is sufficient for [B~; D1] to have rank 2K^2.
SchurReport schur_rank_check(const CMatrix& b_tilde, const CMatrix& d1, double tol = 1e-10);

}  // namespace rdm
