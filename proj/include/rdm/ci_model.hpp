/*
 * Configuration-interaction model: determinant index maps, the driven
 * CI system, and the 4-index tensor B that contracts a full CI density
 * matrix P (N_C x N_C) into the spatial 1-electron reduced density
 * matrix Q (K x K):
 *
 *     Q_{bc} = sum_{k,l} P_{kl} B_{k,l,b,c}.
 *
 * Spin-orbital s >= 1 lives on spatial orbital ceil(s/2); odd indices are
 * one spin, even indices the other.  Q_{bc} is the coefficient of
 * phi_b(r) phi_c(r')^* in the reduced density.
 */
#pragma once

#include <utility>
#include <vector>

#include "rdm/numkit.hpp"

namespace rdm {

/// Ordered N-tuples of spin-orbital indices (1-based), one per determinant.
class DeterminantIndexMap {
public:
    DeterminantIndexMap() = default;
    /// Validates: entries in [1, 2K], distinct within a tuple, no tuple a
    /// reordering of another, count <= C(2K, N).
    DeterminantIndexMap(int n_electrons, int n_orbitals, std::vector<std::vector<int>> tuples);

    /// Every N-subset of the 2K spin-orbitals, increasing, lexicographic.
    static DeterminantIndexMap all_determinants(int n_electrons, int n_orbitals);
    /// Two electrons of opposite spin: q = (j-1)K + k holds (2j-1, 2k).
    /// Matches the factor order of h kron I + I kron h.
    static DeterminantIndexMap opposite_spin_pairs(int n_orbitals);

    int n_electrons() const { return n_; }
    int n_orbitals() const { return k_; }
    Index size() const { return static_cast<Index>(tuples_.size()); }
    const std::vector<int>& operator[](Index q) const { return tuples_[static_cast<std::size_t>(q)]; }
    const std::vector<std::vector<int>>& tuples() const { return tuples_; }

private:
    int n_ = 0;
    int k_ = 0;
    std::vector<std::vector<int>> tuples_;
};

/// f(t) = A sin(omega t) for 0 <= t <= 2 pi cycles / omega, else 0.
struct FieldProfile {
    double amplitude = 0.5;
    double omega = 0.9;
    int cycles = 5;

    double cutoff() const;
    double operator()(double t) const;
    void validate() const;
};

/// Driven CI system, H(t) = H0 + f(t) M_dip.  H0 is diagonal for systems
/// read from molecular data; one-electron constructions produce a full
/// Hermitian H0.  zero_pairs (0-based, i <= j) lists entries of P that
/// are identically zero.
struct CiSystem {
    int n_electrons = 0;
    int n_orbitals = 0;
    CMatrix c;
    DeterminantIndexMap index_map;
    CMatrix h0;
    CMatrix m_dip;
    FieldProfile field;
    std::vector<std::pair<Index, Index>> zero_pairs;

    Index n_configs() const { return c.rows(); }
    CMatrix hamiltonian(double t) const;
    void validate() const;
};

class BTensor {
public:
    BTensor(Index n_configs, Index n_orbitals);

    Index n_configs() const { return nc_; }
    Index n_orbitals() const { return k_; }

    cplx& operator()(Index k, Index l, Index b, Index c) { return data_[offset(k, l, b, c)]; }
    cplx operator()(Index k, Index l, Index b, Index c) const { return data_[offset(k, l, b, c)]; }

    /// K^2 x N_C^2 matrix with vec(Q) = B~ vec(P), column-major vec:
    /// B~(b + c K, k + l N_C) = B_{k,l,b,c}.
    CMatrix matricized() const;
    /// The N_C x N_C slice G with Q_{bc} = sum_{kl} G_{kl} P_{kl}.
    CMatrix slice(Index b, Index c) const;
    /// N_C^2 x K^2 export in printed layout: row (k-1) N_C + l (row-major
    /// over k, l), column (c-1) K + b.  Integer-valued for C = I.
    CMatrix export_printed() const;

private:
    std::size_t offset(Index k, Index l, Index b, Index c) const
    {
        return static_cast<std::size_t>(((b * k_ + c) * nc_ + l) * nc_ + k);
    }
    Index nc_;
    Index k_;
    std::vector<cplx> data_;
};

/// Determinant-level tensor with C = I (real, from the two single-
/// difference cases of the Slater-Condon rules).
BTensor slater_core(const DeterminantIndexMap& map);

/// B_{k,l,b,c} = sum_{q,q'} C_{kq} core_{q,q',b,c} conj(C_{lq'}).
BTensor build_B(const CiSystem& system);

/// Same tensor from the explicit double sum over all N!^2 permutation
/// pairs; no case analysis.  Refuses N > 4.
BTensor oracle_B(const CiSystem& system);

/// Q_{bc} = sum_{kl} P_{kl} B_{klbc}.
CMatrix reduce_density(const CMatrix& p, const BTensor& b);

/// max_{k,l} |sum_b B_{k,l,b,b} - N delta_{kl}|.
double trace_contraction_defect(const BTensor& b, int n_electrons);

/// Parity (+1 / -1) of the permutation taking `from` onto `to`; both
/// must hold the same distinct values.
int permutation_sign(const std::vector<int>& from, const std::vector<int>& to);

/// Two electrons on K spatial orbitals with one-electron Hamiltonian
/// h(t) = h + f(t) mu and no interaction.  The full Hamiltonian is
/// H(t) = conj(C) (h(t) kron I + I kron h(t)) C^T, which is the form
/// compatible with the contraction above; for real C it coincides with
/// C (...) C^H.
struct OneElectronSystem {
    CiSystem system;
    CMatrix h;
    CMatrix mu;

    CMatrix one_body_hamiltonian(double t) const;
};

OneElectronSystem build_one_electron_system(const CMatrix& h, const CMatrix& mu, const CMatrix& c,
                                            const FieldProfile& field = {});
/// C chosen so that conj(C) (h kron I + I kron h) C^T is diagonal.
OneElectronSystem build_one_electron_system_diagonalized(const CMatrix& h, const CMatrix& mu,
                                                         const FieldProfile& field = {});

struct BplusReport {
    /// |B~^+ vec(2K W + 2 tr(W) I) - vec(W kron I + I kron W)|, any W.
    double general_pinv = 0.0;
    /// |B~ vec(W kron I + I kron W) - vec(2K W + 2 tr(W) I)|, any W.
    double general_forward = 0.0;
    /// The same two checks in the fixed form a W + 4I (a = 4 for K = 2,
    /// 8 for K = 4), which agrees with the general one only when
    /// tr W = 2; evaluated on random W rescaled to trace 2.
    double trace_two_pinv = 0.0;
    double trace_two_forward = 0.0;
    /// |B~ B~^+ - I|.
    double bbplus_identity = 0.0;
    int samples = 0;
};

/// One-electron identities on random complex W.  b must come from an
/// opposite-spin-pair system with C = I and K in {2, 4}.
BplusReport verify_bplus_identities(const BTensor& b, int n_orbitals, int samples = 10,
                                    unsigned seed = 7);

}  // namespace rdm
