#include "rdm/constraint_prop.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace rdm {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

}  // namespace

// ---------------------------------------------------------------------------
// Hermitian basis

HermitianBasis::HermitianBasis(Index n_c) : n_(n_c)
{
    if (n_c < 1)
        throw ValidationError("Hermitian basis: dimension must be positive");
    for (Index a = 0; a < n_; ++a)
        for (Index b = a + 1; b < n_; ++b)
            pairs_.emplace_back(a, b);
    s_tilde_ = CMatrix::Zero(n_ * n_, n_ * n_);
    for (Index j = 0; j < size(); ++j)
        s_tilde_.col(j) = flatten(matrix(j));
}

HermitianBasis::Kind HermitianBasis::kind(Index j) const
{
    if (j < 0 || j >= size())
        throw ValidationError("Hermitian basis: index out of range");
    if (j < n_)
        return Kind::Diagonal;
    return j < n_ + n_pairs() ? Kind::Symmetric : Kind::Antisymmetric;
}

CMatrix HermitianBasis::matrix(Index j) const
{
    CMatrix s = CMatrix::Zero(n_, n_);
    switch (kind(j)) {
    case Kind::Diagonal:
        s(j, j) = 1.0;
        break;
    case Kind::Symmetric: {
        auto [a, b] = pair(j - n_);
        s(a, b) = 1.0;
        s(b, a) = 1.0;
        break;
    }
    case Kind::Antisymmetric: {
        auto [a, b] = pair(j - n_ - n_pairs());
        s(a, b) = cplx(0.0, 1.0);
        s(b, a) = cplx(0.0, -1.0);
        break;
    }
    }
    return s;
}

RVector HermitianBasis::coords(const CMatrix& z) const
{
    if (z.rows() != n_ || z.cols() != n_)
        throw ValidationError("Hermitian basis: matrix has the wrong shape");
    RVector x(size());
    Index np = n_pairs();
    for (Index j = 0; j < n_; ++j)
        x(j) = z(j, j).real();
    for (Index p = 0; p < np; ++p) {
        auto [a, b] = pairs_[static_cast<std::size_t>(p)];
        x(n_ + p) = z(a, b).real();
        x(n_ + np + p) = z(a, b).imag();
    }
    return x;
}

CMatrix HermitianBasis::from_coords(const RVector& x) const
{
    if (x.size() != size())
        throw ValidationError("Hermitian basis: coordinate vector has the wrong length");
    CMatrix z(n_, n_);
    Index np = n_pairs();
    for (Index j = 0; j < n_; ++j)
        z(j, j) = x(j);
    for (Index p = 0; p < np; ++p) {
        auto [a, b] = pairs_[static_cast<std::size_t>(p)];
        z(a, b) = cplx(x(n_ + p), x(n_ + np + p));
        z(b, a) = cplx(x(n_ + p), -x(n_ + np + p));
    }
    return z;
}

CVector HermitianBasis::functional(const CMatrix& g) const
{
    if (g.rows() != n_ || g.cols() != n_)
        throw ValidationError("Hermitian basis: functional matrix has the wrong shape");
    CVector v(size());
    Index np = n_pairs();
    const cplx i(0.0, 1.0);
    for (Index j = 0; j < n_; ++j)
        v(j) = g(j, j);
    for (Index p = 0; p < np; ++p) {
        auto [a, b] = pairs_[static_cast<std::size_t>(p)];
        v(n_ + p) = g(a, b) + g(b, a);
        v(n_ + np + p) = i * (g(a, b) - g(b, a));
    }
    return v;
}

// ---------------------------------------------------------------------------
// Constraints

ConstraintSpec::ConstraintSpec(Index n_c, std::vector<std::pair<Index, Index>> zero_pairs,
                               double trace_value)
    : n_(n_c), trace_(trace_value), zeros_(std::move(zero_pairs))
{
    if (n_c < 1)
        throw ValidationError("constraint spec: dimension must be positive");
    Index np = n_ * (n_ - 1) / 2;
    Index total = n_ * n_;
    std::vector<bool> gone(static_cast<std::size_t>(total), false);
    auto pair_index = [&](Index a, Index b) { return a * n_ - a * (a + 1) / 2 + (b - a - 1); };
    for (auto [i, j] : zeros_) {
        if (i < 0 || j < i || j >= n_)
            throw ValidationError("constraint spec: zero pair (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ") out of range or not ordered");
        if (i == j) {
            gone[static_cast<std::size_t>(i)] = true;
        } else {
            Index p = pair_index(i, j);
            gone[static_cast<std::size_t>(n_ + p)] = true;
            gone[static_cast<std::size_t>(n_ + np + p)] = true;
        }
    }
    pivot_ = -1;
    for (Index j = n_ - 1; j >= 0; --j)
        if (!gone[static_cast<std::size_t>(j)]) {
            pivot_ = j;
            break;
        }
    if (pivot_ < 0)
        throw ValidationError("constraint spec: every diagonal entry is declared zero");
    is_diag_.assign(static_cast<std::size_t>(total), false);
    for (Index j = 0; j < total; ++j) {
        is_diag_[static_cast<std::size_t>(j)] = j < n_;
        if (gone[static_cast<std::size_t>(j)])
            deleted_.push_back(j);
        else if (j != pivot_)
            kept_.push_back(j);
    }
}

RVector ConstraintSpec::expand(const RVector& x_minus) const
{
    if (x_minus.size() != reduced_size())
        throw ValidationError("constraint spec: reduced vector has length " +
                              std::to_string(x_minus.size()) + ", expected " +
                              std::to_string(reduced_size()));
    RVector x = RVector::Zero(n_ * n_);
    double diag_sum = 0.0;
    for (std::size_t i = 0; i < kept_.size(); ++i) {
        Index j = kept_[i];
        x(j) = x_minus(static_cast<Index>(i));
        if (is_diag_[static_cast<std::size_t>(j)])
            diag_sum += x(j);
    }
    x(pivot_) = trace_ - diag_sum;
    return x;
}

RVector ConstraintSpec::restrict_coords(const RVector& x) const
{
    if (x.size() != n_ * n_)
        throw ValidationError("constraint spec: coordinate vector has the wrong length");
    RVector out(reduced_size());
    for (std::size_t i = 0; i < kept_.size(); ++i)
        out(static_cast<Index>(i)) = x(kept_[i]);
    return out;
}

namespace {

template <typename Mat, typename Vec>
ConstrainedSystem<Mat, Vec> assemble_impl(const Mat& ms, const ConstraintSpec& spec,
                                          const Vec& q_hist)
{
    Index n = spec.n_c();
    if (ms.cols() != n * n)
        throw ValidationError("assemble: coordinate columns " + std::to_string(ms.cols()) +
                              " do not match N_C^2 = " + std::to_string(n * n));
    if (q_hist.size() != ms.rows())
        throw ValidationError("assemble: history length does not match rows");
    const auto& kept = spec.kept();
    ConstrainedSystem<Mat, Vec> out;
    out.m.resize(ms.rows(), static_cast<Index>(kept.size()));
    auto pivot = ms.col(spec.pivot());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        Index j = kept[i];
        if (j < n)
            out.m.col(static_cast<Index>(i)) = ms.col(j) - pivot;
        else
            out.m.col(static_cast<Index>(i)) = ms.col(j);
    }
    out.b = q_hist - spec.trace_value() * pivot;
    return out;
}

}  // namespace

ConstrainedSystem<CMatrix, CVector> assemble_from_coordinate_columns(const CMatrix& ms,
                                                                     const ConstraintSpec& spec,
                                                                     const CVector& q_hist)
{
    return assemble_impl(ms, spec, q_hist);
}

ConstrainedSystem<RMatrix, RVector> assemble_from_coordinate_columns(const RMatrix& ms,
                                                                     const ConstraintSpec& spec,
                                                                     const RVector& q_hist)
{
    return assemble_impl(ms, spec, q_hist);
}

ConstrainedSystem<CMatrix, CVector> assemble_constrained_system(const CMatrix& m,
                                                                const HermitianBasis& basis,
                                                                const ConstraintSpec& spec,
                                                                const CVector& q_hist)
{
    if (basis.dim() != spec.n_c())
        throw ValidationError("assemble_constrained_system: basis and constraint dimensions differ");
    if (m.cols() != basis.size())
        throw ValidationError("assemble_constrained_system: M has " + std::to_string(m.cols()) +
                              " columns, expected N_C^2 = " + std::to_string(basis.size()));
    return assemble_impl(CMatrix(m * basis.s_tilde()), spec, q_hist);
}

RVector hermitian_isometric_coords(const CMatrix& q)
{
    Index k = q.rows();
    if (q.cols() != k)
        throw ValidationError("hermitian_isometric_coords: matrix is not square");
    RVector out(k * k);
    Index r = 0;
    for (Index b = 0; b < k; ++b)
        out(r++) = q(b, b).real();
    for (Index b = 0; b < k; ++b)
        for (Index c = b + 1; c < k; ++c) {
            out(r++) = kSqrt2 * q(b, c).real();
            out(r++) = kSqrt2 * q(b, c).imag();
        }
    return out;
}

RMatrix hermitian_isometric_rows(const CMatrix& m, Index k)
{
    Index kk = k * k;
    if (kk < 1 || m.rows() % kk != 0)
        throw ValidationError("hermitian_isometric_rows: rows are not a multiple of K^2");
    RMatrix out(m.rows(), m.cols());
    for (Index blk = 0; blk < m.rows() / kk; ++blk) {
        Index base = blk * kk;
        Index r = base;
        for (Index b = 0; b < k; ++b)
            out.row(r++) = m.row(base + b + b * k).real();
        for (Index b = 0; b < k; ++b)
            for (Index c = b + 1; c < k; ++c) {
                out.row(r++) = kSqrt2 * m.row(base + b + c * k).real();
                out.row(r++) = kSqrt2 * m.row(base + b + c * k).imag();
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Propagator

QPropagator::QPropagator(const BTensor& b, const DelayConfig& cfg, PropagationMode mode,
                         ConstraintSpec spec)
    : b_(b), cfg_(cfg), mode_(mode), spec_(std::move(spec)), basis_(b.n_configs()),
      k_(b.n_orbitals()), nc_(b.n_configs())
{
    cfg_.validate();
    if (spec_.n_c() != nc_)
        throw ValidationError("QPropagator: constraint dimension does not match B");
    slices_.resize(static_cast<std::size_t>(k_ * k_));
    for (Index c = 0; c < k_; ++c)
        for (Index bb = 0; bb < k_; ++bb)
            slices_[static_cast<std::size_t>(bb + c * k_)] = b_.slice(bb, c);
}

void QPropagator::reset(const CMatrix& q0)
{
    if (q0.rows() != k_ || q0.cols() != k_)
        throw ValidationError("QPropagator: Q has the wrong shape");
    us_.clear();
    qs_.clear();
    qs_.push_front(q0);
    t_ = 0;
}

void QPropagator::push(const CMatrix& u, const CMatrix& q_next)
{
    us_.push_front(u);
    qs_.push_front(q_next);
    Index depth = cfg_.depth();
    while (static_cast<Index>(us_.size()) > depth)
        us_.pop_back();
    while (static_cast<Index>(qs_.size()) > depth + 1)
        qs_.pop_back();
    ++t_;
}

void QPropagator::advance_known(const CMatrix& u, const CMatrix& q_next)
{
    if (t_ < 0)
        throw ValidationError("QPropagator: call reset() first");
    if (u.rows() != nc_ || u.cols() != nc_ || q_next.rows() != k_ || q_next.cols() != k_)
        throw ValidationError("QPropagator: advance_known shapes do not match the system");
    push(u, q_next);
}

bool QPropagator::warmed_up() const
{
    return t_ >= 0 && static_cast<Index>(us_.size()) >= cfg_.depth() &&
           static_cast<Index>(qs_.size()) >= cfg_.depth() + 1;
}

std::vector<CMatrix> QPropagator::back_products() const
{
    if (!warmed_up())
        throw ValidationError("QPropagator: history holds " + std::to_string(qs_.size()) +
                              " states, need " + std::to_string(cfg_.depth() + 1));
    std::vector<CMatrix> out;
    out.reserve(static_cast<std::size_t>(cfg_.ell + 1));
    CMatrix a = CMatrix::Identity(nc_, nc_);
    out.push_back(a);
    for (Index j = 1; j <= cfg_.ell; ++j) {
        for (Index i = (j - 1) * cfg_.stride; i < j * cfg_.stride; ++i)
            a = us_[static_cast<std::size_t>(i)].adjoint() * a;
        out.push_back(a);
    }
    return out;
}

CMatrix QPropagator::build_M() const
{
    auto prods = back_products();
    Index kk = k_ * k_;
    CMatrix m((cfg_.ell + 1) * kk, nc_ * nc_);
    for (Index j = 0; j <= cfg_.ell; ++j) {
        const CMatrix& a = prods[static_cast<std::size_t>(j)];
        CMatrix at = a.transpose(), ac = a.conjugate();
        for (Index r = 0; r < kk; ++r) {
            CMatrix g = at * slices_[static_cast<std::size_t>(r)] * ac;
            m.row(j * kk + r) = flatten(g).transpose();
        }
    }
    return m;
}

CVector QPropagator::stacked_history() const
{
    if (!warmed_up())
        throw ValidationError("QPropagator: history underflow");
    Index kk = k_ * k_;
    CVector q((cfg_.ell + 1) * kk);
    for (Index j = 0; j <= cfg_.ell; ++j)
        q.segment(j * kk, kk) = flatten(qs_[static_cast<std::size_t>(j * cfg_.stride)]);
    return q;
}

ConstrainedSystem<RMatrix, RVector> QPropagator::real_system() const
{
    auto prods = back_products();
    Index kk = k_ * k_;
    RMatrix ms((cfg_.ell + 1) * kk, nc_ * nc_);
    RVector q((cfg_.ell + 1) * kk);
    for (Index j = 0; j <= cfg_.ell; ++j) {
        const CMatrix& a = prods[static_cast<std::size_t>(j)];
        CMatrix at = a.transpose(), ac = a.conjugate();
        Index r = j * kk;
        for (Index b = 0; b < k_; ++b) {
            CMatrix g = at * slices_[static_cast<std::size_t>(b + b * k_)] * ac;
            ms.row(r++) = basis_.functional(g).real().transpose();
        }
        for (Index b = 0; b < k_; ++b)
            for (Index c = b + 1; c < k_; ++c) {
                CMatrix g = at * slices_[static_cast<std::size_t>(b + c * k_)] * ac;
                CVector v = basis_.functional(g);
                ms.row(r++) = kSqrt2 * v.real().transpose();
                ms.row(r++) = kSqrt2 * v.imag().transpose();
            }
        q.segment(j * kk, kk) =
            hermitian_isometric_coords(qs_[static_cast<std::size_t>(j * cfg_.stride)]);
    }
    return assemble_from_coordinate_columns(ms, spec_, q);
}

StepRecord QPropagator::step(const CMatrix& u)
{
    if (u.rows() != nc_ || u.cols() != nc_)
        throw ValidationError("QPropagator: step propagator has the wrong shape");
    if (!warmed_up())
        throw ValidationError("QPropagator: history underflow at step " + std::to_string(t_) +
                              " (need " + std::to_string(cfg_.depth()) + " past steps)");
    StepRecord rec;
    CMatrix p;
    if (mode_ == PropagationMode::Constrained) {
        auto sys = real_system();
        auto sol = lstsq_thresholded(sys.m, sys.b, cfg_.r_tol);
        rec.residual = (sys.m * sol.x - sys.b).norm();
        rec.effective_rank = sol.info.effective_rank;
        rec.condition_number = sol.info.condition_number;
        rec.unknowns = sys.m.cols();
        p = basis_.from_coords(spec_.expand(sol.x));
    } else {
        CMatrix m = build_M();
        CVector q = stacked_history();
        auto sol = lstsq_thresholded(m, q, cfg_.r_tol);
        rec.residual = (m * sol.x - q).norm();
        rec.effective_rank = sol.info.effective_rank;
        rec.condition_number = sol.info.condition_number;
        rec.unknowns = m.cols();
        p = unflatten(sol.x, nc_, nc_);
    }
    rec.rank_deficient = rec.effective_rank < rec.unknowns;
    double tp = 0.0;
    for (Index j = 0; j < nc_; ++j)
        tp += p(j, j).real();
    rec.trace_p = tp;
    rec.hermiticity_defect_p = hermiticity_defect(p);
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (p + p.adjoint()), Eigen::EigenvaluesOnly);
    rec.min_eigenvalue_p = eig.eigenvalues()(0);

    CMatrix q_next = reduce_density(u * p * u.adjoint(), b_);
    // Hermitian in exact arithmetic; a large P leaves roundoff of order
    // eps |P| in the antihermitian part.
    if (mode_ == PropagationMode::Constrained)
        q_next = (0.5 * (q_next + q_next.adjoint())).eval();
    rec.trace_q = q_next.trace().real();
    last_p_ = std::move(p);
    push(u, q_next);
    rec.step = t_;
    return rec;
}

StepRecord QPropagator::step_hamiltonian(const CMatrix& h_t, double dt)
{
    return step(matexp_hermitian(h_t, cplx(0.0, -dt)));
}

// ---------------------------------------------------------------------------
// Rank diagnostic

SchurReport schur_rank_check(const CMatrix& b_tilde, const CMatrix& d1, double tol)
{
    Index kk = b_tilde.rows(), n = b_tilde.cols();
    if (d1.rows() != kk || d1.cols() != n)
        throw ValidationError("schur_rank_check: D1 must have the shape of B~");
    if (2 * kk > n)
        throw ValidationError("schur_rank_check: requires 2K^2 <= N_C^2");
    Eigen::JacobiSVD<CMatrix> sb(b_tilde);
    Eigen::JacobiSVD<CMatrix> sd(d1);
    double scale = std::max(sb.singularValues()(0), sd.singularValues()(0));
    if (!(sb.singularValues()(kk - 1) > 1e-12 * sb.singularValues()(0)))
        throw ValidationError("schur_rank_check: rank(B~) < K^2");

    Eigen::ColPivHouseholderQR<CMatrix> qr(b_tilde);
    const auto& perm = qr.colsPermutation().indices();
    SchurReport rep;
    rep.required = kk;
    std::vector<bool> in_g(static_cast<std::size_t>(n), false);
    for (Index i = 0; i < kk; ++i) {
        rep.columns.push_back(perm(i));
        in_g[static_cast<std::size_t>(perm(i))] = true;
    }
    std::sort(rep.columns.begin(), rep.columns.end());
    std::vector<Index> rest;
    for (Index j = 0; j < n; ++j)
        if (!in_g[static_cast<std::size_t>(j)])
            rest.push_back(j);

    CMatrix bg(kk, kk), dg(kk, kk), bn(kk, n - kk), dn(kk, n - kk);
    for (Index i = 0; i < kk; ++i) {
        bg.col(i) = b_tilde.col(rep.columns[static_cast<std::size_t>(i)]);
        dg.col(i) = d1.col(rep.columns[static_cast<std::size_t>(i)]);
    }
    for (Index i = 0; i < n - kk; ++i) {
        bn.col(i) = b_tilde.col(rest[static_cast<std::size_t>(i)]);
        dn.col(i) = d1.col(rest[static_cast<std::size_t>(i)]);
    }
    CMatrix schur = dn - dg * bg.fullPivLu().solve(bn);
    Eigen::JacobiSVD<CMatrix> ss(schur);
    const RVector& s = ss.singularValues();
    Index r = 0;
    while (r < s.size() && s(r) > tol * scale)
        ++r;
    rep.schur_rank = r;
    rep.condition_holds = r == kk;
    return rep;
}

}  // namespace rdm
