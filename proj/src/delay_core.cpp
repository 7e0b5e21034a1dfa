#include "rdm/delay_core.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace rdm {

void DelayConfig::validate() const
{
    if (ell < 0)
        throw ValidationError("delay config: ell must be >= 0");
    if (stride < 1)
        throw ValidationError("delay config: stride must be >= 1");
    if (!(r_tol >= 0.0))
        throw ValidationError("delay config: r_tol must be >= 0");
}

namespace {

Index numerical_rank(const CMatrix& m, double rel)
{
    Eigen::JacobiSVD<CMatrix> dec(m);
    const RVector& s = dec.singularValues();
    if (s.size() == 0 || s(0) == 0.0)
        return 0;
    Index r = 0;
    while (r < s.size() && s(r) > rel * s(0))
        ++r;
    return r;
}

}  // namespace

ReductionMap::ReductionMap(CMatrix r) : r_(std::move(r))
{
    if (r_.rows() < 1 || r_.cols() < 1)
        throw ValidationError("reduction map: empty matrix");
    if (r_.rows() > r_.cols())
        throw ValidationError("reduction map: more rows than columns");
    if (numerical_rank(r_, 1e-12) != r_.rows())
        throw ValidationError("reduction map: rows are not linearly independent");
}

HistoryBuffer::HistoryBuffer(Index dim, const DelayConfig& cfg, bool unitary)
    : dim_(dim), cfg_(cfg), unitary_(unitary)
{
    cfg_.validate();
    if (dim < 1)
        throw ValidationError("history buffer: dimension must be positive");
}

void HistoryBuffer::push_propagator(const CMatrix& a)
{
    if (a.rows() != dim_ || a.cols() != dim_)
        throw ValidationError("history buffer: propagator has wrong shape");
    if (cfg_.depth() == 0)
        return;
    if (unitary_) {
        back_.push_front(a.adjoint());
    } else {
        Eigen::PartialPivLU<CMatrix> lu(a);
        double rc = lu.rcond();
        if (!(rc > 1e-12))
            throw NumericalError("history buffer: propagator condition number exceeds 1e12");
        back_.push_front(lu.inverse());
    }
    while (static_cast<Index>(back_.size()) > cfg_.depth())
        back_.pop_back();
}

void HistoryBuffer::push_observation(const CVector& y)
{
    if (!obs_.empty() && y.size() != obs_.front().size())
        throw ValidationError("history buffer: observation length changed");
    obs_.push_front(y);
    while (static_cast<Index>(obs_.size()) > cfg_.depth() + 1)
        obs_.pop_back();
}

bool HistoryBuffer::warmed_up() const
{
    return propagator_depth() >= cfg_.depth() && observation_depth() >= cfg_.depth() + 1;
}

const CMatrix& HistoryBuffer::inverse_propagator(Index j) const
{
    if (j < 1 || j > propagator_depth())
        throw ValidationError("history buffer: propagator lag " + std::to_string(j) +
                              " not available (depth " + std::to_string(propagator_depth()) +
                              ")");
    return back_[static_cast<std::size_t>(j - 1)];
}

const CVector& HistoryBuffer::observation(Index j) const
{
    if (j < 0 || j >= observation_depth())
        throw ValidationError("history buffer: observation lag " + std::to_string(j) +
                              " not available (depth " + std::to_string(observation_depth()) +
                              ")");
    return obs_[static_cast<std::size_t>(j)];
}

CVector HistoryBuffer::stacked_observations() const
{
    if (observation_depth() < cfg_.depth() + 1)
        throw ValidationError("history buffer: need " + std::to_string(cfg_.depth() + 1) +
                              " observations, have " + std::to_string(observation_depth()));
    Index m = obs_.front().size();
    CVector out((cfg_.ell + 1) * m);
    for (Index j = 0; j <= cfg_.ell; ++j)
        out.segment(j * m, m) = observation(j * cfg_.stride);
    return out;
}

CMatrix build_M(const HistoryBuffer& history, const ReductionMap& r, const DelayConfig& cfg)
{
    cfg.validate();
    Index n = r.cols(), m = r.rows();
    if (history.dim() != n)
        throw ValidationError("build_M: history dimension does not match reduction map");
    if (history.propagator_depth() < cfg.depth())
        throw ValidationError("build_M: need " + std::to_string(cfg.depth()) +
                              " step propagators, have " +
                              std::to_string(history.propagator_depth()));
    CMatrix out((cfg.ell + 1) * m, n);
    out.topRows(m) = r.matrix();
    CMatrix x = CMatrix::Identity(n, n);
    for (Index j = 1; j <= cfg.ell; ++j) {
        for (Index i = (j - 1) * cfg.stride + 1; i <= j * cfg.stride; ++i)
            x = history.inverse_propagator(i) * x;
        out.middleRows(j * m, m) = r.matrix() * x;
    }
    return out;
}

DelayStep propagate_y(const HistoryBuffer& history, const ReductionMap& r, const CMatrix& a_t,
                      const DelayConfig& cfg)
{
    if (a_t.rows() != r.cols() || a_t.cols() != r.cols())
        throw ValidationError("propagate_y: step propagator has wrong shape");
    CMatrix m = build_M(history, r, cfg);
    CVector y = history.stacked_observations();
    if (y.size() != m.rows())
        throw ValidationError("propagate_y: observation stack does not match M(t)");
    auto sol = lstsq_thresholded(m, y, cfg.r_tol);
    DelayStep out;
    out.y_next = r.matrix() * (a_t * sol.x);
    out.diag.effective_rank = sol.info.effective_rank;
    out.diag.condition_number = sol.info.condition_number;
    out.diag.residual = (m * sol.x - y).norm();
    out.diag.rank_deficient = sol.info.effective_rank < r.cols();
    return out;
}

CMatrix complete_reduction_basis(const ReductionMap& r)
{
    Index m = r.rows(), n = r.cols();
    Eigen::JacobiSVD<CMatrix> dec(r.matrix(), Eigen::ComputeFullV);
    const RVector& s = dec.singularValues();
    if (s(m - 1) <= 1e-12 * s(0))
        throw ValidationError("complete_reduction_basis: reduction map is rank deficient");
    return dec.matrixV().rightCols(n - m).adjoint();
}

Index MemoryWindow::kept(Index t) const
{
    switch (kind) {
    case Kind::Newest:
        return std::min(terms, t);
    case Kind::NewestHalf:
        return (t + 1) / 2;
    case Kind::All:
        break;
    }
    return t;
}

MzResult mori_zwanzig_propagate(const CMatrix& a, const ReductionMap& r, const CMatrix& r_tilde,
                                const CVector& y0, const CVector& ytilde0, Index steps,
                                MemoryWindow window)
{
    Index n = r.cols(), m = r.rows();
    if (a.rows() != n || a.cols() != n)
        throw ValidationError("mori_zwanzig_propagate: propagator has wrong shape");
    if (r_tilde.rows() != n - m || r_tilde.cols() != n)
        throw ValidationError("mori_zwanzig_propagate: completion has wrong shape");
    if (y0.size() != m || ytilde0.size() != n - m)
        throw ValidationError("mori_zwanzig_propagate: initial vectors have wrong length");
    if (steps < 1)
        throw ValidationError("mori_zwanzig_propagate: steps must be positive");

    CMatrix full(n, n);
    full.topRows(m) = r.matrix();
    full.bottomRows(n - m) = r_tilde;
    Eigen::FullPivLU<CMatrix> lu(full);
    if (!lu.isInvertible() || lu.rcond() < 1e-14)
        throw ValidationError("mori_zwanzig_propagate: [R; R~] is not invertible");
    CMatrix b = full * a * lu.inverse();
    CMatrix b11 = b.topLeftCorner(m, m), b12 = b.topRightCorner(m, n - m);
    CMatrix b21 = b.bottomLeftCorner(n - m, m), b22 = b.bottomRightCorner(n - m, n - m);

    // kernel[s] = B12 B22^s B21
    std::vector<CMatrix> kernel;
    kernel.reserve(static_cast<std::size_t>(steps));
    CMatrix p = b21;
    for (Index s = 0; s < steps; ++s) {
        kernel.push_back(b12 * p);
        p = b22 * p;
    }

    MzResult out;
    out.y.reserve(static_cast<std::size_t>(steps + 1));
    out.y.push_back(y0);
    double limit = 1e3 * y0.norm();
    CVector w = ytilde0;  // B22^t y~(0)
    for (Index t = 0; t < steps; ++t) {
        CVector next = b11 * out.y[static_cast<std::size_t>(t)] + b12 * w;
        Index terms = window.kept(t);
        for (Index s = 0; s < terms; ++s)
            next += kernel[static_cast<std::size_t>(s)] * out.y[static_cast<std::size_t>(t - 1 - s)];
        w = b22 * w;
        if (!out.diverged && !(next.norm() <= limit)) {
            out.diverged = true;
            out.diverged_at = t + 1;
        }
        out.y.push_back(std::move(next));
    }
    return out;
}

MzResult mori_zwanzig_propagate(const CMatrix& a, const ReductionMap& r, const CVector& y0,
                                const CVector& ytilde0, Index steps,
                                MemoryWindow window)
{
    return mori_zwanzig_propagate(a, r, complete_reduction_basis(r), y0, ytilde0, steps,
                                  window);
}

}  // namespace rdm
