#include "rdm/numkit.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace rdm {

CMatrix kron(const CMatrix& a, const CMatrix& b)
{
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

double hermiticity_defect(const CMatrix& a)
{
    if (a.rows() != a.cols())
        throw ValidationError("hermiticity_defect: matrix is not square");
    if (a.size() == 0)
        return 0.0;
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

bool is_hermitian(const CMatrix& a, double tol)
{
    if (a.rows() != a.cols())
        return false;
    if (a.size() == 0)
        return true;
    double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return hermiticity_defect(a) <= tol * scale;
}

CMatrix matexp_hermitian(const CMatrix& h, cplx scale)
{
    if (!is_hermitian(h, 1e-12))
        throw ValidationError("matexp_hermitian: input is not Hermitian");
    // Solve on the exactly Hermitian part so the eigenvectors are unitary.
    CMatrix hs = 0.5 * (h + h.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(hs);
    if (eig.info() != Eigen::Success)
        throw NumericalError("matexp_hermitian: eigensolver failed");
    const CMatrix& v = eig.eigenvectors();
    CVector e = (scale * eig.eigenvalues().cast<cplx>()).array().exp();
    return v * e.asDiagonal() * v.adjoint();
}

namespace {

template <typename Mat>
void normalize_signs(Mat& u, Mat& v)
{
    using Scalar = typename Mat::Scalar;
    for (Index j = 0; j < u.cols(); ++j) {
        for (Index i = 0; i < u.rows(); ++i) {
            double mag = std::abs(u(i, j));
            if (mag > 1e-12) {
                Scalar phase = u(i, j) / mag;
                Scalar fix = Scalar(1) / phase;
                u.col(j) *= fix;
                v.col(j) *= fix;
                break;
            }
        }
    }
}

template <typename Mat>
Svd<typename Mat::Scalar> svd_impl(const Mat& m)
{
    if (m.size() == 0)
        throw ValidationError("svd: empty matrix");
    if (!m.allFinite())
        throw NumericalError("svd: matrix has non-finite entries");
    Eigen::BDCSVD<Mat> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success)
        throw NumericalError("svd: decomposition failed");
    Svd<typename Mat::Scalar> out{dec.matrixU(), dec.singularValues(), dec.matrixV()};
    normalize_signs(out.u, out.v);
    return out;
}

template <typename S>
PinvInfo retained(const Svd<S>& d, double r_tol)
{
    if (r_tol < 0.0)
        throw ValidationError("pseudoinverse: r_tol must be non-negative");
    PinvInfo info;
    info.sigma = d.sigma;
    info.sigma_max = d.sigma.size() ? d.sigma(0) : 0.0;
    if (!(info.sigma_max > 0.0))
        throw ValidationError("pseudoinverse: matrix is zero");
    double cut = r_tol * info.sigma_max;
    Index r = 0;
    while (r < d.sigma.size() && d.sigma(r) > cut)
        ++r;
    info.effective_rank = r;
    info.condition_number =
        r > 0 ? info.sigma_max / d.sigma(r - 1) : std::numeric_limits<double>::infinity();
    return info;
}

template <typename Mat, typename Vec>
LstsqResult<Vec> lstsq_impl(const Mat& m, const Vec& b, double r_tol)
{
    if (b.size() != m.rows())
        throw ValidationError("lstsq: right-hand side length does not match rows");
    auto d = svd_impl(m);
    PinvInfo info = retained(d, r_tol);
    Index r = info.effective_rank;
    Vec c = d.u.leftCols(r).adjoint() * b;
    c.array() /= d.sigma.head(r).array().template cast<typename Mat::Scalar>();
    return {d.v.leftCols(r) * c, std::move(info)};
}

}  // namespace

Svd<cplx> svd(const CMatrix& m) { return svd_impl(m); }
Svd<double> svd(const RMatrix& m) { return svd_impl(m); }

PinvResult pinv_thresholded(const CMatrix& m, double r_tol)
{
    if (r_tol < 0.0)
        throw ValidationError("pinv_thresholded: r_tol must be non-negative");
    auto d = svd_impl(m);
    PinvInfo info = retained(d, r_tol);
    Index r = info.effective_rank;
    RVector inv = d.sigma.head(r).cwiseInverse();
    CMatrix p = d.v.leftCols(r) * inv.cast<cplx>().asDiagonal() * d.u.leftCols(r).adjoint();
    return {std::move(p), std::move(info)};
}

LstsqResult<CVector> lstsq_thresholded(const CMatrix& m, const CVector& b, double r_tol)
{
    return lstsq_impl(m, b, r_tol);
}

LstsqResult<RVector> lstsq_thresholded(const RMatrix& m, const RVector& b, double r_tol)
{
    return lstsq_impl(m, b, r_tol);
}

CVector flatten(const CMatrix& p, FlattenOrder order)
{
    CVector v(p.size());
    Index n = 0;
    if (order == FlattenOrder::ColumnMajor) {
        for (Index j = 0; j < p.cols(); ++j)
            for (Index i = 0; i < p.rows(); ++i)
                v(n++) = p(i, j);
    } else {
        for (Index i = 0; i < p.rows(); ++i)
            for (Index j = 0; j < p.cols(); ++j)
                v(n++) = p(i, j);
    }
    return v;
}

CMatrix unflatten(const CVector& v, Index rows, Index cols, FlattenOrder order)
{
    if (rows < 0 || cols < 0 || v.size() != rows * cols)
        throw ValidationError("unflatten: length " + std::to_string(v.size()) +
                              " does not match " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    CMatrix p(rows, cols);
    Index n = 0;
    if (order == FlattenOrder::ColumnMajor) {
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i)
                p(i, j) = v(n++);
    } else {
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j)
                p(i, j) = v(n++);
    }
    return p;
}

}  // namespace rdm
