/*
 * Dense complex linear-algebra kernels: Kronecker products, Hermitian
 * exponentials, sorted SVD, thresholded pseudoinverse and flattening.
 *
 * All propagation code flattens matrices column-major, so that
 * vec(A X B) = (B^T kron A) vec(X).  Row-major flattening exists only
 * for exporting matrices in printed (row-by-row) layout.
 */
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rdm {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Bad input: shapes, ranges, missing structure.  CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown: singular systems, non-finite values.  CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FlattenOrder { ColumnMajor, RowMajor };

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// max |A - A^H| over all entries.
double hermiticity_defect(const CMatrix& a);

/// True when max|A - A^H| <= tol * max(1, max|A|).
bool is_hermitian(const CMatrix& a, double tol);

/// exp(scale * h) for Hermitian h via h = V diag(w) V^H.
/// Throws ValidationError if h is not Hermitian within 1e-12.
CMatrix matexp_hermitian(const CMatrix& h, cplx scale);

template <typename Scalar>
struct Svd {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> u;
    RVector sigma;  // descending
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> v;
};

/// Thin SVD, singular values descending.  Each left singular vector is
/// rescaled so its first entry of non-negligible magnitude is real and
/// positive (with the matching right vector), which makes the factors
/// reproducible across library versions.
Svd<cplx> svd(const CMatrix& m);
Svd<double> svd(const RMatrix& m);

struct PinvInfo {
    Index effective_rank = 0;
    double condition_number = 0.0;  // sigma_1 / smallest retained sigma
    double sigma_max = 0.0;
    RVector sigma;
};

struct PinvResult {
    CMatrix pinv;
    PinvInfo info;
};

/// V Sigma^+ U^H keeping sigma_j > r_tol * sigma_1.
PinvResult pinv_thresholded(const CMatrix& m, double r_tol);

template <typename Vec>
struct LstsqResult {
    Vec x;
    PinvInfo info;
};

/// x = m^+ b with the same thresholding, without forming m^+.
LstsqResult<CVector> lstsq_thresholded(const CMatrix& m, const CVector& b, double r_tol);
LstsqResult<RVector> lstsq_thresholded(const RMatrix& m, const RVector& b, double r_tol);

CVector flatten(const CMatrix& p, FlattenOrder order = FlattenOrder::ColumnMajor);
CMatrix unflatten(const CVector& v, Index rows, Index cols,
                  FlattenOrder order = FlattenOrder::ColumnMajor);

}  // namespace rdm
