#include "rdm/ci_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>

namespace rdm {

namespace {

int spatial(int s) { return (s + 1) / 2; }

long binomial(int n, int k)
{
    if (k < 0 || k > n)
        return 0;
    long r = 1;
    for (int i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

long factorial(int n)
{
    long r = 1;
    for (int i = 2; i <= n; ++i)
        r *= i;
    return r;
}

void check_unitary(const CMatrix& c, double tol, const char* what)
{
    if (c.rows() != c.cols())
        throw ValidationError(std::string(what) + ": matrix is not square");
    double dev = (c.adjoint() * c - CMatrix::Identity(c.rows(), c.cols())).cwiseAbs().maxCoeff();
    if (!(dev <= tol))
        throw ValidationError(std::string(what) + ": matrix is not unitary (deviation " +
                              std::to_string(dev) + ")");
}

CMatrix kron_sum_identity(const CMatrix& x)
{
    CMatrix id = CMatrix::Identity(x.rows(), x.cols());
    return kron(x, id) + kron(id, x);
}

}  // namespace

DeterminantIndexMap::DeterminantIndexMap(int n_electrons, int n_orbitals,
                                         std::vector<std::vector<int>> tuples)
    : n_(n_electrons), k_(n_orbitals), tuples_(std::move(tuples))
{
    if (n_ < 1 || k_ < 1)
        throw ValidationError("index map: electron and orbital counts must be positive");
    if (n_ > 2 * k_)
        throw ValidationError("index map: more electrons than spin-orbitals");
    if (tuples_.empty())
        throw ValidationError("index map: no determinants");
    if (static_cast<long>(tuples_.size()) > binomial(2 * k_, n_))
        throw ValidationError("index map: more determinants than C(2K, N)");
    std::set<std::vector<int>> seen;
    for (std::size_t q = 0; q < tuples_.size(); ++q) {
        const auto& t = tuples_[q];
        if (static_cast<int>(t.size()) != n_)
            throw ValidationError("index map: tuple " + std::to_string(q + 1) + " has " +
                                  std::to_string(t.size()) + " entries, expected " +
                                  std::to_string(n_));
        for (int s : t)
            if (s < 1 || s > 2 * k_)
                throw ValidationError("index map: tuple " + std::to_string(q + 1) +
                                      " has an index outside [1, 2K]");
        std::vector<int> sorted = t;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ValidationError("index map: tuple " + std::to_string(q + 1) +
                                  " repeats a spin-orbital");
        if (!seen.insert(sorted).second)
            throw ValidationError("index map: tuple " + std::to_string(q + 1) +
                                  " is a reordering of an earlier tuple");
    }
}

DeterminantIndexMap DeterminantIndexMap::all_determinants(int n_electrons, int n_orbitals)
{
    std::vector<std::vector<int>> out;
    std::vector<int> t(static_cast<std::size_t>(n_electrons));
    int m = 2 * n_orbitals;
    if (n_electrons < 1 || n_electrons > m)
        throw ValidationError("all_determinants: need 1 <= N <= 2K");
    for (int i = 0; i < n_electrons; ++i)
        t[static_cast<std::size_t>(i)] = i + 1;
    while (true) {
        out.push_back(t);
        int i = n_electrons - 1;
        while (i >= 0 && t[static_cast<std::size_t>(i)] == m - n_electrons + i + 1)
            --i;
        if (i < 0)
            break;
        ++t[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < n_electrons; ++j)
            t[static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(j - 1)] + 1;
    }
    return DeterminantIndexMap(n_electrons, n_orbitals, std::move(out));
}

DeterminantIndexMap DeterminantIndexMap::opposite_spin_pairs(int n_orbitals)
{
    std::vector<std::vector<int>> out;
    for (int j = 1; j <= n_orbitals; ++j)
        for (int k = 1; k <= n_orbitals; ++k)
            out.push_back({2 * j - 1, 2 * k});
    return DeterminantIndexMap(2, n_orbitals, std::move(out));
}

double FieldProfile::cutoff() const { return 2.0 * std::numbers::pi * cycles / omega; }

double FieldProfile::operator()(double t) const
{
    if (t < 0.0 || t > cutoff())
        return 0.0;
    return amplitude * std::sin(omega * t);
}

void FieldProfile::validate() const
{
    if (!std::isfinite(amplitude))
        throw ValidationError("field: amplitude must be finite");
    if (!(omega > 0.0) || !std::isfinite(omega))
        throw ValidationError("field: omega must be positive");
    if (cycles < 1)
        throw ValidationError("field: cycles must be a positive integer");
}

CMatrix CiSystem::hamiltonian(double t) const { return h0 + field(t) * m_dip; }

void CiSystem::validate() const
{
    Index nc = n_configs();
    if (nc < 1)
        throw ValidationError("system: no configurations");
    check_unitary(c, 1e-10, "system C matrix");
    if (index_map.size() != nc)
        throw ValidationError("system: index map has " + std::to_string(index_map.size()) +
                              " determinants but C is " + std::to_string(nc) + "x" +
                              std::to_string(nc));
    if (index_map.n_electrons() != n_electrons || index_map.n_orbitals() != n_orbitals)
        throw ValidationError("system: index map does not match N and K");
    if (h0.rows() != nc || h0.cols() != nc || m_dip.rows() != nc || m_dip.cols() != nc)
        throw ValidationError("system: H0 or M_dip has the wrong shape");
    if (!h0.allFinite() || !m_dip.allFinite())
        throw ValidationError("system: H0 or M_dip has non-finite entries");
    if (!is_hermitian(h0, 1e-12))
        throw ValidationError("system: H0 is not Hermitian");
    if (!is_hermitian(m_dip, 1e-12))
        throw ValidationError("system: M_dip is not Hermitian");
    for (auto [i, j] : zero_pairs)
        if (i < 0 || j < i || j >= nc)
            throw ValidationError("system: zero pair out of range or not ordered i <= j");
    field.validate();
}

BTensor::BTensor(Index n_configs, Index n_orbitals)
    : nc_(n_configs), k_(n_orbitals),
      data_(static_cast<std::size_t>(n_configs * n_configs * n_orbitals * n_orbitals))
{
    if (n_configs < 1 || n_orbitals < 1)
        throw ValidationError("B tensor: dimensions must be positive");
}

CMatrix BTensor::matricized() const
{
    CMatrix out(k_ * k_, nc_ * nc_);
    for (Index c = 0; c < k_; ++c)
        for (Index b = 0; b < k_; ++b)
            for (Index l = 0; l < nc_; ++l)
                for (Index k = 0; k < nc_; ++k)
                    out(b + c * k_, k + l * nc_) = (*this)(k, l, b, c);
    return out;
}

CMatrix BTensor::slice(Index b, Index c) const
{
    CMatrix g(nc_, nc_);
    for (Index l = 0; l < nc_; ++l)
        for (Index k = 0; k < nc_; ++k)
            g(k, l) = (*this)(k, l, b, c);
    return g;
}

CMatrix BTensor::export_printed() const
{
    CMatrix out(nc_ * nc_, k_ * k_);
    for (Index k = 0; k < nc_; ++k)
        for (Index l = 0; l < nc_; ++l)
            for (Index c = 0; c < k_; ++c)
                for (Index b = 0; b < k_; ++b)
                    out(k * nc_ + l, c * k_ + b) = (*this)(k, l, b, c);
    return out;
}

int permutation_sign(const std::vector<int>& from, const std::vector<int>& to)
{
    if (from.size() != to.size())
        throw ValidationError("permutation_sign: length mismatch");
    std::vector<std::size_t> pos(to.size());
    for (std::size_t i = 0; i < to.size(); ++i) {
        auto it = std::find(from.begin(), from.end(), to[i]);
        if (it == from.end())
            throw ValidationError("permutation_sign: tuples hold different values");
        pos[i] = static_cast<std::size_t>(it - from.begin());
    }
    int inversions = 0;
    for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t j = i + 1; j < pos.size(); ++j)
            if (pos[i] > pos[j])
                ++inversions;
    return inversions % 2 ? -1 : 1;
}

BTensor slater_core(const DeterminantIndexMap& map)
{
    Index nc = map.size();
    Index k = map.n_orbitals();
    BTensor core(nc, k);
    for (Index q = 0; q < nc; ++q) {
        const auto& tq = map[q];
        // Same determinant: one orbital projector per electron.
        for (int s : tq)
            core(q, q, spatial(s) - 1, spatial(s) - 1) += 1.0;
        for (Index qp = 0; qp < nc; ++qp) {
            if (qp == q)
                continue;
            const auto& tqp = map[qp];
            std::vector<int> only_q, only_qp;
            for (int s : tq)
                if (std::find(tqp.begin(), tqp.end(), s) == tqp.end())
                    only_q.push_back(s);
            for (int s : tqp)
                if (std::find(tq.begin(), tq.end(), s) == tq.end())
                    only_qp.push_back(s);
            if (only_q.size() != 1)
                continue;  // two or more differences contribute nothing
            int a = only_q[0], ap = only_qp[0];
            if (a % 2 != ap % 2)
                continue;  // opposite spins integrate to zero
            if (spatial(a) == spatial(ap))
                throw std::logic_error("slater_core: same-spin pair on one spatial orbital");
            std::vector<int> substituted = tq;
            std::replace(substituted.begin(), substituted.end(), a, ap);
            int sign = permutation_sign(tqp, substituted);
            core(q, qp, spatial(a) - 1, spatial(ap) - 1) += static_cast<double>(sign);
        }
    }
    return core;
}

BTensor build_B(const CiSystem& system)
{
    system.validate();
    BTensor core = slater_core(system.index_map);
    Index nc = system.n_configs();
    Index k = system.n_orbitals;
    BTensor out(nc, k);
    CMatrix cadj = system.c.adjoint();
    for (Index b = 0; b < k; ++b)
        for (Index c = 0; c < k; ++c) {
            CMatrix g = system.c * core.slice(b, c) * cadj;
            for (Index l = 0; l < nc; ++l)
                for (Index kk = 0; kk < nc; ++kk)
                    out(kk, l, b, c) = g(kk, l);
        }
    return out;
}

BTensor oracle_B(const CiSystem& system)
{
    system.validate();
    int n = system.n_electrons;
    if (n > 4)
        throw ValidationError("oracle_B: refusing N = " + std::to_string(n) +
                              " (cost grows as N!^2 per pair; limit N <= 4)");
    const auto& map = system.index_map;
    Index nc = system.n_configs();
    Index k = system.n_orbitals;

    std::vector<std::vector<int>> perms;
    std::vector<int> signs;
    std::vector<int> base(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        base[static_cast<std::size_t>(i)] = i;
    std::vector<int> p = base;
    do {
        perms.push_back(p);
        signs.push_back(permutation_sign(base, p));
    } while (std::next_permutation(p.begin(), p.end()));

    BTensor core(nc, k);
    double norm = static_cast<double>(n) / static_cast<double>(factorial(n));
    std::size_t nn = static_cast<std::size_t>(n);
    std::vector<int> g1(nn), g2(nn);
    for (Index q = 0; q < nc; ++q)
        for (Index qp = 0; qp < nc; ++qp)
            for (std::size_t i1 = 0; i1 < perms.size(); ++i1)
                for (std::size_t i2 = 0; i2 < perms.size(); ++i2) {
                    for (std::size_t s = 0; s < nn; ++s) {
                        g1[s] = map[q][static_cast<std::size_t>(perms[i1][s])];
                        g2[s] = map[qp][static_cast<std::size_t>(perms[i2][s])];
                    }
                    if (!std::equal(g1.begin() + 1, g1.end(), g2.begin() + 1))
                        continue;
                    if (g1[0] % 2 != g2[0] % 2)
                        continue;
                    core(q, qp, spatial(g1[0]) - 1, spatial(g2[0]) - 1) +=
                        norm * signs[i1] * signs[i2];
                }

    BTensor out(nc, k);
    for (Index kk = 0; kk < nc; ++kk)
        for (Index l = 0; l < nc; ++l)
            for (Index b = 0; b < k; ++b)
                for (Index c = 0; c < k; ++c) {
                    cplx acc = 0.0;
                    for (Index q = 0; q < nc; ++q)
                        for (Index qp = 0; qp < nc; ++qp)
                            acc += system.c(kk, q) * core(q, qp, b, c) * std::conj(system.c(l, qp));
                    out(kk, l, b, c) = acc;
                }
    return out;
}

CMatrix reduce_density(const CMatrix& p, const BTensor& b)
{
    Index nc = b.n_configs(), k = b.n_orbitals();
    if (p.rows() != nc || p.cols() != nc)
        throw ValidationError("reduce_density: P is " + std::to_string(p.rows()) + "x" +
                              std::to_string(p.cols()) + ", expected " + std::to_string(nc) +
                              "x" + std::to_string(nc));
    CMatrix q = CMatrix::Zero(k, k);
    for (Index c = 0; c < k; ++c)
        for (Index bb = 0; bb < k; ++bb) {
            cplx acc = 0.0;
            for (Index l = 0; l < nc; ++l)
                for (Index kk = 0; kk < nc; ++kk)
                    acc += p(kk, l) * b(kk, l, bb, c);
            q(bb, c) = acc;
        }
    return q;
}

double trace_contraction_defect(const BTensor& b, int n_electrons)
{
    double worst = 0.0;
    for (Index k = 0; k < b.n_configs(); ++k)
        for (Index l = 0; l < b.n_configs(); ++l) {
            cplx acc = 0.0;
            for (Index bb = 0; bb < b.n_orbitals(); ++bb)
                acc += b(k, l, bb, bb);
            double target = k == l ? static_cast<double>(n_electrons) : 0.0;
            worst = std::max(worst, std::abs(acc - target));
        }
    return worst;
}

CMatrix OneElectronSystem::one_body_hamiltonian(double t) const
{
    return h + system.field(t) * mu;
}

OneElectronSystem build_one_electron_system(const CMatrix& h, const CMatrix& mu, const CMatrix& c,
                                            const FieldProfile& field)
{
    Index k = h.rows();
    if (h.cols() != k || mu.rows() != k || mu.cols() != k)
        throw ValidationError("one-electron system: h and mu must be K x K");
    if (!is_hermitian(h, 1e-12) || !is_hermitian(mu, 1e-12))
        throw ValidationError("one-electron system: h and mu must be Hermitian");
    if (c.rows() != k * k)
        throw ValidationError("one-electron system: C must be K^2 x K^2");
    check_unitary(c, 1e-10, "one-electron system C");

    OneElectronSystem out;
    out.h = h;
    out.mu = mu;
    CiSystem& s = out.system;
    s.n_electrons = 2;
    s.n_orbitals = static_cast<int>(k);
    s.c = c;
    s.index_map = DeterminantIndexMap::opposite_spin_pairs(static_cast<int>(k));
    s.h0 = c.conjugate() * kron_sum_identity(h) * c.transpose();
    s.m_dip = c.conjugate() * kron_sum_identity(mu) * c.transpose();
    s.h0 = 0.5 * (s.h0 + s.h0.adjoint()).eval();
    s.m_dip = 0.5 * (s.m_dip + s.m_dip.adjoint()).eval();
    s.field = field;
    s.validate();
    return out;
}

OneElectronSystem build_one_electron_system_diagonalized(const CMatrix& h, const CMatrix& mu,
                                                         const FieldProfile& field)
{
    if (!is_hermitian(h, 1e-12))
        throw ValidationError("one-electron system: h must be Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(kron_sum_identity(h));
    // conj(C) H1 C^T = V^H H1 V = diag when C^T = V.
    CMatrix c = eig.eigenvectors().transpose();
    return build_one_electron_system(h, mu, c, field);
}

BplusReport verify_bplus_identities(const BTensor& b, int n_orbitals, int samples, unsigned seed)
{
    if (n_orbitals != 2 && n_orbitals != 4)
        throw ValidationError("verify_bplus_identities: K must be 2 or 4");
    Index k = n_orbitals;
    if (b.n_orbitals() != k || b.n_configs() != k * k)
        throw ValidationError("verify_bplus_identities: tensor is not a K^2-determinant system");
    CMatrix bt = b.matricized();
    CMatrix bp = pinv_thresholded(bt, 1e-12).pinv;
    BplusReport rep;
    rep.samples = samples;
    rep.bbplus_identity = (bt * bp - CMatrix::Identity(k * k, k * k)).cwiseAbs().maxCoeff();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    CMatrix id = CMatrix::Identity(k, k);
    double a = 2.0 * static_cast<double>(k);
    for (int s = 0; s < samples; ++s) {
        CMatrix w(k, k);
        for (Index i = 0; i < w.size(); ++i)
            w(i) = cplx(nd(rng), nd(rng));

        CVector lhs = flatten(kron_sum_identity(w));
        CVector rhs = flatten(a * w + 2.0 * w.trace() * id);
        rep.general_pinv = std::max(rep.general_pinv, (bp * rhs - lhs).cwiseAbs().maxCoeff());
        rep.general_forward = std::max(rep.general_forward, (bt * lhs - rhs).cwiseAbs().maxCoeff());

        CMatrix w2 = w + ((2.0 - w.trace()) / static_cast<double>(k)) * id;
        CVector lhs2 = flatten(kron_sum_identity(w2));
        CVector rhs2 = flatten(a * w2 + 4.0 * id);
        rep.trace_two_pinv = std::max(rep.trace_two_pinv, (bp * rhs2 - lhs2).cwiseAbs().maxCoeff());
        rep.trace_two_forward =
            std::max(rep.trace_two_forward, (bt * lhs2 - rhs2).cwiseAbs().maxCoeff());
    }
    return rep;
}

}  // namespace rdm
