#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "rdm/ci_model.hpp"

using namespace rdm;

namespace {

CMatrix gaussian(Index r, Index c, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd;
    CMatrix m(r, c);
    for (Index j = 0; j < c; ++j)
        for (Index i = 0; i < r; ++i)
            m(i, j) = cplx(nd(rng), nd(rng));
    return m;
}

CMatrix unitary(Index n, std::mt19937_64& rng)
{
    Eigen::HouseholderQR<CMatrix> qr(gaussian(n, n, rng));
    return qr.householderQ() * CMatrix::Identity(n, n);
}

CMatrix herm(Index n, std::mt19937_64& rng)
{
    CMatrix g = gaussian(n, n, rng);
    return 0.5 * (g + g.adjoint());
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

CiSystem make_system(const DeterminantIndexMap& map, const CMatrix& c)
{
    CiSystem s;
    s.n_electrons = map.n_electrons();
    s.n_orbitals = map.n_orbitals();
    s.index_map = map;
    s.c = c;
    s.h0 = CMatrix::Zero(map.size(), map.size());
    s.m_dip = CMatrix::Zero(map.size(), map.size());
    return s;
}

// Second-quantized state: a_{s1}^+ a_{s2}^+ ... |0> for tuple (s1, s2, ...).
struct Ket {
    int sign = 0;
    std::vector<int> orbs;
};

Ket annihilate(int s, Ket k)
{
    auto it = std::find(k.orbs.begin(), k.orbs.end(), s);
    if (k.sign == 0 || it == k.orbs.end())
        return {};
    auto pos = it - k.orbs.begin();
    k.sign *= (pos % 2 == 0) ? 1 : -1;
    k.orbs.erase(it);
    return k;
}

Ket create(int s, Ket k)
{
    if (k.sign == 0 || std::find(k.orbs.begin(), k.orbs.end(), s) != k.orbs.end())
        return {};
    k.orbs.insert(k.orbs.begin(), s);
    return k;
}

// Parity of the permutation taking a onto b, or 0 if they are different sets.
int overlap(const std::vector<int>& a, const std::vector<int>& b)
{
    std::vector<int> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb)
        return 0;
    std::vector<int> p = a;
    int sign = 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == b[i])
            continue;
        auto j = std::find(p.begin() + static_cast<long>(i), p.end(), b[i]);
        std::iter_swap(p.begin() + static_cast<long>(i), j);
        sign = -sign;
    }
    return sign;
}

// B_{klbc} = <l| sum_sigma a^+_{c sigma} a_{b sigma} |k> on determinants,
// then rotated by C.
BTensor second_quantized_B(const DeterminantIndexMap& map, const CMatrix& c)
{
    Index nc = map.size(), k = map.n_orbitals();
    BTensor core(nc, k);
    for (Index q = 0; q < nc; ++q)
        for (Index qp = 0; qp < nc; ++qp)
            for (Index b = 0; b < k; ++b)
                for (Index cc = 0; cc < k; ++cc) {
                    double v = 0.0;
                    for (int spin = 0; spin < 2; ++spin) {
                        int sb = static_cast<int>(2 * b + 1 + spin);
                        int sc = static_cast<int>(2 * cc + 1 + spin);
                        Ket ket{1, map[q]};
                        Ket out = create(sc, annihilate(sb, ket));
                        if (out.sign != 0)
                            v += out.sign * overlap(out.orbs, map[qp]);
                    }
                    core(q, qp, b, cc) = v;
                }
    BTensor out(nc, k);
    for (Index a = 0; a < nc; ++a)
        for (Index l = 0; l < nc; ++l)
            for (Index b = 0; b < k; ++b)
                for (Index cc = 0; cc < k; ++cc) {
                    cplx s = 0.0;
                    for (Index q = 0; q < nc; ++q)
                        for (Index qp = 0; qp < nc; ++qp)
                            s += c(a, q) * core(q, qp, b, cc) * std::conj(c(l, qp));
                    out(a, l, b, cc) = s;
                }
    return out;
}

double tensor_diff(const BTensor& x, const BTensor& y)
{
    double worst = 0.0;
    for (Index k = 0; k < x.n_configs(); ++k)
        for (Index l = 0; l < x.n_configs(); ++l)
            for (Index b = 0; b < x.n_orbitals(); ++b)
                for (Index c = 0; c < x.n_orbitals(); ++c)
                    worst = std::max(worst, std::abs(x(k, l, b, c) - y(k, l, b, c)));
    return worst;
}

DeterminantIndexMap printed_order_map()
{
    return DeterminantIndexMap(2, 2, {{1, 2}, {3, 2}, {1, 4}, {3, 4}});
}

CMatrix printed_matrix()
{
    static const int t[16][4] = {
        {2, 0, 0, 0}, {0, 0, 1, 0}, {0, 0, 1, 0}, {0, 0, 0, 0}, {0, 1, 0, 0}, {1, 0, 0, 1},
        {0, 0, 0, 0}, {0, 0, 1, 0}, {0, 1, 0, 0}, {0, 0, 0, 0}, {1, 0, 0, 1}, {0, 0, 1, 0},
        {0, 0, 0, 0}, {0, 1, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 2},
    };
    CMatrix m(16, 4);
    for (Index r = 0; r < 16; ++r)
        for (Index c = 0; c < 4; ++c)
            m(r, c) = t[r][c];
    return m;
}

// Printed pseudoinverse in eighths, same row/column layout.
CMatrix printed_pinv()
{
    static const int t[16][4] = {
        {3, 0, 0, -1}, {0, 0, 2, 0}, {0, 0, 2, 0}, {0, 0, 0, 0}, {0, 2, 0, 0}, {1, 0, 0, 1},
        {0, 0, 0, 0},  {0, 0, 2, 0}, {0, 2, 0, 0}, {0, 0, 0, 0}, {1, 0, 0, 1}, {0, 0, 2, 0},
        {0, 0, 0, 0},  {0, 2, 0, 0}, {0, 2, 0, 0}, {-1, 0, 0, 3},
    };
    CMatrix m(16, 4);
    for (Index r = 0; r < 16; ++r)
        for (Index c = 0; c < 4; ++c)
            m(r, c) = t[r][c] / 8.0;
    return m;
}

}  // namespace

TEST_CASE("index map validation")
{
    CHECK_NOTHROW(DeterminantIndexMap(2, 2, {{1, 2}, {3, 4}}));
    CHECK_THROWS_AS(DeterminantIndexMap(2, 2, {{1, 5}}), ValidationError);
    CHECK_THROWS_AS(DeterminantIndexMap(2, 2, {{0, 1}}), ValidationError);
    CHECK_THROWS_AS(DeterminantIndexMap(2, 2, {{1, 1}}), ValidationError);
    CHECK_THROWS_AS(DeterminantIndexMap(2, 2, {{1, 2}, {2, 1}}), ValidationError);
    CHECK_THROWS_AS(DeterminantIndexMap(2, 2, {{1, 2, 3}}), ValidationError);
    CHECK(DeterminantIndexMap::all_determinants(2, 2).size() == 6);
    CHECK(DeterminantIndexMap::all_determinants(3, 3).size() == 20);
}

TEST_CASE("opposite-spin map pairs one odd and one even spin-orbital")
{
    auto map = DeterminantIndexMap::opposite_spin_pairs(2);
    REQUIRE(map.size() == 4);
    CHECK(map[0] == std::vector<int>{1, 2});
    CHECK(map[1] == std::vector<int>{1, 4});
    CHECK(map[2] == std::vector<int>{3, 2});
    CHECK(map[3] == std::vector<int>{3, 4});
    for (const auto& t : map.tuples()) {
        CHECK(t[0] % 2 == 1);
        CHECK(t[1] % 2 == 0);
    }
}

TEST_CASE("permutation sign")
{
    CHECK(permutation_sign({1, 2, 3}, {1, 2, 3}) == 1);
    CHECK(permutation_sign({1, 2, 3}, {2, 1, 3}) == -1);
    CHECK(permutation_sign({1, 2, 3}, {2, 3, 1}) == 1);
    CHECK(permutation_sign({4, 7}, {7, 4}) == -1);
    CHECK_THROWS_AS(permutation_sign({1, 2}, {1, 3}), ValidationError);
}

TEST_CASE("two-electron tensor matches the printed integer matrix")
{
    BTensor b = build_B(make_system(printed_order_map(), CMatrix::Identity(4, 4)));
    CHECK(max_abs(b.export_printed() - printed_matrix()) == 0.0);
    CHECK(max_abs(oracle_B(make_system(printed_order_map(), CMatrix::Identity(4, 4))).export_printed() -
                  printed_matrix()) == 0.0);
}

TEST_CASE("printed pseudoinverse and B B+ = I")
{
    BTensor b = build_B(make_system(printed_order_map(), CMatrix::Identity(4, 4)));
    CMatrix bt = b.matricized();
    CMatrix bp = pinv_thresholded(bt, 1e-12).pinv;
    CHECK(max_abs(bt * bp - CMatrix::Identity(4, 4)) < 1e-14);
    // Printed layout of B~^+: row (k-1) N_C + l, column (c-1) K + b; B~^+
    // itself is N_C^2 x K^2 with row k + l N_C, column b + c K.
    CMatrix printed = printed_pinv();
    double worst = 0.0;
    for (Index k = 0; k < 4; ++k)
        for (Index l = 0; l < 4; ++l)
            for (Index bb = 0; bb < 2; ++bb)
                for (Index c = 0; c < 2; ++c)
                    worst = std::max(worst, std::abs(bp(k + l * 4, bb + c * 2) -
                                                     printed(k * 4 + l, c * 2 + bb)));
    CHECK(worst < 1e-14);
}

TEST_CASE("tensor agrees with second quantization")
{
    std::mt19937_64 rng(1);
    for (int k : {2, 3}) {
        auto map = DeterminantIndexMap::all_determinants(2, k);
        for (bool rotate : {false, true}) {
            CMatrix c = rotate ? unitary(map.size(), rng) : CMatrix::Identity(map.size(), map.size());
            auto sys = make_system(map, c);
            BTensor expect = second_quantized_B(map, c);
            CHECK(tensor_diff(build_B(sys), expect) < 1e-12);
            CHECK(tensor_diff(oracle_B(sys), expect) < 1e-12);
        }
    }
    auto map = DeterminantIndexMap::opposite_spin_pairs(4);
    CHECK(tensor_diff(build_B(make_system(map, CMatrix::Identity(16, 16))),
                      second_quantized_B(map, CMatrix::Identity(16, 16))) < 1e-12);
}

TEST_CASE("three electrons, five determinants, random unitary")
{
    std::mt19937_64 rng(2);
    auto all = DeterminantIndexMap::all_determinants(3, 3).tuples();
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(5);
    DeterminantIndexMap map(3, 3, all);
    CMatrix c = unitary(5, rng);
    auto sys = make_system(map, c);
    BTensor b = build_B(sys);
    CHECK(tensor_diff(b, oracle_B(sys)) < 1e-12);
    CHECK(tensor_diff(b, second_quantized_B(map, c)) < 1e-12);
    CHECK(trace_contraction_defect(b, 3) < 1e-10);
}

TEST_CASE("brute-force tensor refuses more than four electrons")
{
    auto map = DeterminantIndexMap::all_determinants(5, 3);
    auto sys = make_system(map, CMatrix::Identity(map.size(), map.size()));
    CHECK_THROWS_AS(oracle_B(sys), ValidationError);
}

TEST_CASE("single determinant has only the diagonal block")
{
    DeterminantIndexMap map(2, 3, {{1, 4}});
    BTensor b = build_B(make_system(map, CMatrix::Identity(1, 1)));
    CHECK(b(0, 0, 0, 0) == cplx(1.0));
    CHECK(b(0, 0, 1, 1) == cplx(1.0));
    CHECK(b(0, 0, 2, 2) == cplx(0.0));
    CHECK(std::abs(b(0, 0, 0, 1)) == 0.0);
}

TEST_CASE("diagonal determinant blocks are real, PSD and have trace N")
{
    auto map = DeterminantIndexMap::all_determinants(3, 3);
    BTensor core = slater_core(map);
    for (Index q = 0; q < map.size(); ++q) {
        CMatrix g(3, 3);
        for (Index b = 0; b < 3; ++b)
            for (Index c = 0; c < 3; ++c)
                g(b, c) = core(q, q, b, c);
        CHECK(g.imag().norm() == 0.0);
        CHECK(std::abs(g.trace() - cplx(3.0)) < 1e-15);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
        CHECK(es.eigenvalues().minCoeff() > -1e-14);
    }
}

TEST_CASE("adjoint symmetry, trace contraction and matricization")
{
    std::mt19937_64 rng(3);
    auto map = DeterminantIndexMap::all_determinants(2, 3);
    Index nc = map.size();
    BTensor b = build_B(make_system(map, unitary(nc, rng)));
    double worst = 0.0;
    for (Index k = 0; k < nc; ++k)
        for (Index l = 0; l < nc; ++l)
            for (Index bb = 0; bb < 3; ++bb)
                for (Index c = 0; c < 3; ++c)
                    worst = std::max(worst, std::abs(b(l, k, c, bb) - std::conj(b(k, l, bb, c))));
    CHECK(worst < 1e-12);
    CHECK(trace_contraction_defect(b, 2) < 1e-10);

    CMatrix p = herm(nc, rng);
    CMatrix q = reduce_density(p, b);
    CMatrix direct = CMatrix::Zero(3, 3);
    for (Index k = 0; k < nc; ++k)
        for (Index l = 0; l < nc; ++l)
            for (Index bb = 0; bb < 3; ++bb)
                for (Index c = 0; c < 3; ++c)
                    direct(bb, c) += p(k, l) * b(k, l, bb, c);
    CHECK(max_abs(q - direct) < 1e-12);
    CHECK((b.matricized() * flatten(p) - flatten(direct)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(hermiticity_defect(q) < 1e-12);
    CHECK(std::abs(q.trace() - 2.0 * p.trace()) < 1e-10);

    for (Index bb = 0; bb < 3; ++bb)
        for (Index c = 0; c < 3; ++c)
            CHECK(std::abs((b.slice(bb, c).cwiseProduct(p)).sum() - q(bb, c)) < 1e-12);
}

TEST_CASE("reduced density examples")
{
    BTensor b = build_B(make_system(printed_order_map(), CMatrix::Identity(4, 4)));
    CMatrix p = CMatrix::Zero(4, 4);
    CHECK(max_abs(reduce_density(p, b)) == 0.0);
    p(0, 0) = 1.0;
    CMatrix q = reduce_density(p, b);
    CHECK(q(0, 0) == cplx(2.0));
    q(0, 0) = 0.0;
    CHECK(max_abs(q) == 0.0);

    std::mt19937_64 rng(4);
    CMatrix g = gaussian(4, 4, rng);
    CMatrix rho = g * g.adjoint();
    rho /= rho.trace();
    CHECK(std::abs(reduce_density(rho, b).trace() - 2.0) < 1e-12);
    CHECK_THROWS_AS(reduce_density(CMatrix::Zero(3, 3), b), ValidationError);
}

TEST_CASE("one-electron Hamiltonian with identity coefficients")
{
    CMatrix h = CMatrix::Zero(2, 2);
    h(0, 0) = -0.8;
    h(1, 1) = 0.35;
    auto sys = build_one_electron_system(h, CMatrix::Zero(2, 2), CMatrix::Identity(4, 4));
    CMatrix expect = CMatrix::Zero(4, 4);
    expect(0, 0) = -1.6;
    expect(1, 1) = expect(2, 2) = -0.45;
    expect(3, 3) = 0.7;
    CHECK(max_abs(sys.system.hamiltonian(0.3) - expect) < 1e-15);
    CHECK(max_abs(build_B(sys.system).matricized() *
                      pinv_thresholded(build_B(sys.system).matricized(), 1e-12).pinv -
                  CMatrix::Identity(4, 4)) < 1e-13);
}

TEST_CASE("one-electron Hamiltonian inputs and diagonalization")
{
    std::mt19937_64 rng(5);
    CMatrix h = herm(2, rng), mu = herm(2, rng);
    CHECK_THROWS_AS(build_one_electron_system(gaussian(2, 2, rng), mu, CMatrix::Identity(4, 4)),
                    ValidationError);
    auto d = build_one_electron_system_diagonalized(h, mu);
    CMatrix h0 = d.system.h0;
    CMatrix off = h0;
    off.diagonal().setZero();
    CHECK(max_abs(off) < 1e-12);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    std::vector<double> expect;
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j)
            expect.push_back(es.eigenvalues()(i) + es.eigenvalues()(j));
    std::vector<double> got;
    for (Index i = 0; i < 4; ++i)
        got.push_back(h0(i, i).real());
    std::sort(expect.begin(), expect.end());
    std::sort(got.begin(), got.end());
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(got[i] - expect[i]) < 1e-12);
}

TEST_CASE("one-electron pseudoinverse identities")
{
    for (int k : {2, 4}) {
        auto map = DeterminantIndexMap::opposite_spin_pairs(k);
        BTensor b = build_B(make_system(map, CMatrix::Identity(map.size(), map.size())));
        auto rep = verify_bplus_identities(b, k);
        CHECK(rep.samples >= 10);
        CHECK(rep.general_pinv < 1e-12);
        CHECK(rep.general_forward < 1e-12);
        CHECK(rep.trace_two_pinv < 1e-12);
        CHECK(rep.trace_two_forward < 1e-12);
        CHECK(rep.bbplus_identity < 1e-12);
    }
    auto map = DeterminantIndexMap::opposite_spin_pairs(3);
    BTensor b3 = build_B(make_system(map, CMatrix::Identity(9, 9)));
    CHECK_THROWS_AS(verify_bplus_identities(b3, 3), ValidationError);
}

TEST_CASE("identity and half-identity examples")
{
    BTensor b = build_B(make_system(DeterminantIndexMap::opposite_spin_pairs(2), CMatrix::Identity(4, 4)));
    CMatrix bp = pinv_thresholded(b.matricized(), 1e-12).pinv;
    CVector eight = flatten(CMatrix(8.0 * CMatrix::Identity(2, 2)));
    CHECK((bp * eight - 2.0 * flatten(CMatrix(CMatrix::Identity(4, 4)))).cwiseAbs().maxCoeff() < 1e-14);
    // 4I is the image of W = I/2, not of W = 0.
    CVector four = flatten(CMatrix(4.0 * CMatrix::Identity(2, 2)));
    CHECK((bp * four - flatten(CMatrix(CMatrix::Identity(4, 4)))).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((bp * four).norm() > 1.0);
}
