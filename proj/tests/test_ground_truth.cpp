#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rdm/ground_truth.hpp"

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

CiSystem two_electron_system(std::mt19937_64& rng, double amplitude)
{
    CiSystem s;
    s.n_electrons = 2;
    s.n_orbitals = 2;
    s.index_map = DeterminantIndexMap::opposite_spin_pairs(2);
    s.c = unitary(4, rng);
    s.h0 = CMatrix::Zero(4, 4);
    s.h0.diagonal() << -1.1, -0.4, 0.2, 0.9;
    s.m_dip = herm(4, rng);
    s.field.amplitude = amplitude;
    return s;
}

}  // namespace

TEST_CASE("field profile switches off after the last cycle")
{
    FieldProfile f;
    double tc = f.cutoff();
    CHECK(tc == doctest::Approx(2.0 * 3.141592653589793 * 5 / 0.9));
    CHECK(f(1.0) == doctest::Approx(0.5 * std::sin(0.9)));
    CHECK(f(tc + 1e-9) == 0.0);
    CHECK(f(100.0) == 0.0);
    CHECK(f(-1.0) == 0.0);
    FieldProfile bad;
    bad.cycles = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("undriven diagonal system keeps stationary phases")
{
    std::mt19937_64 rng(1);
    CiSystem s = two_electron_system(rng, 0.0);
    CVector a0 = gaussian(4, 1, rng).col(0);
    a0.normalize();
    double dt = 0.05;
    auto run = propagate_coefficients(s, dt, 200, a0);
    REQUIRE(run.n_steps() == 200);
    for (Index t : {Index(1), Index(57), Index(200)})
        for (Index j = 0; j < 4; ++j) {
            cplx expect = a0(j) * std::exp(cplx(0.0, -s.h0(j, j).real() * dt * static_cast<double>(t)));
            CHECK(std::abs(run.a[static_cast<std::size_t>(t)](j) - expect) < 1e-12);
        }
}

TEST_CASE("default start, final time and norm")
{
    std::mt19937_64 rng(2);
    CiSystem s = two_electron_system(rng, 0.5);
    auto run = propagate_coefficients(s, 0.008268, 20000);
    CHECK(run.a[0](0) == cplx(1.0));
    CHECK(run.a[0].norm() == 1.0);
    CHECK(run.dt * static_cast<double>(run.n_steps()) == doctest::Approx(165.36).epsilon(1e-12));
    double worst = 0.0;
    for (const auto& a : run.a)
        worst = std::max(worst, std::abs(a.norm() - 1.0));
    CHECK(worst < 1e-10);
    CHECK_THROWS_AS(propagate_coefficients(s, -0.1, 10), ValidationError);
    CHECK_THROWS_AS(propagate_coefficients(s, 0.1, 10, CVector::Zero(3)), ValidationError);
}

TEST_CASE("full densities are rank one with unit trace and follow the Kronecker step")
{
    std::mt19937_64 rng(3);
    CiSystem s = two_electron_system(rng, 0.5);
    double dt = 0.1;
    auto run = propagate_coefficients(s, dt, 60);
    auto ps = full_density_series(run);
    CMatrix e1 = CMatrix::Zero(4, 4);
    e1(0, 0) = 1.0;
    CHECK(max_abs(ps[0] - e1) == 0.0);
    for (std::size_t t = 0; t < ps.size(); ++t) {
        CHECK(std::abs(ps[t].trace() - 1.0) < 1e-12);
        CHECK(hermiticity_defect(ps[t]) < 1e-15);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(ps[t]);
        CHECK(std::abs(es.eigenvalues()(2)) < 1e-12);
    }
    for (Index t = 0; t < 60; ++t) {
        CMatrix h = s.hamiltonian(static_cast<double>(t) * dt);
        CVector next = liouville_step(h, dt) * flatten(ps[static_cast<std::size_t>(t)]);
        CHECK((next - flatten(ps[static_cast<std::size_t>(t + 1)])).cwiseAbs().maxCoeff() < 1e-11);
        CHECK(max_abs(step_propagator(s, t, dt) - matexp_hermitian(h, cplx(0.0, -dt))) == 0.0);
    }
}

TEST_CASE("reduced densities carry the electron count")
{
    std::mt19937_64 rng(4);
    CiSystem s = two_electron_system(rng, 0.5);
    auto run = propagate_coefficients(s, 0.1, 100);
    auto qs = reduced_density_series(run, build_B(s));
    for (const auto& q : qs) {
        CHECK(std::abs(q.trace() - 2.0) < 1e-12);
        CHECK(hermiticity_defect(q) < 1e-12);
    }
}

TEST_CASE("stationary state has no eigenvalue drift")
{
    std::mt19937_64 rng(5);
    CiSystem s = two_electron_system(rng, 0.0);
    auto run = propagate_coefficients(s, 0.05, 300);
    auto drift = eigenvalue_drift(reduced_density_series(run, build_B(s)));
    double worst = 0.0;
    for (const auto& d : drift)
        worst = std::max(worst, d.maxCoeff());
    CHECK(worst < 1e-10);
}

TEST_CASE("driven two-electron system has eigenvalue drift")
{
    std::mt19937_64 rng(6);
    CiSystem s = two_electron_system(rng, 0.5);
    auto run = propagate_coefficients(s, 0.05, 1000);
    auto drift = eigenvalue_drift(reduced_density_series(run, build_B(s)));
    double worst = 0.0;
    for (const auto& d : drift)
        worst = std::max(worst, d.maxCoeff());
    CHECK(worst > 1e-3);
}

TEST_CASE("one-electron system follows the 2x2 Liouville equation")
{
    std::mt19937_64 rng(7);
    CMatrix h = herm(2, rng), mu = herm(2, rng);
    auto sys = build_one_electron_system(h, mu, CMatrix::Identity(4, 4));
    double dt = 0.05;
    auto run = propagate_coefficients(sys.system, dt, 400);
    auto qs = reduced_density_series(run, build_B(sys.system));
    CMatrix q = CMatrix::Zero(2, 2);
    q(0, 0) = 2.0;
    double worst = 0.0;
    for (Index t = 0; t <= 400; ++t) {
        worst = std::max(worst, max_abs(qs[static_cast<std::size_t>(t)] - q));
        CMatrix hv = h + sys.system.field(static_cast<double>(t) * dt) * mu;
        CMatrix v = matexp_hermitian(hv, cplx(0.0, -dt));
        q = v * q * v.adjoint();
    }
    CHECK(worst < 1e-12);
    auto drift = eigenvalue_drift(qs);
    double dmax = 0.0;
    for (const auto& d : drift)
        dmax = std::max(dmax, d.maxCoeff());
    CHECK(dmax < 1e-12);
}

TEST_CASE("eigenvalue drift rejects non-Hermitian input")
{
    std::mt19937_64 rng(8);
    std::vector<CMatrix> series{herm(2, rng), gaussian(2, 2, rng)};
    CHECK_THROWS_AS(eigenvalue_drift(series), ValidationError);
}

TEST_CASE("decoupled configuration gives a zero row and column")
{
    std::mt19937_64 rng(9);
    CiSystem s = two_electron_system(rng, 0.5);
    s.c = CMatrix::Identity(4, 4);
    for (Index j = 0; j < 4; ++j)
        s.m_dip(1, j) = s.m_dip(j, 1) = 0.0;
    auto run = propagate_coefficients(s, 0.1, 200);
    auto zeros = detect_zero_pattern(run);
    std::vector<std::pair<Index, Index>> expect{{0, 1}, {1, 1}, {1, 2}, {1, 3}};
    CHECK(zeros == expect);
}

TEST_CASE("coefficient CSV")
{
    std::mt19937_64 rng(10);
    CiSystem s = two_electron_system(rng, 0.5);
    auto run = propagate_coefficients(s, 0.25, 4);
    auto path = std::filesystem::temp_directory_path() / "rdm_test_coeffs.csv";
    write_coefficients_csv(run, path.string());
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("t,", 0) == 0);
    CHECK(std::count(header.begin(), header.end(), ',') == 8);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ','))
            v.push_back(std::stod(cell));
        REQUIRE(v.size() == 9);
        CHECK(v[0] == doctest::Approx(0.25 * rows));
        const CVector& a = run.a[static_cast<std::size_t>(rows)];
        for (Index j = 0; j < 4; ++j) {
            CHECK(v[static_cast<std::size_t>(1 + 2 * j)] == a(j).real());
            CHECK(v[static_cast<std::size_t>(2 + 2 * j)] == a(j).imag());
        }
        ++rows;
    }
    CHECK(rows == 5);
    std::filesystem::remove(path);
}
