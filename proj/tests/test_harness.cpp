#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rdm/harness.hpp"
#include "rdm/system_io.hpp"

using namespace rdm;
namespace fs = std::filesystem;

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

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("rdm_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("rmse examples")
{
    std::mt19937_64 rng(1);
    std::vector<CMatrix> truth;
    for (int i = 0; i < 6; ++i)
        truth.push_back(gaussian(3, 3, rng));
    CHECK(rmse(truth, truth, 0) == 0.0);

    std::vector<CMatrix> shifted = truth;
    for (auto& q : shifted)
        q.array() += 0.25;
    CHECK(rmse(shifted, truth, 2) == doctest::Approx(0.25).epsilon(1e-14));

    CHECK_THROWS_AS(rmse(truth, std::vector<CMatrix>(truth.begin(), truth.end() - 1), 0),
                    ValidationError);
    CHECK_THROWS_AS(rmse(truth, truth, 5), ValidationError);
}

TEST_CASE("rmse loop oracle")
{
    std::mt19937_64 rng(2);
    std::vector<CMatrix> a, b;
    for (int i = 0; i < 9; ++i) {
        a.push_back(gaussian(2, 2, rng));
        b.push_back(gaussian(2, 2, rng));
    }
    Index ell = 3;
    double sum = 0.0;
    for (std::size_t j = static_cast<std::size_t>(ell) + 1; j < a.size(); ++j)
        for (Index r = 0; r < 2; ++r)
            for (Index c = 0; c < 2; ++c)
                sum += std::norm(a[j](r, c) - b[j](r, c));
    double expect = std::sqrt(sum / 4.0 / static_cast<double>(a.size() - 1 - ell));
    CHECK(std::abs(rmse(a, b, ell) - expect) < 1e-14);
}

TEST_CASE("mae examples and loop oracle")
{
    CMatrix q = CMatrix::Identity(2, 2);
    CHECK(mae(q, q) == 0.0);
    CMatrix d = q;
    d(0, 1) += 0.04;
    CHECK(mae(d, q) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK_THROWS_AS(mae(q, CMatrix::Identity(3, 3)), ValidationError);

    std::mt19937_64 rng(3);
    CMatrix a = gaussian(4, 4, rng), b = gaussian(4, 4, rng);
    double sum = 0.0;
    for (Index r = 0; r < 4; ++r)
        for (Index c = 0; c < 4; ++c)
            sum += std::abs(a(r, c) - b(r, c));
    CHECK(std::abs(mae(a, b) - sum / 16.0) < 1e-15);
}

TEST_CASE("synthetic systems are deterministic and well-formed")
{
    fs::path dir = scratch("synth");
    save_system(generate_synthetic_system(4, 2, 5), (dir / "a.json").string());
    save_system(generate_synthetic_system(4, 2, 5), (dir / "b.json").string());
    save_system(generate_synthetic_system(4, 2, 6), (dir / "c.json").string());
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(slurp(dir / "a.json") != slurp(dir / "c.json"));

    CiSystem small = generate_synthetic_system(4, 2, 1);
    CHECK(small.n_configs() == 4);
    CHECK(small.n_orbitals == 2);
    CiSystem big = generate_synthetic_system(16, 4, 1);
    CHECK(big.n_configs() == 16);
    CHECK(big.n_orbitals == 4);
    CHECK_NOTHROW(big.validate());
    for (Index i = 1; i < 16; ++i)
        CHECK(big.h0(i - 1, i - 1).real() <= big.h0(i, i).real());
    CMatrix off = big.h0;
    off.diagonal().setZero();
    CHECK(off.norm() == 0.0);

    CiSystem lex = generate_synthetic_system(5, 3, 1);
    CHECK(lex.index_map[0] == std::vector<int>{1, 2});
    CHECK(lex.index_map[4] == std::vector<int>{1, 6});

    SyntheticOptions opts;
    opts.zero_diag_dipole = true;
    CiSystem zd = generate_synthetic_system(4, 2, 1, opts);
    CHECK(zd.m_dip.diagonal().norm() == 0.0);

    CHECK_THROWS_AS(generate_synthetic_system(16, 2, 1), ValidationError);
    CHECK_THROWS_AS(generate_synthetic_system(4, 0, 1), ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("system files round trip")
{
    fs::path dir = scratch("io");
    CiSystem s = generate_synthetic_system(4, 2, 9);
    s.zero_pairs = {{0, 1}, {1, 1}};
    save_system(s, (dir / "s.json").string());
    CiSystem r = load_system((dir / "s.json").string());
    CHECK((r.c - s.c).norm() == 0.0);
    CHECK((r.h0 - s.h0).norm() == 0.0);
    CHECK((r.m_dip - s.m_dip).norm() == 0.0);
    CHECK(r.zero_pairs == s.zero_pairs);
    CHECK(r.field.omega == s.field.omega);
    CHECK(r.index_map.tuples() == s.index_map.tuples());
    CHECK_THROWS_AS(load_system((dir / "missing.json").string()), ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("one-electron system needs no memory")
{
    std::mt19937_64 rng(4);
    CMatrix h = random_hermitian(2, rng), mu = random_hermitian(2, rng);
    auto sys = build_one_electron_system(h, mu, random_unitary(4, rng));
    for (Index stride : {1, 3}) {
        ExperimentConfig cfg;
        cfg.run.n_steps = 2000;
        cfg.run.delay.stride = stride;
        auto rep = run_experiment(sys.system, cfg);
        CHECK(rep.rmse < 1e-10);
        CHECK(rep.max_trace_error < 1e-10);
        CHECK(rep.total_memory == 0.0);
    }
}

TEST_CASE("more memory reduces the error on a synthetic system")
{
    for (unsigned seed : {1u, 2u, 3u}) {
        CiSystem s = generate_synthetic_system(4, 2, seed);
        ExperimentConfig cfg;
        cfg.run.dt = 0.08268;
        cfg.run.n_steps = 400;
        cfg.axis = ExperimentConfig::Axis::Ell;
        cfg.values = {0, 8};
        auto rows = sweep(s, cfg);
        REQUIRE(rows.size() == 2);
        CHECK(rows[1].rmse * 10.0 < rows[0].rmse);
        CHECK(rows[1].total_memory == doctest::Approx(8 * 0.08268));
    }
}

TEST_CASE("sweep writes the fixed table and is independent of the worker count")
{
    fs::path dir = scratch("sweep");
    CiSystem s = generate_synthetic_system(4, 2, 1);
    ExperimentConfig cfg;
    cfg.run.dt = 0.08268;
    cfg.run.n_steps = 120;
    cfg.axis = ExperimentConfig::Axis::Stride;
    cfg.values = {1, 2, 3};
    cfg.run.delay.ell = 4;
    cfg.out_dir = (dir / "one").string();
    auto serial = sweep(s, cfg);
    cfg.workers = 3;
    cfg.out_dir = (dir / "three").string();
    auto parallel = sweep(s, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(serial[i].k == static_cast<Index>(i + 1));
        CHECK(serial[i].rmse == parallel[i].rmse);
        CHECK(serial[i].min_rank == parallel[i].min_rank);
    }
    CHECK(slurp(dir / "one" / "sweep.csv") == slurp(dir / "three" / "sweep.csv"));

    std::ifstream in(dir / "one" / "sweep.csv");
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "ell,k,dt,total_memory,rmse,max_mae,final_residual,min_rank,max_cond");
    int n = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 8);
        ++n;
    }
    CHECK(n == 3);
    for (int i = 0; i < 3; ++i) {
        fs::path pt = dir / "one" / ("point_" + std::to_string(i));
        CHECK(fs::exists(pt / "steps.csv"));
        CHECK(fs::exists(pt / "summary.json"));
        CHECK(fs::exists(pt / "q_series.csv"));
    }

    std::ifstream steps(dir / "one" / "point_0" / "steps.csv");
    std::getline(steps, header);
    CHECK(header == "t,residual,effective_rank,condition_number,trace_Q,hermiticity_defect");
    fs::remove_all(dir);
}

TEST_CASE("time-step sweep holds the total time")
{
    CiSystem s = generate_synthetic_system(4, 2, 1);
    ExperimentConfig cfg;
    cfg.axis = ExperimentConfig::Axis::Dt;
    cfg.values = {0.5, 0.25};
    cfg.total_time = 20.0;
    cfg.run.delay.ell = 2;
    auto rows = sweep(s, cfg);
    CHECK(rows[0].dt == 0.5);
    CHECK(rows[1].dt == 0.25);
    cfg.values = {-1.0};
    CHECK_THROWS_AS(sweep(s, cfg), ValidationError);
    cfg.axis = ExperimentConfig::Axis::Ell;
    cfg.values = {1.5};
    CHECK_THROWS_AS(sweep(s, cfg), ValidationError);
}

TEST_CASE("summary is reproducible apart from timing")
{
    CiSystem s = generate_synthetic_system(4, 2, 2);
    ExperimentConfig cfg;
    cfg.run.dt = 0.08268;
    cfg.run.n_steps = 200;
    cfg.run.delay.ell = 6;
    auto a = summary_json(run_experiment(s, cfg));
    auto b = summary_json(run_experiment(s, cfg));
    a.erase("seconds_per_step");
    b.erase("seconds_per_step");
    CHECK(a.dump() == b.dump());
    CHECK(a.contains("rmse"));
    CHECK(a.contains("max_eigenvalue_drift"));
    CHECK(a["mode"] == "constrained");
}

TEST_CASE("run reports bad warm-up lengths")
{
    CiSystem s = generate_synthetic_system(4, 2, 1);
    ExperimentConfig cfg;
    cfg.run.dt = 0.1;
    cfg.run.n_steps = 10;
    cfg.run.delay.ell = 5;
    cfg.run.delay.stride = 2;
    CHECK_THROWS_AS(run_experiment(s, cfg), ValidationError);
}

TEST_CASE("one-electron validation suite")
{
    auto k2 = validate_appendix_c(2, 1000);
    CHECK(k2.printed_matrix_error == 0.0);
    CHECK(k2.identities.general_pinv < 1e-12);
    CHECK(k2.identities.bbplus_identity < 1e-12);
    CHECK(k2.memoryless_identity_c < 1e-10);
    CHECK(k2.memoryless_random_c < 1e-10);

    auto k4 = validate_appendix_c(4, 200);
    CHECK(k4.printed_matrix_error < 0.0);
    CHECK(k4.identities.trace_two_pinv < 1e-12);
    CHECK(k4.identities.trace_two_forward < 1e-12);
    CHECK(k4.memoryless_random_c < 1e-10);
    CHECK_THROWS_AS(validate_appendix_c(3), ValidationError);
}

TEST_CASE("memory-kernel comparison")
{
    std::mt19937_64 rng(5);
    Index n = 6, m = 2;
    CMatrix r = random_unitary(n, rng).topRows(m);
    CVector z0 = gaussian(n, 1, rng).col(0);

    auto still = mz_compare(CMatrix::Identity(n, n), r, z0, 50, 3);
    for (std::size_t t = 0; t < still.direct.size(); ++t) {
        CHECK((still.delay[t] - r * z0).norm() < 1e-12);
        CHECK((still.mz[t] - r * z0).norm() < 1e-12);
    }

    CMatrix diag = CMatrix::Zero(n, n);
    std::uniform_real_distribution<double> ud(0.0, 6.0);
    for (Index i = 0; i < n; ++i)
        diag(i, i) = std::polar(1.0, ud(rng));
    auto d = mz_compare(diag, r, z0, 200, 3);
    CHECK(d.delay_error < 1e-8);
    CHECK(d.mz_error < 1e-8);

    auto dense = mz_compare(random_unitary(n, rng), r, z0, 200, 3);
    CHECK(dense.delay_error < 1e-8);

    auto j = mz_report_json(d);
    CHECK(j["direct"].size() == 201);
    CHECK_THROWS_AS(mz_compare(diag, r, z0, 3, 3), ValidationError);
}
