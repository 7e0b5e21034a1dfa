#include "rdm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "rdm/ground_truth.hpp"

namespace rdm {

namespace fs = std::filesystem;

double rmse(const std::vector<CMatrix>& model, const std::vector<CMatrix>& truth, Index ell)
{
    if (model.size() != truth.size())
        throw ValidationError("rmse: series lengths differ (" + std::to_string(model.size()) +
                              " vs " + std::to_string(truth.size()) + ")");
    Index n = static_cast<Index>(model.size()) - 1;
    if (ell < 0 || n < ell + 1)
        throw ValidationError("rmse: need at least l + 2 entries");
    Index k = truth.front().rows();
    double acc = 0.0;
    for (Index j = ell + 1; j <= n; ++j) {
        const CMatrix& m = model[static_cast<std::size_t>(j)];
        const CMatrix& t = truth[static_cast<std::size_t>(j)];
        if (m.rows() != k || m.cols() != k || t.rows() != k || t.cols() != k)
            throw ValidationError("rmse: shape mismatch at index " + std::to_string(j));
        acc += (m - t).squaredNorm();
    }
    return std::sqrt(acc / static_cast<double>(k * k) / static_cast<double>(n - ell));
}

double mae(const CMatrix& model, const CMatrix& truth)
{
    if (model.rows() != truth.rows() || model.cols() != truth.cols())
        throw ValidationError("mae: shape mismatch");
    return (model - truth).cwiseAbs().sum() / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Runs

Reference make_reference(const CiSystem& system, const BTensor& b, double dt, Index n_steps)
{
    if (!(dt > 0.0))
        throw ValidationError("reference: dt must be positive");
    if (n_steps < 1)
        throw ValidationError("reference: n_steps must be positive");
    Reference ref;
    ref.dt = dt;
    ref.u.reserve(static_cast<std::size_t>(n_steps));
    ref.q_true.reserve(static_cast<std::size_t>(n_steps + 1));
    CVector a = CVector::Zero(system.n_configs());
    a(0) = 1.0;
    ref.q_true.push_back(reduce_density(a * a.adjoint(), b));
    for (Index s = 0; s < n_steps; ++s) {
        ref.u.push_back(step_propagator(system, s, dt));
        a = ref.u.back() * a;
        ref.q_true.push_back(reduce_density(a * a.adjoint(), b));
    }
    return ref;
}

MetricsReport run_on_reference(const CiSystem& system, const BTensor& b, const Reference& ref,
                               const RunParams& params)
{
    params.delay.validate();
    Index n = static_cast<Index>(ref.u.size());
    Index n_steps = std::min(params.n_steps, n);
    Index depth = params.delay.depth();
    if (depth >= n_steps)
        throw ValidationError("run: warm-up length k*l = " + std::to_string(depth) +
                              " leaves no steps to propagate (n_steps = " +
                              std::to_string(n_steps) + ")");

    MetricsReport rep;
    rep.params = params;
    rep.params.n_steps = n_steps;
    rep.params.dt = ref.dt;
    rep.total_memory = static_cast<double>(depth) * ref.dt;

    QPropagator prop(b, params.delay, params.mode,
                     ConstraintSpec(system.n_configs(), system.zero_pairs));
    prop.reset(ref.q_true[0]);
    rep.q_model.reserve(static_cast<std::size_t>(n_steps + 1));
    rep.q_model.push_back(ref.q_true[0]);
    for (Index t = 0; t < depth; ++t) {
        prop.advance_known(ref.u[static_cast<std::size_t>(t)],
                           ref.q_true[static_cast<std::size_t>(t + 1)]);
        rep.q_model.push_back(ref.q_true[static_cast<std::size_t>(t + 1)]);
    }

    double n_el = static_cast<double>(system.n_electrons);
    rep.min_rank = -1;
    auto start = std::chrono::steady_clock::now();
    for (Index t = depth; t < n_steps; ++t) {
        StepRecord rec;
        try {
            rec = prop.step(ref.u[static_cast<std::size_t>(t)]);
        } catch (const ValidationError& e) {
            throw ValidationError("step " + std::to_string(t) + ": " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError("step " + std::to_string(t) + ": " + e.what());
        }
        const CMatrix& q = prop.current();
        if (!q.allFinite())
            throw NumericalError("step " + std::to_string(t) + ": non-finite Q");
        rep.q_model.push_back(q);
        rep.steps.push_back(rec);
    }
    auto stop = std::chrono::steady_clock::now();
    rep.seconds_per_step = std::chrono::duration<double>(stop - start).count() /
                           static_cast<double>(n_steps - depth);

    std::vector<CMatrix> truth(ref.q_true.begin(), ref.q_true.begin() + n_steps + 1);
    rep.rmse = rmse(rep.q_model, truth, params.delay.ell);
    for (Index t = depth + 1; t <= n_steps; ++t) {
        double m = mae(rep.q_model[static_cast<std::size_t>(t)], truth[static_cast<std::size_t>(t)]);
        rep.mae_series.push_back(m);
        rep.max_mae = std::max(rep.max_mae, m);
        rep.max_trace_error =
            std::max(rep.max_trace_error,
                     std::abs(rep.q_model[static_cast<std::size_t>(t)].trace() - n_el));
    }
    for (const auto& rec : rep.steps) {
        rep.max_cond = std::max(rep.max_cond, rec.condition_number);
        if (rep.min_rank < 0 || rec.effective_rank < rep.min_rank)
            rep.min_rank = rec.effective_rank;
    }
    rep.final_residual = rep.steps.back().residual;
    // Raw-mode Q need not be Hermitian; drift is taken of the Hermitian part.
    std::vector<CMatrix> herm;
    herm.reserve(rep.q_model.size());
    for (const auto& q : rep.q_model)
        herm.push_back(0.5 * (q + q.adjoint()));
    for (const auto& d : eigenvalue_drift(herm))
        rep.max_eigen_drift.push_back(d.size() ? d.maxCoeff() : 0.0);
    return rep;
}

namespace {

const char* mode_name(PropagationMode m)
{
    return m == PropagationMode::Constrained ? "constrained" : "raw";
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw ValidationError("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path);
    if (!f)
        throw ValidationError("cannot write " + path);
    return f;
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_q_csv(const MetricsReport& rep, const std::vector<CMatrix>& truth,
                 const std::string& path)
{
    auto f = open_out(path);
    Index k = truth.front().rows();
    f << "t";
    for (const char* which : {"model", "true"})
        for (Index c = 0; c < k; ++c)
            for (Index r = 0; r < k; ++r)
                f << ",re_" << which << "_" << r + 1 << "_" << c + 1 << ",im_" << which << "_"
                  << r + 1 << "_" << c + 1;
    f << "\n";
    for (std::size_t t = 0; t < rep.q_model.size(); ++t) {
        f << num(static_cast<double>(t) * rep.params.dt);
        for (const CMatrix* q : {&rep.q_model[t], &truth[t]})
            for (Index c = 0; c < k; ++c)
                for (Index r = 0; r < k; ++r)
                    f << "," << num((*q)(r, c).real()) << "," << num((*q)(r, c).imag());
        f << "\n";
    }
}

void write_point(const MetricsReport& rep, const Reference& ref, const std::string& dir)
{
    ensure_dir(dir);
    write_steps_csv(rep, (fs::path(dir) / "steps.csv").string());
    std::vector<CMatrix> truth(ref.q_true.begin(),
                               ref.q_true.begin() + static_cast<Index>(rep.q_model.size()));
    write_q_csv(rep, truth, (fs::path(dir) / "q_series.csv").string());
    auto f = open_out((fs::path(dir) / "summary.json").string());
    f << summary_json(rep).dump(2) << "\n";
}

}  // namespace

void write_steps_csv(const MetricsReport& rep, const std::string& path)
{
    auto f = open_out(path);
    f << "t,residual,effective_rank,condition_number,trace_Q,hermiticity_defect\n";
    for (const auto& r : rep.steps)
        f << num(static_cast<double>(r.step) * rep.params.dt) << "," << num(r.residual) << ","
          << r.effective_rank << "," << num(r.condition_number) << "," << num(r.trace_q) << ","
          << num(r.hermiticity_defect_p) << "\n";
}

nlohmann::json summary_json(const MetricsReport& rep)
{
    nlohmann::json j;
    j["dt"] = rep.params.dt;
    j["n_steps"] = rep.params.n_steps;
    j["ell"] = rep.params.delay.ell;
    j["stride"] = rep.params.delay.stride;
    j["r_tol"] = rep.params.delay.r_tol;
    j["mode"] = mode_name(rep.params.mode);
    j["total_memory"] = rep.total_memory;
    j["rmse"] = rep.rmse;
    j["max_mae"] = rep.max_mae;
    j["final_residual"] = rep.final_residual;
    j["min_rank"] = rep.min_rank;
    j["max_cond"] = rep.max_cond;
    j["max_trace_error"] = rep.max_trace_error;
    double drift = 0.0;
    for (double d : rep.max_eigen_drift)
        drift = std::max(drift, d);
    j["max_eigenvalue_drift"] = drift;
    j["seconds_per_step"] = rep.seconds_per_step;
    return j;
}

MetricsReport run_experiment(const CiSystem& system, const ExperimentConfig& cfg)
{
    system.validate();
    BTensor b = build_B(system);
    Reference ref = make_reference(system, b, cfg.run.dt, cfg.run.n_steps);
    MetricsReport rep = run_on_reference(system, b, ref, cfg.run);
    if (!cfg.out_dir.empty())
        write_point(rep, ref, cfg.out_dir);
    return rep;
}

SweepRow sweep_row(const MetricsReport& rep)
{
    SweepRow row;
    row.ell = rep.params.delay.ell;
    row.k = rep.params.delay.stride;
    row.dt = rep.params.dt;
    row.total_memory = rep.total_memory;
    row.rmse = rep.rmse;
    row.max_mae = rep.max_mae;
    row.final_residual = rep.final_residual;
    row.min_rank = rep.min_rank;
    row.max_cond = rep.max_cond;
    row.seconds_per_step = rep.seconds_per_step;
    return row;
}

std::vector<SweepRow> sweep(const CiSystem& system, const ExperimentConfig& cfg)
{
    system.validate();
    if (cfg.workers < 1)
        throw ValidationError("sweep: workers must be >= 1");
    std::vector<RunParams> points;
    if (cfg.axis == ExperimentConfig::Axis::None || cfg.values.empty()) {
        points.push_back(cfg.run);
    } else {
        for (double v : cfg.values) {
            RunParams p = cfg.run;
            switch (cfg.axis) {
            case ExperimentConfig::Axis::Ell:
                if (v < 0 || v != std::floor(v))
                    throw ValidationError("sweep: ell values must be non-negative integers");
                p.delay.ell = static_cast<Index>(v);
                break;
            case ExperimentConfig::Axis::Stride:
                if (v < 1 || v != std::floor(v))
                    throw ValidationError("sweep: stride values must be positive integers");
                p.delay.stride = static_cast<Index>(v);
                break;
            case ExperimentConfig::Axis::Dt:
                if (!(v > 0.0))
                    throw ValidationError("sweep: dt values must be positive");
                p.dt = v;
                p.n_steps = static_cast<Index>(std::llround(cfg.total_time / v));
                break;
            case ExperimentConfig::Axis::None:
                break;
            }
            points.push_back(p);
        }
    }

    BTensor b = build_B(system);
    std::map<std::pair<double, Index>, Reference> refs;
    for (const auto& p : points) {
        auto key = std::make_pair(p.dt, p.n_steps);
        if (!refs.count(key))
            refs.emplace(key, make_reference(system, b, p.dt, p.n_steps));
    }

    std::vector<SweepRow> rows(points.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next++;
            if (i >= points.size())
                return;
            try {
                const Reference& ref = refs.at({points[i].dt, points[i].n_steps});
                MetricsReport rep = run_on_reference(system, b, ref, points[i]);
                rows[i] = sweep_row(rep);
                if (!cfg.out_dir.empty())
                    write_point(rep, ref,
                                (fs::path(cfg.out_dir) / ("point_" + std::to_string(i))).string());
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err)
                    err = std::current_exception();
            }
        }
    };
    std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers),
                                                  points.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_workers; ++w)
        pool.emplace_back(worker);
    worker();
    for (auto& th : pool)
        th.join();
    if (err)
        std::rethrow_exception(err);
    if (!cfg.out_dir.empty()) {
        ensure_dir(cfg.out_dir);
        write_sweep_csv(rows, (fs::path(cfg.out_dir) / "sweep.csv").string());
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path)
{
    auto f = open_out(path);
    f << "ell,k,dt,total_memory,rmse,max_mae,final_residual,min_rank,max_cond\n";
    for (const auto& r : rows)
        f << r.ell << "," << r.k << "," << num(r.dt) << "," << num(r.total_memory) << ","
          << num(r.rmse) << "," << num(r.max_mae) << "," << num(r.final_residual) << ","
          << r.min_rank << "," << num(r.max_cond) << "\n";
}

// ---------------------------------------------------------------------------
// One-electron validation

CMatrix printed_one_electron_matrix()
{
    static const int table[16][4] = {
        {2, 0, 0, 0}, {0, 0, 1, 0}, {0, 0, 1, 0}, {0, 0, 0, 0},
        {0, 1, 0, 0}, {1, 0, 0, 1}, {0, 0, 0, 0}, {0, 0, 1, 0},
        {0, 1, 0, 0}, {0, 0, 0, 0}, {1, 0, 0, 1}, {0, 0, 1, 0},
        {0, 0, 0, 0}, {0, 1, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 2},
    };
    CMatrix m(16, 4);
    for (Index r = 0; r < 16; ++r)
        for (Index c = 0; c < 4; ++c)
            m(r, c) = table[r][c];
    return m;
}

double one_electron_lvn_deviation(const OneElectronSystem& sys, double dt, Index steps)
{
    const CiSystem& s = sys.system;
    BTensor b = build_B(s);
    DelayConfig cfg;
    QPropagator prop(b, cfg, PropagationMode::Constrained, ConstraintSpec(s.n_configs()));
    CMatrix p0 = CMatrix::Zero(s.n_configs(), s.n_configs());
    p0(0, 0) = 1.0;
    CMatrix q = reduce_density(p0, b);
    prop.reset(q);
    double worst = 0.0;
    for (Index t = 0; t < steps; ++t) {
        prop.step(step_propagator(s, t, dt));
        CMatrix v = matexp_hermitian(sys.one_body_hamiltonian(static_cast<double>(t) * dt),
                                     cplx(0.0, -dt));
        q = v * q * v.adjoint();
        worst = std::max(worst, (prop.current() - q).cwiseAbs().maxCoeff());
    }
    return worst;
}

OneElectronReport validate_appendix_c(int k, Index steps, double dt, unsigned seed)
{
    if (k != 2 && k != 4)
        throw ValidationError("validate_appendix_c: K must be 2 or 4");
    std::mt19937_64 rng(seed);
    CMatrix h = random_hermitian(k, rng);
    CMatrix mu = random_hermitian(k, rng);
    OneElectronReport rep;
    rep.k = k;
    rep.steps = steps;

    auto plain = build_one_electron_system(h, mu, CMatrix::Identity(k * k, k * k));
    BTensor b = build_B(plain.system);
    if (k == 2)
        rep.printed_matrix_error =
            (b.export_printed() - printed_one_electron_matrix()).cwiseAbs().maxCoeff();
    rep.identities = verify_bplus_identities(b, k);
    rep.memoryless_identity_c = one_electron_lvn_deviation(plain, dt, steps);

    auto rotated = build_one_electron_system(h, mu, random_unitary(k * k, rng));
    rep.memoryless_random_c = one_electron_lvn_deviation(rotated, dt, steps);
    return rep;
}

// ---------------------------------------------------------------------------
// Memory-kernel comparison

MzCompareReport mz_compare(const CMatrix& a, const CMatrix& r, const CVector& z0, Index steps,
                           Index ell, MemoryWindow window, double r_tol)
{
    if (steps <= ell)
        throw ValidationError("mz_compare: steps must exceed ell");
    ReductionMap red(r);
    Index n = red.cols();
    if (a.rows() != n || a.cols() != n || z0.size() != n)
        throw ValidationError("mz_compare: shapes do not match the reduction map");

    MzCompareReport rep;
    CVector z = z0;
    for (Index t = 0; t <= steps; ++t) {
        rep.direct.push_back(r * z);
        z = a * z;
    }

    DelayConfig cfg;
    cfg.ell = ell;
    cfg.r_tol = r_tol;
    HistoryBuffer hist(n, cfg);
    hist.push_observation(rep.direct[0]);
    rep.delay.push_back(rep.direct[0]);
    for (Index t = 0; t < ell; ++t) {
        hist.push_propagator(a);
        hist.push_observation(rep.direct[static_cast<std::size_t>(t + 1)]);
        rep.delay.push_back(rep.direct[static_cast<std::size_t>(t + 1)]);
    }
    for (Index t = ell; t < steps; ++t) {
        DelayStep st = propagate_y(hist, red, a, cfg);
        hist.push_propagator(a);
        hist.push_observation(st.y_next);
        rep.delay.push_back(st.y_next);
    }

    CMatrix rt = complete_reduction_basis(red);
    MzResult mz = mori_zwanzig_propagate(a, red, rt, r * z0, rt * z0, steps, window);
    rep.mz = std::move(mz.y);
    rep.mz_diverged = mz.diverged;
    rep.mz_diverged_at = mz.diverged_at;
    for (std::size_t t = 0; t < rep.direct.size(); ++t) {
        rep.delay_error = std::max(rep.delay_error, (rep.delay[t] - rep.direct[t]).norm());
        rep.mz_error = std::max(rep.mz_error, (rep.mz[t] - rep.direct[t]).norm());
    }
    return rep;
}

nlohmann::json mz_report_json(const MzCompareReport& rep)
{
    nlohmann::json j;
    j["delay_error"] = rep.delay_error;
    j["mz_error"] = rep.mz_error;
    j["mz_diverged"] = rep.mz_diverged;
    j["mz_diverged_at"] = rep.mz_diverged_at;
    auto series = [](const std::vector<CVector>& ys) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& y : ys) {
            nlohmann::json row = nlohmann::json::array();
            for (Index i = 0; i < y.size(); ++i)
                row.push_back({y(i).real(), y(i).imag()});
            out.push_back(row);
        }
        return out;
    };
    j["direct"] = series(rep.direct);
    j["delay"] = series(rep.delay);
    j["mz"] = series(rep.mz);
    return j;
}

// ---------------------------------------------------------------------------
// Synthetic systems

CMatrix random_unitary(Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd;
    CMatrix g(n, n);
    for (Index c = 0; c < n; ++c)
        for (Index r = 0; r < n; ++r)
            g(r, c) = cplx(nd(rng), nd(rng));
    Eigen::HouseholderQR<CMatrix> qr(g);
    CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
    const CMatrix& rr = qr.matrixQR();
    for (Index j = 0; j < n; ++j) {
        cplx d = rr(j, j);
        if (std::abs(d) > 0.0)
            q.col(j) *= d / std::abs(d);
    }
    return q;
}

CMatrix random_hermitian(Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd;
    CMatrix g(n, n);
    for (Index c = 0; c < n; ++c)
        for (Index r = 0; r < n; ++r)
            g(r, c) = cplx(nd(rng), nd(rng));
    return 0.5 * (g + g.adjoint());
}

CiSystem generate_synthetic_system(Index n_c, int k, unsigned seed, const SyntheticOptions& opts)
{
    if (k < 1)
        throw ValidationError("synthetic system: K must be positive");
    opts.field.validate();
    Index all = static_cast<Index>(k) * (2 * k - 1);
    CiSystem s;
    s.n_electrons = 2;
    s.n_orbitals = k;
    if (n_c == static_cast<Index>(k) * k) {
        s.index_map = DeterminantIndexMap::opposite_spin_pairs(k);
    } else if (n_c >= 1 && n_c <= all) {
        auto full = DeterminantIndexMap::all_determinants(2, k);
        std::vector<std::vector<int>> t(full.tuples().begin(), full.tuples().begin() + n_c);
        s.index_map = DeterminantIndexMap(2, k, std::move(t));
    } else {
        throw ValidationError("synthetic system: N_C = " + std::to_string(n_c) +
                              " is inconsistent with two electrons on " + std::to_string(k) +
                              " orbitals (at most " + std::to_string(all) + ")");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<double> e(static_cast<std::size_t>(n_c));
    for (auto& x : e)
        x = opts.energy_scale * ud(rng);
    std::sort(e.begin(), e.end());
    s.h0 = CMatrix::Zero(n_c, n_c);
    for (Index i = 0; i < n_c; ++i)
        s.h0(i, i) = e[static_cast<std::size_t>(i)];

    s.m_dip = opts.dipole_scale * random_hermitian(n_c, rng);
    if (opts.real_dipole)
        s.m_dip = CMatrix(s.m_dip.real().cast<cplx>());
    if (opts.zero_diag_dipole)
        s.m_dip.diagonal().setZero();
    s.c = random_unitary(n_c, rng);
    s.field = opts.field;
    s.validate();
    return s;
}

}  // namespace rdm
