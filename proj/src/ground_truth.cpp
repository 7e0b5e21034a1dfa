#include "rdm/ground_truth.hpp"

#include <cstdio>
#include <fstream>

namespace rdm {

CMatrix step_propagator(const CiSystem& system, Index step, double dt)
{
    double t = static_cast<double>(step) * dt;
    return matexp_hermitian(system.hamiltonian(t), cplx(0.0, -dt));
}

CMatrix liouville_step(const CMatrix& h, double dt)
{
    return kron(matexp_hermitian(h.transpose(), cplx(0.0, dt)), matexp_hermitian(h, cplx(0.0, -dt)));
}

GroundTruthRun propagate_coefficients(const CiSystem& system, double dt, Index n_steps,
                                      const std::optional<CVector>& a0)
{
    system.validate();
    if (!(dt > 0.0))
        throw ValidationError("propagate_coefficients: dt must be positive");
    if (n_steps < 0)
        throw ValidationError("propagate_coefficients: n_steps must be non-negative");
    Index nc = system.n_configs();
    GroundTruthRun run;
    run.dt = dt;
    run.a.reserve(static_cast<std::size_t>(n_steps + 1));
    if (a0) {
        if (a0->size() != nc)
            throw ValidationError("propagate_coefficients: a(0) has the wrong length");
        if (std::abs(a0->norm() - 1.0) > 1e-10)
            throw ValidationError("propagate_coefficients: a(0) must be a unit vector");
        run.a.push_back(*a0);
    } else {
        run.a.push_back(CVector::Unit(nc, 0));
    }
    for (Index s = 0; s < n_steps; ++s)
        run.a.push_back(step_propagator(system, s, dt) * run.a.back());
    return run;
}

std::vector<CMatrix> full_density_series(const GroundTruthRun& run)
{
    std::vector<CMatrix> out;
    out.reserve(run.a.size());
    for (const auto& a : run.a)
        out.push_back(a * a.adjoint());
    return out;
}

std::vector<CMatrix> reduced_density_series(const GroundTruthRun& run, const BTensor& b)
{
    std::vector<CMatrix> out;
    out.reserve(run.a.size());
    for (const auto& a : run.a)
        out.push_back(reduce_density(a * a.adjoint(), b));
    return out;
}

std::vector<RVector> eigenvalue_drift(const std::vector<CMatrix>& q_series)
{
    std::vector<RVector> out;
    if (q_series.empty())
        return out;
    auto eigs = [](const CMatrix& q) {
        if (!is_hermitian(q, 1e-10))
            throw ValidationError("eigenvalue_drift: Q is not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMatrix> e(0.5 * (q + q.adjoint()), Eigen::EigenvaluesOnly);
        return RVector(e.eigenvalues().reverse());
    };
    RVector first = eigs(q_series.front());
    out.reserve(q_series.size());
    for (const auto& q : q_series)
        out.push_back((eigs(q) - first).cwiseAbs());
    return out;
}

std::vector<std::pair<Index, Index>> detect_zero_pattern(const GroundTruthRun& run, double tol)
{
    std::vector<std::pair<Index, Index>> out;
    if (run.a.empty())
        return out;
    Index nc = run.a.front().size();
    std::vector<bool> zero(static_cast<std::size_t>(nc), true);
    for (const auto& a : run.a)
        for (Index j = 0; j < nc; ++j)
            if (std::abs(a(j)) >= tol)
                zero[static_cast<std::size_t>(j)] = false;
    for (Index i = 0; i < nc; ++i)
        for (Index j = i; j < nc; ++j)
            if (zero[static_cast<std::size_t>(i)] || zero[static_cast<std::size_t>(j)])
                out.emplace_back(i, j);
    return out;
}

void write_coefficients_csv(const GroundTruthRun& run, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write " + path);
    Index nc = run.a.empty() ? 0 : run.a.front().size();
    out << "t";
    for (Index j = 1; j <= nc; ++j)
        out << ",re_a" << j << ",im_a" << j;
    out << '\n';
    char buf[64];
    for (std::size_t s = 0; s < run.a.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(s) * run.dt);
        out << buf;
        for (Index j = 0; j < nc; ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", run.a[s](j).real(), run.a[s](j).imag());
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace rdm
