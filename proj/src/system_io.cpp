#include "rdm/system_io.hpp"

#include <fstream>

namespace rdm {

using nlohmann::json;

json matrix_to_json(const CMatrix& m)
{
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j)
            row.push_back({m(i, j).real(), m(i, j).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

CMatrix matrix_from_json(const json& j, const char* what)
{
    if (!j.is_array() || j.empty())
        throw ValidationError(std::string(what) + ": expected a non-empty array of rows");
    Index rows = static_cast<Index>(j.size());
    Index cols = static_cast<Index>(j[0].size());
    CMatrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw ValidationError(std::string(what) + ": ragged rows");
        for (Index c = 0; c < cols; ++c) {
            const json& e = row[static_cast<std::size_t>(c)];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ValidationError(std::string(what) + ": entries must be [re, im] pairs");
            m(i, c) = cplx(e[0].get<double>(), e[1].get<double>());
        }
    }
    return m;
}

namespace {

bool is_real_diagonal(const CMatrix& m)
{
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i)
            if (i != j ? m(i, j) != cplx(0.0) : m(i, j).imag() != 0.0)
                return false;
    return true;
}

template <typename T>
T require(const json& j, const char* key)
{
    if (!j.contains(key))
        throw ValidationError(std::string("system file: missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("system file: field '") + key + "': " + e.what());
    }
}

}  // namespace

json system_to_json(const CiSystem& s)
{
    json j;
    j["n_electrons"] = s.n_electrons;
    j["n_orbitals"] = s.n_orbitals;
    j["n_configs"] = s.n_configs();
    j["c_matrix"] = matrix_to_json(s.c);
    j["index_map"] = s.index_map.tuples();
    if (is_real_diagonal(s.h0)) {
        std::vector<double> d(static_cast<std::size_t>(s.h0.rows()));
        for (Index i = 0; i < s.h0.rows(); ++i)
            d[static_cast<std::size_t>(i)] = s.h0(i, i).real();
        j["h0_diag"] = d;
    } else {
        j["h0_matrix"] = matrix_to_json(s.h0);
    }
    j["m_dip"] = matrix_to_json(s.m_dip);
    j["field"] = {{"amplitude", s.field.amplitude},
                  {"omega", s.field.omega},
                  {"cycles", s.field.cycles}};
    if (!s.zero_pairs.empty()) {
        json z = json::array();
        for (auto [a, b] : s.zero_pairs)
            z.push_back({a + 1, b + 1});
        j["zero_pairs"] = z;
    }
    return j;
}

CiSystem system_from_json(const json& j)
{
    if (!j.is_object())
        throw ValidationError("system file: top level must be an object");
    CiSystem s;
    s.n_electrons = require<int>(j, "n_electrons");
    s.n_orbitals = require<int>(j, "n_orbitals");
    Index nc = require<Index>(j, "n_configs");
    if (!j.contains("c_matrix"))
        throw ValidationError("system file: missing field 'c_matrix'");
    s.c = matrix_from_json(j["c_matrix"], "c_matrix");
    if (s.c.rows() != nc)
        throw ValidationError("system file: c_matrix size does not match n_configs");
    auto tuples = require<std::vector<std::vector<int>>>(j, "index_map");
    s.index_map = DeterminantIndexMap(s.n_electrons, s.n_orbitals, std::move(tuples));
    if (j.contains("h0_matrix")) {
        s.h0 = matrix_from_json(j["h0_matrix"], "h0_matrix");
    } else {
        auto d = require<std::vector<double>>(j, "h0_diag");
        if (static_cast<Index>(d.size()) != nc)
            throw ValidationError("system file: h0_diag length does not match n_configs");
        s.h0 = CMatrix::Zero(nc, nc);
        for (Index i = 0; i < nc; ++i)
            s.h0(i, i) = d[static_cast<std::size_t>(i)];
    }
    if (!j.contains("m_dip"))
        throw ValidationError("system file: missing field 'm_dip'");
    s.m_dip = matrix_from_json(j["m_dip"], "m_dip");
    const json f = j.value("field", json::object());
    s.field.amplitude = f.value("amplitude", s.field.amplitude);
    s.field.omega = f.value("omega", s.field.omega);
    s.field.cycles = f.value("cycles", s.field.cycles);
    if (j.contains("zero_pairs"))
        for (const auto& z : j["zero_pairs"]) {
            auto p = z.get<std::vector<Index>>();
            if (p.size() != 2)
                throw ValidationError("system file: zero_pairs entries must be [i, j]");
            s.zero_pairs.emplace_back(p[0] - 1, p[1] - 1);
        }
    s.validate();
    return s;
}

CiSystem load_system(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open system file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("system file " + path + ": " + e.what());
    }
    return system_from_json(j);
}

void save_system(const CiSystem& system, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write system file " + path);
    out << system_to_json(system).dump(1) << '\n';
}

}  // namespace rdm
