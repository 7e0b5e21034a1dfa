/*
 * JSON system files.
 *
 *   n_electrons, n_orbitals, n_configs    integers
 *   c_matrix, m_dip                       N_C x N_C arrays of [re, im]
 *   index_map                             N_C arrays of N 1-based spin-orbitals
 *   h0_diag                               N_C reals
 *   field                                 {amplitude, omega, cycles}
 *
 * Optional: h0_matrix (N_C x N_C [re, im], replaces h0_diag when H0 is
 * not diagonal) and zero_pairs (1-based [i, j], i <= j, entries of P that
 * vanish identically).
 */
#pragma once

#include <string>

#include "json.hpp"
#include "rdm/ci_model.hpp"

namespace rdm {

nlohmann::json system_to_json(const CiSystem& system);
CiSystem system_from_json(const nlohmann::json& j);

CiSystem load_system(const std::string& path);
void save_system(const CiSystem& system, const std::string& path);

nlohmann::json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const nlohmann::json& j, const char* what);

}  // namespace rdm
