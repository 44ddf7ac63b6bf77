#pragma once

#include <json.hpp>
#include <string>

#include "csls/model.hpp"
#include "csls/whrt.hpp"

namespace csls {

// Shared JSON plumbing: matrices are row-major nested arrays.
nlohmann::json matrix_to_json(const MatrixXd& M);
MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what);
nlohmann::json load_json(const std::string& path);
void dump_json(const nlohmann::json& j, const std::string& path);

// Model files are JSON:
//   {
//     "graph": {"nodes": [..], "edges": [[tail, head, label], ..],
//               "num_labels": m},
//     "systems": {"1": {"A": [[..]], "B": .., "C": .., "D": ..}, ..},
//     "control": {"1": {"B_u": .., "D_u": ..}, ..},            optional
//     "uncertainty": {"1": {"B_wu": .., "C_zu": .., "D_zuwu": ..,
//                           "D_zuwp": .., "D_zpwu": .., "D_zu_u": ..}, ..},
//                                                              optional
//     "index": {"1": {"Q": .., "S": .., "R": ..}, ..}          optional
//   }
// Matrices are row-major nested arrays, written in full double precision.
// Q and R blocks are symmetrized on ingest (1e-10 relative tolerance).
CslsModel read_model(const std::string& path);
CslsModel parse_model(const std::string& text);
void write_model(const CslsModel& m, const std::string& path);

// Base plant files:
//   {
//     "plant": {"A": .., "B_w": .., "B_u": .., "C": .., "D_w": ..,
//               "D_u": ..},
//     "uncertainty": {"B_u_delta": .., "D_u_delta": ..},       optional
//     "index": {"Q": .., "S": .., "R": ..}                     optional
//   }
BasePlant read_plant(const std::string& path);
BasePlant parse_plant(const std::string& text);
void write_plant(const BasePlant& p, const std::string& path);

}  // namespace csls
