#include "csls/io.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace csls {

using nlohmann::json;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void dump_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

nlohmann::json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) {
    throw std::runtime_error(what + ": expected non-empty array of rows");
  }
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) {
    throw std::runtime_error(what + ": rows must be non-empty arrays");
  }
  const std::size_t cols = j[0].size();
  MatrixXd M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw std::runtime_error(what + ": ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) {
        throw std::runtime_error(what + ": non-numeric entry");
      }
      M(r, c) = j[r][c].get<double>();
    }
  }
  return M;
}

namespace {

using nlohmann::json;

MatrixXd sym_from_json(const json& j, const std::string& what) {
  try {
    return symmetrize_checked(matrix_from_json(j, what), what);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
}

const json& field(const json& j, const std::string& key,
                  const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) throw std::runtime_error(what + ": missing \"" + key + "\"");
  return *it;
}

int label_key(const std::string& key, const std::string& what) {
  try {
    std::size_t used = 0;
    int l = std::stoi(key, &used);
    if (used != key.size() || l < 1) throw std::invalid_argument("");
    return l;
  } catch (...) {
    throw std::runtime_error(what + ": bad label key \"" + key + "\"");
  }
}

QuadraticIndex index_entry_from_json(const json& j, const std::string& what) {
  QuadraticIndex q;
  q.Q = sym_from_json(field(j, "Q", what), what + ".Q");
  q.S = matrix_from_json(field(j, "S", what), what + ".S");
  q.R = sym_from_json(field(j, "R", what), what + ".R");
  return q;
}

json index_entry_to_json(const QuadraticIndex& q) {
  return {{"Q", matrix_to_json(q.Q)},
          {"S", matrix_to_json(q.S)},
          {"R", matrix_to_json(q.R)}};
}

CslsModel model_from_json(const json& j) {
  CslsModel m;
  const json& jg = field(j, "graph", "model");
  for (const auto& v : field(jg, "nodes", "graph")) {
    if (!v.is_number_integer()) throw std::runtime_error("graph: bad node");
    m.graph.nodes.push_back(v.get<int>());
  }
  for (const auto& e : field(jg, "edges", "graph")) {
    if (!e.is_array() || e.size() != 3) {
      throw std::runtime_error("graph: edges must be [tail, head, label]");
    }
    m.graph.edges.push_back(
        {e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
  }
  m.graph.num_labels = field(jg, "num_labels", "graph").get<int>();

  for (const auto& [key, js] : field(j, "systems", "model").items()) {
    const int l = label_key(key, "systems");
    const std::string what = "systems." + key;
    StateSpace s;
    s.A = matrix_from_json(field(js, "A", what), what + ".A");
    s.B = matrix_from_json(field(js, "B", what), what + ".B");
    s.C = matrix_from_json(field(js, "C", what), what + ".C");
    s.D = matrix_from_json(field(js, "D", what), what + ".D");
    m.systems.systems.emplace(l, std::move(s));
  }
  if (j.contains("control")) {
    for (const auto& [key, jc] : j["control"].items()) {
      const int l = label_key(key, "control");
      const std::string what = "control." + key;
      ControlChannel c;
      c.B_u = matrix_from_json(field(jc, "B_u", what), what + ".B_u");
      c.D_u = matrix_from_json(field(jc, "D_u", what), what + ".D_u");
      m.control.emplace(l, std::move(c));
    }
  }
  if (j.contains("uncertainty")) {
    for (const auto& [key, ju] : j["uncertainty"].items()) {
      const int l = label_key(key, "uncertainty");
      const std::string what = "uncertainty." + key;
      UncertaintyChannel u;
      u.B_wu = matrix_from_json(field(ju, "B_wu", what), what + ".B_wu");
      u.C_zu = matrix_from_json(field(ju, "C_zu", what), what + ".C_zu");
      u.D_zuwu = matrix_from_json(field(ju, "D_zuwu", what), what + ".D_zuwu");
      u.D_zuwp = matrix_from_json(field(ju, "D_zuwp", what), what + ".D_zuwp");
      u.D_zpwu = matrix_from_json(field(ju, "D_zpwu", what), what + ".D_zpwu");
      if (ju.contains("D_zu_u")) {
        u.D_zu_u = matrix_from_json(ju["D_zu_u"], what + ".D_zu_u");
      }
      m.uncertainty.emplace(l, std::move(u));
    }
  }
  if (j.contains("index")) {
    PerformanceIndex p;
    for (const auto& [key, ji] : j["index"].items()) {
      const int l = label_key(key, "index");
      p.entries.emplace(l, index_entry_from_json(ji, "index." + key));
    }
    m.index = std::move(p);
  }
  require_valid_model(m);
  return m;
}

json model_to_json(const CslsModel& m) {
  json j;
  j["graph"]["nodes"] = m.graph.nodes;
  json edges = json::array();
  for (const Edge& e : m.graph.edges) {
    edges.push_back({e.tail, e.head, e.label});
  }
  j["graph"]["edges"] = std::move(edges);
  j["graph"]["num_labels"] = m.graph.num_labels;
  for (const auto& [l, s] : m.systems.systems) {
    json& js = j["systems"][std::to_string(l)];
    js["A"] = matrix_to_json(s.A);
    js["B"] = matrix_to_json(s.B);
    js["C"] = matrix_to_json(s.C);
    js["D"] = matrix_to_json(s.D);
  }
  for (const auto& [l, c] : m.control) {
    json& jc = j["control"][std::to_string(l)];
    jc["B_u"] = matrix_to_json(c.B_u);
    jc["D_u"] = matrix_to_json(c.D_u);
  }
  for (const auto& [l, u] : m.uncertainty) {
    json& ju = j["uncertainty"][std::to_string(l)];
    ju["B_wu"] = matrix_to_json(u.B_wu);
    ju["C_zu"] = matrix_to_json(u.C_zu);
    ju["D_zuwu"] = matrix_to_json(u.D_zuwu);
    ju["D_zuwp"] = matrix_to_json(u.D_zuwp);
    ju["D_zpwu"] = matrix_to_json(u.D_zpwu);
    if (u.D_zu_u.size() > 0) ju["D_zu_u"] = matrix_to_json(u.D_zu_u);
  }
  if (m.index) {
    for (const auto& [l, q] : m.index->entries) {
      j["index"][std::to_string(l)] = index_entry_to_json(q);
    }
  }
  return j;
}

BasePlant plant_from_json(const json& j) {
  BasePlant p;
  const json& jp = field(j, "plant", "plant file");
  p.A = matrix_from_json(field(jp, "A", "plant"), "plant.A");
  p.B_w = matrix_from_json(field(jp, "B_w", "plant"), "plant.B_w");
  p.B_u = matrix_from_json(field(jp, "B_u", "plant"), "plant.B_u");
  p.C = matrix_from_json(field(jp, "C", "plant"), "plant.C");
  p.D_w = matrix_from_json(field(jp, "D_w", "plant"), "plant.D_w");
  p.D_u = matrix_from_json(field(jp, "D_u", "plant"), "plant.D_u");
  if (j.contains("uncertainty")) {
    const json& ju = j["uncertainty"];
    p.B_u_delta =
        matrix_from_json(field(ju, "B_u_delta", "uncertainty"), "B_u_delta");
    p.D_u_delta =
        matrix_from_json(field(ju, "D_u_delta", "uncertainty"), "D_u_delta");
  }
  if (j.contains("index")) {
    p.index = index_entry_from_json(j["index"], "index");
  }
  require_consistent(p, "plant");
  return p;
}

json plant_to_json(const BasePlant& p) {
  json j;
  j["plant"] = {{"A", matrix_to_json(p.A)},     {"B_w", matrix_to_json(p.B_w)},
                {"B_u", matrix_to_json(p.B_u)}, {"C", matrix_to_json(p.C)},
                {"D_w", matrix_to_json(p.D_w)}, {"D_u", matrix_to_json(p.D_u)}};
  if (p.has_uncertainty()) {
    j["uncertainty"] = {{"B_u_delta", matrix_to_json(p.B_u_delta)},
                        {"D_u_delta", matrix_to_json(p.D_u_delta)}};
  }
  if (p.index) j["index"] = index_entry_to_json(*p.index);
  return j;
}

}  // namespace

CslsModel read_model(const std::string& path) {
  try {
    return model_from_json(load_json(path));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

CslsModel parse_model(const std::string& text) {
  try {
    return model_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model: ") + e.what());
  }
}

void write_model(const CslsModel& m, const std::string& path) {
  dump_json(model_to_json(m), path);
}

BasePlant read_plant(const std::string& path) {
  try {
    return plant_from_json(load_json(path));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

BasePlant parse_plant(const std::string& text) {
  try {
    return plant_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("plant: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("plant: ") + e.what());
  }
}

void write_plant(const BasePlant& p, const std::string& path) {
  dump_json(plant_to_json(p), path);
}

}  // namespace csls
