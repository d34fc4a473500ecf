#pragma once

// JSON instance and report files. An operator is a list of blocks, each
// block a row-major array of [re, im] pairs:
//
//   {"algebra": {"block_dims": [2, 2], "trace_weights": [1, 1]},
//    "basis": [[[[1,0],[0,0],[0,0],[0,0]], [[0,0],[0,0],[0,0],[0,0]]], ...],
//    "p": 3, "seed": 7, "labels": ["x1", "x2"]}

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nclp/algebra.hpp"
#include "nclp/factorization.hpp"
#include "nclp/holder.hpp"
#include "nclp/lewis.hpp"

namespace nclp {

using json = nlohmann::ordered_json;

struct Instance {
  TracialAlgebra algebra;
  std::vector<Op> basis;
  std::optional<double> p;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> labels;

  /// Applies the independence check; throws StructuralError.
  Subspace subspace() const { return Subspace(algebra, basis); }
};

/// Exponents may be written as numbers or as the string "inf".
inline json exponent_to_json(double p) { return std::isinf(p) ? json("inf") : json(p); }

inline double exponent_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return kInf;
  if (!j.is_number()) throw StructuralError("exponent must be a number or \"inf\"");
  return j.get<double>();
}

inline json matrix_to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index s = 0; s < m.cols(); ++s) a.push_back({m(r, s).real(), m(r, s).imag()});
  return a;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || Eigen::Index(j.size()) != rows * cols)
    throw StructuralError("block has " + std::to_string(j.is_array() ? j.size() : 0) + " entries, expected " +
                          std::to_string(rows * cols));
  Matrix m(rows, cols);
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index s = 0; s < cols; ++s, ++at) {
      const json& e = j[at];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw StructuralError("matrix entries must be [re, im] pairs");
      m(r, s) = cplx(e[0].get<double>(), e[1].get<double>());
    }
  return m;
}

/// General (possibly non-square) matrices carry their shape.
inline json dense_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", matrix_to_json(m)}};
}

inline json algebra_to_json(const TracialAlgebra& alg) {
  return {{"block_dims", alg.block_dims()}, {"trace_weights", alg.trace_weights()}};
}

inline TracialAlgebra algebra_from_json(const json& j) {
  if (!j.is_object() || !j.contains("block_dims") || !j.contains("trace_weights"))
    throw StructuralError("algebra needs block_dims and trace_weights");
  try {
    return TracialAlgebra(j.at("block_dims").get<std::vector<int>>(),
                          j.at("trace_weights").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw StructuralError(std::string("bad algebra: ") + e.what());
  }
}

inline json op_to_json(const Op& x) {
  json a = json::array();
  for (const auto& b : x.blocks()) a.push_back(matrix_to_json(b));
  return a;
}

inline Op op_from_json(const json& j, const TracialAlgebra& alg) {
  if (!j.is_array() || j.size() != alg.num_blocks())
    throw StructuralError("operator must list one array per block");
  std::vector<Matrix> blocks;
  for (std::size_t b = 0; b < alg.num_blocks(); ++b)
    blocks.push_back(matrix_from_json(j[b], alg.block_dim(b), alg.block_dim(b)));
  return Op(std::move(blocks));
}

inline json ops_to_json(std::span<const Op> xs) {
  json a = json::array();
  for (const auto& x : xs) a.push_back(op_to_json(x));
  return a;
}

inline json instance_to_json(const Instance& inst) {
  json j;
  j["algebra"] = algebra_to_json(inst.algebra);
  j["basis"] = ops_to_json(inst.basis);
  if (inst.p) j["p"] = exponent_to_json(*inst.p);
  if (inst.seed) j["seed"] = *inst.seed;
  if (!inst.labels.empty()) j["labels"] = inst.labels;
  return j;
}

/// Shape checks only; call Instance::subspace() for the independence check.
inline Instance instance_from_json(const json& j) {
  if (!j.is_object()) throw StructuralError("instance must be a JSON object");
  if (!j.contains("algebra") || !j.contains("basis")) throw StructuralError("instance needs algebra and basis");
  Instance inst;
  inst.algebra = algebra_from_json(j.at("algebra"));
  const json& basis = j.at("basis");
  if (!basis.is_array() || basis.empty()) throw StructuralError("basis must be a nonempty array");
  for (const auto& x : basis) inst.basis.push_back(op_from_json(x, inst.algebra));
  try {
    if (j.contains("p")) inst.p = exponent_from_json(j.at("p"));
    if (j.contains("seed")) inst.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("labels")) inst.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw StructuralError(std::string("bad instance field: ") + e.what());
  }
  return inst;
}

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw StructuralError(std::string("malformed JSON: ") + e.what());
  }
}

/// Canonical text form: two-space indent, trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json lewis_to_json(const LewisBasisResult& r) {
  return {{"p", r.p},
          {"n", r.dim()},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"gram_residual", r.gram_residual},
          {"normalization_residual", r.normalization_residual},
          {"residual_trace", r.residual_trace},
          {"change_of_basis", dense_to_json(r.change_of_basis)},
          {"basis", ops_to_json(r.basis)},
          {"square_function", op_to_json(r.square_function)},
          {"density", op_to_json(r.density)}};
}

inline json residuals_to_json(const LewisResidualReport& v) {
  return {{"gram_residual", v.gram_residual},
          {"gram_hermitian_residual", v.gram_hermitian_residual},
          {"normalization_residual", v.normalization_residual},
          {"square_function_residual", v.square_function_residual},
          {"support_residual", v.support_residual}};
}

inline json certificate_to_json(const Certificate& c) {
  json norms = json::array();
  for (const auto& m : c.norms) {
    json levels = json::array();
    for (const auto& [k, v] : m.levels) levels.push_back({{"k", k}, {"measured", v}});
    norms.push_back({{"name", m.name},
                     {"map", m.map},
                     {"amplified", m.amplified},
                     {"levels", levels},
                     {"measured", m.measured()},
                     {"bound", m.bound},
                     {"margin", m.margin()},
                     {"enforced", m.enforced},
                     {"ok", m.ok()}});
  }
  json residuals = json::array();
  for (const auto& r : c.residuals)
    residuals.push_back({{"name", r.name}, {"value", r.value}, {"threshold", r.threshold}, {"ok", r.ok()}});
  json values = json::object();
  for (const auto& [k, v] : c.values) values[k] = v;
  return {{"kind", c.kind},
          {"p", c.p},
          {"n", c.n},
          {"block_dims", c.block_dims},
          {"trace_weights", c.trace_weights},
          {"seed", c.seed},
          {"norms", norms},
          {"residuals", residuals},
          {"values", values},
          {"ok", c.ok()}};
}

inline json holder_to_json(const HolderReport& h) {
  json j{{"p", exponent_to_json(h.p)},
         {"p_conj", exponent_to_json(h.p_conj)},
         {"lhs", h.lhs},
         {"rhs", h.rhs},
         {"gap", h.gap},
         {"equality", h.equality},
         {"case", to_string(h.which)},
         {"trivial", h.trivial},
         {"residual", h.residual}};
  j["constant"] = h.constant ? json(*h.constant) : json(nullptr);
  return j;
}

}  // namespace nclp
