#pragma once

#include "gradorder/errors.hpp"
#include "gradorder/permutation.hpp"
#include "gradorder/quadratic.hpp"
#include "gradorder/strategies.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace gradorder {

using Json = nlohmann::json;

inline void to_json(Json& j, const Permutation& pi) { j = pi.order(); }

inline void from_json(const Json& j, Permutation& pi) {
  if (!j.is_array()) throw InvalidArgumentError("permutation json must be an array");
  pi = Permutation::from_order(j.get<std::vector<Index>>());
}

template <typename Scalar>
Json matrix_to_json(const Mat<Scalar>& m) {
  Json rows = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Scalar>
Mat<Scalar> matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw InvalidArgumentError(std::string(what) + " must be a non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Json& first = j.at(0);
  if (!first.is_array() || first.empty())
    throw InvalidArgumentError(std::string(what) + " rows must be non-empty arrays");
  const Index cols = static_cast<Index>(first.size());
  Mat<Scalar> m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Json& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw InvalidArgumentError(std::string(what) + " rows must all have the same length");
    for (Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<Scalar>();
  }
  return m;
}

template <typename Scalar>
void to_json(Json& j, const QuadraticEnsemble<Scalar>& ens) {
  j = Json{{"a", matrix_to_json(ens.a)}, {"b", matrix_to_json(ens.b)}};
}

template <typename Scalar>
void from_json(const Json& j, QuadraticEnsemble<Scalar>& ens) {
  if (!j.is_object() || !j.contains("a") || !j.contains("b"))
    throw InvalidArgumentError("ensemble json must be an object with \"a\" and \"b\"");
  ens.a = matrix_from_json<Scalar>(j.at("a"), "ensemble a");
  ens.b = matrix_from_json<Scalar>(j.at("b"), "ensemble b");
  validate_ensemble(ens);
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw IoError("cannot parse " + path + ": " + e.what());
  }
  return j;
}

inline void save_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

template <typename Scalar>
QuadraticEnsemble<Scalar> load_ensemble(const std::string& path) {
  return load_json_file(path).get<QuadraticEnsemble<Scalar>>();
}

template <typename Scalar>
void save_ensemble(const std::string& path, const QuadraticEnsemble<Scalar>& ens) {
  save_json_file(path, Json(ens));
}

// An arbitrary-permutation schedule is a json array of permutations, each an
// array of example indices. Epoch q uses entry q modulo the schedule length.
inline std::vector<Permutation> load_ap_schedule(const std::string& path, Index n) {
  const Json j = load_json_file(path);
  if (!j.is_array() || j.empty()) throw InvalidArgumentError("schedule must be a non-empty array");
  std::vector<Permutation> out;
  out.reserve(j.size());
  for (const Json& entry : j) {
    Permutation pi = entry.get<Permutation>();
    if (pi.size() != n)
      throw InvalidArgumentError("schedule permutation has wrong size for this ensemble");
    out.push_back(std::move(pi));
  }
  return out;
}

inline ApSource ap_source_from_schedule(std::vector<Permutation> schedule) {
  if (schedule.empty()) throw InvalidArgumentError("schedule must be non-empty");
  return [schedule = std::move(schedule)](int epoch) {
    return schedule[static_cast<std::size_t>(epoch) % schedule.size()];
  };
}

}  // namespace gradorder
