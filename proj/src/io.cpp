#include "qbass/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace qbass::io {

namespace {

const Json& unwrap(const Json& j, const char* field) {
  if (j.is_object() && j.contains("command")) {
    if (!j.contains(field)) throw SchemaError(std::string("command output has no \"") + field + "\" field");
    return j.at(field);
  }
  return j;
}

void check_object(const Json& j, const std::string& what, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw SchemaError(what + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw SchemaError(what + ": unknown field \"" + key + "\"");
  }
  if (j.contains("schema")) {
    const auto& s = j.at("schema");
    if (!s.is_number_integer() || s.get<long>() != kSchemaVersion) {
      throw SchemaError(what + ": unsupported schema version (expected 1)");
    }
  }
}

const Json& field(const Json& j, const std::string& what, const char* name) {
  if (!j.contains(name)) throw SchemaError(what + ": missing field \"" + name + "\"");
  return j.at(name);
}

Eigen::Index dim_field(const Json& j, const std::string& what) {
  const auto& d = field(j, what, "d");
  if (!d.is_number_integer() || d.get<long>() < 1) throw SchemaError(what + ": \"d\" must be a positive integer");
  return d.get<long>();
}

Eigen::VectorXd vector_from(const Json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = to_double(j[i], where);
  return v;
}

PointSet points_from(const Json& j, Eigen::Index d, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of points");
  PointSet p(d, static_cast<Eigen::Index>(j.size()));
  for (size_t c = 0; c < j.size(); ++c) {
    const Eigen::VectorXd x = vector_from(j[c], where);
    if (x.size() != d) {
      throw SchemaError(where + ": point " + std::to_string(c) + " has " + std::to_string(x.size()) +
                        " coordinates, expected d = " + std::to_string(d));
    }
    p.col(static_cast<Eigen::Index>(c)) = x;
  }
  return p;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

}  // namespace

Json number(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "+inf" : "-inf";
  return x;
}

double to_double(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw SchemaError(where + ": expected a number or \"+inf\"");
}

Json points_json(const PointSet& p) { return matrix_json(p.transpose()); }

Json to_json(const DiscreteMeasure& m) {
  return {{"schema", kSchemaVersion}, {"d", m.dim()}, {"atoms", points_json(m.atoms())}, {"weights", vector_json(m.weights())}};
}

Json to_json(const ConvexFunction& f) {
  if (const auto* g = f.as<MaxAffine>()) {
    return {{"schema", kSchemaVersion}, {"type", "max_affine"}, {"d", f.dim()},
            {"slopes", points_json(g->slopes)}, {"intercepts", vector_json(g->intercepts)}};
  }
  if (const auto* g = f.as<ValuesAtPoints>()) {
    return {{"schema", kSchemaVersion}, {"type", "values"}, {"d", f.dim()},
            {"points", points_json(g->points)}, {"values", vector_json(g->values)}};
  }
  if (const auto* g = f.as<SmoothQuadLSE>()) {
    return {{"schema", kSchemaVersion}, {"type", "smooth_quad_lse"}, {"d", f.dim()},
            {"epsilon", number(g->epsilon)}, {"beta", number(g->beta)},
            {"slopes", points_json(g->slopes)}, {"intercepts", vector_json(g->intercepts)}};
  }
  throw SchemaError("cannot serialize a " + f.type_name() + " function");
}

Json to_json(const MartingaleKernel& k) {
  return {{"schema", kSchemaVersion}, {"base", to_json(k.base)}, {"target", points_json(k.target)},
          {"rows", matrix_json(k.rows)}};
}

Json to_json(const Coupling& c) {
  return {{"schema", kSchemaVersion}, {"left", to_json(c.left)}, {"right", to_json(c.right)},
          {"mass", matrix_json(c.mass)}};
}

Json to_json(const BassPair& p) {
  return {{"schema", kSchemaVersion},
          {"v_hat", to_json(p.v_hat)},
          {"alpha_hat", to_json(p.alpha_hat)},
          {"diagnostics",
           {{"w2_mu", number(p.diagnostics.w2_mu)},
            {"w2_nu", number(p.diagnostics.w2_nu)},
            {"strict_convexity_margin", number(p.diagnostics.strict_convexity_margin)}}}};
}

DiscreteMeasure measure_from_json(const Json& in) {
  const Json& j = unwrap(in, "measure");
  const std::string what = "measure";
  check_object(j, what, {"schema", "d", "atoms", "weights"});
  const Eigen::Index d = dim_field(j, what);
  PointSet atoms = points_from(field(j, what, "atoms"), d, "measure.atoms");
  Eigen::VectorXd weights = vector_from(field(j, what, "weights"), "measure.weights");
  if (weights.size() != atoms.cols()) throw SchemaError("measure: atoms and weights differ in length");
  if (atoms.cols() == 0) throw SchemaError("measure: no atoms");
  if (!atoms.allFinite() || !weights.allFinite()) throw SchemaError("measure: non-finite atom or weight");
  return DiscreteMeasure(std::move(atoms), std::move(weights));
}

ConvexFunction function_from_json(const Json& in) {
  const Json& j = unwrap(in, "v_hat");
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw SchemaError("function: expected an object with a string \"type\"");
  }
  const auto type = j.at("type").get<std::string>();
  const std::string what = "function (" + type + ")";
  if (type == "max_affine") {
    check_object(j, what, {"schema", "type", "d", "slopes", "intercepts"});
    const Eigen::Index d = dim_field(j, what);
    return MaxAffine{points_from(field(j, what, "slopes"), d, what + ".slopes"),
                     vector_from(field(j, what, "intercepts"), what + ".intercepts")};
  }
  if (type == "values") {
    check_object(j, what, {"schema", "type", "d", "points", "values"});
    const Eigen::Index d = dim_field(j, what);
    return ValuesAtPoints{points_from(field(j, what, "points"), d, what + ".points"),
                          vector_from(field(j, what, "values"), what + ".values")};
  }
  if (type == "smooth_quad_lse") {
    check_object(j, what, {"schema", "type", "d", "epsilon", "beta", "slopes", "intercepts"});
    const Eigen::Index d = dim_field(j, what);
    SmoothQuadLSE f;
    f.epsilon = to_double(field(j, what, "epsilon"), what + ".epsilon");
    f.beta = to_double(field(j, what, "beta"), what + ".beta");
    f.slopes = points_from(field(j, what, "slopes"), d, what + ".slopes");
    f.intercepts = vector_from(field(j, what, "intercepts"), what + ".intercepts");
    return f;
  }
  throw SchemaError("function: unknown type \"" + type + "\" (expected max_affine, values or smooth_quad_lse)");
}

BassPair pair_from_json(const Json& in) {
  const Json& j = unwrap(in, "pair");
  const std::string what = "pair";
  check_object(j, what, {"schema", "v_hat", "alpha_hat", "diagnostics"});
  BassPair p{function_from_json(field(j, what, "v_hat")), measure_from_json(field(j, what, "alpha_hat")), {}};
  if (p.v_hat.dim() != p.alpha_hat.dim()) throw SchemaError("pair: v_hat and alpha_hat differ in dimension");
  if (j.contains("diagnostics")) {
    const auto& dj = j.at("diagnostics");
    check_object(dj, "pair.diagnostics", {"w2_mu", "w2_nu", "strict_convexity_margin"});
    if (dj.contains("w2_mu")) p.diagnostics.w2_mu = to_double(dj.at("w2_mu"), "pair.diagnostics.w2_mu");
    if (dj.contains("w2_nu")) p.diagnostics.w2_nu = to_double(dj.at("w2_nu"), "pair.diagnostics.w2_nu");
    if (dj.contains("strict_convexity_margin")) {
      p.diagnostics.strict_convexity_margin =
          to_double(dj.at("strict_convexity_margin"), "pair.diagnostics.strict_convexity_margin");
    }
  }
  return p;
}

Config config_from_json(const Json& j) {
  const std::string what = "config";
  check_object(j, what, {"tol", "max_iter", "pieces", "epsilon", "beta", "seed", "init_jitter"});
  auto integer = [&](const char* name) {
    const auto& v = j.at(name);
    if (!v.is_number_integer()) throw SchemaError(std::string("config.") + name + ": expected an integer");
    return v.get<long>();
  };
  Config c;
  if (j.contains("tol")) c.tol = to_double(j.at("tol"), "config.tol");
  if (j.contains("max_iter")) c.max_iter = integer("max_iter");
  if (j.contains("pieces")) c.pieces = static_cast<int>(integer("pieces"));
  if (j.contains("epsilon")) c.epsilon = to_double(j.at("epsilon"), "config.epsilon");
  if (j.contains("beta")) c.beta = to_double(j.at("beta"), "config.beta");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw SchemaError("config.seed: expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("init_jitter")) c.init_jitter = to_double(j.at("init_jitter"), "config.init_jitter");
  validate(c);
  return c;
}

void validate(const Config& c) {
  if (c.tol && !(*c.tol > 0 && std::isfinite(*c.tol))) throw SchemaError("config: tol must be > 0");
  if (c.max_iter && *c.max_iter < 1) throw SchemaError("config: max_iter must be >= 1");
  if (c.pieces && *c.pieces < 1) throw SchemaError("config: pieces must be >= 1");
  if (c.epsilon && !(*c.epsilon > 0 && std::isfinite(*c.epsilon))) throw SchemaError("config: epsilon must be > 0");
  if (c.beta && !(*c.beta > 0 && std::isfinite(*c.beta))) throw SchemaError("config: beta must be > 0");
  if (c.init_jitter && !(*c.init_jitter >= 0 && std::isfinite(*c.init_jitter))) {
    throw SchemaError("config: init_jitter must be >= 0");
  }
}

Instance instance_from_json(const Json& j) {
  const std::string what = "instance";
  check_object(j, what, {"schema", "mu", "nu", "q", "potential", "config"});
  Instance inst{measure_from_json(field(j, what, "mu")), std::nullopt, measure_from_json(field(j, what, "q")),
                std::nullopt, {}};
  const Eigen::Index d = inst.mu.dim();
  if (inst.q.dim() != d) throw SchemaError("instance: q has dimension " + std::to_string(inst.q.dim()) + ", mu has " + std::to_string(d));
  if (j.contains("nu")) {
    inst.nu = measure_from_json(j.at("nu"));
    if (inst.nu->dim() != d) throw SchemaError("instance: nu has dimension " + std::to_string(inst.nu->dim()) + ", mu has " + std::to_string(d));
  }
  if (j.contains("potential")) {
    inst.potential = function_from_json(j.at("potential"));
    if (inst.potential->dim() != d) throw SchemaError("instance: potential and mu differ in dimension");
  }
  if (j.contains("config")) inst.config = config_from_json(j.at("config"));
  return inst;
}

Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path);
  out << text;
  if (!out) throw SchemaError("write failed for " + path);
}

std::string digest(const Json& j) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string coupling_csv(const Eigen::MatrixXd& mass) {
  std::ostringstream s;
  s << "i,j,mass\n";
  for (Eigen::Index i = 0; i < mass.rows(); ++i) {
    for (Eigen::Index j = 0; j < mass.cols(); ++j) {
      if (mass(i, j) > 0) s << i << ',' << j << ',' << format_double(mass(i, j)) << '\n';
    }
  }
  return s.str();
}

std::string kernel_csv(const MartingaleKernel& k) {
  return coupling_csv(k.base.weights().asDiagonal() * k.rows);
}

}  // namespace qbass::io
