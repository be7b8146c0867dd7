#pragma once

#include "qbass/bass.hpp"
#include "qbass/convexfn.hpp"
#include "qbass/measures.hpp"
#include "qbass/ot.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace qbass::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Finite doubles as numbers, +-inf as the strings "+inf"/"-inf", NaN as null.
Json number(double x);
/// Inverse of number(); SchemaError on anything else.
double to_double(const Json& j, const std::string& where);

Json to_json(const DiscreteMeasure& m);
Json to_json(const ConvexFunction& f);  // max_affine, values, smooth_quad_lse only
Json to_json(const MartingaleKernel& k);
Json to_json(const Coupling& c);
Json to_json(const BassPair& p);
Json points_json(const PointSet& p);

/// Parsers reject unknown fields, wrong types and a "schema" other than 1.
/// A command envelope (an object with a "command" field) is unwrapped to
/// the given field first, so CLI outputs can be fed back as inputs.
DiscreteMeasure measure_from_json(const Json& j);
ConvexFunction function_from_json(const Json& j);
BassPair pair_from_json(const Json& j);

struct Config {
  std::optional<double> tol;
  std::optional<long> max_iter;
  std::optional<int> pieces;
  std::optional<double> epsilon;
  std::optional<double> beta;
  std::optional<std::uint64_t> seed;
  std::optional<double> init_jitter;
};

struct Instance {
  DiscreteMeasure mu;
  std::optional<DiscreteMeasure> nu;
  DiscreteMeasure q;
  std::optional<ConvexFunction> potential;
  Config config;
};

/// Dimensions must agree across mu, nu, q and the potential.
Instance instance_from_json(const Json& j);
Config config_from_json(const Json& j);
void validate(const Config& c);

Json read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

/// 64-bit FNV-1a of the canonical (key-sorted, compact) dump, as 16 hex digits.
std::string digest(const Json& j);

/// Joint mass triples "i,j,mass" over charged cells, kernel rows weighted by
/// the base measure.
std::string coupling_csv(const Eigen::MatrixXd& mass);
std::string kernel_csv(const MartingaleKernel& k);

std::string format_double(double x);  // %.17g

}  // namespace qbass::io
