#include <doctest.h>

#include "qbass/cli.hpp"
#include "qbass/gaussian.hpp"
#include "qbass/io.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace qbass;
using io::Json;

namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run qbass_run(std::vector<std::string> args) {
  args.insert(args.begin(), "qbass");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static const fs::path dir = [] {
    std::random_device rd;
    auto p = fs::temp_directory_path() / ("qbass_cli_" + std::to_string(rd()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string put(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("measure JSON round trip and digest") {
  const auto m = DiscreteMeasure::from_1d({-1.25, 0.1, 3.0}, {0.2, 0.3, 0.5});
  const Json j = io::to_json(m);
  const auto back = io::measure_from_json(Json::parse(j.dump()));
  CHECK(approx_equal(back, m, 0.0));
  CHECK(io::digest(io::to_json(back)) == io::digest(j));

  PointSet a(2, 2);
  a << 0.1, -2, 1.0 / 3, 7;
  const DiscreteMeasure m2(a, Eigen::Vector2d(0.25, 0.75));
  CHECK(io::digest(io::to_json(io::measure_from_json(io::to_json(m2)))) == io::digest(io::to_json(m2)));

  const auto x = Json::parse(R"({"d": 1, "atoms": [[0], [2]], "weights": [0.5, 0.5]})");
  const auto y = Json::parse(R"({"weights": [0.5, 0.5], "atoms": [[0], [2]], "d": 1})");
  CHECK(io::digest(x) == io::digest(y));
  CHECK(io::digest(x) != io::digest(Json::parse(R"({"d": 1, "atoms": [[0], [2]], "weights": [0.25, 0.75]})")));
  CHECK(io::digest(Json::parse("{}")) == "08f44b07b5901a25");  // FNV-1a of "{}"
}

TEST_CASE("measure JSON rejects malformed input") {
  auto bad = [](const char* text) { return io::measure_from_json(Json::parse(text)); };
  CHECK_THROWS_AS(bad(R"({"d": 1, "atoms": [[0]], "weights": [1], "extra": 0})"), SchemaError);
  CHECK_THROWS_AS(bad(R"({"d": 1, "atoms": [[0]]})"), SchemaError);
  CHECK_THROWS_AS(bad(R"({"d": 2, "atoms": [[0]], "weights": [1]})"), SchemaError);
  CHECK_THROWS_AS(bad(R"({"d": 1, "atoms": [[0], [1]], "weights": [1]})"), SchemaError);
  CHECK_THROWS_AS(bad(R"({"d": 1, "atoms": [[0], [1]], "weights": [0.5, 0.6]})"), SchemaError);
  CHECK_THROWS_AS(bad(R"({"d": 1, "atoms": [[0]], "weights": [1], "schema": 2})"), SchemaError);
  CHECK_THROWS_AS(bad(R"({"d": 1, "atoms": [["a"]], "weights": [1]})"), SchemaError);
  CHECK_THROWS_AS(bad(R"({"d": 0, "atoms": [], "weights": []})"), SchemaError);
  CHECK_NOTHROW(bad(R"({"schema": 1, "d": 1, "atoms": [[0]], "weights": [1]})"));
}

TEST_CASE("infinite values") {
  CHECK(io::number(kInf) == "+inf");
  CHECK(io::number(-kInf) == "-inf");
  CHECK(io::number(std::nan("")).is_null());
  CHECK(io::to_double(Json("+inf"), "x") == kInf);
  CHECK(io::to_double(Json(2.5), "x") == 2.5);
  CHECK_THROWS_AS(io::to_double(Json("inf"), "x"), SchemaError);
}

TEST_CASE("function and pair JSON round trip") {
  SmoothQuadLSE s;
  s.epsilon = 0.2;
  s.beta = 0.05;
  s.slopes = (PointSet(1, 3) << -1, 0.5, 2).finished();
  s.intercepts = Eigen::Vector3d(0.1, 0, -0.3);
  MaxAffine ma{(PointSet(2, 2) << 1, 0, 0, 1).finished(), Eigen::Vector2d(0, 1)};
  ValuesAtPoints va{(PointSet(1, 3) << -1, 0, 2).finished(), Eigen::Vector3d(1, 0, 4)};
  for (const ConvexFunction f : {ConvexFunction(s), ConvexFunction(ma), ConvexFunction(va)}) {
    const Json j = io::to_json(f);
    const auto g = io::function_from_json(Json::parse(j.dump()));
    CHECK(g.type_name() == f.type_name());
    CHECK(io::digest(io::to_json(g)) == io::digest(j));
    const Point y = Point::Constant(f.dim(), 0.3);
    CHECK(evaluate(g, y) == evaluate(f, y));
  }
  CHECK_THROWS_AS(io::to_json(conjugate(ConvexFunction(s))), SchemaError);
  CHECK_THROWS_AS(io::function_from_json(Json::parse(R"({"type": "spline", "d": 1})")), SchemaError);
  CHECK_THROWS_AS(io::function_from_json(Json::parse(
                      R"({"type": "smooth_quad_lse", "d": 1, "epsilon": 0.1, "beta": 0, "slopes": [[0]], "intercepts": [0]})")),
                  SchemaError);

  const BassPair p{s, DiscreteMeasure::from_1d({-0.3, 0.4}, {0.5, 0.5}), {1e-9, 2e-9, 0.2}};
  const Json pj = io::to_json(p);
  const auto back = io::pair_from_json(Json::parse(pj.dump()));
  CHECK(io::digest(io::to_json(back)) == io::digest(pj));
  CHECK(back.diagnostics.w2_nu == 2e-9);
}

TEST_CASE("instance validation") {
  const std::string m1 = R"({"d": 1, "atoms": [[0]], "weights": [1]})";
  const std::string m2 = R"({"d": 2, "atoms": [[0, 0]], "weights": [1]})";
  CHECK_NOTHROW(io::instance_from_json(Json::parse(R"({"mu": )" + m1 + R"(, "q": )" + m1 + "}")));
  CHECK_THROWS_AS(io::instance_from_json(Json::parse(R"({"mu": )" + m1 + R"(, "q": )" + m2 + "}")), SchemaError);
  CHECK_THROWS_AS(io::instance_from_json(Json::parse(R"({"mu": )" + m1 + R"(, "nu": )" + m2 + R"(, "q": )" + m1 + "}")),
                  SchemaError);
  CHECK_THROWS_AS(io::instance_from_json(Json::parse(R"({"q": )" + m1 + "}")), SchemaError);
  auto with_config = [&](const std::string& c) {
    return io::instance_from_json(Json::parse(R"({"mu": )" + m1 + R"(, "q": )" + m1 + R"(, "config": )" + c + "}"));
  };
  CHECK(*with_config(R"({"tol": 0.01, "max_iter": 5, "seed": 3})").config.max_iter == 5);
  CHECK_THROWS_AS(with_config(R"({"tol": 0})"), SchemaError);
  CHECK_THROWS_AS(with_config(R"({"max_iter": 0})"), SchemaError);
  CHECK_THROWS_AS(with_config(R"({"pieces": 1.5})"), SchemaError);
  CHECK_THROWS_AS(with_config(R"({"speed": 1})"), SchemaError);
}

TEST_CASE("CSV exports") {
  Eigen::MatrixXd mass(2, 2);
  mass << 0.5, 0, 0.125, 0.375;
  CHECK(io::coupling_csv(mass) == "i,j,mass\n0,0,0.5\n1,0,0.125\n1,1,0.375\n");
}

TEST_CASE("cli mcov and check-order examples") {
  const auto a = put("a.json", R"({"d": 1, "atoms": [[0], [2]], "weights": [0.5, 0.5]})");
  const auto b = put("b.json", R"({"d": 1, "atoms": [[-1], [1]], "weights": [0.5, 0.5]})");
  const auto r = qbass_run({"mcov", a, b});
  CHECK(r.code == 0);
  CHECK(r.out.find("\"value\": 1.0") != std::string::npos);
  const Json j = Json::parse(r.out);
  CHECK(j["command"] == "mcov");
  CHECK(j["schema"] == 1);
  CHECK(j["version"] == cli::kVersion);
  CHECK(j["input_digest"].get<std::string>().size() == 16);
  CHECK(j.find("wall_time_s") == j.end());

  const auto csv = qbass_run({"mcov", a, b, "--format", "csv"});
  CHECK(csv.out == "i,j,mass\n0,0,0.5\n1,1,0.5\n");

  const auto d0 = put("d0.json", R"({"d": 1, "atoms": [[0]], "weights": [1]})");
  const auto order = qbass_run({"check-order", b, d0});
  CHECK(order.code == 1);
  CHECK(order.err.find("not in convex order") != std::string::npos);
  CHECK(Json::parse(order.out)["ordered"] == false);
  const auto ok = qbass_run({"check-order", d0, b});
  CHECK(ok.code == 0);
  CHECK(Json::parse(ok.out)["ordered"] == true);

  const auto irr = qbass_run({"irreducible", d0, b});
  CHECK(irr.code == 0);
  CHECK(Json::parse(irr.out)["irreducible"] == true);
  CHECK(qbass_run({"irreducible", b, d0}).code == 1);
}

TEST_CASE("cli error exit codes") {
  const auto a = put("a.json", R"({"d": 1, "atoms": [[0], [2]], "weights": [0.5, 0.5]})");
  const auto junk = put("junk.json", "{not json");
  const auto extra = put("extra.json", R"({"d": 1, "atoms": [[0]], "weights": [1], "colour": "red"})");
  const auto two = put("two.json", R"({"d": 2, "atoms": [[0, 0]], "weights": [1]})");
  CHECK(qbass_run({"mcov", a, (scratch() / "missing.json").string()}).code == 2);
  const auto j = qbass_run({"mcov", a, junk});
  CHECK(j.code == 2);
  CHECK(j.err.find("invalid JSON") != std::string::npos);
  const auto e = qbass_run({"mcov", a, extra});
  CHECK(e.code == 2);
  CHECK(e.err.find("unknown field \"colour\"") != std::string::npos);
  CHECK(qbass_run({"mcov", a, two}).code == 2);
  CHECK(qbass_run({"frobnicate"}).code == 2);
  CHECK(qbass_run({}).code == 2);
  CHECK(qbass_run({"quantize-gaussian", "--m", "1"}).code == 2);
  CHECK(qbass_run({"quantize-gaussian", "--format", "xml"}).code == 2);
  CHECK(qbass_run({"check-order", a, a, "--format", "csv"}).code == 0);
  CHECK(qbass_run({"verify-bass", a, a}).code == 2);
  CHECK(qbass_run({"--help"}).code == 0);
}

TEST_CASE("cli quantize-gaussian") {
  const auto r = qbass_run({"quantize-gaussian", "--m", "100", "--sigma", "1"});
  REQUIRE(r.code == 0);
  const Json j = Json::parse(r.out);
  const auto g = io::measure_from_json(j);  // envelope is unwrapped
  CHECK(g.size() == 100);
  CHECK(approx_equal(g, quantize_gaussian(100, 1.0), 0.0));
  CHECK(j["second_moment"].get<double>() == second_moment(g));
  // Midpoint quantiles lose about 1.27e-2 of the variance at m = 100.
  CHECK(std::abs(j["second_moment"].get<double>() - 1.0) <= 1.3e-2);
  CHECK(io::digest(io::to_json(g)) == io::digest(j["measure"]));
}

TEST_CASE("cli Bass pipeline") {
  const std::string q = (scratch() / "q.json").string();
  REQUIRE(qbass_run({"quantize-gaussian", "--m", "16", "--out", q}).code == 0);
  Json inst = {{"mu", io::to_json(DiscreteMeasure::from_1d({-0.5, 0.3, 1.0}, {0.3, 0.4, 0.3}))},
               {"q", io::read_file(q)["measure"]},
               {"potential", Json::parse(R"({"type": "smooth_quad_lse", "d": 1, "epsilon": 0.1, "beta": 0.2,
                                             "slopes": [[-1], [0], [1.5]], "intercepts": [0, 0.1, -0.2]})")}};
  const auto inst_path = put("inst.json", inst.dump());
  const auto svg = (scratch() / "bass.svg").string();
  const auto build = qbass_run({"build-bass", inst_path, "--plot", svg});
  REQUIRE(build.code == 0);
  const Json bj = Json::parse(build.out);
  CHECK(bj["generating"]["strictly_convex"] == true);
  CHECK(slurp(svg).find("<svg") == 0);
  CHECK(slurp(svg).find("<polyline") != std::string::npos);
  const auto kernel_csv = qbass_run({"build-bass", inst_path, "--format", "csv"});
  CHECK(kernel_csv.out.rfind("i,j,mass\n", 0) == 0);

  const auto pair_path = put("build.json", build.out);
  inst["nu"] = bj["nu"];
  inst.erase("potential");
  const auto inst2 = put("inst2.json", inst.dump());
  const auto verify = qbass_run({"verify-bass", pair_path, inst2});
  CHECK(verify.code == 0);
  CHECK(Json::parse(verify.out)["passed"] == true);

  Json moved = bj["pair"];
  moved["alpha_hat"] = io::to_json(io::measure_from_json(moved["alpha_hat"]).shifted(Point::Constant(1, 0.3)));
  const auto fail = qbass_run({"verify-bass", put("moved.json", moved.dump()), inst2});
  CHECK(fail.code == 1);
  CHECK(fail.err.find("does not generate") != std::string::npos);

  const auto primal = qbass_run({"solve-primal", inst2});
  REQUIRE(primal.code == 0);
  const auto dual = qbass_run({"solve-dual", inst2, "--tol", "1e-5"});
  REQUIRE(dual.code == 0);
  CHECK(std::abs(Json::parse(dual.out)["value"].get<double>() - Json::parse(primal.out)["value"].get<double>()) <= 1e-5);

  const auto sim = qbass_run({"simulate", pair_path, q, "--paths", "50", "--seed", "7"});
  REQUIRE(sim.code == 0);
  CHECK(sim.out.rfind("path,alpha_index,a_0,z_0,x0_0,x1_0\n", 0) == 0);
  CHECK(std::count(sim.out.begin(), sim.out.end(), '\n') == 51);
  CHECK(qbass_run({"simulate", pair_path, q, "--paths", "50", "--seed", "7"}).out == sim.out);
  CHECK(qbass_run({"simulate", pair_path, q, "--paths", "50", "--seed", "8"}).out != sim.out);
  const auto sim_json = qbass_run({"simulate", pair_path, q, "--paths", "50", "--seed", "7", "--format", "json"});
  CHECK(Json::parse(sim_json.out)["x1"].size() == 50);

  Json no_potential = inst;
  no_potential.erase("nu");
  CHECK(qbass_run({"build-bass", put("np.json", no_potential.dump())}).code == 2);
  Json kinked = inst;
  kinked.erase("nu");
  kinked["potential"] = Json::parse(R"({"type": "max_affine", "d": 1, "slopes": [[-1], [1]], "intercepts": [0, 0]})");
  const auto nk = qbass_run({"build-bass", put("kink.json", kinked.dump())});
  CHECK(nk.code == 1);
  CHECK(nk.err.find("not generating") != std::string::npos);
}

TEST_CASE("cli fixpoint determinism and outputs") {
  Json inst = {{"mu", io::to_json(DiscreteMeasure::dirac(Point::Zero(1)))},
               {"nu", io::to_json(DiscreteMeasure::from_1d({-1, 1}, {0.5, 0.5}))},
               {"q", io::to_json(quantize_gaussian(40, 1.0))},
               {"config", {{"seed", 3}}}};
  const auto path = put("fp.json", inst.dump());
  const auto a = qbass_run({"fixpoint", path});
  REQUIRE(a.code == 0);
  CHECK(a.out == qbass_run({"fixpoint", path}).out);
  const Json j = Json::parse(a.out);
  CHECK(j["converged"] == true);
  CHECK(j["residuals"].size() == j["iterations"].get<size_t>());
  const auto csv = qbass_run({"fixpoint", path, "--format", "csv"});
  CHECK(csv.out.rfind("iteration,residual\n0,", 0) == 0);

  const auto capped = qbass_run({"fixpoint", path, "--tol", "1e-14", "--max-iter", "3"});
  CHECK(capped.code == 0);
  CHECK(Json::parse(capped.out)["converged"] == false);
  CHECK(capped.err.find("no convergence") != std::string::npos);

  const auto out = (scratch() / "fp_out.json").string();
  const auto timed = qbass_run({"fixpoint", path, "--out", out, "--timing"});
  CHECK(timed.out.empty());
  CHECK(io::read_file(out).contains("wall_time_s"));
  CHECK(qbass_run({"fixpoint", path, "--pieces", "0"}).code == 2);
}
