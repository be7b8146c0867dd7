#include "qbass/cli.hpp"

#include "qbass/bass.hpp"
#include "qbass/gaussian.hpp"
#include "qbass/io.hpp"
#include "qbass/ot.hpp"
#include "qbass/solver.hpp"
#include "qbass/svg.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

namespace qbass::cli {

namespace {

using io::Json;

struct Options {
  std::string out, format, plot;
  std::uint64_t seed = 0;
  double tol = 0, epsilon = 0, beta = 0, sigma = 1.0;
  long max_iter = 0, paths = 10000;
  int pieces = 0, m = 100;
  bool timing = false;
  std::vector<std::string> files;
  // set by the option parser
  bool has_seed = false, has_tol = false, has_epsilon = false, has_beta = false, has_max_iter = false,
       has_pieces = false, has_paths = false;
};

struct Output {
  Json body = Json::object();
  std::string csv;
  std::string svg;
  int code = 0;
  std::string message;
};

struct Context {
  const Options& opt;
  Json inputs = Json::array();

  Json load(size_t k) {
    if (k >= opt.files.size()) throw SchemaError("missing input file argument " + std::to_string(k + 1));
    Json j = io::read_file(opt.files[k]);
    inputs.push_back(j);
    return j;
  }
  DiscreteMeasure measure(size_t k) { return io::measure_from_json(load(k)); }
  io::Instance instance(size_t k) { return io::instance_from_json(load(k)); }
};

void same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b, const char* what) {
  if (a.dim() != b.dim()) {
    throw SchemaError(std::string(what) + ": inputs differ in dimension (" + std::to_string(a.dim()) + " vs " +
                      std::to_string(b.dim()) + ")");
  }
}

const DiscreteMeasure& need_nu(const io::Instance& inst, const char* cmd) {
  if (!inst.nu) throw SchemaError(std::string(cmd) + ": instance needs \"nu\"");
  return *inst.nu;
}

void require_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (!check_convex_order(mu, nu).ordered) throw DomainError("not in convex order: no martingale coupling of mu and nu");
}

std::pair<double, double> span(std::initializer_list<const DiscreteMeasure*> ms) {
  double lo = kInf, hi = -kInf;
  for (const auto* m : ms) {
    lo = std::min(lo, m->atoms().minCoeff());
    hi = std::max(hi, m->atoms().maxCoeff());
  }
  const double pad = 0.25 * std::max(1.0, hi - lo);
  return {lo - pad, hi + pad};
}

Output check_order(Context& ctx) {
  const auto mu = ctx.measure(0), nu = ctx.measure(1);
  same_dim(mu, nu, "check-order");
  const auto r = check_convex_order(mu, nu);
  Output o;
  o.body["ordered"] = r.ordered;
  if (r.witness) {
    o.body["witness"] = io::to_json(*r.witness);
    o.csv = io::kernel_csv(*r.witness);
  } else {
    o.code = 1;
    o.message = "not in convex order: no martingale coupling of mu and nu exists";
  }
  if (!ctx.opt.plot.empty()) o.svg = svg::chart("convex order", {svg::bars("mu", mu), svg::bars("nu", nu)}, {});
  return o;
}

Output irreducible(Context& ctx) {
  const auto mu = ctx.measure(0), nu = ctx.measure(1);
  same_dim(mu, nu, "irreducible");
  require_order(mu, nu);
  const auto r = check_irreducible(mu, nu);
  Output o;
  o.body["irreducible"] = r.irreducible;
  if (r.blocking_pair) {
    o.body["blocking_pair"] = {{"x", io::points_json(r.blocking_pair->first)[0]},
                               {"y", io::points_json(r.blocking_pair->second)[0]}};
  } else {
    o.body["blocking_pair"] = nullptr;
  }
  if (!ctx.opt.plot.empty()) o.svg = svg::chart("irreducibility", {svg::bars("mu", mu), svg::bars("nu", nu)}, {});
  return o;
}

Output mcov_cmd(Context& ctx) {
  const auto p = ctx.measure(0), q = ctx.measure(1);
  same_dim(p, q, "mcov");
  const auto r = mcov(p, q);
  Output o;
  o.body["value"] = io::number(r.value);
  o.body["coupling"] = io::to_json(r.coupling);
  o.csv = io::coupling_csv(r.coupling.mass);
  if (!ctx.opt.plot.empty()) o.svg = svg::chart("maximal covariance", {svg::bars("p", p), svg::bars("q", q)}, {});
  return o;
}

Output solve_primal(Context& ctx) {
  const auto inst = ctx.instance(0);
  const auto& nu = need_nu(inst, "solve-primal");
  require_order(inst.mu, nu);
  const auto r = solve_primal_lp(inst.mu, nu, inst.q);
  Output o;
  o.body["value"] = io::number(r.value);
  o.body["iterations"] = r.iterations;
  o.body["kernel"] = io::to_json(r.kernel);
  o.csv = io::kernel_csv(r.kernel);
  if (!ctx.opt.plot.empty()) {
    o.svg = svg::chart("primal", {svg::bars("mu", inst.mu), svg::bars("nu", nu), svg::bars("q", inst.q)}, {});
  }
  return o;
}

Output solve_dual_cmd(Context& ctx) {
  const auto inst = ctx.instance(0);
  const auto& nu = need_nu(inst, "solve-dual");
  require_order(inst.mu, nu);
  DualConfig config;
  if (inst.config.tol) config.gap_tol = *inst.config.tol;
  if (inst.config.max_iter) config.max_iter = *inst.config.max_iter;
  if (ctx.opt.has_tol) config.gap_tol = ctx.opt.tol;
  if (ctx.opt.has_max_iter) config.max_iter = ctx.opt.max_iter;
  const auto r = solve_dual(inst.mu, nu, inst.q, config);
  Output o;
  o.body["value"] = io::number(r.value);
  o.body["primal_value"] = io::number(r.primal_value);
  o.body["gap"] = io::number(r.gap);
  o.body["iterations"] = r.iterations;
  o.body["psi"] = io::to_json(r.psi.function());
  std::ostringstream csv;
  csv << "j,psi\n";
  for (Eigen::Index j = 0; j < r.psi.size(); ++j) csv << j << ',' << io::format_double(r.psi.values()(j)) << '\n';
  o.csv = csv.str();
  if (!ctx.opt.plot.empty()) {
    if (nu.dim() != 1) throw DomainError("plot: instance must be one-dimensional");
    svg::Line psi{"psi", {}, {}};
    for (Eigen::Index j = 0; j < r.psi.size(); ++j) {
      psi.x.push_back(r.psi.support()(0, j));
      psi.y.push_back(r.psi.values()(j));
    }
    o.svg = svg::chart("dual potential", {svg::bars("mu", inst.mu), svg::bars("nu", nu)}, {psi});
  }
  return o;
}

Json generating_json(const GeneratingReport& r) {
  return {{"interior_domain", r.interior_domain},
          {"strictly_convex", r.strictly_convex},
          {"finite_second_moment", r.finite_second_moment},
          {"strict_convexity_margin", io::number(r.strict_convexity_margin)},
          {"exchange_residual", io::number(r.exchange_residual)}};
}

Output build_bass(Context& ctx) {
  const auto inst = ctx.instance(0);
  if (!inst.potential) throw SchemaError("build-bass: instance needs \"potential\"");
  const auto& v = *inst.potential;
  const std::uint64_t seed = ctx.opt.has_seed ? ctx.opt.seed : inst.config.seed.value_or(0);
  const auto report = check_generating(v, inst.mu, inst.q, seed);
  Output o;
  o.body["generating"] = generating_json(report);
  if (!report.ok()) {
    o.code = 1;
    o.message = "potential is not generating: " + report.message;
    return o;
  }
  const auto g = generate_from_v(v, inst.mu, inst.q);
  o.body["pair"] = io::to_json(g.pair);
  o.body["nu"] = io::to_json(g.nu);
  o.body["kernel"] = io::to_json(g.kernel);
  o.csv = io::kernel_csv(g.kernel);
  if (!ctx.opt.plot.empty()) {
    const auto [lo, hi] = span({&inst.mu, &g.nu, &g.pair.alpha_hat});
    o.svg = svg::chart("Bass martingale",
                       {svg::bars("mu", inst.mu), svg::bars("alpha", g.pair.alpha_hat), svg::bars("nu", g.nu)},
                       {svg::line("v", v, lo, hi)});
  }
  return o;
}

Output verify_bass_cmd(Context& ctx) {
  const auto pair = io::pair_from_json(ctx.load(0));
  const auto inst = ctx.instance(1);
  const auto& nu = need_nu(inst, "verify-bass");
  if (pair.v_hat.dim() != inst.mu.dim()) throw SchemaError("verify-bass: pair and instance differ in dimension");
  double tol = inst.config.tol.value_or(1e-7);
  if (ctx.opt.has_tol) tol = ctx.opt.tol;
  const auto r = verify_bass(pair, inst.mu, nu, inst.q, tol);
  Output o;
  o.body["passed"] = r.passed;
  o.body["tol"] = io::number(tol);
  o.body["w2_mu"] = io::number(r.w2_mu);
  o.body["w2_nu"] = io::number(r.w2_nu);
  o.body["barycenter_residual"] = io::number(r.barycenter_residual);
  if (!r.passed) {
    o.code = 1;
    o.message = "pair does not generate (mu, nu) within tol " + io::format_double(tol);
  }
  return o;
}

Output fixpoint(Context& ctx) {
  const auto inst = ctx.instance(0);
  const auto& nu = need_nu(inst, "fixpoint");
  FixedPointConfig config;
  const auto& c = inst.config;
  if (c.tol) config.tol = *c.tol;
  if (c.max_iter) config.max_iter = *c.max_iter;
  if (c.pieces) config.pieces = *c.pieces;
  if (c.epsilon) config.epsilon = *c.epsilon;
  if (c.beta) config.beta = *c.beta;
  if (c.seed) config.seed = *c.seed;
  if (c.init_jitter) config.init_jitter = *c.init_jitter;
  const auto& opt = ctx.opt;
  if (opt.has_tol) config.tol = opt.tol;
  if (opt.has_max_iter) config.max_iter = opt.max_iter;
  if (opt.has_pieces) config.pieces = opt.pieces;
  if (opt.has_epsilon) config.epsilon = opt.epsilon;
  if (opt.has_beta) config.beta = opt.beta;
  if (opt.has_seed) config.seed = opt.seed;
  const auto r = fixed_point_solve(inst.mu, nu, inst.q, config);
  if (!r.converged) {
    spdlog::warn("fixpoint: no convergence after {} iterations, last residual {}", r.iterations,
                 r.residuals.empty() ? kInf : r.residuals.back());
  }
  Output o;
  o.body["converged"] = r.converged;
  o.body["iterations"] = r.iterations;
  Json res = Json::array();
  std::ostringstream csv;
  csv << "iteration,residual\n";
  for (size_t i = 0; i < r.residuals.size(); ++i) {
    res.push_back(io::number(r.residuals[i]));
    csv << i << ',' << io::format_double(r.residuals[i]) << '\n';
  }
  o.body["residuals"] = res;
  o.body["pair"] = io::to_json(r.pair);
  o.csv = csv.str();
  if (!opt.plot.empty()) {
    const auto [lo, hi] = span({&inst.mu, &nu, &r.pair.alpha_hat});
    o.svg = svg::chart("fixed point",
                       {svg::bars("mu", inst.mu), svg::bars("alpha", r.pair.alpha_hat), svg::bars("nu", nu)},
                       {svg::line("v", r.pair.v_hat, lo, hi)});
  }
  return o;
}

Output simulate_cmd(Context& ctx) {
  const auto pair = io::pair_from_json(ctx.load(0));
  const auto q = ctx.measure(1);
  same_dim(pair.alpha_hat, q, "simulate");
  const long n = ctx.opt.has_paths ? ctx.opt.paths : 10000;
  if (n < 1) throw SchemaError("simulate: --paths must be >= 1");
  const auto t = simulate(pair, q, n, ctx.opt.seed);
  const Eigen::Index d = q.dim();
  Output o;
  o.body["paths"] = n;
  o.body["seed"] = ctx.opt.seed;
  o.body["a"] = io::points_json(t.a);
  o.body["z"] = io::points_json(t.z);
  o.body["x0"] = io::points_json(t.x0);
  o.body["x1"] = io::points_json(t.x1);
  std::ostringstream csv;
  csv << "path,alpha_index";
  for (const char* name : {"a", "z", "x0", "x1"}) {
    for (Eigen::Index r = 0; r < d; ++r) csv << ',' << name << '_' << r;
  }
  csv << '\n';
  for (Eigen::Index p = 0; p < t.size(); ++p) {
    csv << p << ',' << t.alpha_index[static_cast<size_t>(p)];
    for (const PointSet* m : {&t.a, &t.z, &t.x0, &t.x1}) {
      for (Eigen::Index r = 0; r < d; ++r) csv << ',' << io::format_double((*m)(r, p));
    }
    csv << '\n';
  }
  o.csv = csv.str();
  if (!ctx.opt.plot.empty()) {
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    o.svg = svg::chart("simulated paths",
                       {svg::bars("X0", DiscreteMeasure::normalized(t.x0, w)),
                        svg::bars("X1", DiscreteMeasure::normalized(t.x1, w))},
                       {});
  }
  return o;
}

Output quantize(Context& ctx) {
  const auto g = quantize_gaussian(ctx.opt.m, ctx.opt.sigma);
  Output o;
  o.body["measure"] = io::to_json(g);
  o.body["second_moment"] = io::number(second_moment(g));
  std::ostringstream csv;
  csv << "atom,weight\n";
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    csv << io::format_double(g.atoms()(0, k)) << ',' << io::format_double(g.weight(k)) << '\n';
  }
  o.csv = csv.str();
  if (!ctx.opt.plot.empty()) o.svg = svg::chart("Gaussian quantization", {svg::bars("q", g)}, {});
  return o;
}

class LoggerScope {
 public:
  explicit LoggerScope(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("qbass", sink);
    logger->set_pattern("qbass: %l: %v");
    logger->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("QBASS_LOG")) logger->set_level(spdlog::level::from_str(env));
    spdlog::set_default_logger(logger);
  }
  ~LoggerScope() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  LoggerScope logging(err);
  Options opt;
  CLI::App app{"Martingale optimal transport with a reference measure q, and q-Bass martingales.", "qbass"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.add_option("--out", opt.out, "Write the result to PATH instead of stdout");
  app.add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--plot", opt.plot, "Write an SVG chart of the 1D measures and potentials");
  auto* seed = app.add_option("--seed", opt.seed, "Random seed");
  auto* tol = app.add_option("--tol", opt.tol, "Tolerance")->check(CLI::PositiveNumber);
  auto* max_iter = app.add_option("--max-iter", opt.max_iter, "Iteration cap")->check(CLI::Range(1L, 1L << 40));
  auto* pieces = app.add_option("--pieces", opt.pieces, "Affine pieces of the fitted potential")->check(CLI::Range(1, 1 << 20));
  auto* epsilon = app.add_option("--epsilon", opt.epsilon, "Quadratic coefficient of the fitted potential")
                      ->check(CLI::PositiveNumber);
  auto* beta = app.add_option("--beta", opt.beta, "Upper bound on the smoothing temperature")->check(CLI::PositiveNumber);
  app.add_option("--m", opt.m, "Number of quantization atoms")->check(CLI::Range(2, 1 << 24));
  app.add_option("--sigma", opt.sigma, "Standard deviation")->check(CLI::PositiveNumber);
  auto* paths = app.add_option("--paths", opt.paths, "Number of simulated paths")->check(CLI::Range(1L, 1L << 40));
  app.add_flag("--timing", opt.timing, "Add wall_time_s to the JSON output");

  using Handler = std::function<Output(Context&)>;
  struct Command {
    const char* name;
    const char* help;
    std::vector<const char*> args;
    Handler handler;
  };
  const std::vector<Command> commands = {
      {"check-order", "Decide mu <=_c nu by LP feasibility", {"mu", "nu"}, check_order},
      {"irreducible", "Check irreducibility of (mu, nu)", {"mu", "nu"}, irreducible},
      {"mcov", "Maximal covariance of two measures", {"p", "q"}, mcov_cmd},
      {"solve-primal", "Primal value by the joint LP", {"instance"}, solve_primal},
      {"solve-dual", "Dual value by subgradient descent", {"instance"}, solve_dual_cmd},
      {"build-bass", "Generate (nu, kernel) from a potential, mu and q", {"instance"}, build_bass},
      {"verify-bass", "Verify a Bass pair against (mu, nu, q)", {"pair", "instance"}, verify_bass_cmd},
      {"fixpoint", "Fixed-point search for a Bass pair in d = 1", {"instance"}, fixpoint},
      {"simulate", "Simulate (A, Z, X0, X1) paths", {"pair", "q"}, simulate_cmd},
      {"quantize-gaussian", "Equal-weight quantile quantization of N(0, sigma^2)", {}, quantize},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->fallthrough();
    if (!c.args.empty()) {
      sub->add_option("files", opt.files, "Input JSON files")->required()->expected(static_cast<int>(c.args.size()));
    }
    subs[c.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  opt.has_seed = seed->count() > 0;
  opt.has_tol = tol->count() > 0;
  opt.has_max_iter = max_iter->count() > 0;
  opt.has_pieces = pieces->count() > 0;
  opt.has_epsilon = epsilon->count() > 0;
  opt.has_beta = beta->count() > 0;
  opt.has_paths = paths->count() > 0;

  const Command* chosen = nullptr;
  for (const auto& c : commands) {
    if (subs[c.name]->parsed()) chosen = &c;
  }
  if (opt.format.empty()) opt.format = std::string(chosen->name) == "simulate" ? "csv" : "json";

  try {
    const auto start = std::chrono::steady_clock::now();
    Context ctx{opt};
    Output o = chosen->handler(ctx);
    std::string text;
    if (opt.format == "csv") {
      if (o.csv.empty() && o.code == 0) throw SchemaError(std::string(chosen->name) + ": no CSV output form");
      text = o.csv;
    } else {
      Json& b = o.body;
      b["schema"] = io::kSchemaVersion;
      b["command"] = chosen->name;
      b["input_digest"] = io::digest(ctx.inputs);
      b["version"] = kVersion;
      if (opt.timing) {
        b["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      text = b.dump(2) + "\n";
    }
    if (opt.out.empty()) {
      out << text;
    } else {
      io::write_file(opt.out, text);
    }
    if (!opt.plot.empty() && !o.svg.empty()) io::write_file(opt.plot, o.svg);
    if (o.code != 0) err << "qbass " << chosen->name << ": " << o.message << '\n';
    return o.code;
  } catch (const SchemaError& e) {
    err << "qbass " << chosen->name << ": " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    err << "qbass " << chosen->name << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "qbass " << chosen->name << ": internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace qbass::cli
