#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "io.hpp"
#include "riskshare/convex_order.hpp"
#include "riskshare/error.hpp"
#include "riskshare/improve.hpp"
#include "riskshare/infconv.hpp"
#include "riskshare/maxcorr.hpp"
#include "riskshare/measures.hpp"
#include "riskshare/qdescent.hpp"

namespace riskshare::cli {
namespace {

namespace fs = std::filesystem;
using io::Json;

struct Report {
  Json body;
  int code = kAffirmative;
  std::string summary;
};

// Options shared by the allocation commands (improve, stat, qdescent).
struct GridOptions {
  std::vector<double> eps;
  std::optional<double> grid_step;
  std::optional<double> radius;
  std::vector<double> center;
};

struct Options {
  double tol = kDefaultTol;
  std::optional<std::uint64_t> seed;

  std::string first;
  std::string second;
  std::string mu_path;
  std::string psi_path;
  std::string m0_path;
  std::string batch_dir;
  std::string emit_csv;
  GridOptions grid;
  std::size_t max_iters = 500;
  std::size_t sweep = 0;
  int n = 1;
  double family_eps = 0.5;
};

void add_tol(CLI::App* cmd, Options& o) {
  cmd->add_option("--tol", o.tol, "Comparison tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Seed for randomized modes (echoed in the report)");
}

void add_ball(CLI::App* cmd, GridOptions& g, bool required) {
  auto* r = cmd->add_option("--radius", g.radius,
                            required ? "Ball radius R" : "Ball radius R (default 1.25 x largest component norm)");
  if (required) r->required();
  cmd->add_option("--center", g.center, "Ball center, comma separated (default origin)")->delimiter(',');
}

void add_grid(CLI::App* cmd, GridOptions& g) {
  cmd->add_option("--eps", g.eps, "Floor strengths eps_i, comma separated (default 1; one value is broadcast)")
      ->delimiter(',');
  cmd->add_option("--grid-step", g.grid_step, "Lattice step h (default: aggregate spread / 8)");
  add_ball(cmd, g, false);
}

JointLaw load_joint_law(const std::string& path) { return io::joint_law_from_json(io::read_file(path), path); }
DiscreteMeasure load_measure(const std::string& path) { return io::measure_from_json(io::read_file(path), path); }

std::vector<double> resolve_eps(const GridOptions& g, std::size_t agents) {
  if (g.eps.empty()) return std::vector<double>(agents, 1.0);
  if (g.eps.size() == 1) return std::vector<double>(agents, g.eps[0]);
  if (g.eps.size() != agents) {
    throw Error(Errc::DimensionMismatch, "--eps has " + std::to_string(g.eps.size()) + " values for " +
                                             std::to_string(agents) + " agents");
  }
  return g.eps;
}

BallConfig resolve_ball(const GridOptions& g, std::size_t dim, double fallback_radius) {
  BallConfig b;
  b.radius = g.radius.value_or(fallback_radius);
  b.center = g.center;
  b.validate(dim);
  return b;
}

void check_grid_step(const GridOptions& g) {
  if (g.grid_step && !(*g.grid_step > 0.0 && std::isfinite(*g.grid_step))) {
    throw Error(Errc::ParameterOutOfRange, "grid-step must be positive");
  }
}

Json verdict_json(const DominanceVerdict& v) {
  return {{"dominates", v.dominates}, {"strict", v.strict}, {"worst_violation", v.worst_violation}};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io::InputError(path + ": cannot open for writing");
  f << text;
}

// Quantile function of one coordinate of a measure, as sorted (value, cdf).
std::vector<std::pair<double, double>> coordinate_cdf(const DiscreteMeasure& m, std::size_t j) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& a : m.atoms()) pts.emplace_back(a.x[j], a.w);
  std::sort(pts.begin(), pts.end());
  double c = 0.0;
  for (auto& p : pts) {
    c += p.second;
    p.second = c;
  }
  pts.back().second = 1.0;
  return pts;
}

double quantile(const std::vector<std::pair<double, double>>& cdf, double level) {
  for (const auto& [x, c] : cdf) {
    if (c >= level - 1e-12) return x;
  }
  return cdf.back().first;
}

std::string quantile_csv(const JointLaw& input, const JointLaw& improved) {
  std::ostringstream os;
  os.precision(17);
  os << "agent,coordinate,level,input_quantile,improved_quantile\n";
  for (std::size_t i = 0; i < input.agents(); ++i) {
    const DiscreteMeasure a = marginal(input, i);
    const DiscreteMeasure b = marginal(improved, i);
    for (std::size_t j = 0; j < input.dim(); ++j) {
      const auto ca = coordinate_cdf(a, j);
      const auto cb = coordinate_cdf(b, j);
      std::vector<double> levels;
      for (const auto& p : ca) levels.push_back(p.second);
      for (const auto& p : cb) levels.push_back(p.second);
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end(),
                               [](double l, double r) { return std::abs(l - r) <= 1e-12; }),
                   levels.end());
      for (double u : levels) {
        os << i + 1 << ',' << j + 1 << ',' << u << ',' << quantile(ca, u) << ',' << quantile(cb, u) << '\n';
      }
    }
  }
  return os.str();
}

struct Setup {
  JointLaw gamma0;
  std::vector<double> eps;
  BallConfig ball;
  double step = 1.0;
};

Setup prepare(const std::string& path, const GridOptions& g) {
  check_grid_step(g);
  Setup s{load_joint_law(path), {}, {}, 1.0};
  const GridParameters d = default_grid_parameters(s.gamma0);
  s.eps = resolve_eps(g, s.gamma0.agents());
  s.ball = resolve_ball(g, s.gamma0.dim(), d.radius);
  s.step = g.grid_step.value_or(d.step);
  return s;
}

Json grid_json(const Setup& s, const EfficiencyReport& r) {
  return {{"grid_step", s.step},
          {"radius", s.ball.radius},
          {"eps", s.eps},
          {"lp_variables", r.lp_variables},
          {"lp_rows", r.lp_rows},
          {"lp_iterations", r.lp_iterations}};
}

Report cmd_improve(const std::string& path, const Options& o) {
  const Setup s = prepare(path, o.grid);
  const EfficiencyReport r = solve_improvement_lp(s.gamma0, build_split_grid(s.gamma0, s.step, s.ball), s.eps, o.tol);
  Json agents = Json::array();
  for (const auto& v : r.verdict.agents) agents.push_back(verdict_json(v));
  Json body{{"statistic", r.statistic},
            {"comonotone_at_tol", r.comonotone_at_tol},
            {"objective_at_input", r.objective_at_input},
            {"objective_at_optimum", r.objective_at_optimum},
            {"dominates", r.verdict.dominates},
            {"strict", r.verdict.strict},
            {"agents", std::move(agents)},
            {"improved", io::to_json(r.improved)},
            {"grid", grid_json(s, r)}};
  if (!o.emit_csv.empty()) write_file(o.emit_csv, quantile_csv(s.gamma0, r.improved));
  std::ostringstream sum;
  sum << "improve: statistic " << r.statistic << (r.verdict.strict ? ", strict improvement found" : ", no strict improvement");
  return {std::move(body), kAffirmative, sum.str()};
}

Report cmd_stat(const std::string& path, const Options& o) {
  const Setup s = prepare(path, o.grid);
  const EfficiencyReport r = solve_improvement_lp(s.gamma0, build_split_grid(s.gamma0, s.step, s.ball), s.eps, o.tol);
  Json body{{"statistic", r.statistic}, {"comonotone_at_tol", r.comonotone_at_tol}, {"grid", grid_json(s, r)}};
  if (o.sweep > 0) {
    Json rows = Json::array();
    std::ostringstream csv;
    csv.precision(17);
    csv << "grid_step,statistic\n";
    double h = s.step;
    for (std::size_t k = 0; k < o.sweep; ++k, h /= 2.0) {
      const double v = k == 0 ? r.statistic : efficiency_statistic(s.gamma0, s.eps, h, s.ball, o.tol);
      rows.push_back({{"grid_step", h}, {"statistic", v}});
      csv << h << ',' << v << '\n';
    }
    body["sweep"] = std::move(rows);
    if (!o.emit_csv.empty()) write_file(o.emit_csv, csv.str());
  } else if (!o.emit_csv.empty()) {
    write_file(o.emit_csv, "grid_step,statistic\n" + std::to_string(s.step) + "," + std::to_string(r.statistic) + "\n");
  }
  std::ostringstream sum;
  sum << "stat: " << r.statistic << (r.comonotone_at_tol ? " (comonotone at tolerance)" : " (not comonotone at tolerance)");
  return {std::move(body), r.comonotone_at_tol ? kAffirmative : kNegative, sum.str()};
}

Report cmd_qdescent(const std::string& path, const Options& o) {
  const Setup s = prepare(path, o.grid);
  const double statistic = efficiency_statistic(s.gamma0, s.eps, s.step, s.ball, o.tol);
  QDescentConfig cfg;
  cfg.max_iters = o.max_iters;
  cfg.target = statistic;
  const QState q = minimize_q(s.gamma0, s.eps, s.ball, cfg);
  Json pieces = Json::array();
  for (const auto& a : q.profile.all()) pieces.push_back(a.pieces.size());
  Json body{{"j_final", q.j},
            {"j_initial", q.history.front()},
            {"iterations", q.iterations},
            {"iteration_cap_reached", q.iteration_cap_reached},
            {"statistic", statistic},
            {"sandwich_gap", q.j - statistic},
            {"pieces", std::move(pieces)},
            {"profile", io::to_json(q.profile)}};
  std::ostringstream sum;
  sum << "qdescent: J " << q.j << " after " << q.iterations << " iterations, statistic " << statistic;
  return {std::move(body), kAffirmative, sum.str()};
}

Report cmd_check_dominance(const Options& o) {
  const DiscreteMeasure mu = load_measure(o.first);
  const DiscreteMeasure nu = load_measure(o.second);
  const DominanceVerdict v = strictly_dominates(mu, nu, o.tol);
  Json body = verdict_json(v);
  std::string sum = std::string("check-dominance: ") + (v.dominates ? "dominates" : "does not dominate");
  if (v.strict) sum += " (strict)";
  return {std::move(body), v.dominates ? kAffirmative : kNegative, sum};
}

Report cmd_comonotone_check(const Options& o) {
  const JointLaw law = load_joint_law(o.first);
  const bool c = is_comonotone_pairwise(law, o.tol);
  return {{{"comonotone", c}},
          c ? kAffirmative : kNegative,
          std::string("comonotone-check: ") + (c ? "comonotone" : "not comonotone")};
}

Report cmd_maxcorr(const Options& o) {
  const DiscreteMeasure xi = load_measure(o.first);
  const DiscreteMeasure mu = load_measure(o.second);
  const CorrelationResult r = max_correlation(xi, mu, o.tol);
  Json coupling = Json::array();
  for (const auto& c : r.coupling) coupling.push_back({{"x", c.x}, {"y", c.y}, {"w", c.w}});
  std::ostringstream sum;
  sum << "maxcorr: " << r.value;
  return {{{"value", r.value}, {"coupling", std::move(coupling)}}, kAffirmative, sum.str()};
}

Report cmd_comonotone_gap(const Options& o) {
  const JointLaw law = load_joint_law(o.first);
  DiscreteMeasure mu;
  bool default_mu = o.mu_path.empty();
  if (default_mu) {
    const GridParameters d = default_grid_parameters(law);
    mu = default_reference_measure(law.dim(), resolve_ball(o.grid, law.dim(), d.radius));
  } else {
    mu = load_measure(o.mu_path);
  }
  const GapReport g = comonotonicity_gap(law, mu, o.tol);
  Json body{{"rho_agents", g.rho_agents},
            {"rho_sum", g.rho_sum},
            {"rho_total", g.rho_total},
            {"gap", g.gap},
            {"comonotone_at_tol", g.comonotone_at_tol},
            {"default_mu", default_mu}};
  std::ostringstream sum;
  sum << "comonotone-gap: " << g.gap
      << (g.comonotone_at_tol ? " (consistent with mu-comonotonicity)" : " (not mu-comonotone)");
  return {std::move(body), g.comonotone_at_tol ? kAffirmative : kNegative, sum.str()};
}

Report cmd_share(const Options& o) {
  const StrictlyConvexProfile psi = io::profile_from_json(io::read_file(o.psi_path), o.psi_path);
  const DiscreteMeasure m0 = load_measure(o.m0_path);
  if (m0.dim() != psi.dim()) throw Error(Errc::DimensionMismatch, "profile and m0 dimensions differ");
  const BallConfig ball = resolve_ball(o.grid, psi.dim(), 1.0);
  const JointLaw law = sharing_law(psi, m0, ball);
  return {io::to_json(law), kAffirmative, "share: " + std::to_string(law.size()) + " atoms"};
}

void matrix_rows(std::ostream& os, const char* name, const Eigen::Matrix2d& m) {
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) os << name << ',' << r + 1 << ',' << c + 1 << ',' << m(r, c) << '\n';
  }
}

void emit_counterexample(const Options& o, std::ostream& out) {
  const CounterexampleDiagnostics d = counterexample_family(o.n, o.family_eps);
  std::ostringstream os;
  os.precision(17);
  os << "quantity,row,col,value\n";
  os << "n,,," << d.n << '\n' << "eps,,," << d.eps << '\n';
  matrix_rows(os, "S1", d.s1);
  matrix_rows(os, "S2", d.s2);
  matrix_rows(os, "T1", d.t1);
  os << "T1_norm,,," << d.t1_norm << '\n';
  matrix_rows(os, "S1_prime", d.s1_prime);
  matrix_rows(os, "S2_prime", d.s2_prime);
  matrix_rows(os, "S1_eps", d.s1_eps);
  matrix_rows(os, "S2_eps", d.s2_eps);
  matrix_rows(os, "M1", d.m1);
  matrix_rows(os, "M2", d.m2);
  matrix_rows(os, "M1_prime", d.m1_prime);
  matrix_rows(os, "M2_prime", d.m2_prime);
  os << "det_M1_sum,,," << d.det_m1_sum << '\n';
  out << os.str();
}

std::string error_code(const std::exception& e) {
  if (const auto* le = dynamic_cast<const Error*>(&e)) return std::string(to_string(le->code()));
  if (dynamic_cast<const io::InputError*>(&e) != nullptr) return "InvalidInput";
  return "RuntimeError";
}

Json error_json(const std::exception& e) { return {{"code", error_code(e)}, {"message", e.what()}}; }

// Runs `fn`, turning failures into an error report.
Report guarded(const std::function<Report()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {{{"error", error_json(e)}}, kError, std::string("error: ") + e.what()};
  }
}

Report batch(const std::string& command, const std::string& dir,
             const std::function<Report(const std::string&)>& one) {
  if (!fs::is_directory(dir)) throw io::InputError(dir + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Json results = Json::array();
  int code = kAffirmative;
  for (const auto& f : files) {
    Report r = guarded([&] { return one(f.string()); });
    Json entry{{"file", f.filename().string()}, {"exit_code", r.code}};
    for (auto& [k, v] : r.body.items()) entry[k] = v;
    results.push_back(std::move(entry));
    code = std::max(code, r.code);
  }
  return {{{"results", std::move(results)}},
          code,
          command + ": " + std::to_string(files.size()) + " files processed"};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Concave-order dominance, comonotonicity and efficiency of discrete risk allocations.\n"
               "Exit codes: 0 affirmative, 1 negative verdict, 2 error.",
               "riskshare"};
  app.set_version_flag("--version", "riskshare 0.1.0");
  app.require_subcommand(1, 1);
  Options o;

  auto* cd = app.add_subcommand("check-dominance", "Does mu dominate nu in the concave order?");
  cd->add_option("mu", o.first, "Dominating candidate (measure JSON)")->required();
  cd->add_option("nu", o.second, "Dominated candidate (measure JSON)")->required();
  add_tol(cd, o);

  auto* cc = app.add_subcommand("comonotone-check", "Pairwise comonotonicity of a univariate allocation");
  cc->add_option("alloc", o.first, "Joint law JSON")->required();
  add_tol(cc, o);

  auto* mc = app.add_subcommand("maxcorr", "Maximal correlation of x against mu");
  mc->add_option("x", o.first, "Measure JSON")->required();
  mc->add_option("mu", o.second, "Reference measure JSON")->required();
  add_tol(mc, o);

  auto* cg = app.add_subcommand("comonotone-gap", "Subadditivity gap of the maximal correlation functional");
  cg->add_option("alloc", o.first, "Joint law JSON")->required();
  cg->add_option("--mu", o.mu_path, "Reference measure JSON (default: uniform 5^d lattice in the ball)");
  add_ball(cg, o.grid, false);
  add_tol(cg, o);

  auto* sh = app.add_subcommand("share", "Optimal sharing law of m0 under a profile");
  sh->add_option("--psi", o.psi_path, "Profile JSON")->required();
  sh->add_option("--m0", o.m0_path, "Aggregate measure JSON")->required();
  add_ball(sh, o.grid, true);
  add_tol(sh, o);

  auto* im = app.add_subcommand("improve", "Construct a dominating improvement and the efficiency statistic");
  auto* stt = app.add_subcommand("stat", "Efficiency statistic only");
  for (auto* c : {im, stt}) {
    c->add_option("alloc", o.first, "Joint law JSON");
    c->add_option("--batch", o.batch_dir, "Process every *.json file of a directory");
    c->add_option("--emit-csv", o.emit_csv, "Write a CSV table (quantiles for improve, sweep for stat)");
    add_grid(c, o.grid);
    add_tol(c, o);
  }
  stt->add_option("--sweep", o.sweep, "Also evaluate at the step halved k-1 times");

  auto* qd = app.add_subcommand("qdescent", "Descend the dual objective J from the quadratic floors");
  qd->add_option("alloc", o.first, "Joint law JSON")->required();
  qd->add_option("--max-iters", o.max_iters, "Iteration cap")->capture_default_str();
  add_grid(qd, o.grid);
  add_tol(qd, o);

  auto* ce = app.add_subcommand("counterexample", "Unbounded and non-convex sharing-rule families (CSV)");
  ce->add_option("--n", o.n, "Family parameter n >= 1")->capture_default_str();
  ce->add_option("--eps", o.family_eps, "Perturbation in (0, 1)")->capture_default_str();
  ce->add_option("--seed", o.seed, "Accepted for uniformity; unused");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kAffirmative : kError;
  }

  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();

  if (cmd == ce) {
    try {
      emit_counterexample(o, out);
      err << "counterexample: n=" << o.n << " eps=" << o.family_eps << '\n';
      return kAffirmative;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kError;
    }
  }

  Report r = guarded([&]() -> Report {
    if (cmd == cd) return cmd_check_dominance(o);
    if (cmd == cc) return cmd_comonotone_check(o);
    if (cmd == mc) return cmd_maxcorr(o);
    if (cmd == cg) return cmd_comonotone_gap(o);
    if (cmd == sh) return cmd_share(o);
    if (cmd == qd) return cmd_qdescent(o.first, o);
    const bool is_stat = cmd == stt;
    const auto one = [&](const std::string& path) { return is_stat ? cmd_stat(path, o) : cmd_improve(path, o); };
    if (o.batch_dir.empty() == o.first.empty()) {
      throw io::InputError(name + ": give exactly one of an allocation file or --batch");
    }
    if (!o.batch_dir.empty()) {
      if (!o.emit_csv.empty()) throw io::InputError(name + ": --emit-csv cannot be combined with --batch");
      return batch(name, o.batch_dir, one);
    }
    return one(o.first);
  });

  // share emits the joint law itself; everything else is wrapped.
  Json doc;
  if (cmd == sh && r.code != kError) {
    doc = std::move(r.body);
  } else {
    doc = Json{{"version", io::kFormatVersion}, {"command", name}};
    for (auto& [k, v] : r.body.items()) doc[k] = v;
  }
  if (o.seed && cmd != sh) doc["seed"] = *o.seed;
  out << io::dump(doc) << '\n';
  err << r.summary << '\n';
  return r.code;
}

}  // namespace riskshare::cli
