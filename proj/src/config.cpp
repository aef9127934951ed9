#include "pdsa/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <utility>

#include "pdsa/errors.hpp"

namespace pdsa::config {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path, message);
}

std::string item(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

std::string key(const std::string& path, const std::string& k) {
  return path.empty() ? k : path + "." + k;
}

void checkKeys(const json& obj, const std::string& path,
               std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (k == a) {
        ok = true;
        break;
      }
    }
    if (!ok) fail(key(path, k), "unknown field");
  }
}

const json* find(const json& obj, const char* k) {
  auto it = obj.find(k);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

const json& need(const json& obj, const char* k, const std::string& path) {
  const json* v = find(obj, k);
  if (v == nullptr) fail(key(path, k), "missing required field");
  return *v;
}

const json& needObject(const json& obj, const char* k,
                       const std::string& path) {
  const json& v = need(obj, k, path);
  if (!v.is_object()) fail(key(path, k), "expected an object");
  return v;
}

double asNumber(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

bool asBool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected a boolean");
  return v.get<bool>();
}

std::string asString(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

long asCount(const json& v, const std::string& path, long minValue) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    fail(path, "expected an integer");
  }
  const long n = v.get<long>();
  if (n < minValue) {
    fail(path, "must be >= " + std::to_string(minValue));
  }
  return n;
}

std::uint64_t asSeed(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) {
    return static_cast<std::uint64_t>(v.get<long long>());
  }
  fail(path, "expected a nonnegative integer");
}

Eigen::VectorXd parseVector(const json& v, const std::string& path,
                            int expected = -1) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = asNumber(v[i], item(path, i));
  }
  if (expected >= 0 && out.size() != expected) {
    fail(path, "expected " + std::to_string(expected) + " entries, got " +
                   std::to_string(out.size()));
  }
  return out;
}

Eigen::MatrixXd parseMatrix(const json& v, const std::string& path,
                            int rows = -1, int cols = -1) {
  if (!v.is_array() || v.empty()) {
    fail(path, "expected a nonempty array of rows");
  }
  const std::size_t r = v.size();
  if (!v[0].is_array() || v[0].empty()) {
    fail(item(path, 0), "expected a nonempty row array");
  }
  const std::size_t c = v[0].size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(r),
                      static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < r; ++i) {
    const std::string rowPath = item(path, i);
    if (!v[i].is_array() || v[i].size() != c) {
      fail(rowPath, "rows must all have " + std::to_string(c) + " entries");
    }
    for (std::size_t j = 0; j < c; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          asNumber(v[i][j], item(rowPath, j));
    }
  }
  if (rows >= 0 && out.rows() != rows) {
    fail(path, "expected " + std::to_string(rows) + " rows");
  }
  if (cols >= 0 && out.cols() != cols) {
    fail(path, "expected " + std::to_string(cols) + " columns");
  }
  return out;
}

// Scalar s means s * I; otherwise a dense m x m matrix.
Eigen::MatrixXd parseCovariance(const json& v, int dim,
                                const std::string& path) {
  if (v.is_number()) {
    const double s = v.get<double>();
    if (s < 0.0) fail(path, "scalar covariance must be nonnegative");
    return s * Eigen::MatrixXd::Identity(dim, dim);
  }
  return parseMatrix(v, path, dim, dim);
}

problem::GradientNoise parseGradientNoise(const json& v,
                                          const std::string& path, int dim) {
  if (!v.is_object()) fail(path, "expected an object");
  checkKeys(v, path, {"type", "covariance", "variance"});
  const std::string type = asString(need(v, "type", path), key(path, "type"));
  if (type == "none") {
    return problem::NoNoise{};
  }
  if (type == "additive") {
    return problem::AdditiveNoise{parseCovariance(
        need(v, "covariance", path), dim, key(path, "covariance"))};
  }
  if (type == "regression") {
    const double var =
        asNumber(need(v, "variance", path), key(path, "variance"));
    if (var < 0.0) fail(key(path, "variance"), "must be nonnegative");
    return problem::RegressionNoise{var};
  }
  fail(key(path, "type"), "expected one of: none, additive, regression");
}

problem::ConstraintSet parseSet(const json& v, const std::string& path,
                                int dim) {
  if (!v.is_object()) fail(path, "expected an object");
  checkKeys(v, path,
            {"type", "lower", "upper", "center", "radius", "normal", "offset",
             "matrix", "rhs"});
  const std::string type = asString(need(v, "type", path), key(path, "type"));
  if (type == "fullspace") return problem::FullSpace{};
  if (type == "box") {
    return problem::Box{
        parseVector(need(v, "lower", path), key(path, "lower"), dim),
        parseVector(need(v, "upper", path), key(path, "upper"), dim)};
  }
  if (type == "ball") {
    return problem::Ball{
        parseVector(need(v, "center", path), key(path, "center"), dim),
        asNumber(need(v, "radius", path), key(path, "radius"))};
  }
  if (type == "halfspace") {
    return problem::Halfspace{
        parseVector(need(v, "normal", path), key(path, "normal"), dim),
        asNumber(need(v, "offset", path), key(path, "offset"))};
  }
  if (type == "affine") {
    Eigen::MatrixXd a =
        parseMatrix(need(v, "matrix", path), key(path, "matrix"), -1, dim);
    Eigen::VectorXd b = parseVector(need(v, "rhs", path), key(path, "rhs"),
                                    static_cast<int>(a.rows()));
    return problem::AffineSlab{std::move(a), std::move(b)};
  }
  fail(key(path, "type"),
       "expected one of: fullspace, box, ball, halfspace, affine");
}

std::shared_ptr<const problem::ProblemSpec> parseProblem(
    const json& v, const std::string& path, std::string& builtinOut) {
  if (!v.is_object()) fail(path, "expected an object");
  if (const json* builtin = find(v, "builtin")) {
    checkKeys(v, path, {"builtin"});
    const std::string name = asString(*builtin, key(path, "builtin"));
    if (name != "section6") {
      fail(key(path, "builtin"), "unknown builtin problem '" + name + "'");
    }
    builtinOut = name;
    return std::make_shared<problem::ProblemSpec>(problem::section6Problem());
  }

  builtinOut.clear();
  checkKeys(v, path, {"agents", "optimum", "dualOptimum"});
  const json& agents = need(v, "agents", path);
  if (!agents.is_array() || agents.empty()) {
    fail(key(path, "agents"), "expected a nonempty array");
  }

  problem::ProblemSpec spec;
  int dim = -1;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string agentPath = item(key(path, "agents"), i);
    const json& agent = agents[i];
    if (!agent.is_object()) fail(agentPath, "expected an object");
    checkKeys(agent, agentPath, {"quadratic", "noise", "set"});
    const json& quad = needObject(agent, "quadratic", agentPath);
    const std::string quadPath = key(agentPath, "quadratic");
    checkKeys(quad, quadPath, {"curvature", "optimum", "observationVariance"});
    Eigen::MatrixXd curv = parseMatrix(need(quad, "curvature", quadPath),
                                       key(quadPath, "curvature"));
    if (curv.rows() != curv.cols()) {
      fail(key(quadPath, "curvature"), "must be square");
    }
    if (dim < 0) dim = static_cast<int>(curv.rows());
    if (curv.rows() != dim) {
      fail(key(quadPath, "curvature"),
           "all agents must share the dimension " + std::to_string(dim));
    }
    Eigen::VectorXd opt = parseVector(need(quad, "optimum", quadPath),
                                      key(quadPath, "optimum"), dim);
    double obsVar = 0.0;
    if (const json* ov = find(quad, "observationVariance")) {
      obsVar = asNumber(*ov, key(quadPath, "observationVariance"));
      if (obsVar < 0.0) {
        fail(key(quadPath, "observationVariance"), "must be nonnegative");
      }
    }

    problem::GradientNoise noise = problem::NoNoise{};
    if (const json* nz = find(agent, "noise")) {
      noise = parseGradientNoise(*nz, key(agentPath, "noise"), dim);
    }
    problem::ConstraintSet set = problem::FullSpace{};
    if (const json* st = find(agent, "set")) {
      set = parseSet(*st, key(agentPath, "set"), dim);
    }
    try {
      problem::validate(set, dim);
      spec.costs.push_back(problem::LocalCost::quadratic(
          std::move(curv), std::move(opt), std::move(noise), obsVar));
    } catch (const Error& e) {
      fail(agentPath, e.what());
    }
    spec.sets.push_back(std::move(set));
  }

  if (const json* opt = find(v, "optimum")) {
    spec.knownOptimum = parseVector(*opt, key(path, "optimum"), dim);
  }
  if (const json* dual = find(v, "dualOptimum")) {
    spec.knownDualOptimum =
        parseVector(*dual, key(path, "dualOptimum"),
                    dim * static_cast<int>(agents.size()));
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return std::make_shared<const problem::ProblemSpec>(std::move(spec));
}

std::shared_ptr<const network::GraphDistribution> parseGraph(
    const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  checkKeys(v, path, {"atoms"});
  const json& atoms = need(v, "atoms", path);
  if (!atoms.is_array() || atoms.empty()) {
    fail(key(path, "atoms"), "expected a nonempty array");
  }

  std::vector<network::AdjacencyMatrix> support;
  std::vector<double> probs;
  for (std::size_t r = 0; r < atoms.size(); ++r) {
    const std::string atomPath = item(key(path, "atoms"), r);
    const json& atom = atoms[r];
    if (!atom.is_object()) fail(atomPath, "expected an object");
    checkKeys(atom, atomPath, {"prob", "weights", "edges", "agents",
                               "undirected"});
    const double p = asNumber(need(atom, "prob", atomPath),
                              key(atomPath, "prob"));
    if (!(p > 0.0)) fail(key(atomPath, "prob"), "must be > 0");
    probs.push_back(p);

    Eigen::MatrixXd w;
    if (const json* weights = find(atom, "weights")) {
      if (find(atom, "edges") != nullptr) {
        fail(atomPath, "give either weights or edges, not both");
      }
      w = parseMatrix(*weights, key(atomPath, "weights"));
      if (w.rows() != w.cols()) {
        fail(key(atomPath, "weights"), "must be square");
      }
    } else if (const json* edges = find(atom, "edges")) {
      const int n = static_cast<int>(asCount(need(atom, "agents", atomPath),
                                             key(atomPath, "agents"), 1));
      bool undirected = false;
      if (const json* u = find(atom, "undirected")) {
        undirected = asBool(*u, key(atomPath, "undirected"));
      }
      if (!edges->is_array()) {
        fail(key(atomPath, "edges"), "expected an array of [i, j, w]");
      }
      w = Eigen::MatrixXd::Zero(n, n);
      for (std::size_t e = 0; e < edges->size(); ++e) {
        const std::string edgePath = item(key(atomPath, "edges"), e);
        const json& edge = (*edges)[e];
        if (!edge.is_array() || edge.size() != 3) {
          fail(edgePath, "expected [i, j, weight]");
        }
        const long i = asCount(edge[0], item(edgePath, 0), 1);
        const long j = asCount(edge[1], item(edgePath, 1), 1);
        const double weight = asNumber(edge[2], item(edgePath, 2));
        if (i > n || j > n) fail(edgePath, "agent index out of range");
        if (i == j) fail(edgePath, "self-edges are not allowed");
        if (weight < 0.0) fail(edgePath, "weight must be nonnegative");
        w(i - 1, j - 1) = weight;
        if (undirected) w(j - 1, i - 1) = weight;
      }
    } else {
      fail(atomPath, "atom needs either weights or edges");
    }
    try {
      support.emplace_back(std::move(w));
    } catch (const Error& e) {
      fail(atomPath, e.what());
    }
  }
  try {
    return std::make_shared<const network::GraphDistribution>(
        std::move(support), std::move(probs));
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

engine::NoiseShape parseShape(const json& v, const std::string& path) {
  const std::string name = asString(v, path);
  if (name == "gaussian") return engine::NoiseShape::Gaussian;
  if (name == "uniform") return engine::NoiseShape::Uniform;
  if (name == "rademacher") return engine::NoiseShape::Rademacher;
  fail(path, "expected one of: gaussian, uniform, rademacher");
}

std::string shapeName(engine::NoiseShape shape) {
  switch (shape) {
    case engine::NoiseShape::Gaussian:
      return "gaussian";
    case engine::NoiseShape::Uniform:
      return "uniform";
    case engine::NoiseShape::Rademacher:
      return "rademacher";
  }
  throw Error("unreachable noise shape");
}

void parseNoise(const json& v, const std::string& path, int dim, int agents,
                ExperimentConfig& cfg) {
  if (!v.is_object()) fail(path, "expected an object");
  checkKeys(v, path, {"primal", "dual", "shape", "pairs"});
  if (const json* p = find(v, "primal")) {
    cfg.noisePrimalCov = parseCovariance(*p, dim, key(path, "primal"));
  }
  if (const json* d = find(v, "dual")) {
    cfg.noiseDualCov = parseCovariance(*d, dim, key(path, "dual"));
  }
  if (const json* s = find(v, "shape")) {
    cfg.noiseShape = parseShape(*s, key(path, "shape"));
  }
  if (const json* pairs = find(v, "pairs")) {
    if (!pairs->is_array()) fail(key(path, "pairs"), "expected an array");
    for (std::size_t i = 0; i < pairs->size(); ++i) {
      const std::string pairPath = item(key(path, "pairs"), i);
      const json& pair = (*pairs)[i];
      if (!pair.is_object()) fail(pairPath, "expected an object");
      checkKeys(pair, pairPath, {"from", "to", "channel", "covariance"});
      PairNoiseOverride ov;
      ov.from = static_cast<int>(
          asCount(need(pair, "from", pairPath), key(pairPath, "from"), 1)) - 1;
      ov.to = static_cast<int>(
          asCount(need(pair, "to", pairPath), key(pairPath, "to"), 1)) - 1;
      if (ov.from >= agents || ov.to >= agents) {
        fail(pairPath, "agent index out of range");
      }
      if (ov.from == ov.to) fail(pairPath, "self-pairs are not allowed");
      const std::string channel = asString(need(pair, "channel", pairPath),
                                           key(pairPath, "channel"));
      if (channel == "primal") {
        ov.primalChannel = true;
      } else if (channel == "dual") {
        ov.primalChannel = false;
      } else {
        fail(key(pairPath, "channel"), "expected primal or dual");
      }
      ov.covariance = parseCovariance(need(pair, "covariance", pairPath), dim,
                                      key(pairPath, "covariance"));
      cfg.pairOverrides.push_back(std::move(ov));
    }
  }
}

json vectorJson(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrixJson(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

ordered_json noiseModelJson(const problem::GradientNoise& noise) {
  ordered_json out;
  if (std::holds_alternative<problem::NoNoise>(noise)) {
    out["type"] = "none";
  } else if (const auto* add = std::get_if<problem::AdditiveNoise>(&noise)) {
    out["type"] = "additive";
    out["covariance"] = matrixJson(add->covariance);
  } else {
    out["type"] = "regression";
    out["variance"] = std::get<problem::RegressionNoise>(noise).observationVariance;
  }
  return out;
}

ordered_json setJson(const problem::ConstraintSet& set) {
  ordered_json out;
  if (std::holds_alternative<problem::FullSpace>(set)) {
    out["type"] = "fullspace";
  } else if (const auto* box = std::get_if<problem::Box>(&set)) {
    out["type"] = "box";
    out["lower"] = vectorJson(box->lower);
    out["upper"] = vectorJson(box->upper);
  } else if (const auto* ball = std::get_if<problem::Ball>(&set)) {
    out["type"] = "ball";
    out["center"] = vectorJson(ball->center);
    out["radius"] = ball->radius;
  } else if (const auto* half = std::get_if<problem::Halfspace>(&set)) {
    out["type"] = "halfspace";
    out["normal"] = vectorJson(half->normal);
    out["offset"] = half->offset;
  } else {
    const auto& slab = std::get<problem::AffineSlab>(set);
    out["type"] = "affine";
    out["matrix"] = matrixJson(slab.A);
    out["rhs"] = vectorJson(slab.b);
  }
  return out;
}

}  // namespace

std::string toString(RunMode mode) {
  switch (mode) {
    case RunMode::SingleRun:
      return "single-run";
    case RunMode::MonteCarlo:
      return "montecarlo";
    case RunMode::Normality:
      return "normality";
    case RunMode::Efficiency:
      return "efficiency";
  }
  throw Error("unreachable run mode");
}

RunMode runModeFromString(const std::string& name) {
  if (name == "single-run") return RunMode::SingleRun;
  if (name == "montecarlo") return RunMode::MonteCarlo;
  if (name == "normality") return RunMode::Normality;
  if (name == "efficiency") return RunMode::Efficiency;
  throw ConfigError("mode",
                    "expected one of: single-run, montecarlo, normality, "
                    "efficiency");
}

engine::NoiseSpec ExperimentConfig::noiseSpec() const {
  engine::NoiseSpec spec(static_cast<int>(noisePrimalCov.rows()),
                         noisePrimalCov, noiseDualCov, noiseShape);
  for (const auto& ov : pairOverrides) {
    if (ov.primalChannel) {
      spec.setPairPrimalCov(ov.from, ov.to, ov.covariance);
    } else {
      spec.setPairDualCov(ov.from, ov.to, ov.covariance);
    }
  }
  return spec;
}

engine::Simulator ExperimentConfig::makeSimulator() const {
  return engine::Simulator(problem, graph, noiseSpec(), schedule);
}

void ExperimentConfig::validate() const {
  if (!problem || !graph) throw ConfigError("$", "incomplete configuration");
  if (problem->agentCount() != graph->agentCount()) {
    throw ConfigError("graph",
                      "graph has " + std::to_string(graph->agentCount()) +
                          " agents but the problem has " +
                          std::to_string(problem->agentCount()));
  }
  if (steps < 1) throw ConfigError("steps", "must be >= 1");
  if (replications < 1) throw ConfigError("replications", "must be >= 1");
  if (recordEvery < 1) throw ConfigError("recordEvery", "must be >= 1");
  try {
    schedule.validate();
  } catch (const Error& e) {
    throw ConfigError("schedule", e.what());
  }
  const int dim = problem->dim();
  if (noisePrimalCov.rows() != dim || noisePrimalCov.cols() != dim) {
    throw ConfigError("noise.primal", "covariance must be " +
                                          std::to_string(dim) + "x" +
                                          std::to_string(dim));
  }
  if (noiseDualCov.rows() != dim || noiseDualCov.cols() != dim) {
    throw ConfigError("noise.dual", "covariance must be " +
                                        std::to_string(dim) + "x" +
                                        std::to_string(dim));
  }
  try {
    noiseSpec();
  } catch (const Error& e) {
    throw ConfigError("noise", e.what());
  }
  if (mode == RunMode::Normality || mode == RunMode::Efficiency) {
    if (!problem->knownOptimum) {
      throw ConfigError("problem.optimum",
                        toString(mode) + " mode needs a known optimum");
    }
    if (!problem->unconstrained()) {
      throw ConfigError("problem",
                        toString(mode) + " mode needs an unconstrained problem");
    }
    if (!schedule.normalityRange()) {
      throw ConfigError("schedule", toString(mode) +
                                        " mode needs gamma0 = 1 and nu in "
                                        "(2/3, 1)");
    }
  }
}

ExperimentConfig parseConfig(const std::string& jsonText) {
  json root;
  try {
    root = json::parse(jsonText);
  } catch (const json::exception& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("$", "expected a JSON object");
  checkKeys(root, "",
            {"mode", "seed", "steps", "replications", "recordEvery", "output",
             "problem", "graph", "noise", "schedule"});

  ExperimentConfig cfg;
  if (const json* mode = find(root, "mode")) {
    cfg.mode = runModeFromString(asString(*mode, "mode"));
  }
  if (const json* seed = find(root, "seed")) cfg.seed = asSeed(*seed, "seed");
  if (const json* steps = find(root, "steps")) {
    cfg.steps = asCount(*steps, "steps", 1);
  }
  if (const json* reps = find(root, "replications")) {
    cfg.replications = asCount(*reps, "replications", 1);
  }
  if (const json* re = find(root, "recordEvery")) {
    cfg.recordEvery = asCount(*re, "recordEvery", 1);
  }
  if (const json* out = find(root, "output")) {
    cfg.outputDir = asString(*out, "output");
  }

  cfg.problem = parseProblem(need(root, "problem", ""), "problem",
                             cfg.problemBuiltin);
  cfg.graph = parseGraph(need(root, "graph", ""), "graph");
  const int dim = cfg.problem->dim();
  cfg.noisePrimalCov = Eigen::MatrixXd::Zero(dim, dim);
  cfg.noiseDualCov = Eigen::MatrixXd::Zero(dim, dim);
  if (const json* noise = find(root, "noise")) {
    parseNoise(*noise, "noise", dim, cfg.problem->agentCount(), cfg);
  }
  if (const json* sched = find(root, "schedule")) {
    if (!sched->is_object()) fail("schedule", "expected an object");
    checkKeys(*sched, "schedule", {"gamma0", "nu"});
    if (const json* g0 = find(*sched, "gamma0")) {
      cfg.schedule.gamma0 = asNumber(*g0, "schedule.gamma0");
    }
    if (const json* nu = find(*sched, "nu")) {
      cfg.schedule.nu = asNumber(*nu, "schedule.nu");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig loadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parseConfig(buf.str());
}

std::string serializeConfig(const ExperimentConfig& cfg) {
  if (!cfg.problem || !cfg.graph) {
    throw InvalidArgument("cannot serialize an incomplete configuration");
  }
  ordered_json root;
  root["mode"] = toString(cfg.mode);
  root["seed"] = cfg.seed;
  root["steps"] = cfg.steps;
  root["replications"] = cfg.replications;
  root["recordEvery"] = cfg.recordEvery;
  if (!cfg.outputDir.empty()) root["output"] = cfg.outputDir;

  ordered_json prob;
  if (!cfg.problemBuiltin.empty()) {
    prob["builtin"] = cfg.problemBuiltin;
  } else {
    if (cfg.problem->knownOptimum) {
      prob["optimum"] = vectorJson(*cfg.problem->knownOptimum);
    }
    if (cfg.problem->knownDualOptimum) {
      prob["dualOptimum"] = vectorJson(*cfg.problem->knownDualOptimum);
    }
    ordered_json agents = ordered_json::array();
    for (std::size_t i = 0; i < cfg.problem->costs.size(); ++i) {
      const auto& cost = cfg.problem->costs[i];
      if (!cost.isQuadratic()) {
        throw InvalidArgument("custom costs are not serializable");
      }
      ordered_json agent;
      ordered_json quad;
      quad["curvature"] = matrixJson(cost.curvature());
      quad["optimum"] = vectorJson(cost.optimum());
      if (cost.observationVariance() != 0.0 &&
          !std::holds_alternative<problem::RegressionNoise>(cost.noiseModel())) {
        quad["observationVariance"] = cost.observationVariance();
      }
      agent["quadratic"] = std::move(quad);
      agent["noise"] = noiseModelJson(cost.noiseModel());
      agent["set"] = setJson(cfg.problem->sets[i]);
      agents.push_back(std::move(agent));
    }
    prob["agents"] = std::move(agents);
  }
  root["problem"] = std::move(prob);

  ordered_json atoms = ordered_json::array();
  for (int r = 0; r < cfg.graph->atomCount(); ++r) {
    ordered_json atom;
    atom["prob"] = cfg.graph->probabilities()[static_cast<std::size_t>(r)];
    atom["weights"] =
        matrixJson(cfg.graph->atoms()[static_cast<std::size_t>(r)].weights());
    atoms.push_back(std::move(atom));
  }
  root["graph"] = ordered_json{{"atoms", std::move(atoms)}};

  ordered_json noise;
  noise["shape"] = shapeName(cfg.noiseShape);
  noise["primal"] = matrixJson(cfg.noisePrimalCov);
  noise["dual"] = matrixJson(cfg.noiseDualCov);
  if (!cfg.pairOverrides.empty()) {
    ordered_json pairs = ordered_json::array();
    for (const auto& ov : cfg.pairOverrides) {
      ordered_json pair;
      pair["from"] = ov.from + 1;
      pair["to"] = ov.to + 1;
      pair["channel"] = ov.primalChannel ? "primal" : "dual";
      pair["covariance"] = matrixJson(ov.covariance);
      pairs.push_back(std::move(pair));
    }
    noise["pairs"] = std::move(pairs);
  }
  root["noise"] = std::move(noise);

  root["schedule"] =
      ordered_json{{"gamma0", cfg.schedule.gamma0}, {"nu", cfg.schedule.nu}};
  return root.dump(2) + "\n";
}

ExperimentConfig benchmarkConfig() {
  ExperimentConfig cfg;
  cfg.mode = RunMode::Normality;
  cfg.seed = 1;
  cfg.steps = 1000;
  cfg.replications = 1000;
  cfg.recordEvery = 1;
  cfg.problemBuiltin = "section6";
  cfg.problem =
      std::make_shared<const problem::ProblemSpec>(problem::section6Problem());

  // Uniform pairwise gossip: one single-edge graph per unordered pair.
  const int n = cfg.problem->agentCount();
  std::vector<network::AdjacencyMatrix> atoms;
  std::vector<double> probs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
      w(i, j) = 1.0;
      w(j, i) = 1.0;
      atoms.emplace_back(std::move(w));
    }
  }
  probs.assign(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
  cfg.graph = std::make_shared<const network::GraphDistribution>(
      std::move(atoms), std::move(probs));

  const int m = cfg.problem->dim();
  cfg.noisePrimalCov = 0.1 * Eigen::MatrixXd::Identity(m, m);
  cfg.noiseDualCov = 0.1 * Eigen::MatrixXd::Identity(m, m);
  cfg.noiseShape = engine::NoiseShape::Gaussian;
  cfg.schedule = engine::StepSchedule{1.0, 0.75};
  cfg.validate();
  return cfg;
}

}  // namespace pdsa::config
