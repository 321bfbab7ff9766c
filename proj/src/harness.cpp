#include "lsts/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lsts::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kTrialsVersion = "# lsts-trials-v1";
constexpr const char* kCurvesVersion = "# lsts-curves-v1";
constexpr const char* kTimingsVersion = "# lsts-timings-v1";
constexpr const char* kTrialsColumns =
    "algo,seed,total_interactions,converged,final_success_rate,learned_path";
constexpr const char* kCurvesColumns =
    "algo,seed,interaction_stamp,edge_or_composed,success_rate";

const std::vector<std::string> kAlgos = {"lsts", "lsts_ct", "lfs",    "gsrs",
                                         "qrm",  "dirl",    "dirl_c", "tscl"};

void check_algo(const std::string& algo) {
  if (std::find(kAlgos.begin(), kAlgos.end(), algo) == kAlgos.end())
    throw ConfigError("algo: unknown algorithm '" + algo + "'");
}

void check_env(const std::string& name) {
  if (name != "doorkey" && name != "search_rescue")
    throw ConfigError("env: unknown environment '" + name + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<uint64_t> parse_seed_list(const std::string& text, const std::string& field) {
  std::vector<uint64_t> seeds;
  std::string cur;
  std::istringstream ss(text);
  while (std::getline(ss, cur, ',')) {
    try {
      size_t pos = 0;
      uint64_t v = std::stoull(cur, &pos);
      if (pos != cur.size()) throw std::invalid_argument(cur);
      seeds.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(field + ": bad seed '" + cur + "'");
    }
  }
  if (seeds.empty()) throw ConfigError(field + ": must be a nonempty list");
  std::vector<uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError(field + ": seeds must be distinct");
  return seeds;
}

void parse_params(const json& j, baselines::BaselineParams& p) {
  if (!j.is_object()) throw ConfigError("params: must be an object");
  teacher::TeacherParams& t = p.teacher;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    try {
      if (k == "x")
        t.x = v.get<int>();
      else if (k == "alpha")
        t.alpha = v.get<double>();
      else if (k == "epsilon")
        t.epsilon = v.get<double>();
      else if (k == "eta")
        t.eta = v.get<double>();
      else if (k == "tau")
        t.tau = v.get<double>();
      else if (k == "eval_episodes")
        t.eval_episodes = v.get<int>();
      else if (k == "step_budget")
        t.step_budget = v.get<int>();
      else if (k == "soft_discard_bias")
        t.soft_discard_bias = v.get<double>();
      else if (k == "learning_rate")
        t.learning_rate = v.get<double>();
      else if (k == "discount")
        t.discount = v.get<double>();
      else if (k == "student_epsilon")
        t.student_epsilon = v.get<double>();
      else if (k == "compose_episodes")
        t.compose_episodes = v.get<int>();
      else if (k == "deterministic_eval")
        t.deterministic_eval = v.get<bool>();
      else if (k == "per_edge_budget")
        p.per_edge_budget = v.get<uint64_t>();
      else if (k == "shaping_scale")
        p.shaping_scale = v.get<double>();
      else if (k == "slope_window")
        p.slope_window = v.get<int>();
      else
        throw ConfigError("params." + k + ": unknown key");
    } catch (const json::exception&) {
      throw ConfigError("params." + k + ": wrong value type");
    }
  }
}

std::string path_string(const std::vector<int>& nodes) {
  std::string out;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (i) out += '-';
    out += 'q' + std::to_string(nodes[i]);
  }
  return out;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> read_csv_lines(const std::string& path, const std::string& version,
                                        const std::string& columns) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != version)
    throw ConfigError(path + ": expected version line '" + version + "'");
  if (!std::getline(in, line) || line != columns)
    throw ConfigError(path + ": expected column header '" + columns + "'");
  std::vector<std::string> lines;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

uint64_t parse_u64(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": bad integer '" + s + "'");
  }
}

double parse_real(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": bad number '" + s + "'");
  }
}

// Regularized incomplete beta by Lentz's continued fraction.
double beta_cf(double a, double b, double x) {
  const int kMaxIter = 300;
  const double kEps = 3e-14, kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  fs::path base = fs::absolute(fs::path(path)).parent_path();
  auto resolve = [&base](const std::string& p) {
    fs::path fp(p);
    return (fp.is_absolute() ? fp : base / fp).lexically_normal().string();
  };
  auto get_string = [&j](const std::string& key) {
    if (!j.contains(key)) throw ConfigError(key + ": missing required key");
    if (!j.at(key).is_string()) throw ConfigError(key + ": must be a string");
    return j.at(key).get<std::string>();
  };

  ExperimentConfig cfg;
  cfg.env_name = get_string("env");
  check_env(cfg.env_name);
  cfg.layout_path = resolve(get_string("layout"));

  bool has_spec = j.contains("spec"), has_text = j.contains("spec_text");
  if (has_spec == has_text)
    throw ConfigError("spec: give exactly one of 'spec' (path) or 'spec_text'");
  cfg.spec_text = has_text ? get_string("spec_text") : read_file(resolve(get_string("spec")));

  if (j.contains("algo")) {
    cfg.algo = get_string("algo");
    check_algo(cfg.algo);
  }
  if (!j.contains("seeds") || !j.at("seeds").is_array() || j.at("seeds").empty())
    throw ConfigError("seeds: must be a nonempty array of integers");
  for (const json& s : j.at("seeds")) {
    if (!s.is_number_unsigned()) throw ConfigError("seeds: must be nonnegative integers");
    cfg.seeds.push_back(s.get<uint64_t>());
  }
  {
    std::vector<uint64_t> sorted = cfg.seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("seeds: seeds must be distinct");
  }
  if (j.contains("budget")) {
    if (!j.at("budget").is_number_unsigned() || j.at("budget").get<uint64_t>() == 0)
      throw ConfigError("budget: must be a positive integer");
    cfg.budget = j.at("budget").get<uint64_t>();
  }
  if (j.contains("out")) cfg.out_dir = get_string("out");
  if (j.contains("max_episode_steps")) {
    if (!j.at("max_episode_steps").is_number_integer() ||
        j.at("max_episode_steps").get<int>() <= 0)
      throw ConfigError("max_episode_steps: must be a positive integer");
    cfg.max_episode_steps = j.at("max_episode_steps").get<int>();
  }
  if (j.contains("threshold")) {
    if (!j.at("threshold").is_number()) throw ConfigError("threshold: must be a number");
    cfg.threshold = j.at("threshold").get<double>();
    if (cfg.threshold <= 0.0 || cfg.threshold > 1.0)
      throw ConfigError("threshold: must be in (0, 1]");
  }
  if (j.contains("params")) parse_params(j.at("params"), cfg.params);

  static const std::vector<std::string> kKnown = {
      "env",  "layout", "spec",              "spec_text", "algo",  "seeds",
      "budget", "out",  "max_episode_steps", "threshold", "params"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(kKnown.begin(), kKnown.end(), it.key()) == kKnown.end())
      throw ConfigError(it.key() + ": unknown key");
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  teacher::TeacherParams& t = cfg.params.teacher;
  auto as_int = [&](int min_value) {
    try {
      size_t pos = 0;
      int v = std::stoi(value, &pos);
      if (pos != value.size() || v < min_value) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": bad value '" + value + "'");
    }
  };
  auto as_real = [&] { return parse_real(value, key); };
  if (key == "algo") {
    check_algo(value);
    cfg.algo = value;
  } else if (key == "env") {
    check_env(value);
    cfg.env_name = value;
  } else if (key == "layout") {
    cfg.layout_path = value;
  } else if (key == "spec_text") {
    cfg.spec_text = value;
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "seeds") {
    cfg.seeds = parse_seed_list(value, key);
  } else if (key == "budget") {
    uint64_t v = parse_u64(value, key);
    if (v == 0) throw ConfigError("budget: must be a positive integer");
    cfg.budget = v;
  } else if (key == "max_episode_steps") {
    cfg.max_episode_steps = as_int(1);
  } else if (key == "threshold") {
    cfg.threshold = as_real();
    if (cfg.threshold <= 0.0 || cfg.threshold > 1.0)
      throw ConfigError("threshold: must be in (0, 1]");
  } else if (key == "params.x") {
    t.x = as_int(1);
  } else if (key == "params.alpha") {
    t.alpha = as_real();
  } else if (key == "params.epsilon") {
    t.epsilon = as_real();
  } else if (key == "params.eta") {
    t.eta = as_real();
  } else if (key == "params.tau") {
    t.tau = as_real();
  } else if (key == "params.eval_episodes") {
    t.eval_episodes = as_int(1);
  } else if (key == "params.step_budget") {
    t.step_budget = as_int(1);
  } else if (key == "params.soft_discard_bias") {
    t.soft_discard_bias = as_real();
  } else if (key == "params.learning_rate") {
    t.learning_rate = as_real();
  } else if (key == "params.discount") {
    t.discount = as_real();
  } else if (key == "params.student_epsilon") {
    t.student_epsilon = as_real();
  } else if (key == "params.compose_episodes") {
    t.compose_episodes = as_int(1);
  } else if (key == "params.deterministic_eval") {
    if (value == "true" || value == "1")
      t.deterministic_eval = true;
    else if (value == "false" || value == "0")
      t.deterministic_eval = false;
    else
      throw ConfigError(key + ": bad value '" + value + "'");
  } else if (key == "params.per_edge_budget") {
    cfg.params.per_edge_budget = parse_u64(value, key);
  } else if (key == "params.shaping_scale") {
    cfg.params.shaping_scale = as_real();
  } else if (key == "params.slope_window") {
    cfg.params.slope_window = as_int(2);
  } else {
    throw ConfigError(key + ": unknown key");
  }
}

teacher::RunResult dispatch_run(const std::string& algo, const graph::AbstractGraph& g,
                                env::LabeledMdp& env, const spec::SpecPtr& phi,
                                const baselines::BaselineParams& params, uint64_t budget,
                                uint64_t master_seed) {
  if (algo == "lsts") return teacher::lsts_run(g, env, phi, params.teacher, budget, master_seed);
  if (algo == "lsts_ct")
    return teacher::lsts_ct_run(g, env, phi, params.teacher, budget, master_seed);
  if (algo == "lfs") return baselines::run_lfs(g, env, phi, params, budget, master_seed);
  if (algo == "gsrs") return baselines::run_gsrs(g, env, phi, params, budget, master_seed);
  if (algo == "qrm") return baselines::run_qrm(g, env, phi, params, budget, master_seed);
  if (algo == "dirl") return baselines::run_dirl(g, env, phi, params, budget, master_seed);
  if (algo == "dirl_c") return baselines::run_dirl_c(g, env, phi, params, budget, master_seed);
  if (algo == "tscl") return baselines::run_tscl(g, env, phi, params, budget, master_seed);
  throw ConfigError("algo: unknown algorithm '" + algo + "'");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  check_algo(cfg.algo);
  check_env(cfg.env_name);
  if (cfg.seeds.empty()) throw ConfigError("seeds: must be a nonempty list");
  if (cfg.budget == 0) throw ConfigError("budget: must be a positive integer");

  spec::SpecPtr phi = spec::parse_spec(cfg.spec_text);
  grid::GridLayout layout = grid::load_layout(cfg.layout_path);

  ExperimentResult res;
  res.graph = graph::compile(phi);
  for (uint64_t seed : cfg.seeds) {
    std::unique_ptr<env::LabeledMdp> env =
        grid::make_env(cfg.env_name, layout, cfg.max_episode_steps);
    auto t0 = std::chrono::steady_clock::now();
    teacher::RunResult run =
        dispatch_run(cfg.algo, res.graph, *env, phi, cfg.params, cfg.budget, seed);
    auto t1 = std::chrono::steady_clock::now();

    TrialRecord rec;
    rec.algo = cfg.algo;
    rec.seed = seed;
    rec.total_interactions = run.total_interactions;
    rec.converged = run.converged;
    rec.final_success_rate = run.final_success_rate;
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rec.learned_path = path_string(run.learned_path_nodes);
    res.trials.push_back(std::move(rec));
    res.runs.emplace_back(seed, std::move(run));
  }
  return res;
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res) {
  fs::create_directories(cfg.out_dir);
  fs::path dir(cfg.out_dir);

  std::ofstream trials(dir / "trials.csv", std::ios::binary);
  if (!trials) throw ConfigError("cannot write " + (dir / "trials.csv").string());
  trials << kTrialsVersion << '\n' << kTrialsColumns << '\n';
  for (const TrialRecord& r : res.trials)
    trials << r.algo << ',' << r.seed << ',' << r.total_interactions << ','
           << (r.converged ? 1 : 0) << ',' << fmt("%.6f", r.final_success_rate) << ','
           << r.learned_path << '\n';

  std::ofstream curves(dir / "curves.csv", std::ios::binary);
  if (!curves) throw ConfigError("cannot write " + (dir / "curves.csv").string());
  curves << kCurvesVersion << '\n' << kCurvesColumns << '\n';
  for (const auto& [seed, run] : res.runs) {
    for (const teacher::CurvePoint& cp : run.curves) {
      std::string series = cp.edge < 0
                               ? std::string("composed")
                               : "q" + std::to_string(res.graph.edges[cp.edge].src) + "-q" +
                                     std::to_string(res.graph.edges[cp.edge].dst);
      curves << cfg.algo << ',' << seed << ',' << cp.stamp << ',' << series << ','
             << fmt("%.6f", cp.rate) << '\n';
    }
  }

  std::ofstream timings(dir / "timings.csv", std::ios::binary);
  if (!timings) throw ConfigError("cannot write " + (dir / "timings.csv").string());
  timings << kTimingsVersion << '\n' << "algo,seed,wall_time_ms\n";
  for (const TrialRecord& r : res.trials)
    timings << r.algo << ',' << r.seed << ',' << fmt("%.3f", r.wall_time_ms) << '\n';
}

std::vector<TrialRecord> read_trials(const std::string& csv_path) {
  std::vector<TrialRecord> out;
  for (const std::string& line : read_csv_lines(csv_path, kTrialsVersion, kTrialsColumns)) {
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 6) throw ConfigError(csv_path + ": malformed row '" + line + "'");
    TrialRecord r;
    r.algo = f[0];
    r.seed = parse_u64(f[1], csv_path);
    r.total_interactions = parse_u64(f[2], csv_path);
    r.converged = parse_u64(f[3], csv_path) != 0;
    r.final_success_rate = parse_real(f[4], csv_path);
    r.learned_path = f[5];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CurveRow> read_curves(const std::string& csv_path) {
  std::vector<CurveRow> out;
  for (const std::string& line : read_csv_lines(csv_path, kCurvesVersion, kCurvesColumns)) {
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 5) throw ConfigError(csv_path + ": malformed row '" + line + "'");
    CurveRow r;
    r.algo = f[0];
    r.seed = parse_u64(f[1], csv_path);
    r.interaction_stamp = parse_u64(f[2], csv_path);
    r.series = f[3];
    r.success_rate = parse_real(f[4], csv_path);
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<uint64_t> time_to_threshold(const std::vector<CurveRow>& rows, uint64_t seed,
                                          double threshold) {
  for (const CurveRow& r : rows)
    if (r.seed == seed && r.series == "composed" && r.success_rate >= threshold)
      return r.interaction_stamp;
  return std::nullopt;
}

Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.n = static_cast<int>(xs.size());
  if (s.n == 0) return s;
  for (double v : xs) s.mean += v;
  s.mean /= s.n;
  if (s.n < 2) return s;
  double acc = 0.0;
  for (double v : xs) acc += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(acc / (s.n - 1));
  return s;
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("welch_t_test needs at least two samples per group");
  Summary sa = summarize(a), sb = summarize(b);
  double va = sa.stddev * sa.stddev, vb = sb.stddev * sb.stddev;
  if (va == 0.0 && vb == 0.0) throw DegenerateVarianceError();
  double na = sa.n, nb = sb.n;
  double se2 = va / na + vb / nb;
  WelchResult w;
  w.t = (sa.mean - sb.mean) / std::sqrt(se2);
  w.df = se2 * se2 / ((va / na) * (va / na) / (na - 1) + (vb / nb) * (vb / nb) / (nb - 1));
  w.p = reg_inc_beta(w.df / 2.0, 0.5, w.df / (w.df + w.t * w.t));
  return w;
}

std::string compare_report(const std::string& in_dir, const std::string& algo_a,
                           const std::string& algo_b, double threshold) {
  struct Side {
    std::string algo;
    std::vector<TrialRecord> trials;
    std::vector<CurveRow> curves;
    std::vector<double> interactions, success, reached;
    int converged = 0;
  };
  auto load = [&](const std::string& algo) {
    Side s;
    s.algo = algo;
    fs::path dir = fs::path(in_dir) / algo;
    s.trials = read_trials((dir / "trials.csv").string());
    s.curves = read_curves((dir / "curves.csv").string());
    for (const TrialRecord& r : s.trials) {
      s.interactions.push_back(static_cast<double>(r.total_interactions));
      s.success.push_back(r.final_success_rate);
      s.converged += r.converged ? 1 : 0;
      if (std::optional<uint64_t> t = time_to_threshold(s.curves, r.seed, threshold))
        s.reached.push_back(static_cast<double>(*t));
    }
    return s;
  };
  Side a = load(algo_a), b = load(algo_b);

  std::ostringstream os;
  os << "comparison: " << algo_a << " vs " << algo_b << "\n";
  for (const Side& s : {a, b}) {
    Summary si = summarize(s.interactions);
    Summary sr = summarize(s.success);
    os << s.algo << ": n=" << si.n << " converged=" << s.converged << "/" << si.n
       << " interactions=" << fmt("%.1f", si.mean) << " \xC2\xB1 " << fmt("%.1f", si.stddev)
       << " success=" << fmt("%.3f", sr.mean) << " \xC2\xB1 " << fmt("%.3f", sr.stddev);
    Summary st = summarize(s.reached);
    os << " time_to_" << fmt("%.2f", threshold) << "=";
    if (st.n == 0)
      os << "never";
    else
      os << fmt("%.1f", st.mean) << " \xC2\xB1 " << fmt("%.1f", st.stddev) << " (" << st.n
         << "/" << si.n << ")";
    os << "\n";
  }
  try {
    WelchResult w = welch_t_test(a.interactions, b.interactions);
    os << "welch interactions: t=" << fmt("%.4f", w.t) << " df=" << fmt("%.3f", w.df)
       << " p=" << fmt("%.6f", w.p) << "\n";
    if (w.p < 0.05) {
      const Side& lower =
          summarize(a.interactions).mean <= summarize(b.interactions).mean ? a : b;
      os << "significant at 95% confidence: " << lower.algo << " uses fewer interactions\n";
    } else {
      os << "no significant difference at 95% confidence\n";
    }
  } catch (const DegenerateVarianceError&) {
    os << "welch interactions: undefined (both variances zero)\n";
  } catch (const std::invalid_argument&) {
    os << "welch interactions: unavailable (fewer than two trials per side)\n";
  }
  return os.str();
}

}  // namespace lsts::harness
