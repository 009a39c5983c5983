// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pwlbo/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pwlbo/benchmarks.hpp"
#include "pwlbo/pwl_kernel.hpp"

namespace pwlbo {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment", {"benchmark", "replications", "seed", "out_dir", "workers"}},
      {"bo",
       {"budget", "init_samples", "pool_sub", "pool_rand", "beta_coefficient", "beta_rule", "beta_delta", "beta_a",
        "beta_b", "beta_r", "polish_steps", "polish_step_size", "addgp_groups", "warm_start", "fit_restarts", "noise",
        "max_segment_scale"}},
      {"solver", {"mip_gap", "time_limit", "pool_size", "node_limit", "cut_rounds"}},
      {"sub_solver", {"mip_gap", "time_limit", "pool_size", "node_limit", "cut_rounds"}},
  };
  return keys;
}

template <typename T>
void read_key(const pt::ptree& section, const std::string& name, const std::string& key, T& target) {
  const auto value = section.get_optional<std::string>(key);
  if (!value) return;
  std::istringstream in(*value);
  T parsed{};
  if constexpr (std::is_same_v<T, bool>) {
    const std::string v = *value;
    if (v == "true" || v == "1" || v == "yes") parsed = true;
    else if (v == "false" || v == "0" || v == "no") parsed = false;
    else throw ConfigError(name + "." + key + ": expected a boolean, got '" + v + "'");
  } else if constexpr (std::is_same_v<T, double>) {
    parsed = parse_double(*value);
  } else if constexpr (std::is_same_v<T, std::string>) {
    parsed = *value;
  } else {
    in >> parsed;
    if (!in || !in.eof()) throw ConfigError(name + "." + key + ": expected an integer, got '" + *value + "'");
  }
  target = parsed;
}

void read_solver(const pt::ptree& section, const std::string& name, SolverConfig& s) {
  read_key(section, name, "mip_gap", s.mip_gap);
  read_key(section, name, "time_limit", s.time_limit_s);
  read_key(section, name, "pool_size", s.pool_size);
  read_key(section, name, "node_limit", s.node_limit);
  read_key(section, name, "cut_rounds", s.cut_rounds);
}

void write_solver(std::ostream& out, const std::string& name, const SolverConfig& s) {
  out << '[' << name << "]\n"
      << "mip_gap = " << format_double(s.mip_gap) << '\n'
      << "time_limit = " << format_double(s.time_limit_s) << '\n'
      << "pool_size = " << s.pool_size << '\n'
      << "node_limit = " << s.node_limit << '\n'
      << "cut_rounds = " << s.cut_rounds << '\n';
}

std::optional<double> env_seconds(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  try {
    return parse_double(v);
  } catch (const ConfigError&) {
    throw ConfigError(std::string(name) + ": not a number: '" + v + "'");
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

void ExperimentConfig::validate() const {
  find_benchmark(benchmark);
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  bo.validate(find_benchmark(benchmark).dim);
}

std::vector<std::vector<int>> parse_groups(const std::string& text) {
  std::vector<std::vector<int>> groups;
  for (const std::string& g : split_fields(text, ';')) {
    std::vector<int> dims;
    for (const std::string& d : split_fields(g, ',')) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(d, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != d.size() || v < 1) throw ConfigError("malformed addgp_groups entry '" + d + "'");
      dims.push_back(v - 1);
    }
    if (dims.empty()) throw ConfigError("addgp_groups contains an empty group");
    groups.push_back(std::move(dims));
  }
  if (groups.empty()) throw ConfigError("addgp_groups is empty");
  return groups;
}

std::string format_groups(const std::vector<std::vector<int>>& groups) {
  std::string s;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g) s += ';';
    for (std::size_t k = 0; k < groups[g].size(); ++k) {
      if (k) s += ',';
      s += std::to_string(groups[g][k] + 1);
    }
  }
  return s;
}

ExperimentConfig read_experiment_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("config: unknown key " + section + "." + key);
    }
  }
  ExperimentConfig c;
  const pt::ptree empty;
  const pt::ptree& ex = tree.get_child("experiment", empty);
  read_key(ex, "experiment", "benchmark", c.benchmark);
  read_key(ex, "experiment", "replications", c.replications);
  read_key(ex, "experiment", "seed", c.seed);
  read_key(ex, "experiment", "out_dir", c.out_dir);
  read_key(ex, "experiment", "workers", c.workers);

  const pt::ptree& bo = tree.get_child("bo", empty);
  BoConfig& b = c.bo;
  read_key(bo, "bo", "budget", b.max_iterations);
  read_key(bo, "bo", "init_samples", b.init_samples);
  read_key(bo, "bo", "pool_sub", b.pool_sub);
  read_key(bo, "bo", "pool_rand", b.pool_rand);
  read_key(bo, "bo", "beta_coefficient", b.beta_coefficient);
  std::string rule = "empirical";
  read_key(bo, "bo", "beta_rule", rule);
  if (rule == "empirical") b.beta_rule = BetaRule::Empirical;
  else if (rule == "theoretical") b.beta_rule = BetaRule::Theoretical;
  else throw ConfigError("bo.beta_rule must be empirical or theoretical, got '" + rule + "'");
  read_key(bo, "bo", "beta_delta", b.theoretical.delta);
  read_key(bo, "bo", "beta_a", b.theoretical.a);
  read_key(bo, "bo", "beta_b", b.theoretical.b);
  read_key(bo, "bo", "beta_r", b.theoretical.r);
  read_key(bo, "bo", "polish_steps", b.polish_steps);
  read_key(bo, "bo", "polish_step_size", b.polish_step_size);
  std::string groups;
  read_key(bo, "bo", "addgp_groups", groups);
  if (!groups.empty()) b.addgp_groups = parse_groups(groups);
  read_key(bo, "bo", "warm_start", b.warm_start);
  read_key(bo, "bo", "fit_restarts", b.fit_restarts);
  read_key(bo, "bo", "noise", b.noise);
  read_key(bo, "bo", "max_segment_scale", b.max_segment_scale);
  read_solver(tree.get_child("solver", empty), "solver", b.solver);
  read_solver(tree.get_child("sub_solver", empty), "sub_solver", b.sub_solver);
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return read_experiment_config(in);
}

void write_experiment_config(std::ostream& out, const ExperimentConfig& c) {
  const BoConfig& b = c.bo;
  out << "[experiment]\n"
      << "benchmark = " << c.benchmark << '\n'
      << "replications = " << c.replications << '\n'
      << "seed = " << c.seed << '\n'
      << "out_dir = " << c.out_dir << '\n'
      << "workers = " << c.workers << "\n\n"
      << "[bo]\n"
      << "budget = " << b.max_iterations << '\n'
      << "init_samples = " << b.init_samples << '\n'
      << "pool_sub = " << b.pool_sub << '\n'
      << "pool_rand = " << b.pool_rand << '\n'
      << "beta_coefficient = " << format_double(b.beta_coefficient) << '\n'
      << "beta_rule = " << (b.beta_rule == BetaRule::Empirical ? "empirical" : "theoretical") << '\n'
      << "beta_delta = " << format_double(b.theoretical.delta) << '\n'
      << "beta_a = " << format_double(b.theoretical.a) << '\n'
      << "beta_b = " << format_double(b.theoretical.b) << '\n'
      << "beta_r = " << format_double(b.theoretical.r) << '\n'
      << "polish_steps = " << b.polish_steps << '\n'
      << "polish_step_size = " << format_double(b.polish_step_size) << '\n';
  if (!b.addgp_groups.empty()) out << "addgp_groups = " << format_groups(b.addgp_groups) << '\n';
  out << "warm_start = " << (b.warm_start ? "true" : "false") << '\n'
      << "fit_restarts = " << b.fit_restarts << '\n'
      << "noise = " << format_double(b.noise) << '\n'
      << "max_segment_scale = " << b.max_segment_scale << "\n\n";
  write_solver(out, "solver", b.solver);
  out << '\n';
  write_solver(out, "sub_solver", b.sub_solver);
}

void apply_env_overrides(ExperimentConfig& config) {
  if (const auto v = env_seconds("PWLBO_TIME_LIMIT")) config.bo.solver.time_limit_s = *v;
  if (const auto v = env_seconds("PWLBO_SUB_TIME_LIMIT")) config.bo.sub_solver.time_limit_s = *v;
}

std::vector<SummaryRow> summarize(const std::vector<BoTrace>& traces) {
  std::size_t rows = 0;
  for (const BoTrace& t : traces) rows = std::max(rows, t.records.size());
  std::vector<SummaryRow> out;
  for (std::size_t k = 0; k < rows; ++k) {
    std::vector<double> best, regret;
    SummaryRow row;
    row.row = static_cast<int>(k);
    for (const BoTrace& t : traces) {
      if (k >= t.records.size()) continue;
      row.iteration = t.records[k].iteration;
      best.push_back(t.records[k].best);
      regret.push_back(t.records[k].regret);
    }
    row.count = static_cast<int>(best.size());
    row.mean_best = mean_of(best);
    row.std_best = std_of(best, row.mean_best);
    row.mean_regret = mean_of(regret);
    row.std_regret = std_of(regret, row.mean_regret);
    out.push_back(row);
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "row,iteration,count,mean_best,std_best,mean_regret,std_regret\n";
  for (const SummaryRow& r : rows) {
    out << r.row << ',' << r.iteration << ',' << r.count << ',' << format_double(r.mean_best) << ','
        << format_double(r.std_best) << ',' << format_double(r.mean_regret) << ',' << format_double(r.std_regret)
        << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("summary file is empty");
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != 7) throw ConfigError("summary row has " + std::to_string(f.size()) + " fields");
    SummaryRow r;
    r.row = std::stoi(f[0]);
    r.iteration = std::stoi(f[1]);
    r.count = std::stoi(f[2]);
    r.mean_best = parse_double(f[3]);
    r.std_best = parse_double(f[4]);
    r.mean_regret = parse_double(f[5]);
    r.std_regret = parse_double(f[6]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<BoTrace> cmd_bo_run(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const BenchmarkFn& fn = find_benchmark(config.benchmark);
  const Problem problem = make_problem(fn);
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream snap(dir / "config.ini");
    write_experiment_config(snap, config);
  }

  std::vector<BoTrace> traces(static_cast<std::size_t>(config.replications));
  std::vector<std::string> errors(traces.size());
  std::atomic<int> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (int k = next++; k < config.replications; k = next++) {
      BoConfig bo = config.bo;
      bo.seed = config.seed + static_cast<std::uint64_t>(k);
      try {
        traces[static_cast<std::size_t>(k)] =
            bo.addgp_groups.empty() ? run_bo(problem, bo) : additive_run(problem, bo);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(k)] = e.what();
        continue;
      }
      const BoTrace& tr = traces[static_cast<std::size_t>(k)];
      std::ofstream trace_file(dir / ("trace_seed" + std::to_string(bo.seed) + ".csv"));
      write_trace_csv(trace_file, tr);
      std::ofstream timing_file(dir / ("timings_seed" + std::to_string(bo.seed) + ".csv"));
      write_timings_csv(timing_file, tr);
      const std::lock_guard<std::mutex> lock(log_mutex);
      log << "seed " << bo.seed << ": best " << format_double(tr.best());
      if (tr.aborted) log << " (aborted: " << tr.abort_reason << ")";
      log << '\n';
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min(config.workers, config.replications); ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty())
      throw std::runtime_error("replication with seed " + std::to_string(config.seed + k) + " failed: " + errors[k]);
  }
  std::ofstream summary(dir / "summary.csv");
  write_summary_csv(summary, summarize(traces));
  return traces;
}

AcqInstance random_acq_instance(const AcqInstanceSpec& spec) {
  if (spec.dim < 1 || spec.points < 1) throw ConfigError("instance needs dim >= 1 and points >= 1");
  if (!(spec.variance > 0.0) || !(spec.lengthscale > 0.0) || !(spec.noise > 0.0))
    throw ConfigError("instance kernel parameters must be positive");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  AcqInstance inst;
  inst.params = {spec.variance, spec.lengthscale, spec.noise};
  Matrix X(spec.points, spec.dim);
  for (int i = 0; i < spec.points; ++i) {
    for (int d = 0; d < spec.dim; ++d) X(i, d) = unif(rng);
  }
  const GramFactor f = factorize_gram(matern_gram(X, inst.params), spec.noise);
  Vector z(spec.points);
  for (int i = 0; i < spec.points; ++i) z[i] = normal(rng);
  inst.data = Dataset(X, f.llt.matrixL() * z);
  inst.beta = spec.beta ? *spec.beta : beta_schedule(spec.points, spec.dim);
  return inst;
}

AcqReport solve_acquisition(const AcqInstance& instance, const BoConfig& config, std::uint64_t seed) {
  const int dim = instance.data.dim();
  std::vector<int> all(static_cast<std::size_t>(dim));
  for (int d = 0; d < dim; ++d) all[static_cast<std::size_t>(d)] = d;
  const std::vector<KernelGroup> groups{{all, instance.params}};
  const AdditiveGpModel exact(instance.data, groups, instance.params.noise);
  const ApproxGp agp = build_approx_gp(instance.data, groups, instance.params.noise, config.max_segment_scale);
  const Box unit = Box::unit(dim);
  const AcquisitionResult res = optimize_acquisition(agp, exact, 0, instance.beta, unit, {}, config, seed);

  AcqReport rep;
  rep.pk_x = res.x;
  rep.pk_lcb = res.lcb_polished;
  rep.gap = res.gap;
  rep.status = res.status;
  rep.nodes = res.nodes;
  NelderMeadConfig nm;
  nm.start = unit.center();
  const NelderMeadResult nr =
      nelder_mead([&](const Vector& x) { return exact.component_lcb(0, x, instance.beta); }, unit, nm);
  rep.nm_x = nr.x;
  rep.nm_lcb = nr.value;
  return rep;
}

AcqReport cmd_solve_acq(const AcqInstanceSpec& spec, const BoConfig& config, std::ostream& out) {
  const AcqInstance inst = random_acq_instance(spec);
  const AcqReport rep = solve_acquisition(inst, config, spec.seed);
  const auto point = [](const Vector& x) {
    std::string s;
    for (int d = 0; d < x.size(); ++d) s += (d ? " " : "") + format_double(x[d]);
    return s;
  };
  out << "instance: dim=" << spec.dim << " points=" << spec.points << " beta=" << format_double(inst.beta)
      << " seed=" << spec.seed << '\n'
      << "pk_miqp: lcb=" << format_double(rep.pk_lcb) << " x=" << point(rep.pk_x) << " status=" << rep.status
      << " gap=" << format_double(rep.gap) << " nodes=" << rep.nodes << '\n'
      << "nelder_mead: lcb=" << format_double(rep.nm_lcb) << " x=" << point(rep.nm_x) << '\n';
  return rep;
}

void cmd_export_model(const ExportSpec& spec, std::ostream& out) {
  spec.data.validate();
  const auto [sd, transform] = standardize(spec.data, spec.bounds);
  const int dim = sd.dim();
  const Box unit = Box::unit(dim);
  const PwlKernel pwl(build_breakpoints(dim, unit, spec.params.lengthscale), spec.params);
  const MiqpModel model = spec.mean_only ? build_sub_model(pwl, sd, unit) : build_full_model(pwl, sd, spec.beta, unit);
  export_lp_text(out, model);
}

void cmd_linearize(int dim, const Box& bounds, const KernelParams& params, std::ostream& out,
                   int samples_per_segment) {
  const PwlKernel pwl(build_breakpoints(dim, bounds, params.lengthscale), params);
  const ApproxErrorReport err = max_error(pwl, samples_per_segment);
  out << "j,R,k,segment_error,eps_M\n";
  for (int j = 0; j < pwl.knots().size(); ++j) {
    const double seg = j == 0 ? std::numeric_limits<double>::quiet_NaN() : err.per_segment[static_cast<std::size_t>(j - 1)];
    out << j << ',' << format_double(pwl.knots()[j]) << ',' << format_double(pwl.knot_values()[j]) << ','
        << format_double(seg) << ',' << format_double(err.eps_m) << '\n';
  }
}

}  // namespace pwlbo
