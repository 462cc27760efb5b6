// Copyright 2026 The oqw-hitting Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// oqw: hitting-time analysis of open quantum walks.
//
// Exit codes: 0 success, 1 I/O, parse or usage error, 2 validation failure,
// 3 numeric failure.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oqw/oqw.hpp"

namespace {

using namespace oqw;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

class Output {
 public:
  explicit Output(const std::string& path) : path_(path) {
    if (!path_.empty()) {
      file_.open(path_);
      if (!file_) throw std::ios_base::failure("cannot open output file '" + path_ + "'");
    }
  }
  std::ostream& stream() { return path_.empty() ? std::cout : file_; }
  bool to_file() const { return !path_.empty(); }
  const std::string& path() const { return path_; }
  void close() {
    if (file_.is_open()) file_.close();
  }

 private:
  std::string path_;
  std::ofstream file_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void finish(Output& out, RunManifest m, const Stopwatch& sw) {
  out.close();
  if (!out.to_file()) return;
  m.wall_seconds = sw.seconds();
  write_manifest(out.path(), m);
}

std::string stem(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) return path.substr(0, dot);
  return path;
}

struct Common {
  std::string graph_file;
  std::string out;
  unsigned workers = default_parallelism();
};

void add_common(CLI::App* sub, Common& c, bool with_out = true) {
  sub->add_option("graph", c.graph_file, "Graph-spec JSON file")->required();
  if (with_out) sub->add_option("--out", c.out, "Output CSV (default: standard output)");
  sub->add_option("--workers", c.workers, "Degree of parallelism (default: OQW_THREADS or 1)")
      ->check(CLI::PositiveNumber);
}

int cmd_validate(const Common& c) {
  const GraphSpec g = load_graph_file(c.graph_file);
  const auto report = validate(g);
  std::cout << "graph " << c.graph_file << " (fingerprint " << fingerprint(g) << ")\n";
  for (const auto& m : report.messages()) std::cout << m << '\n';
  if (report.clean()) {
    std::cout << "ok: graph is valid for the jump analysis\n";
    return kExitOk;
  }
  return kExitValidation;
}

int cmd_density(const Common& c, double tmax, std::size_t points) {
  Stopwatch sw;
  const GraphSpec g = load_graph_file(c.graph_file);
  const HittingProblem p(g);
  if (tmax == 0.0) tmax = p.default_horizon();
  const auto d = p.density(TimeGrid::uniform(tmax, points), c.workers);
  for (const auto& w : d.warnings) std::cerr << "warning: " << w << '\n';
  Output out(c.out);
  CsvWriter csv(out.stream());
  csv.header({"t", "h"});
  for (std::size_t i = 0; i < d.times.size(); ++i) csv.numbers({d.times[i], d.density[i]});
  std::cerr << "total probability on grid: " << format_double(d.total_probability) << '\n';
  finish(out,
         {"density",
          {{"graph", c.graph_file}, {"tmax", tmax}, {"points", points}},
          d.graph_fingerprint},
         sw);
  return kExitOk;
}

int cmd_moments(const Common& c, int max_order, const std::string& method, double tmax,
                std::size_t points) {
  Stopwatch sw;
  const GraphSpec g = load_graph_file(c.graph_file);
  const HittingProblem p(g);
  const bool want_pinv = method != "numeric";
  const bool want_num = method != "pseudoinverse";
  std::vector<MomentResult> pinv;
  if (want_pinv) pinv = p.moments(max_order);
  std::vector<MomentResult> num;
  if (want_num) {
    if (tmax == 0.0) tmax = 2.0 * p.default_horizon();
    const auto d = p.density(TimeGrid::uniform(tmax, points), c.workers);
    for (const auto& w : d.warnings) std::cerr << "warning: " << w << '\n';
    for (int n = 1; n <= max_order; ++n) num.push_back(moment_numeric(d, n));
  }
  Output out(c.out);
  CsvWriter csv(out.stream());
  csv.header({"order", "pseudoinverse", "numeric", "defect_flag"});
  bool warned = false;
  for (int n = 1; n <= max_order; ++n) {
    const std::size_t i = static_cast<std::size_t>(n - 1);
    const bool defect = want_pinv && pinv[i].defective;
    csv.row({std::to_string(n), want_pinv ? format_double(pinv[i].value) : "",
             want_num ? format_double(num[i].value) : "", defect ? "1" : "0"});
    if (!warned) {
      if (want_pinv)
        for (const auto& w : pinv[i].warnings) std::cerr << "warning: " << w << '\n';
      if (want_num)
        for (const auto& w : num[i].warnings) std::cerr << "warning: " << w << '\n';
      warned = true;
    }
  }
  nlohmann::json params = {{"graph", c.graph_file}, {"max_order", max_order}, {"method", method}};
  if (want_num) {
    params["tmax"] = tmax;
    params["points"] = points;
  }
  finish(out, {"moments", params, fingerprint(g)}, sw);
  return kExitOk;
}

int cmd_sample(const Common& c, long long trajectories, std::uint64_t seed, double max_time,
               double step) {
  Stopwatch sw;
  if (trajectories < 1) throw std::invalid_argument("--trajectories must be >= 1");
  const GraphSpec g = load_graph_file(c.graph_file);
  const HittingProblem p(g);
  TrajectoryConfig cfg;
  cfg.num_trajectories = static_cast<std::size_t>(trajectories);
  cfg.master_seed = seed;
  cfg.max_time = max_time;
  cfg.step_dt = step;
  cfg.workers = c.workers;
  const auto e = sample_ensemble(p, cfg);
  Output out(c.out);
  CsvWriter csv(out.stream());
  csv.header({"time", "censored"});
  for (const auto& s : e.samples) csv.row({format_double(s.time), s.censored ? "1" : "0"});
  std::ostringstream summary;
  summary << "samples=" << e.samples.size() << " censored=" << e.censored_count;
  if (e.uncensored_count() > 0) {
    const auto m = empirical_moments(e);
    summary << " mean=" << format_double(m.mean) << " se_mean=" << format_double(m.mean_standard_error);
    if (m.variance) summary << " variance=" << format_double(*m.variance);
    if (m.variance_standard_error) summary << " se_variance=" << format_double(*m.variance_standard_error);
  }
  // summary goes to stdout only when the samples go to a file
  (out.to_file() ? std::cout : std::cerr) << summary.str() << '\n';
  finish(out,
         {"sample",
          {{"graph", c.graph_file},
           {"trajectories", trajectories},
           {"seed", seed},
           {"max_time", e.max_time},
           {"step", step}},
          fingerprint(g)},
         sw);
  return kExitOk;
}

int cmd_discrete(const Common& c, const std::vector<double>& ladder, double horizon) {
  Stopwatch sw;
  for (double dt : ladder) {
    if (!(dt > 0.0)) throw std::invalid_argument("--dt-ladder entries must be > 0");
  }
  const GraphSpec g = load_graph_file(c.graph_file);
  const auto table = convergence_check(g, g.initial_density(), ladder, horizon, c.workers);
  Output out(c.out);
  CsvWriter csv(out.stream());
  csv.header({"delta_t", "n_max", "max_error"});
  for (const auto& r : table.rows) {
    csv.row({format_double(r.delta_t), std::to_string(r.n_max), format_double(r.max_error)});
  }
  if (table.slope) std::cerr << "log-log slope: " << format_double(*table.slope) << '\n';
  nlohmann::json params = {{"graph", c.graph_file}, {"dt_ladder", ladder}, {"horizon", horizon}};
  if (table.slope) params["slope"] = *table.slope;
  finish(out, {"discrete", params, fingerprint(g)}, sw);
  return kExitOk;
}

int cmd_nplus1(const Common& c, const std::vector<double>& v_ladder, double dt, double horizon,
               std::size_t points) {
  Stopwatch sw;
  for (double v : v_ladder) {
    if (!(v > 0.0)) throw std::invalid_argument("--v-ladder entries must be > 0");
  }
  const GraphSpec g = load_graph_file(c.graph_file);
  const auto study = nplus1_convergence(g, g.initial_density(), v_ladder, dt, horizon, c.workers);
  const std::string base = c.out.empty() ? std::string{} : stem(c.out);
  if (!base.empty()) {
    const TimeGrid grid = TimeGrid::uniform(study.horizon, points);
    for (double v : v_ladder) {
      const std::string path = base + "_v" + format_double(v) + ".csv";
      const auto d = nplus1_density(g, g.initial_density(), v, grid, c.workers);
      Output o(path);
      CsvWriter csv(o.stream());
      csv.header({"t", "h"});
      for (std::size_t i = 0; i < d.times.size(); ++i) csv.numbers({d.times[i], d.density[i]});
      finish(o,
             {"nplus1-density",
              {{"graph", c.graph_file}, {"v", v}, {"tmax", study.horizon}, {"points", points}},
              fingerprint(g)},
             sw);
    }
    Output ref(base + "_reference.csv");
    CsvWriter csv(ref.stream());
    csv.header({"t", "h"});
    for (std::size_t k = 0; k < study.reference.values.size(); ++k) {
      csv.numbers({dt * static_cast<double>(k), study.reference.values[k] / dt});
    }
    finish(ref, {"nplus1-reference", {{"graph", c.graph_file}, {"dt", dt}, {"tmax", study.horizon}},
                 fingerprint(g)},
           sw);
  }
  Output out(c.out);
  CsvWriter csv(out.stream());
  csv.header({"v", "l1_distance", "total_probability"});
  for (const auto& r : study.rows) csv.numbers({r.v, r.l1_distance, r.total_probability});
  finish(out,
         {"nplus1",
          {{"graph", c.graph_file}, {"v_ladder", v_ladder}, {"dt", dt}, {"horizon", study.horizon}},
          fingerprint(g)},
         sw);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hitting-time statistics of continuous-time open quantum walks"};
  app.set_version_flag("--version", std::string(oqw::kVersion));
  app.require_subcommand(1);
  std::function<int()> run;

  Common c;

  auto* val = app.add_subcommand("validate", "Check a graph for the jump analysis");
  add_common(val, c, false);
  val->callback([&] { run = [&] { return cmd_validate(c); }; });

  double tmax = 0.0;
  std::size_t points = 2001;
  auto* den = app.add_subcommand("density", "Hitting-time density h(t) as CSV t,h");
  add_common(den, c);
  den->add_option("--tmax", tmax, "Grid end (default: 20x the mean)")->check(CLI::NonNegativeNumber);
  den->add_option("--points", points, "Grid points")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
  den->callback([&] { run = [&] { return cmd_density(c, tmax, points); }; });

  int max_order = 2;
  std::string method = "both";
  std::size_t mom_points = 20001;
  auto* mom = app.add_subcommand("moments", "Raw moments as CSV order,pseudoinverse,numeric,defect_flag");
  add_common(mom, c);
  mom->add_option("--max-order", max_order, "Highest moment order")->check(CLI::Range(1, 64));
  mom->add_option("--method", method, "pseudoinverse, numeric or both")
      ->check(CLI::IsMember({"both", "pseudoinverse", "numeric"}));
  mom->add_option("--tmax", tmax, "Quadrature grid end (default: 40x the mean)")
      ->check(CLI::NonNegativeNumber);
  mom->add_option("--points", mom_points, "Quadrature grid points")
      ->check(CLI::Range(std::size_t{3}, std::size_t{100000000}));
  mom->callback([&] { run = [&] { return cmd_moments(c, max_order, method, tmax, mom_points); }; });

  long long trajectories = 1000;
  std::uint64_t seed = 0;
  double max_time = 0.0, step = 0.0;
  auto* smp = app.add_subcommand("sample", "Monte Carlo first-jump times as CSV time,censored");
  add_common(smp, c);
  smp->add_option("--trajectories", trajectories, "Number of trajectories");
  smp->add_option("--seed", seed, "Master seed");
  smp->add_option("--max-time", max_time, "Censoring horizon (default: 100x the mean)")
      ->check(CLI::NonNegativeNumber);
  smp->add_option("--step", step, "Survival table step (default: mean / 100)")
      ->check(CLI::NonNegativeNumber);
  smp->callback([&] { run = [&] { return cmd_sample(c, trajectories, seed, max_time, step); }; });

  std::vector<double> dt_ladder = {1e-2, 1e-3, 1e-4};
  double horizon = 0.0;
  auto* dis = app.add_subcommand("discrete", "Measured-walk convergence table delta_t,n_max,max_error");
  add_common(dis, c);
  dis->add_option("--dt-ladder", dt_ladder, "Comma-separated time steps")->delimiter(',');
  dis->add_option("--horizon", horizon, "Comparison window (default: 20x the mean)")
      ->check(CLI::NonNegativeNumber);
  dis->callback([&] { run = [&] { return cmd_discrete(c, dt_ladder, horizon); }; });

  std::vector<double> v_ladder = {5, 50, 500};
  double ref_dt = 1e-4;
  std::size_t np1_points = 2001;
  auto* np1 = app.add_subcommand(
      "nplus1", "Fictitious-site convergence table v,l1_distance,total_probability");
  add_common(np1, c);
  np1->add_option("--v-ladder", v_ladder, "Comma-separated fictitious-site rates")->delimiter(',');
  np1->add_option("--dt", ref_dt, "Measured-walk reference step")->check(CLI::PositiveNumber);
  np1->add_option("--horizon", horizon, "Comparison window (default: 20x the mean at the smallest v)")
      ->check(CLI::NonNegativeNumber);
  np1->add_option("--points", np1_points, "Points of each per-v density CSV")
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
  np1->callback([&] { run = [&] { return cmd_nplus1(c, v_ladder, ref_dt, horizon, np1_points); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitIo;
  }

  try {
    return run();
  } catch (const oqw::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const oqw::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const oqw::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}
