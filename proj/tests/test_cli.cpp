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

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include "oqw/oqw.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("oqw_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Run run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = scratch() / ("stdout_" + std::to_string(counter));
  const fs::path err = scratch() / ("stderr_" + std::to_string(counter++));
  const std::string cmd = std::string("\"") + OQW_CLI_PATH + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string graph(const char* name) { return "\"" + oqw::testing::graphs_dir() + "/" + name + "\""; }

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("validate exit codes", "[cli]") {
  const auto ok = run_cli("validate " + graph("chain4.json"));
  CHECK(ok.code == 0);
  const auto bad = run_cli("validate " + graph("coherent_final.json"));
  CHECK(bad.code == 2);
  CHECK_THAT(bad.out, ContainsSubstring("3<->4") && ContainsSubstring("nplus1"));
  CHECK(run_cli("validate /nonexistent/graph.json").code == 1);
}

TEST_CASE("malformed graph file exits 1", "[cli]") {
  const fs::path p = scratch() / "broken.json";
  std::ofstream(p) << R"({"num_sites": 2, "incoherent_edges": [{"from": 1, "to": 2, "rate": -1}]})";
  const auto r = run_cli("validate \"" + p.string() + "\"");
  CHECK(r.code == 1);
  CHECK_THAT(r.err, ContainsSubstring("negative rate"));
}

TEST_CASE("density writes t,h with a manifest", "[cli]") {
  const fs::path out = scratch() / "density.csv";
  const auto r = run_cli("density " + graph("chain4_fast.json") + " --tmax 2 --points 3 --out \"" +
                     out.string() + "\"");
  REQUIRE(r.code == 0);
  const auto rows = csv(slurp(out));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"t", "h"});
  CHECK(std::stod(rows[3][0]) == 2.0);
  const auto m = nlohmann::json::parse(slurp(oqw::manifest_path(out.string())));
  CHECK(m["command"] == "density");
  CHECK(m["parameters"]["points"] == 3);
  CHECK(m["graph_fingerprint"].get<std::string>().size() == 16);
  CHECK(m.contains("wall_seconds"));
  CHECK(m["version"] == oqw::kVersion);
}

TEST_CASE("density values round-trip at full precision", "[cli]") {
  const auto r = run_cli("density " + graph("two_site_absorbing.json") + " --tmax 1 --points 11");
  REQUIRE(r.code == 0);
  const auto rows = csv(r.out);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double t = std::stod(rows[i][0]);
    CHECK(std::abs(std::stod(rows[i][1]) - std::exp(-t)) <= 1e-14);
  }
}

TEST_CASE("density of an invalid graph exits 2", "[cli]") {
  CHECK(run_cli("density " + graph("coherent_final.json")).code == 2);
}

TEST_CASE("moments of the two-site graphs", "[cli]") {
  const auto r1 = run_cli("moments " + graph("two_site_absorbing.json") + " --max-order 2");
  REQUIRE(r1.code == 0);
  const auto rows = csv(r1.out);
  CHECK(rows[0] == std::vector<std::string>{"order", "pseudoinverse", "numeric", "defect_flag"});
  CHECK(std::abs(std::stod(rows[1][1]) - 1.0) <= 1e-12);
  CHECK(std::abs(std::stod(rows[1][2]) - 1.0) <= 1e-6);
  CHECK(rows[1][3] == "0");

  const auto r2 = run_cli("moments " + graph("two_site_recurrent.json") + " --method pseudoinverse");
  REQUIRE(r2.code == 0);
  const auto rows2 = csv(r2.out);
  CHECK(std::abs(std::stod(rows2[1][1]) - 1.5) <= 1e-12);
  CHECK(rows2[1][2].empty());
}

TEST_CASE("moments flag defective graphs", "[cli]") {
  const auto r = run_cli("moments " + graph("defective.json") + " --method pseudoinverse");
  REQUIRE(r.code == 0);
  CHECK(csv(r.out)[1][3] == "1");
  CHECK_THAT(r.err, ContainsSubstring("defective"));
}

TEST_CASE("sample is reproducible by seed", "[cli]") {
  const fs::path a = scratch() / "a.csv", b = scratch() / "b.csv";
  const auto ra = run_cli("sample " + graph("two_site_absorbing.json") + " --trajectories 500 --seed 42 --out \"" + a.string() + "\"");
  const auto rb = run_cli("sample " + graph("two_site_absorbing.json") + " --trajectories 500 --seed 42 --out \"" + b.string() +
                      "\" --workers 3");
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK_THAT(ra.out, ContainsSubstring("mean="));
  CHECK(csv(slurp(a))[0] == std::vector<std::string>{"time", "censored"});
  CHECK(csv(slurp(a)).size() == 501);
}

TEST_CASE("sample summary mean on the absorbing two-site graph", "[cli][slow]") {
  const fs::path a = scratch() / "big.csv";
  const auto r = run_cli("sample " + graph("two_site_absorbing.json") + " --trajectories 100000 --seed 7 --out \"" + a.string() + "\"");
  REQUIRE(r.code == 0);
  const auto pos = r.out.find("mean=");
  const auto se = r.out.find("se_mean=");
  REQUIRE(pos != std::string::npos);
  const double mean = std::stod(r.out.substr(pos + 5));
  const double se_mean = std::stod(r.out.substr(se + 8));
  CHECK(std::abs(mean - 1.0) <= 3 * se_mean);
}

TEST_CASE("sample rejects zero trajectories", "[cli]") {
  CHECK(run_cli("sample " + graph("two_site_absorbing.json") + " --trajectories 0").code == 1);
}

TEST_CASE("discrete convergence table", "[cli]") {
  const auto r = run_cli("discrete " + graph("two_site_absorbing.json") + " --dt-ladder 1e-2,1e-3");
  REQUIRE(r.code == 0);
  const auto rows = csv(r.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"delta_t", "n_max", "max_error"});
  CHECK(std::stod(rows[2][2]) < std::stod(rows[1][2]));
  CHECK_THAT(r.err, ContainsSubstring("slope"));
}

TEST_CASE("nplus1 writes per-v densities and the distance table", "[cli]") {
  const fs::path out = scratch() / "np1.csv";
  const auto r = run_cli("nplus1 " + graph("coherent_final.json") + " --v-ladder 5 --dt 1e-3 --horizon 4 --points 41 --out \"" +
                     out.string() + "\"");
  REQUIRE(r.code == 0);
  const auto rows = csv(slurp(out));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"v", "l1_distance", "total_probability"});
  CHECK(fs::exists(scratch() / "np1_v5.csv"));
  CHECK(fs::exists(scratch() / "np1_reference.csv"));
  CHECK(csv(slurp(scratch() / "np1_v5.csv")).size() == 42);
  CHECK(fs::exists(oqw::manifest_path(out.string())));
}

TEST_CASE("nplus1 rejects non-positive rates", "[cli]") {
  CHECK(run_cli("nplus1 " + graph("coherent_final.json") + " --v-ladder 5,-1").code == 1);
  CHECK(run_cli("nplus1 " + graph("coherent_final.json") + " --v-ladder 0").code == 1);
}

TEST_CASE("usage errors exit 1", "[cli]") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("frobnicate").code == 1);
  CHECK(run_cli("density " + graph("chain4.json") + " --points 1").code == 1);
}
