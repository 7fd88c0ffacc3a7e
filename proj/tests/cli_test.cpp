/* Copyright 2026 The qtens Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// End-to-end checks of the qtens binary: report contents and schema,
// determinism, on-disk formats, and exit-code discipline. The binary path
// comes from the QTENS_CLI environment variable, the report schema from
// QTENS_SCHEMA (both set by ctest).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "json.hpp"
#include "qtens/tensor.hpp"
#include "qtens/tensor_file.hpp"
#include "support/json_schema.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using qtens::DenseTensor;
using qtens::index_t;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << content;
  REQUIRE(os.good());
}

/// Scratch directory for one test case, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("qtens_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

const char* cli_path() {
  const char* p = std::getenv("QTENS_CLI");
  REQUIRE(p != nullptr);  // set by ctest
  return p;
}

RunResult run_cli(const TempDir& dir, const std::string& args) {
  const std::string out_path = dir.file("stdout.txt");
  const std::string err_path = dir.file("stderr.txt");
  const std::string cmd =
      std::string("\"") + cli_path() + "\" " + args + " > \"" + out_path + "\" 2> \"" + err_path + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

const json& report_schema() {
  static const json schema = [] {
    const char* p = std::getenv("QTENS_SCHEMA");
    REQUIRE(p != nullptr);
    return json::parse(read_file(p));
  }();
  return schema;
}

void require_schema_valid(const json& report) {
  const std::vector<std::string> errors = qtens_tests::validate_schema(report_schema(), report);
  for (const std::string& e : errors) UNSCOPED_INFO(e);
  REQUIRE(errors.empty());
}

json strip_wall_time(json j) {
  j.erase("wall_time");
  return j;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

TEST_CASE("gen writes deterministic tensors and a valid report", "[cli]") {
  TempDir dir;
  const std::string args = "gen --shape 8,7,6 --rank 3 --noise 0.05 --seed 5";
  const RunResult a =
      run_cli(dir, args + " --output " + dir.file("a.qtns") + " --report " + dir.file("ra.json"));
  const RunResult b =
      run_cli(dir, args + " --output " + dir.file("b.qtns") + " --report " + dir.file("rb.json"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);

  // Same seed, same bytes.
  REQUIRE(read_file(dir.file("a.qtns")) == read_file(dir.file("b.qtns")));

  const json ra = json::parse(read_file(dir.file("ra.json")));
  const json rb = json::parse(read_file(dir.file("rb.json")));
  require_schema_valid(ra);
  REQUIRE(strip_wall_time(ra)["output"] == dir.file("a.qtns"));
  json ra_cmp = strip_wall_time(ra);
  json rb_cmp = strip_wall_time(rb);
  ra_cmp.erase("output");
  rb_cmp.erase("output");
  REQUIRE(ra_cmp == rb_cmp);

  // The report also goes to stdout, byte for byte.
  REQUIRE(a.out == read_file(dir.file("ra.json")));

  const DenseTensor t = qtens::read_tensor(dir.file("a.qtns"));
  REQUIRE(t.shape() == std::vector<index_t>{8, 7, 6});
}

TEST_CASE("gen --grid-bits reports an exactly attainable error floor", "[cli]") {
  TempDir dir;
  const RunResult r = run_cli(dir, "gen --shape 12,10,8 --rank 4 --grid-bits 8 --seed 3 --output " +
                                       dir.file("t.qtns") + " --report " + dir.file("r.json"));
  REQUIRE(r.code == 0);
  const json rep = json::parse(r.out);
  require_schema_valid(rep);
  REQUIRE(rep["grid_bits"] == 8);
  REQUIRE(rep["floor_e_quant"].get<double>() < 1e-12);

  // With relative noise the truth factors sit at exactly that error level.
  const RunResult n = run_cli(dir, "gen --shape 12,10,8 --rank 4 --grid-bits 8 --noise 0.01 --seed 5 "
                                   "--output " +
                                       dir.file("n.qtns") + " --report " + dir.file("n.json"));
  REQUIRE(n.code == 0);
  const json nrep = json::parse(n.out);
  require_schema_valid(nrep);
  const double floor = nrep["floor_e_quant"].get<double>();
  REQUIRE(floor > 0.009);
  REQUIRE(floor < 0.011);
}

TEST_CASE("qfactorize solves the reproducible fixture to the floor", "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "gen --shape 12,10,8 --rank 4 --grid-bits 8 --seed 3 --output " +
                           dir.file("t.qtns"))
              .code == 0);

  const std::string args = "qfactorize --input " + dir.file("t.qtns") +
                           " --rank 4 --bits 8 --scheme minmax --asymmetric --seed 3 --init-sweeps 30 --report " +
                           dir.file("r.json") + " --trace " + dir.file("t.csv");
  const RunResult r = run_cli(dir, args);
  REQUIRE(r.code == 0);

  const json rep = json::parse(r.out);
  require_schema_valid(rep);
  REQUIRE(rep["e_quant"].get<double>() < 1e-10);
  REQUIRE(rep["converged"].get<bool>());
  REQUIRE(rep["scheme"]["method"] == "minmax");
  REQUIRE(rep["scheme"]["symmetric"] == false);
  REQUIRE(rep["params_before"] == 12 * 10 * 8);
  REQUIRE(rep["params_after"] == 4 * (12 + 10 + 8));

  const std::vector<std::string> trace = lines_of(read_file(dir.file("t.csv")));
  REQUIRE(trace.at(0) == "sweep,e_quant,rel_error");
  REQUIRE(static_cast<int>(trace.size()) == rep["sweeps"].get<int>() + 1);
  REQUIRE(trace.at(1).rfind("1,", 0) == 0);

  // Identical configuration reproduces the report and trace exactly.
  const RunResult r2 = run_cli(dir, "qfactorize --input " + dir.file("t.qtns") +
                                        " --rank 4 --bits 8 --scheme minmax --asymmetric --seed 3 --init-sweeps 30 --report " +
                                        dir.file("r2.json") + " --trace " + dir.file("t2.csv"));
  REQUIRE(r2.code == 0);
  REQUIRE(strip_wall_time(json::parse(r2.out)) == strip_wall_time(rep));
  REQUIRE(read_file(dir.file("t2.csv")) == read_file(dir.file("t.csv")));
}

TEST_CASE("qfactorize reports layer BOPs when spatial dims are given", "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "gen --shape 16,8,9 --rank 3 --noise 0.1 --seed 7 --output " + dir.file("t.qtns"))
              .code == 0);
  const RunResult r = run_cli(dir, "qfactorize --input " + dir.file("t.qtns") +
                                       " --rank 3 --bits 4 --act-bits 8 --height 10 --width 10 "
                                       "--outer-max 30 --report " +
                                       dir.file("r.json"));
  REQUIRE(r.code == 0);
  const json rep = json::parse(r.out);
  require_schema_valid(rep);
  // 16x8 kernel of spatial size 3x3 on a 10x10 input.
  REQUIRE(rep["bops"]["baseline_macs"] == 16 * 8 * 9 * 100);
  REQUIRE(rep["bops"]["baseline_bops"] == rep["bops"]["baseline_macs"].get<std::int64_t>() * 1024);
  REQUIRE(rep["bops"]["macs"] == 3 * (16 + 8 + 9) * 100);
  REQUIRE(rep["bops"]["bops"] == rep["bops"]["macs"].get<std::int64_t>() * 4 * 8);
}

TEST_CASE("compare ties its two joint runs when both start from the same random init", "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "gen --shape 10,8,6 --rank 3 --noise 0.05 --seed 9 --output " + dir.file("t.qtns"))
              .code == 0);
  const RunResult r = run_cli(dir, "compare --input " + dir.file("t.qtns") +
                                       " --rank 3 --bits 6 --init-sweeps 0 --seed 2 --outer-max 60 --report " +
                                       dir.file("r.json"));
  REQUIRE(r.code == 0);
  const json rep = json::parse(r.out);
  require_schema_valid(rep);
  REQUIRE(rep["jobs"]["joint_random"]["e_quant"] == rep["jobs"]["joint_balanced"]["e_quant"]);
  REQUIRE(rep["winners"]["joint_balanced_vs_joint_random"] == "tie");
}

TEST_CASE("compress-conv factorizes a kernel file end to end", "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "gen --shape 16,8,3,3 --rank 5 --noise 0.02 --seed 2 --output " + dir.file("k.qtns"))
              .code == 0);
  const RunResult r = run_cli(dir, "compress-conv --input " + dir.file("k.qtns") +
                                       " --rate 2 --bits 4 --act-bits 8 --height 10 --width 10 "
                                       "--seed 1 --outer-max 40 --out-prefix " +
                                       dir.file("w") + " --report " + dir.file("r.json"));
  REQUIRE(r.code == 0);
  const json rep = json::parse(r.out);
  require_schema_valid(rep);

  // floor(16*8*9 / (16+8+9) / 2) = 17
  REQUIRE(rep["rank"] == 17);
  REQUIRE(rep["path"] == "conv");
  REQUIRE(rep["baseline"]["macs"] == 16 * 8 * 9 * 100);
  REQUIRE(rep["compressed"]["macs"] == (17 * 8 + 17 * 9 + 16 * 17) * 100);
  REQUIRE(rep["compressed"]["bops"] ==
          rep["compressed"]["macs"].get<std::int64_t>() * 4 * 8);
  REQUIRE(rep["probe_deviation"].get<double>() >= 0.0);

  const DenseTensor first = qtens::read_tensor(rep["outputs"]["first"].get<std::string>());
  const DenseTensor mid = qtens::read_tensor(rep["outputs"]["mid"].get<std::string>());
  const DenseTensor last = qtens::read_tensor(rep["outputs"]["last"].get<std::string>());
  REQUIRE(first.shape() == std::vector<index_t>{17, 8});
  REQUIRE(mid.shape() == std::vector<index_t>{3, 3, 17});
  REQUIRE(last.shape() == std::vector<index_t>{16, 17});
}

TEST_CASE("factorize runs plain als with a csv trace", "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "gen --shape 14,11 --rank 4 --noise 0.1 --seed 6 --output " + dir.file("t.qtns"))
              .code == 0);
  const RunResult r = run_cli(dir, "factorize --input " + dir.file("t.qtns") +
                                       " --rank 4 --seed 1 --outer-max 25 --report " + dir.file("r.json") +
                                       " --trace " + dir.file("t.csv"));
  REQUIRE(r.code == 0);
  const json rep = json::parse(r.out);
  require_schema_valid(rep);
  REQUIRE(rep["rel_error"].get<double>() >= 0.0);
  REQUIRE(rep["rel_error"].get<double>() < 1.0);
  const std::vector<std::string> trace = lines_of(read_file(dir.file("t.csv")));
  REQUIRE(trace.at(0) == "sweep,rel_error");
  REQUIRE(static_cast<int>(trace.size()) == rep["sweeps"].get<int>() + 2);  // header + init + sweeps
}

TEST_CASE("malformed inputs exit with the usage code", "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "gen --shape 6,5 --rank 2 --seed 1 --output " + dir.file("t.qtns")).code == 0);

  SECTION("truncated tensor file names the byte offset") {
    const std::string full = read_file(dir.file("t.qtns"));
    write_file(dir.file("cut.qtns"), full.substr(0, 30));
    const RunResult r = run_cli(dir, "qfactorize --input " + dir.file("cut.qtns") + " --rank 2");
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("truncated") != std::string::npos);
    REQUIRE(r.err.find("offset") != std::string::npos);
  }
  SECTION("missing input file") {
    const RunResult r = run_cli(dir, "qfactorize --input " + dir.file("nope.qtns") + " --rank 2");
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("cannot open") != std::string::npos);
  }
  SECTION("bit-widths outside the supported range") {
    REQUIRE(run_cli(dir, "qfactorize --input " + dir.file("t.qtns") + " --rank 2 --bits 9").code == 2);
    REQUIRE(run_cli(dir, "qfactorize --input " + dir.file("t.qtns") + " --rank 2 --bits 1").code == 2);
  }
  SECTION("mse scheme cannot be asymmetric") {
    const RunResult r =
        run_cli(dir, "qfactorize --input " + dir.file("t.qtns") + " --rank 2 --scheme mse --asymmetric");
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("asymmetric") != std::string::npos);
  }
  SECTION("rank and rate are mutually exclusive and one is required") {
    REQUIRE(run_cli(dir, "qfactorize --input " + dir.file("t.qtns") + " --rank 2 --rate 2").code == 2);
    const RunResult r = run_cli(dir, "qfactorize --input " + dir.file("t.qtns"));
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("exactly one of --rank and --rate") != std::string::npos);
  }
  SECTION("qfactorize rejects 4-way kernels") {
    REQUIRE(run_cli(dir, "gen --shape 4,3,3,3 --rank 2 --seed 1 --output " + dir.file("k.qtns")).code == 0);
    const RunResult r = run_cli(dir, "qfactorize --input " + dir.file("k.qtns") + " --rank 2");
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("compress-conv") != std::string::npos);
  }
  SECTION("compress-conv rejects even kernels") {
    REQUIRE(run_cli(dir, "gen --shape 4,3,2,2 --rank 2 --seed 1 --output " + dir.file("k2.qtns")).code == 0);
    const RunResult r = run_cli(dir, "compress-conv --input " + dir.file("k2.qtns") +
                                         " --rank 2 --height 5 --width 5");
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("odd") != std::string::npos);
  }
  SECTION("missing required flags and unknown subcommands") {
    REQUIRE(run_cli(dir, "gen --rank 2 --output " + dir.file("x.qtns")).code == 2);
    REQUIRE(run_cli(dir, "frobnicate").code == 2);
    REQUIRE(run_cli(dir, "").code == 2);
  }
  SECTION("help exits cleanly") {
    REQUIRE(run_cli(dir, "--help").code == 0);
    REQUIRE(run_cli(dir, "qfactorize --help").code == 0);
  }
}

}  // namespace
