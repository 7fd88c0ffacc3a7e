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

// qtens command-line front end: synthetic tensor generation, plain and
// quantization-constrained factorization, scheme/init comparisons, and
// convolution-layer compression. JSON reports, CSV traces.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qtens/qtens.hpp"

namespace {

using nlohmann::json;
using namespace qtens;

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

/// Everything a subcommand needs, filled from flags.
struct JobConfig {
  std::string input;
  std::string output;
  std::string out_prefix;
  std::string report_path;
  std::string trace_path;

  std::string shape_str;
  index_t rank = 0;       // 0 = unset
  double rate = 0.0;      // 0 = unset
  int bits = 8;
  int act_bits = 8;
  std::string scheme = "mse";
  bool asymmetric = false;
  std::string init = "als-balanced";
  int init_sweeps = 10;
  std::uint64_t seed = 0;
  double eps = 1e-3;
  int inner_max = 20;
  int outer_max = 200;
  int patience = 3;
  double min_improve = 1e-5;

  double noise = 0.0;
  int grid_bits = 0;      // 0 = off-grid generation
  index_t height = 0;
  index_t width = 0;
};

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<index_t> parse_shape(const std::string& s) {
  std::vector<index_t> shape;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size() || v < 1) throw std::invalid_argument("");
      shape.push_back(static_cast<index_t>(v));
    } catch (const std::exception&) {
      throw std::invalid_argument("invalid shape '" + s + "': expected comma-separated positive integers");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (shape.empty()) throw std::invalid_argument("invalid shape: empty");
  return shape;
}

QuantScheme scheme_from(const JobConfig& cfg) {
  QuantScheme s;
  s.method = cfg.scheme == "minmax" ? QuantMethod::MinMax : QuantMethod::MseMinMax;
  s.symmetric = !cfg.asymmetric;
  if (s.method == QuantMethod::MseMinMax && cfg.asymmetric) {
    throw std::invalid_argument("--asymmetric is only supported with --scheme minmax");
  }
  return s;
}

InitMode init_from(const JobConfig& cfg) {
  return cfg.init == "random" ? InitMode::Random : InitMode::AlsBalanced;
}

AdmmConfig admm_from(const JobConfig& cfg) {
  AdmmConfig a;
  a.bits = cfg.bits;
  a.scheme = scheme_from(cfg);
  a.eps = cfg.eps;
  a.inner_max = cfg.inner_max;
  a.outer_max = cfg.outer_max;
  a.patience = cfg.patience;
  a.min_improve = cfg.min_improve;
  return a;
}

json scheme_json(const QuantScheme& s) {
  return json{{"method", s.method == QuantMethod::MinMax ? "minmax" : "mse"}, {"symmetric", s.symmetric}};
}

json shape_json(const std::vector<index_t>& shape) {
  json a = json::array();
  for (index_t e : shape) a.push_back(e);
  return a;
}

Matrix matrix_from_tensor(const DenseTensor& t) {
  Matrix m(t.extent(0), t.extent(1));
  for (index_t i = 0; i < m.rows(); ++i) {
    for (index_t j = 0; j < m.cols(); ++j) m(i, j) = t(i, j);
  }
  return m;
}

DenseTensor tensor_from_matrix(const Matrix& m) {
  DenseTensor t({m.rows(), m.cols()});
  for (index_t i = 0; i < m.rows(); ++i) {
    for (index_t j = 0; j < m.cols(); ++j) t(i, j) = m(i, j);
  }
  return t;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw TensorFileError(path + ": cannot open for writing");
  os << text;
  if (!os) throw TensorFileError(path + ": write failed");
}

void write_report(const JobConfig& cfg, const json& report) {
  const std::string text = report.dump(2) + "\n";
  if (!cfg.report_path.empty()) write_text(cfg.report_path, text);
  std::cout << text;
}

void write_trace(const std::string& path, const std::vector<SweepRecord>& trace) {
  std::string out = "sweep,e_quant,rel_error\n";
  char line[96];
  for (const SweepRecord& r : trace) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", r.sweep, r.e_quant, r.rel_error);
    out += line;
  }
  write_text(path, out);
}

index_t resolve_rank(const JobConfig& cfg, const std::vector<index_t>& shape) {
  if ((cfg.rank > 0) == (cfg.rate > 0.0)) {
    throw std::invalid_argument("exactly one of --rank and --rate must be given");
  }
  if (cfg.rank > 0) return cfg.rank;
  if (shape.size() == 2) return select_rank(shape[0], shape[1], cfg.rate);
  // 3-way tensors are treated as reshaped conv kernels for rank selection
  // when the last extent is a perfect square, and charged T+S+K per rank
  // regardless.
  const double full = static_cast<double>(shape[0]) * static_cast<double>(shape[1]) * static_cast<double>(shape[2]);
  const double per_rank = static_cast<double>(shape[0] + shape[1] + shape[2]);
  const index_t r = static_cast<index_t>(std::floor(full / per_rank / cfg.rate));
  return r < 1 ? 1 : r;
}

index_t params_after(const std::vector<index_t>& shape, index_t rank) {
  index_t per_rank = 0;
  for (index_t e : shape) per_rank += e;
  return rank * per_rank;
}

index_t params_before(const std::vector<index_t>& shape) {
  index_t n = 1;
  for (index_t e : shape) n *= e;
  return n;
}

std::vector<std::string> rank_notes(const std::vector<index_t>& shape, index_t rank) {
  std::vector<std::string> notes;
  bool over = true;
  for (index_t e : shape) over = over && rank > e;
  if (over) notes.push_back("rank exceeds every tensor extent (overcomplete factorization)");
  return notes;
}

// ---------------------------------------------------------------------------
// gen

/// Draws factors whose entries sit exactly on a grid that per-factor
/// asymmetric MinMax re-derivation reproduces: every column is a permutation
/// of one integer multiset containing both extreme codes, scaled by a power
/// of two. Columns then share their norm, so the factor set is balanced.
FactorSet ongrid_factors(const std::vector<index_t>& shape, index_t rank, int bits, std::mt19937_64& rng) {
  const std::int64_t qmin = -(std::int64_t{1} << (bits - 1));
  const std::int64_t qmax = (std::int64_t{1} << (bits - 1)) - 1;
  FactorSet fs;
  for (index_t extent : shape) {
    if (extent < 2) throw std::invalid_argument("--grid-bits requires every extent to be >= 2");
    std::vector<std::int64_t> codes(static_cast<std::size_t>(extent));
    codes[0] = qmin;
    codes[1] = qmax;
    const std::uint64_t span = static_cast<std::uint64_t>(qmax - qmin + 1);
    for (index_t i = 2; i < extent; ++i) {
      codes[static_cast<std::size_t>(i)] = qmin + static_cast<std::int64_t>(rng() % span);
    }
    double sq = 0.0;
    for (std::int64_t c : codes) sq += static_cast<double>(c) * static_cast<double>(c);
    const double scale = std::exp2(std::floor(std::log2(1.0 / std::sqrt(sq))));

    Matrix f(extent, rank);
    std::vector<std::int64_t> perm = codes;
    for (index_t r = 0; r < rank; ++r) {
      for (index_t i = extent - 1; i > 0; --i) {  // Fisher-Yates, explicit for reproducibility
        const index_t j = static_cast<index_t>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
      }
      for (index_t i = 0; i < extent; ++i) f(i, r) = scale * static_cast<double>(perm[static_cast<std::size_t>(i)]);
    }
    fs.factors.push_back(std::move(f));
  }
  return fs;
}

FactorSet dense_factors(const std::vector<index_t>& shape, index_t rank, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FactorSet fs;
  for (index_t extent : shape) {
    Matrix f(extent, rank);
    for (index_t i = 0; i < extent; ++i) {
      for (index_t r = 0; r < rank; ++r) f(i, r) = normal(rng);
    }
    fs.factors.push_back(std::move(f));
  }
  return fs;
}

int cmd_gen(const JobConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<index_t> file_shape = parse_shape(cfg.shape_str);
  if (file_shape.size() < 2 || file_shape.size() > 4) {
    throw std::invalid_argument("gen: shape must have 2, 3 or 4 dimensions");
  }
  if (cfg.rank < 1) throw std::invalid_argument("gen: --rank must be >= 1");
  if (cfg.noise < 0.0) throw std::invalid_argument("gen: --noise must be >= 0");
  if (cfg.output.empty()) throw std::invalid_argument("gen: --output is required");

  // 4-way kernels are generated through their flattened 3-way form.
  std::vector<index_t> shape = file_shape;
  if (file_shape.size() == 4) {
    if (file_shape[2] != file_shape[3]) throw std::invalid_argument("gen: 4-way shapes must have square spatial dims");
    shape = {file_shape[0], file_shape[1], file_shape[2] * file_shape[3]};
  }

  std::mt19937_64 rng(cfg.seed);
  const FactorSet truth = cfg.grid_bits > 0 ? ongrid_factors(shape, cfg.rank, cfg.grid_bits, rng)
                                            : dense_factors(shape, cfg.rank, rng);
  DenseTensor t = reconstruct(truth, shape);

  if (cfg.noise > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> noise(static_cast<std::size_t>(t.size()));
    double nsq = 0.0;
    for (double& v : noise) {
      v = normal(rng);
      nsq += v * v;
    }
    const double target = cfg.noise * t.norm();
    const double gain = nsq > 0.0 ? target / std::sqrt(nsq) : 0.0;
    for (index_t i = 0; i < t.size(); ++i) t[i] += gain * noise[static_cast<std::size_t>(i)];
  }

  json report;
  report["command"] = "gen";
  report["output"] = cfg.output;
  report["shape"] = shape_json(file_shape);
  report["rank"] = cfg.rank;
  report["noise"] = cfg.noise;
  report["seed"] = cfg.seed;
  if (cfg.grid_bits > 0) {
    detail::check_bits(cfg.grid_bits, "gen");
    report["grid_bits"] = cfg.grid_bits;
    // Error the generating on-grid factors attain on the written tensor:
    // the floor any quantized factorization of it can reach.
    report["floor_e_quant"] = e_quant(t, truth);
  }

  if (file_shape.size() == 4) t = reshape_back(t);
  write_tensor(cfg.output, t);
  report["wall_time"] = elapsed_seconds(start);
  write_report(cfg, report);
  return 0;
}

// ---------------------------------------------------------------------------
// factorize (plain ALS, no quantization)

int cmd_factorize(const JobConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const DenseTensor t = read_tensor(cfg.input);
  if (t.ndim() != 2 && t.ndim() != 3) {
    throw std::invalid_argument("factorize: input must be a 2- or 3-way tensor (got " +
                                std::to_string(t.ndim()) + "-way)");
  }
  const index_t rank = resolve_rank(cfg, t.shape());

  AlsConfig als;
  als.rank = rank;
  als.max_iters = cfg.outer_max;
  als.seed = cfg.seed;
  const AlsResult res = cp_als(t, als);

  json report;
  report["command"] = "factorize";
  report["input"] = cfg.input;
  report["shape"] = shape_json(t.shape());
  report["rank"] = rank;
  report["seed"] = cfg.seed;
  report["rel_error"] = res.errors.back();
  report["sweeps"] = res.sweeps;
  report["params_before"] = params_before(t.shape());
  report["params_after"] = params_after(t.shape(), rank);
  const std::vector<std::string> notes = rank_notes(t.shape(), rank);
  report["notes"] = notes;
  report["wall_time"] = elapsed_seconds(start);

  if (!cfg.trace_path.empty()) {
    std::string out = "sweep,rel_error\n";
    char line[64];
    for (std::size_t i = 0; i < res.errors.size(); ++i) {
      std::snprintf(line, sizeof line, "%zu,%.17g\n", i, res.errors[i]);
      out += line;
    }
    write_text(cfg.trace_path, out);
  }
  write_report(cfg, report);
  return 0;
}

// ---------------------------------------------------------------------------
// qfactorize

QuantizedFactorSet run_quantized(const DenseTensor& t, index_t rank, const AdmmConfig& admm,
                                 const AlsConfig& als, InitMode mode) {
  const FactorSet init = init_for_admm(t, als, mode);
  if (t.ndim() == 2) return quantized_matrix_factorization(unfold(t, 0), rank, admm, init);
  return quantized_cpd(t, rank, admm, init);
}

int cmd_qfactorize(const JobConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const DenseTensor t = read_tensor(cfg.input);
  if (t.ndim() != 2 && t.ndim() != 3) {
    throw std::invalid_argument("qfactorize: input must be a 2- or 3-way tensor (got " +
                                std::to_string(t.ndim()) + "-way); use compress-conv for 4-way kernels");
  }
  const index_t rank = resolve_rank(cfg, t.shape());
  const AdmmConfig admm = admm_from(cfg);
  AlsConfig als;
  als.rank = rank;
  als.max_iters = cfg.init_sweeps;
  als.seed = cfg.seed;

  const QuantizedFactorSet qfs = run_quantized(t, rank, admm, als, init_from(cfg));

  json report;
  report["command"] = "qfactorize";
  report["input"] = cfg.input;
  report["shape"] = shape_json(t.shape());
  report["rank"] = rank;
  report["bits"] = cfg.bits;
  report["scheme"] = scheme_json(admm.scheme);
  report["init"] = cfg.init;
  report["init_sweeps"] = cfg.init_sweeps;
  report["seed"] = cfg.seed;
  report["eps"] = cfg.eps;
  report["inner_max"] = cfg.inner_max;
  report["outer_max"] = cfg.outer_max;
  report["patience"] = cfg.patience;
  report["e_quant"] = qfs.e_quant;
  report["rel_error"] = qfs.trace[static_cast<std::size_t>(qfs.best_sweep - 1)].rel_error;
  report["params_before"] = params_before(t.shape());
  report["params_after"] = params_after(t.shape(), rank);
  report["sweeps"] = qfs.sweeps;
  report["best_sweep"] = qfs.best_sweep;
  report["converged"] = qfs.converged;
  report["notes"] = rank_notes(t.shape(), rank);

  // Layer-style BOP accounting when the input spatial size is provided.
  if (cfg.height > 0 && cfg.width > 0) {
    json bops;
    if (t.ndim() == 3) {
      const index_t d = detail::exact_sqrt(t.extent(2));
      if (d < 0) {
        throw std::invalid_argument("qfactorize: last extent must be a perfect square for layer accounting");
      }
      const ConvLayerSpec layer{t.extent(0), t.extent(1), d, cfg.height, cfg.width};
      const BopReport before = bop_count(layer, 32, 32, false);
      const BopReport after = bop_count(layer, cfg.bits, cfg.act_bits, true, rank);
      bops = {{"macs", after.macs}, {"bops", after.bops}, {"baseline_macs", before.macs},
              {"baseline_bops", before.bops}};
    } else {
      const BopReport before = bop_count(t.extent(0), t.extent(1), 32, 32, false);
      const BopReport after = bop_count(t.extent(0), t.extent(1), cfg.bits, cfg.act_bits, true, rank);
      bops = {{"macs", after.macs}, {"bops", after.bops}, {"baseline_macs", before.macs},
              {"baseline_bops", before.bops}};
    }
    report["bops"] = bops;
  }

  report["wall_time"] = elapsed_seconds(start);
  if (!cfg.trace_path.empty()) write_trace(cfg.trace_path, qfs.trace);
  write_report(cfg, report);
  return 0;
}

// ---------------------------------------------------------------------------
// compare

const char* winner(double lhs_e, const char* lhs, double rhs_e, const char* rhs) {
  if (lhs_e < rhs_e) return lhs;
  if (rhs_e < lhs_e) return rhs;
  return "tie";
}

int cmd_compare(const JobConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const DenseTensor t = read_tensor(cfg.input);
  if (t.ndim() != 2 && t.ndim() != 3) {
    throw std::invalid_argument("compare: input must be a 2- or 3-way tensor");
  }
  const index_t rank = resolve_rank(cfg, t.shape());
  const AdmmConfig admm = admm_from(cfg);
  AlsConfig init_als;
  init_als.rank = rank;
  init_als.max_iters = cfg.init_sweeps;
  init_als.seed = cfg.seed;

  // (a) plain ALS followed by a one-shot projection of each factor.
  auto successive = std::async(std::launch::async, [&]() {
    AlsConfig als = init_als;
    als.max_iters = cfg.outer_max;
    const AlsResult res = cp_als(t, als);
    FactorSet proj = res.factors;
    for (Matrix& f : proj.factors) f = project(f, cfg.bits, admm.scheme).values;
    json j;
    j["e_quant"] = e_quant(t, proj);
    j["rel_error"] = res.errors.back();
    j["sweeps"] = res.sweeps;
    return j;
  });

  // (b)/(c) the joint method from the two initializations.
  auto run_joint = [&](InitMode mode) {
    const QuantizedFactorSet qfs = run_quantized(t, rank, admm, init_als, mode);
    json j;
    j["e_quant"] = qfs.e_quant;
    j["rel_error"] = qfs.trace[static_cast<std::size_t>(qfs.best_sweep - 1)].rel_error;
    j["sweeps"] = qfs.sweeps;
    j["best_sweep"] = qfs.best_sweep;
    j["converged"] = qfs.converged;
    return j;
  };
  auto joint_random = std::async(std::launch::async, run_joint, InitMode::Random);
  auto joint_balanced = std::async(std::launch::async, run_joint, InitMode::AlsBalanced);

  json jobs;
  jobs["successive"] = successive.get();
  jobs["joint_random"] = joint_random.get();
  jobs["joint_balanced"] = joint_balanced.get();

  const double ea = jobs["successive"]["e_quant"].get<double>();
  const double eb = jobs["joint_random"]["e_quant"].get<double>();
  const double ec = jobs["joint_balanced"]["e_quant"].get<double>();

  json report;
  report["command"] = "compare";
  report["input"] = cfg.input;
  report["shape"] = shape_json(t.shape());
  report["rank"] = rank;
  report["bits"] = cfg.bits;
  report["scheme"] = scheme_json(admm.scheme);
  report["init_sweeps"] = cfg.init_sweeps;
  report["seed"] = cfg.seed;
  report["jobs"] = jobs;
  report["winners"] = {
      {"joint_balanced_vs_successive", winner(ec, "joint_balanced", ea, "successive")},
      {"joint_random_vs_successive", winner(eb, "joint_random", ea, "successive")},
      {"joint_balanced_vs_joint_random", winner(ec, "joint_balanced", eb, "joint_random")},
  };
  report["wall_time"] = elapsed_seconds(start);
  write_report(cfg, report);
  return 0;
}

// ---------------------------------------------------------------------------
// compress-conv

int cmd_compress_conv(const JobConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const DenseTensor k4 = read_tensor(cfg.input);
  if (k4.ndim() != 4) throw std::invalid_argument("compress-conv: input must be a 4-way kernel");
  if (k4.extent(2) != k4.extent(3)) throw std::invalid_argument("compress-conv: spatial dims must be square");
  if (k4.extent(2) % 2 == 0) throw std::invalid_argument("compress-conv: kernel size must be odd");
  if (cfg.height < 1 || cfg.width < 1) {
    throw std::invalid_argument("compress-conv: --height and --width are required");
  }
  const ConvLayerSpec layer{k4.extent(0), k4.extent(1), k4.extent(2), cfg.height, cfg.width};
  if ((cfg.rank > 0) == (cfg.rate > 0.0)) {
    throw std::invalid_argument("exactly one of --rank and --rate must be given");
  }
  const index_t rank = cfg.rank > 0 ? cfg.rank
                       : layer.kernel == 1 ? select_rank(layer.out_channels, layer.in_channels, cfg.rate)
                                           : select_rank(layer, cfg.rate);

  const AdmmConfig admm = admm_from(cfg);
  AlsConfig als;
  als.rank = rank;
  als.max_iters = cfg.init_sweeps;
  als.seed = cfg.seed;

  FactorizedConvWeights weights;
  weights.rank = rank;
  QuantizedFactorSet qfs;
  const bool matrix_path = layer.kernel == 1;
  if (matrix_path) {
    // A 1x1 kernel is a linear map on channels: factorize the T x S matrix.
    DenseTensor t2({layer.out_channels, layer.in_channels}, k4.values());
    qfs = run_quantized(t2, rank, admm, als, init_from(cfg));
    weights.first = qfs.factors.factors[1].transpose();
    weights.mid = DenseTensor({1, 1, rank}, std::vector<double>(static_cast<std::size_t>(rank), 1.0));
    weights.last = qfs.factors.factors[0];
  } else {
    const DenseTensor k3 = reshape_kernel(k4);
    qfs = run_quantized(k3, rank, admm, als, init_from(cfg));
    weights.first = qfs.factors.factors[1].transpose();
    weights.mid = fold_spatial_factor(qfs.factors.factors[2]);
    weights.last = qfs.factors.factors[0];
  }

  const std::string prefix = cfg.out_prefix.empty() ? "factorized" : cfg.out_prefix;
  const std::string first_path = prefix + "_first.qtns";
  const std::string mid_path = prefix + "_mid.qtns";
  const std::string last_path = prefix + "_last.qtns";
  write_tensor(first_path, tensor_from_matrix(weights.first));
  write_tensor(mid_path, weights.mid);
  write_tensor(last_path, tensor_from_matrix(weights.last));

  // Seeded probe input: how far the quantized factorized sequence deviates
  // from the original convolution (reported, not asserted).
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseTensor x({layer.in_channels, layer.height, layer.width});
  for (index_t i = 0; i < x.size(); ++i) x[i] = normal(rng);
  const DenseTensor y_ref = direct_conv(k4, x);
  const DenseTensor y_fact = factorized_forward(weights, x);
  double dev_num = 0.0;
  for (index_t i = 0; i < y_ref.size(); ++i) {
    const double d = y_ref[i] - y_fact[i];
    dev_num += d * d;
  }
  const double y_norm = y_ref.norm();
  const double probe_dev = y_norm > 0.0 ? std::sqrt(dev_num) / y_norm : std::sqrt(dev_num);

  const BopReport baseline = bop_count(layer, 32, 32, false);
  const BopReport compressed = bop_count(layer, cfg.bits, cfg.act_bits, true, rank);

  json report;
  report["command"] = "compress-conv";
  report["input"] = cfg.input;
  report["layer"] = {{"out_channels", layer.out_channels}, {"in_channels", layer.in_channels},
                     {"kernel", layer.kernel},   {"height", layer.height},
                     {"width", layer.width}};
  report["path"] = matrix_path ? "matrix" : "conv";
  if (cfg.rate > 0.0) report["rate"] = cfg.rate;
  report["rank"] = rank;
  report["bits"] = cfg.bits;
  report["act_bits"] = cfg.act_bits;
  report["scheme"] = scheme_json(admm.scheme);
  report["init"] = cfg.init;
  report["seed"] = cfg.seed;
  report["e_quant"] = qfs.e_quant;
  report["rel_error"] = qfs.trace[static_cast<std::size_t>(qfs.best_sweep - 1)].rel_error;
  report["probe_deviation"] = probe_dev;
  report["baseline"] = {{"macs", baseline.macs}, {"bops", baseline.bops},
                        {"params", baseline.params_before}, {"b_w", baseline.b_w}, {"b_a", baseline.b_a}};
  report["compressed"] = {{"macs", compressed.macs}, {"bops", compressed.bops},
                          {"params", compressed.params_after}, {"b_w", compressed.b_w},
                          {"b_a", compressed.b_a}};
  report["outputs"] = {{"first", first_path}, {"mid", mid_path}, {"last", last_path}};
  report["sweeps"] = qfs.sweeps;
  report["best_sweep"] = qfs.best_sweep;
  report["converged"] = qfs.converged;
  report["wall_time"] = elapsed_seconds(start);
  if (!cfg.trace_path.empty()) write_trace(cfg.trace_path, qfs.trace);
  write_report(cfg, report);
  return 0;
}

// ---------------------------------------------------------------------------

void add_common_factor_flags(CLI::App* sub, JobConfig& cfg) {
  sub->add_option("--input", cfg.input, "input tensor file")->required();
  sub->add_option("--rank", cfg.rank, "factorization rank");
  sub->add_option("--rate", cfg.rate, "parameter reduction rate (selects the rank)");
  sub->add_option("--bits", cfg.bits, "weight bit-width")->check(CLI::Range(2, 8));
  sub->add_option("--scheme", cfg.scheme, "grid fitting scheme")
      ->check(CLI::IsMember({"minmax", "mse"}))
      ->default_str("mse");
  sub->add_flag("--asymmetric", cfg.asymmetric, "asymmetric grid (minmax only)");
  sub->add_option("--init", cfg.init, "initialization mode")
      ->check(CLI::IsMember({"random", "als-balanced"}))
      ->default_str("als-balanced");
  sub->add_option("--init-sweeps", cfg.init_sweeps, "ALS sweeps for the init (0 = random)")
      ->check(CLI::Range(0, 1000000));
  sub->add_option("--seed", cfg.seed, "RNG seed");
  sub->add_option("--eps", cfg.eps, "inner-loop residual tolerance");
  sub->add_option("--inner-max", cfg.inner_max, "max inner iterations per factor")->check(CLI::Range(1, 1000000));
  sub->add_option("--outer-max", cfg.outer_max, "max outer sweeps")->check(CLI::Range(1, 1000000));
  sub->add_option("--patience", cfg.patience, "sweeps without improvement before stopping")
      ->check(CLI::Range(1, 1000000));
  sub->add_option("--min-improve", cfg.min_improve, "relative improvement that counts as progress");
  sub->add_option("--report", cfg.report_path, "write the JSON report here");
  sub->add_option("--trace", cfg.trace_path, "write the CSV convergence trace here");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantization-constrained matrix and CP tensor factorization"};
  app.require_subcommand(1);

  JobConfig cfg;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic tensor file");
  gen->add_option("--shape", cfg.shape_str, "comma-separated extents, e.g. 64,64,9")->required();
  gen->add_option("--rank", cfg.rank, "true rank of the generated tensor")->required();
  gen->add_option("--noise", cfg.noise, "relative Gaussian noise magnitude");
  gen->add_option("--grid-bits", cfg.grid_bits, "draw factors exactly on a reproducible grid")
      ->check(CLI::Range(2, 8));
  gen->add_option("--seed", cfg.seed, "RNG seed");
  gen->add_option("--output", cfg.output, "output tensor file")->required();
  gen->add_option("--report", cfg.report_path, "write the JSON report here");

  CLI::App* fact = app.add_subcommand("factorize", "plain CP-ALS factorization (no quantization)");
  fact->add_option("--input", cfg.input, "input tensor file")->required();
  fact->add_option("--rank", cfg.rank, "factorization rank");
  fact->add_option("--rate", cfg.rate, "parameter reduction rate (selects the rank)");
  fact->add_option("--seed", cfg.seed, "RNG seed");
  fact->add_option("--outer-max", cfg.outer_max, "max ALS sweeps")->check(CLI::Range(1, 1000000));
  fact->add_option("--report", cfg.report_path, "write the JSON report here");
  fact->add_option("--trace", cfg.trace_path, "write the CSV convergence trace here");

  CLI::App* qfact = app.add_subcommand("qfactorize", "quantization-constrained factorization");
  add_common_factor_flags(qfact, cfg);
  qfact->add_option("--height", cfg.height, "layer input height (enables BOP accounting)");
  qfact->add_option("--width", cfg.width, "layer input width (enables BOP accounting)");
  qfact->add_option("--act-bits", cfg.act_bits, "activation bit-width for BOP accounting")
      ->check(CLI::Range(2, 32));

  CLI::App* comp = app.add_subcommand("compare", "successive vs joint, random vs balanced init");
  add_common_factor_flags(comp, cfg);

  CLI::App* cconv = app.add_subcommand("compress-conv", "factorize and quantize a conv kernel");
  add_common_factor_flags(cconv, cfg);
  cconv->add_option("--height", cfg.height, "layer input height")->required();
  cconv->add_option("--width", cfg.width, "layer input width")->required();
  cconv->add_option("--act-bits", cfg.act_bits, "activation bit-width for BOP accounting")
      ->check(CLI::Range(2, 32));
  cconv->add_option("--out-prefix", cfg.out_prefix, "prefix for the three factor tensor files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(cfg);
    if (fact->parsed()) return cmd_factorize(cfg);
    if (qfact->parsed()) return cmd_qfactorize(cfg);
    if (comp->parsed()) return cmd_compare(cfg);
    if (cconv->parsed()) return cmd_compress_conv(cfg);
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const TensorFileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
