// Experiment workbench: `train` fits Boolean MLPs, `validate` runs the
// Monte Carlo bound checks, `equiv` compares the packed optimizer against
// its continuous reformulation step by step, `bench` times the packed
// forward kernel against a naive integer implementation.
//
// Exit codes: 0 success, 1 run failure (failed check, divergence, kernel
// mismatch, non-finite loss), 2 configuration error, 3 data error.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "boolnet/analysis.hpp"
#include "boolnet/config.hpp"
#include "boolnet/nettrain.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace boolnet;

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

struct RunContext {
  ConfigMap cfg;
  fs::path out_dir;
  std::uint64_t seed = 0;
  std::int64_t threads = 1;
  ConfigWriter resolved;
};

json finite_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

RunContext make_context(const CliOptions& opt, const std::string& command) {
  RunContext ctx;
  if (!opt.config_path.empty()) {
    std::ifstream is(opt.config_path);
    if (!is)
      throw ConfigError("cannot open config file: " + opt.config_path);
    ctx.cfg = ConfigMap::parse(is);
  }
  if (opt.seed) ctx.cfg.set("run.seed", std::to_string(*opt.seed));
  if (opt.out) ctx.cfg.set("run.out", *opt.out);
  if (opt.threads)
    ctx.cfg.set("run.threads", std::to_string(*opt.threads));
  else if (const char* env = std::getenv("BOOLNET_THREADS"))
    ctx.cfg.set("run.threads", env);

  std::int64_t seed = ctx.cfg.get_int_or("run.seed", 0);
  if (seed < 0) throw ConfigError("run.seed must be nonnegative");
  ctx.seed = static_cast<std::uint64_t>(seed);
  ctx.threads = ctx.cfg.get_int_or("run.threads", 1);
  if (ctx.threads < 1 || ctx.threads > 256)
    throw ConfigError("run.threads must be in [1, 256]");
  set_thread_count(static_cast<std::size_t>(ctx.threads));
  ctx.out_dir = ctx.cfg.get_string_or("run.out", "out");

  ctx.resolved.add("", "command", command);
  ctx.resolved.add("run", "seed", static_cast<std::int64_t>(ctx.seed));
  ctx.resolved.add("run", "out", ctx.out_dir.string());
  ctx.resolved.add("run", "threads", ctx.threads);
  return ctx;
}

void add_optim_resolved(ConfigWriter& w, const OptimConfig& oc) {
  w.add("optimizer", "eta0", oc.eta0);
  w.add("optimizer", "schedule", format_eta_schedule(oc.schedule));
  w.add("optimizer", "tau", oc.tau);
  w.add("optimizer", "kappa",
        oc.kappa ? format_double(*oc.kappa) : std::string("none"));
  w.add("optimizer", "beta",
        oc.beta_mode == BetaMode::Adaptive ? std::string("adaptive")
                                           : format_double(oc.beta_value));
  w.add("optimizer", "flips",
        oc.flip_mode == FlipMode::Deterministic ? std::string("deterministic")
                                                : std::string("stochastic"));
}

// Finalize the context once every key has been consumed: reject leftovers,
// create the output directory, persist the resolved configuration.
void commit_config(RunContext& ctx) {
  ctx.cfg.reject_unused();
  fs::create_directories(ctx.out_dir);
  std::ofstream os(ctx.out_dir / "resolved.toml");
  ctx.resolved.write(os);
  if (!os) throw std::runtime_error("cannot write resolved.toml");
}

void write_summary(const RunContext& ctx, const json& summary) {
  std::ofstream os(ctx.out_dir / "summary.json");
  os << summary.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write summary.json");
}

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    std::string cell = text.substr(pos, comma - pos);
    char* end = nullptr;
    long v = std::strtol(cell.c_str(), &end, 10);
    if (end != cell.c_str() + cell.size() || v < 1)
      throw ConfigError("model.dims: bad entry \"" + cell + "\"");
    dims.push_back(static_cast<std::size_t>(v));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (dims.size() < 2)
    throw ConfigError("model.dims needs at least input,output");
  return dims;
}

// ---------------------------------------------------------------- train --

int cmd_train(const CliOptions& opt) {
  RunContext ctx = make_context(opt, "train");
  ConfigMap& cfg = ctx.cfg;

  OptimConfig oc = read_optim_config(cfg);
  oc.seed = ctx.seed;
  oc.validate();

  std::string dims_text = cfg.get_string_or("model.dims", "2,4,2");
  auto dims = parse_dims(dims_text);
  std::string loss_text = cfg.get_string_or("model.loss", "cross-entropy");
  LossKind loss;
  if (loss_text == "cross-entropy")
    loss = LossKind::CrossEntropy;
  else if (loss_text == "squared")
    loss = LossKind::Squared;
  else
    throw ConfigError("model.loss: expected cross-entropy or squared");

  std::string format = cfg.get_string_or("data.format", "xor");
  auto batch = cfg.get_int_or("data.batch", 8);
  if (batch < 1) throw ConfigError("data.batch must be positive");
  auto epochs = cfg.get_int_or("run.epochs", 50);
  if (epochs < 1) throw ConfigError("run.epochs must be positive");

  Dataset data;
  std::vector<double> thresholds;
  std::string data_path;
  std::int64_t xor_copies = 0;
  if (format == "xor") {
    xor_copies = cfg.get_int_or("data.xor_copies", 16);
    if (xor_copies < 1) throw ConfigError("data.xor_copies must be positive");
    data = make_xor_dataset(static_cast<std::size_t>(xor_copies),
                            static_cast<std::size_t>(batch));
  } else if (format == "csv" || format == "binary") {
    auto path = cfg.get_string("data.path");
    if (!path) throw ConfigError("data.path is required for data.format = " +
                                 format);
    data_path = *path;
    std::ifstream is(data_path, std::ios::binary);
    if (!is) throw DataError("cannot open dataset file: " + data_path);
    if (format == "csv") {
      TabularData tab = load_csv(is);
      BinarizeResult bin = binarize_input(tab.features);
      for (std::size_t c : bin.constant_columns)
        std::cerr << "warning: feature column \"" << tab.feature_names[c]
                  << "\" is constant; thresholded to all True\n";
      data.inputs = std::move(bin.bits);
      data.labels = std::move(tab.labels);
      data.batch = static_cast<std::size_t>(batch);
      thresholds = std::move(bin.thresholds);
    } else {
      data = load_dataset_binary(is, static_cast<std::size_t>(batch));
    }
  } else {
    throw ConfigError("data.format: expected xor, csv, or binary");
  }

  add_optim_resolved(ctx.resolved, oc);
  ctx.resolved.add("model", "dims", dims_text);
  ctx.resolved.add("model", "loss", loss_text);
  ctx.resolved.add("data", "format", format);
  if (!data_path.empty()) ctx.resolved.add("data", "path", data_path);
  if (format == "xor") ctx.resolved.add("data", "xor_copies", xor_copies);
  ctx.resolved.add("data", "batch", batch);
  ctx.resolved.add("run", "epochs", epochs);
  commit_config(ctx);

  BooleanMlp model(dims, loss, oc);
  model.input_thresholds = std::move(thresholds);
  StreamRng shuffle(ctx.seed, 200);
  std::size_t batches_per_epoch =
      (data.size() + data.batch - 1) / data.batch;

  std::vector<TraceRecord> trace;
  trace.reserve(static_cast<std::size_t>(epochs));
  double run_sum = 0.0;
  std::size_t total_flips = 0;
  std::optional<std::size_t> solved_epoch;
  EpochMetrics met;
  for (std::int64_t e = 0; e < epochs; ++e) {
    met = model.train_epoch(data, shuffle);
    TraceRecord rec;
    rec.t = static_cast<std::size_t>(e);
    rec.loss = met.loss;
    rec.grad_norm_sq = met.mean_q_norm_sq;
    run_sum += rec.grad_norm_sq;
    rec.run_avg = run_sum / static_cast<double>(e + 1);
    for (std::size_t f : met.flips) rec.flips += f;
    rec.beta = met.beta_max;
    rec.eta = eta_update(oc, static_cast<std::size_t>(e) * batches_per_epoch);
    trace.push_back(rec);
    total_flips += rec.flips;
    if (!solved_epoch && met.accuracy == 1.0)
      solved_epoch = static_cast<std::size_t>(e);
  }

  {
    std::ofstream os(ctx.out_dir / "trace.csv");
    write_trace_csv(os, trace);
    if (!os) throw std::runtime_error("cannot write trace.csv");
  }
  {
    std::ofstream os(ctx.out_dir / "model.bin", std::ios::binary);
    model.serialize(os);
  }

  json summary;
  summary["schema"] = 1;
  summary["command"] = "train";
  summary["seed"] = ctx.seed;
  summary["dims"] = dims;
  summary["loss"] = loss_text;
  summary["epochs"] = epochs;
  summary["final_loss"] = met.loss;
  summary["final_accuracy"] = finite_or_null(met.accuracy);
  summary["total_flips"] = total_flips;
  summary["solved_epoch"] =
      solved_epoch ? json(*solved_epoch) : json(nullptr);
  summary["outputs"] = {{"trace", "trace.csv"},
                        {"model", "model.bin"},
                        {"resolved_config", "resolved.toml"}};
  write_summary(ctx, summary);

  std::cout << "train: epochs=" << epochs << " final_loss="
            << format_double(met.loss) << " final_accuracy="
            << format_double(met.accuracy) << " flips=" << total_flips
            << "\n";
  return 0;
}

// ------------------------------------------------------------- validate --

std::unique_ptr<Objective> build_objective(ConfigMap& cfg, ConfigWriter& res,
                                           json& desc) {
  std::string family = cfg.get_string_or("objective.family", "quadratic");
  auto dim = cfg.get_int_or("objective.dim", 64);
  if (dim < 1) throw ConfigError("objective.dim must be positive");
  auto d = static_cast<std::size_t>(dim);
  res.add("objective", "family", family);
  res.add("objective", "dim", dim);
  desc["family"] = family;
  desc["dim"] = dim;

  if (family == "quadratic") {
    double lo = cfg.get_double_or("objective.lambda_min", 0.5);
    double hi = cfg.get_double_or("objective.lambda_max", 1.0);
    double b = cfg.get_double_or("objective.b", 0.3);
    if (lo <= 0.0 || hi < lo)
      throw ConfigError("objective.lambda_min/lambda_max: need 0 < min <= max");
    res.add("objective", "lambda_min", lo);
    res.add("objective", "lambda_max", hi);
    res.add("objective", "b", b);
    desc["lambda_min"] = lo;
    desc["lambda_max"] = hi;
    desc["b"] = b;
    std::vector<double> lam(d), lin(d);
    for (std::size_t i = 0; i < d; ++i) {
      lam[i] = d == 1 ? lo
                      : lo + (hi - lo) * static_cast<double>(i) /
                                 static_cast<double>(d - 1);
      lin[i] = (i % 2 == 0) ? b : -b;
    }
    return std::make_unique<QuadraticObjective>(
        QuadraticObjective::diagonal(std::move(lam), std::move(lin)));
  }
  if (family == "quartic") {
    double scale = cfg.get_double_or("objective.scale", 0.5);
    double c = cfg.get_double_or("objective.c", 0.3);
    if (scale <= 0.0) throw ConfigError("objective.scale must be positive");
    res.add("objective", "scale", scale);
    res.add("objective", "c", c);
    desc["scale"] = scale;
    desc["c"] = c;
    std::vector<double> lin(d);
    for (std::size_t i = 0; i < d; ++i) lin[i] = (i % 2 == 0) ? c : -c;
    return std::make_unique<QuarticObjective>(scale, std::move(lin));
  }
  throw ConfigError("objective.family: expected quadratic or quartic");
}

int cmd_validate(const CliOptions& opt) {
  RunContext ctx = make_context(opt, "validate");
  ConfigMap& cfg = ctx.cfg;

  json desc;
  auto obj = build_objective(cfg, ctx.resolved, desc);

  std::string checks_text = cfg.get_string_or("validate.checks", "all");
  std::vector<std::string> checks;
  if (checks_text == "all") {
    checks = {"error_feedback", "flip_deviation", "convergence"};
  } else {
    std::size_t pos = 0;
    while (pos <= checks_text.size()) {
      auto comma = checks_text.find(',', pos);
      std::string name = checks_text.substr(pos, comma - pos);
      if (name != "error_feedback" && name != "flip_deviation" &&
          name != "convergence")
        throw ConfigError("validate.checks: unknown check \"" + name + "\"");
      checks.push_back(name);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }

  ValidationConfig vc;
  vc.trials = static_cast<std::size_t>(cfg.get_int_or("validate.trials", 1000));
  vc.steps = static_cast<std::size_t>(cfg.get_int_or("validate.steps", 200));
  vc.eta = cfg.get_double_or("validate.eta", 0.05);
  vc.kappa =
      parse_optional_double(cfg.get_string_or("validate.kappa", "none"));
  vc.sigma_noise = cfg.get_double_or("validate.sigma_noise", 40.0);
  vc.seed = ctx.seed;
  std::string q0 = cfg.get_string_or("validate.q0", "stochastic");
  if (q0 == "stochastic")
    vc.q0_mode = Q0Mode::Stochastic;
  else if (q0 == "deterministic")
    vc.q0_mode = Q0Mode::Deterministic;
  else
    throw ConfigError("validate.q0: expected stochastic or deterministic");
  auto conv_seeds = cfg.get_int_or("validate.convergence_seeds", 10);
  auto conv_steps = cfg.get_int_or("validate.convergence_steps", 10000);

  for (const auto& name : checks)
    if (name != "error_feedback" && !vc.kappa)
      throw ConfigError("validate.kappa is required for the " + name +
                        " check");

  ctx.resolved.add("validate", "checks", checks_text);
  ctx.resolved.add("validate", "trials", static_cast<std::int64_t>(vc.trials));
  ctx.resolved.add("validate", "steps", static_cast<std::int64_t>(vc.steps));
  ctx.resolved.add("validate", "eta", vc.eta);
  ctx.resolved.add("validate", "kappa",
                   vc.kappa ? format_double(*vc.kappa) : std::string("none"));
  ctx.resolved.add("validate", "sigma_noise", vc.sigma_noise);
  ctx.resolved.add("validate", "q0", q0);
  ctx.resolved.add("validate", "convergence_seeds", conv_seeds);
  ctx.resolved.add("validate", "convergence_steps", conv_steps);
  commit_config(ctx);

  json report = json::array();
  bool any_fail = false;
  for (const auto& name : checks) {
    CheckReport cr;
    if (name == "error_feedback") {
      cr = validate_error_feedback(*obj, vc);
    } else if (name == "flip_deviation") {
      cr = validate_flip_deviation(*obj, vc);
    } else {
      ValidationConfig cc = vc;
      cc.trials = static_cast<std::size_t>(conv_seeds);
      cc.steps = static_cast<std::size_t>(conv_steps);
      cr = validate_convergence(*obj, cc);
    }
    any_fail = any_fail || cr.status == "fail";
    json entry;
    entry["check"] = cr.check;
    entry["status"] = cr.status;
    entry["measured"] = finite_or_null(cr.measured);
    entry["bound"] = finite_or_null(cr.bound);
    entry["margin"] = finite_or_null(cr.margin);
    entry["se"] = finite_or_null(cr.se);
    entry["delta_hat"] = finite_or_null(cr.delta_hat);
    entry["note"] = cr.note;
    report.push_back(entry);
    std::cout << "[" << cr.status << "] " << cr.check
              << " measured=" << format_double(cr.measured)
              << " bound=" << format_double(cr.bound)
              << " margin=" << format_double(cr.margin);
    if (!cr.note.empty()) std::cout << " (" << cr.note << ")";
    std::cout << "\n";
  }

  json summary;
  summary["schema"] = 1;
  summary["command"] = "validate";
  summary["seed"] = ctx.seed;
  summary["objective"] = desc;
  summary["checks"] = report;
  write_summary(ctx, summary);
  return any_fail ? 1 : 0;
}

// ---------------------------------------------------------------- equiv --

int cmd_equiv(const CliOptions& opt) {
  RunContext ctx = make_context(opt, "equiv");
  ConfigMap& cfg = ctx.cfg;

  // The paired-trajectory claim holds for full retention and deterministic
  // rounding; default beta to constant 1 instead of adaptive.
  if (!cfg.has("optimizer.beta")) cfg.set("optimizer.beta", "1");
  OptimConfig oc = read_optim_config(cfg);
  oc.seed = ctx.seed;
  if (oc.beta_mode != BetaMode::Constant || oc.beta_value != 1.0)
    throw ConfigError("equiv requires optimizer.beta = 1");
  if (oc.flip_mode != FlipMode::Deterministic)
    throw ConfigError("equiv requires optimizer.flips = deterministic");
  oc.validate();

  auto dim = cfg.get_int_or("equiv.dim", 128);
  auto steps = cfg.get_int_or("equiv.steps", 1000);
  auto streams = cfg.get_int_or("equiv.streams", 5);
  double sigma = cfg.get_double_or("equiv.sigma", 1.0);
  double tau_offset = cfg.get_double_or("equiv.tau_offset", 0.0);
  if (dim < 1 || steps < 0 || streams < 1)
    throw ConfigError("equiv.dim/steps/streams out of range");

  add_optim_resolved(ctx.resolved, oc);
  ctx.resolved.add("equiv", "dim", dim);
  ctx.resolved.add("equiv", "steps", steps);
  ctx.resolved.add("equiv", "streams", streams);
  ctx.resolved.add("equiv", "sigma", sigma);
  ctx.resolved.add("equiv", "tau_offset", tau_offset);
  commit_config(ctx);

  auto d = static_cast<std::size_t>(dim);
  json results = json::array();
  bool all_equal = true;
  for (std::int64_t s = 0; s < streams; ++s) {
    StreamRng grad_rng(ctx.seed, 1000 + static_cast<std::uint64_t>(s));
    auto stream_fn = [&](std::size_t t, std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = sigma * grad_rng.normal(static_cast<std::uint64_t>(t) * d + i);
    };
    DivergenceReport rep = equivalence_check(
        stream_fn, static_cast<std::size_t>(steps), d, oc, tau_offset);
    json entry;
    entry["stream"] = s;
    entry["diverged"] = rep.diverged;
    if (rep.diverged) {
      all_equal = false;
      entry["step"] = rep.step;
      entry["coord"] = rep.coord;
      entry["field"] = rep.field;
      entry["optimizer_value"] = finite_or_null(rep.optimizer_value);
      entry["abstract_value"] = finite_or_null(rep.abstract_value);
      std::cout << "stream " << s << ": DIVERGED at step " << rep.step
                << ", coord " << rep.coord << ", " << rep.field
                << " (optimizer " << format_double(rep.optimizer_value)
                << " vs reformulation " << format_double(rep.abstract_value)
                << ")\n";
    } else {
      std::cout << "stream " << s << ": exact over " << steps << " steps\n";
    }
    results.push_back(entry);
  }

  json summary;
  summary["schema"] = 1;
  summary["command"] = "equiv";
  summary["seed"] = ctx.seed;
  summary["dim"] = dim;
  summary["steps"] = steps;
  summary["streams"] = streams;
  summary["sigma"] = sigma;
  summary["tau_offset"] = tau_offset;
  summary["all_equal"] = all_equal;
  summary["results"] = results;
  write_summary(ctx, summary);
  return all_equal ? 0 : 1;
}

// ---------------------------------------------------------------- bench --

struct BenchSize {
  std::size_t m, n, k;
  std::size_t work() const { return m * n * k; }
};

std::vector<BenchSize> parse_sizes(const std::string& text) {
  std::vector<BenchSize> sizes;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto semi = text.find(';', pos);
    std::string triple = text.substr(pos, semi - pos);
    BenchSize bs{};
    std::size_t vals[3];
    std::size_t tp = 0;
    for (int i = 0; i < 3; ++i) {
      auto comma = triple.find(',', tp);
      if ((i < 2) != (comma != std::string::npos))
        throw ConfigError("bench.sizes: expected m,n,K triples: " + triple);
      std::string cell = triple.substr(tp, comma - tp);
      char* end = nullptr;
      long v = std::strtol(cell.c_str(), &end, 10);
      if (end != cell.c_str() + cell.size() || v < 1)
        throw ConfigError("bench.sizes: bad entry \"" + cell + "\"");
      vals[i] = static_cast<std::size_t>(v);
      tp = comma + 1;
    }
    bs.m = vals[0];
    bs.n = vals[1];
    bs.k = vals[2];
    sizes.push_back(bs);
    if (semi == std::string::npos) break;
    pos = semi + 1;
  }
  return sizes;
}

// Reference forward on unpacked +-1 ints; deliberately shares no code with
// the packed kernel.
PreActivation naive_forward(const std::vector<signed char>& x,
                            const std::vector<signed char>& w,
                            const std::vector<signed char>& w0,
                            std::size_t k_rows, std::size_t m, std::size_t n) {
  PreActivation out(k_rows, n);
  for (std::size_t k = 0; k < k_rows; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      std::int32_t acc = w0[j];
      for (std::size_t i = 0; i < m; ++i) acc += x[k * m + i] * w[i * n + j];
      out.at(k, j) = acc;
    }
  return out;
}

template <typename F>
double time_per_call_ns(F&& fn, int reps) {
  using clock = std::chrono::steady_clock;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < reps; ++r) {
    std::size_t calls = 0;
    auto t0 = clock::now();
    double elapsed = 0.0;
    do {
      fn();
      ++calls;
      elapsed = std::chrono::duration<double, std::nano>(clock::now() - t0)
                    .count();
    } while (elapsed < 1e7);  // 10 ms per rep
    best = std::min(best, elapsed / static_cast<double>(calls));
  }
  return best;
}

int cmd_bench(const CliOptions& opt) {
  RunContext ctx = make_context(opt, "bench");
  ConfigMap& cfg = ctx.cfg;

  std::string sizes_text = cfg.get_string_or(
      "bench.sizes", "8,8,8;64,64,16;128,128,32;256,256,64;512,512,64");
  auto sizes = parse_sizes(sizes_text);
  auto reps = cfg.get_int_or("bench.reps", 3);
  if (reps < 1) throw ConfigError("bench.reps must be positive");
  std::sort(sizes.begin(), sizes.end(),
            [](const BenchSize& a, const BenchSize& b) {
              return a.work() < b.work();
            });

  ctx.resolved.add("bench", "sizes", sizes_text);
  ctx.resolved.add("bench", "reps", reps);
  commit_config(ctx);

  std::ofstream csv(ctx.out_dir / "bench.csv");
  csv << "m,n,K,packed_ns,naive_ns,speedup\n";
  json rows = json::array();
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const BenchSize& bs = sizes[c];
    StreamRng rng(ctx.seed, 3000 + c);
    auto x = BooleanTensor::random({bs.k, bs.m}, StreamRng(rng.key(), 0));
    auto w = BooleanTensor::random({bs.m, bs.n}, StreamRng(rng.key(), 1));
    auto w0 = BooleanTensor::random({bs.n}, StreamRng(rng.key(), 2));

    auto to_signs = [](const BooleanTensor& t) {
      std::vector<signed char> s(t.size());
      for (std::size_t i = 0; i < t.size(); ++i)
        s[i] = static_cast<signed char>(t.sign(i));
      return s;
    };
    auto xs = to_signs(x), ws = to_signs(w), w0s = to_signs(w0);

    // Correctness precedes speed: exact equality or the run fails.
    PreActivation ref = naive_forward(xs, ws, w0s, bs.k, bs.m, bs.n);
    BitRows xe = pack_input_rows(x);
    BitRows cols = pack_param_cols(assemble_params(w0, w));
    PreActivation got;
    forward_packed(xe, cols, got);
    if (got.values != ref.values) {
      std::cerr << "bench: kernel mismatch at m=" << bs.m << " n=" << bs.n
                << " K=" << bs.k << "\n";
      return 1;
    }

    PreActivation sink;
    double packed_ns = time_per_call_ns(
        [&] { forward_packed(xe, cols, sink); }, static_cast<int>(reps));
    double naive_ns = time_per_call_ns(
        [&] { sink = naive_forward(xs, ws, w0s, bs.k, bs.m, bs.n); },
        static_cast<int>(reps));
    double speedup = naive_ns / packed_ns;

    csv << bs.m << "," << bs.n << "," << bs.k << ","
        << format_double(packed_ns) << "," << format_double(naive_ns) << ","
        << format_double(speedup) << "\n";
    rows.push_back({{"m", bs.m},
                    {"n", bs.n},
                    {"K", bs.k},
                    {"packed_ns", packed_ns},
                    {"naive_ns", naive_ns},
                    {"speedup", speedup}});
    std::cout << "bench m=" << bs.m << " n=" << bs.n << " K=" << bs.k
              << ": packed " << format_double(packed_ns) << " ns, naive "
              << format_double(naive_ns) << " ns, speedup "
              << format_double(speedup) << "\n";
  }
  if (!csv) throw std::runtime_error("cannot write bench.csv");

  json summary;
  summary["schema"] = 1;
  summary["command"] = "bench";
  summary["seed"] = ctx.seed;
  summary["rows"] = rows;
  write_summary(ctx, summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boolean network training and validation workbench"};
  app.require_subcommand(1);
  app.fallthrough(true);

  CliOptions opt;
  app.add_option("--config", opt.config_path, "experiment config file");
  std::uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "override run.seed");
  std::string out_val;
  auto* out_opt = app.add_option("--out", out_val, "override run.out");
  int threads_val = 0;
  auto* threads_opt =
      app.add_option("--threads", threads_val,
                     "worker threads (overrides BOOLNET_THREADS)");

  auto* train = app.add_subcommand("train", "train a Boolean MLP");
  auto* validate = app.add_subcommand("validate", "run the bound checks");
  auto* equiv =
      app.add_subcommand("equiv", "optimizer vs reformulation trajectories");
  auto* bench = app.add_subcommand("bench", "time packed vs naive forward");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) opt.seed = seed_val;
  if (out_opt->count() > 0) opt.out = out_val;
  if (threads_opt->count() > 0) opt.threads = threads_val;

  try {
    if (train->parsed()) return cmd_train(opt);
    if (validate->parsed()) return cmd_validate(opt);
    if (equiv->parsed()) return cmd_equiv(opt);
    if (bench->parsed()) return cmd_bench(opt);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "run error: " << e.what() << "\n";
    return 1;
  }
}
