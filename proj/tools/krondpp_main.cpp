#include "krondpp/io.hpp"
#include "krondpp/kron_linalg.hpp"
#include "krondpp/learning.hpp"
#include "krondpp/partitioning.hpp"
#include "krondpp/sampling.hpp"
#include "krondpp/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace krondpp;

struct SynthArgs {
  Index n1 = 0;
  Index n2 = 0;
  Index n_samples = 0;
  Index min_size = 1;
  Index max_size = -1;  // -1: up to the ground-set size
  std::uint64_t seed = 0;
  std::string out_kernel;
  std::string out_subsets;
};

void run_synth(const SynthArgs& args) {
  const Index ground = args.n1 * args.n2;
  if (args.min_size < 1)
    throw CLI::ValidationError("--min-size",
                               "must be at least 1 (the subsets file cannot store empty subsets)");
  const Index max_size = args.max_size < 0 ? ground : args.max_size;
  if (max_size < args.min_size || max_size > ground)
    throw CLI::ValidationError("--max-size", "size window must satisfy min <= max <= n1*n2");

  RngStream rng(args.seed);
  const KronKernel kernel = synth_kernel(std::vector<Index>{args.n1, args.n2}, rng);
  const std::vector<Subset> subsets =
      synth_subsets(kernel, args.n_samples, args.min_size, max_size, rng);
  save_kernel(kernel, args.out_kernel);
  save_subsets(subsets, args.out_subsets);
}

struct TrainArgs {
  std::string data;
  Index n1 = 0;
  Index n2 = 0;
  std::string algo = "krk";
  std::string mode = "batch";
  int minibatch = 1;
  int iters = 100;
  double step = 1.0;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  std::string init = "random";
  std::string kernel_in;
  std::string out_kernel;
  std::string trace;
};

std::pair<SpdMatrix, SpdMatrix> initial_factors(const TrainArgs& args) {
  if (args.init == "random") {
    RngStream rng(args.seed);
    SpdMatrix l1 = SpdMatrix::checked(random_gram_matrix(args.n1, rng));
    SpdMatrix l2 = SpdMatrix::checked(random_gram_matrix(args.n2, rng));
    return {std::move(l1), std::move(l2)};
  }
  const KronKernel k = load_kernel(args.kernel_in);
  if (k.num_factors() != 2 || k.factor(0).rows() != args.n1 || k.factor(1).rows() != args.n2)
    throw CLI::ValidationError(
        "--kernel-in", "initial kernel must have two factors matching --n1 and --n2");
  return {k.factor(0), k.factor(1)};
}

void run_train(const TrainArgs& args) {
  if (args.init != "random" && args.init != "file")
    throw CLI::ValidationError("--init", "must be 'random' or 'file'");
  if (args.init == "file" && args.kernel_in.empty())
    throw CLI::ValidationError("--kernel-in", "required when --init file is used");
  if (args.mode != "batch" && args.mode != "stochastic")
    throw CLI::ValidationError("--mode", "must be 'batch' or 'stochastic'");
  if (args.algo != "krk" && args.algo != "picard" && args.algo != "joint")
    throw CLI::ValidationError("--algo", "must be 'krk', 'picard', or 'joint'");
  if (args.algo != "krk" && args.mode == "stochastic")
    throw CLI::ValidationError("--mode", "stochastic mode is available for --algo krk only");

  const Index ground = args.n1 * args.n2;
  const TrainingSet t = load_subsets(args.data, ground);

  FitConfig cfg;
  cfg.step_size = args.step;
  cfg.max_iter = args.iters;
  cfg.mode = args.mode == "batch" ? FitMode::kBatch : FitMode::kStochastic;
  cfg.minibatch_size = args.minibatch;
  cfg.tol = args.tol;
  cfg.seed = args.seed;

  FitHistory history;
  if (args.algo == "picard") {
    SpdMatrix l0 = [&] {
      if (args.init == "random") {
        auto [l1, l2] = initial_factors(args);
        return SpdMatrix::trusted(kron_product(l1.mat(), l2.mat()));
      }
      const KronKernel k = load_kernel(args.kernel_in);
      if (k.dim() != ground)
        throw CLI::ValidationError("--kernel-in", "initial kernel dimension must equal n1*n2");
      return SpdMatrix::trusted(k.materialize());
    }();
    auto [l, hist] = fit_picard(l0, t, cfg);
    history = std::move(hist);
    save_kernel(KronKernel({l}), args.out_kernel);
  } else {
    auto [l1, l2] = initial_factors(args);
    const KronKernel k0({l1, l2});
    auto result = args.algo == "krk" ? fit_krk(k0, t, cfg) : fit_joint(k0, t, cfg);
    history = std::move(result.second);
    save_kernel(result.first, args.out_kernel);
  }
  if (!args.trace.empty()) save_trace_csv(history, args.trace);
}

struct SampleArgs {
  std::string kernel;
  Index count = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_sample(const SampleArgs& args) {
  const KronKernel kernel = load_kernel(args.kernel);
  RngStream rng(args.seed);
  std::vector<Subset> draws;
  draws.reserve(static_cast<std::size_t>(args.count));
  std::size_t empty_count = 0;
  for (Index i = 0; i < args.count; ++i) {
    SampleReport report = sample_kron(kernel, rng);
    if (report.subset.empty())
      ++empty_count;
    else
      draws.push_back(std::move(report.subset));
  }
  save_subsets(draws, args.out, empty_count);
}

struct EvalArgs {
  std::string kernel;
  std::string data;
};

void run_eval(const EvalArgs& args) {
  const KronKernel kernel = load_kernel(args.kernel);
  const TrainingSet t = load_subsets(args.data, kernel.dim());
  std::printf("%.12f\n", log_likelihood(kernel, t));
}

struct PartitionArgs {
  std::string data;
  Index z = 0;  // 0: use twice the largest subset size
  std::string out;
};

void run_partition(const PartitionArgs& args) {
  const TrainingSet t = load_subsets(args.data);
  const Index z = args.z > 0 ? args.z : 2 * t.max_subset_size();
  const PartitionPlan plan = greedy_partition(t, z);
  save_partition_json(plan, args.out);
}

struct BenchArgs {
  std::string data;
  Index n1 = 0;
  Index n2 = 0;
  std::vector<std::string> algos = {"krk-batch", "krk-stochastic", "picard"};
  int iters = 5;
  int minibatch = 1;
  double step = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_bench(const BenchArgs& args) {
  const Index ground = args.n1 * args.n2;
  const TrainingSet t = load_subsets(args.data, ground);

  std::ofstream out(args.out);
  if (!out) throw IoError("cannot open for writing: " + args.out);
  out << "algo,iter,seconds,loglik\n";

  for (const std::string& algo : args.algos) {
    if (algo != "krk-batch" && algo != "krk-stochastic" && algo != "picard" && algo != "joint")
      throw CLI::ValidationError("--algos",
                                 "unknown algorithm '" + algo +
                                     "' (expected krk-batch, krk-stochastic, picard, joint)");
    // Every algorithm starts from the same seed-determined kernel.
    RngStream rng(args.seed);
    SpdMatrix l1 = SpdMatrix::checked(random_gram_matrix(args.n1, rng));
    SpdMatrix l2 = SpdMatrix::checked(random_gram_matrix(args.n2, rng));

    FitConfig cfg;
    cfg.step_size = args.step;
    cfg.max_iter = args.iters;
    cfg.tol = 0.0;  // run the full iteration budget
    cfg.seed = args.seed;
    cfg.minibatch_size = args.minibatch;
    cfg.mode = algo == "krk-stochastic" ? FitMode::kStochastic : FitMode::kBatch;

    FitHistory history;
    if (algo == "picard") {
      history = fit_picard(SpdMatrix::trusted(kron_product(l1.mat(), l2.mat())), t, cfg).second;
    } else if (algo == "joint") {
      history = fit_joint(KronKernel({l1, l2}), t, cfg).second;
    } else {
      history = fit_krk(KronKernel({l1, l2}), t, cfg).second;
    }

    // Per-iteration wall-clock deltas; the first iteration is warm-up and
    // is not reported.
    char seconds_buf[32];
    for (std::size_t i = 1; i < history.records.size(); ++i) {
      const double delta = history.records[i].seconds - history.records[i - 1].seconds;
      std::snprintf(seconds_buf, sizeof(seconds_buf), "%.6f", delta);
      out << algo << ',' << history.records[i].iteration << ',' << seconds_buf << ','
          << format_double(history.records[i].log_likelihood) << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("write failed: " + args.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Determinantal point processes with Kronecker-product kernels: "
               "synthetic data, likelihood fitting, exact sampling, benchmarking"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "Generate a random factored kernel and exact samples from it");
  synth_cmd->add_option("--n1", synth.n1, "First factor dimension")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--n2", synth.n2, "Second factor dimension")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--n-samples", synth.n_samples, "Number of subsets to draw")
      ->required()
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--min-size", synth.min_size, "Smallest accepted subset size")
      ->capture_default_str();
  synth_cmd->add_option("--max-size", synth.max_size,
                        "Largest accepted subset size (default: ground-set size)");
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out-kernel", synth.out_kernel, "Output kernel manifest path")->required();
  synth_cmd->add_option("--out-subsets", synth.out_subsets, "Output subsets path")->required();
  synth_cmd->callback([&] { run_synth(synth); });

  TrainArgs train;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Fit a kernel to observed subsets by maximum likelihood");
  train_cmd->add_option("--data", train.data, "Training subsets file")->required();
  train_cmd->add_option("--n1", train.n1, "First factor dimension")->required()->check(CLI::PositiveNumber);
  train_cmd->add_option("--n2", train.n2, "Second factor dimension")->required()->check(CLI::PositiveNumber);
  train_cmd->add_option("--algo", train.algo, "Algorithm: krk, picard, or joint")
      ->capture_default_str();
  train_cmd->add_option("--mode", train.mode, "Update mode: batch or stochastic (krk only)")
      ->capture_default_str();
  train_cmd->add_option("--minibatch", train.minibatch, "Minibatch size in stochastic mode")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--iters", train.iters, "Maximum number of iterations")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--step", train.step, "Step size a")->capture_default_str();
  train_cmd->add_option("--tol", train.tol, "Relative log-likelihood stopping tolerance")
      ->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Random seed (init and minibatch order)")
      ->capture_default_str();
  train_cmd->add_option("--init", train.init, "Initialization: random or file")
      ->capture_default_str();
  train_cmd->add_option("--kernel-in", train.kernel_in, "Initial kernel manifest (--init file)");
  train_cmd->add_option("--out-kernel", train.out_kernel, "Output kernel manifest path")->required();
  train_cmd->add_option("--trace", train.trace, "Optional per-iteration trace CSV path");
  train_cmd->callback([&] { run_train(train); });

  SampleArgs sample;
  CLI::App* sample_cmd = app.add_subcommand("sample", "Draw exact samples from a stored kernel");
  sample_cmd->add_option("--kernel", sample.kernel, "Kernel manifest path")->required();
  sample_cmd->add_option("--count", sample.count, "Number of draws")
      ->required()
      ->check(CLI::NonNegativeNumber);
  sample_cmd->add_option("--seed", sample.seed, "Random seed")->capture_default_str();
  sample_cmd->add_option("--out", sample.out, "Output subsets path")->required();
  sample_cmd->callback([&] { run_sample(sample); });

  EvalArgs eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Print the mean log-likelihood of subsets under a kernel");
  eval_cmd->add_option("--kernel", eval.kernel, "Kernel manifest path")->required();
  eval_cmd->add_option("--data", eval.data, "Subsets file")->required();
  eval_cmd->callback([&] { run_eval(eval); });

  BenchArgs bench;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Time per-iteration updates of the fitting algorithms");
  bench_cmd->add_option("--data", bench.data, "Training subsets file")->required();
  bench_cmd->add_option("--n1", bench.n1, "First factor dimension")->required()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--n2", bench.n2, "Second factor dimension")->required()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--algos", bench.algos,
                        "Comma-separated algorithms: krk-batch, krk-stochastic, picard, joint")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--iters", bench.iters, "Iterations per algorithm (first is warm-up)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--minibatch", bench.minibatch, "Minibatch size for krk-stochastic")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--step", bench.step, "Step size a")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Random seed")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Output CSV path")->required();
  bench_cmd->callback([&] { run_bench(bench); });

  PartitionArgs partition;
  CLI::App* partition_cmd = app.add_subcommand(
      "partition", "Group subsets so each group union stays below a size budget");
  partition_cmd->add_option("--data", partition.data, "Subsets file")->required();
  partition_cmd->add_option("--z", partition.z,
                            "Union size budget (default: twice the largest subset size)");
  partition_cmd->add_option("--out", partition.out, "Output plan JSON path")->required();
  partition_cmd->callback([&] { run_partition(partition); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
