#include "csvq/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "csvq/bounds.hpp"
#include "csvq/channel.hpp"
#include "csvq/harness.hpp"
#include "csvq/io.hpp"

namespace csvq {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

SweepConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  SweepConfig cfg = path.empty() ? SweepConfig{} : load_config(path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  return cfg;
}

void write_record(std::ostream& out, const SweepPoint& point) {
  write_sweep_csv(out, {point});
}

SweepPoint make_point(const ExperimentConfig& cfg, const NmseEstimate& est, double seconds) {
  SweepPoint p;
  p.config = cfg;
  p.estimate = est;
  p.record = {to_string(cfg.scheme), cfg.n,      cfg.k,       cfg.resolved_m(), cfg.rate,
              cfg.epsilon,           cfg.sigma_w2, est.nmse_db, cfg.n_eval,      cfg.seed,
              seconds};
  return p;
}

std::string details_path(const std::string& out) {
  std::filesystem::path p(out);
  const std::string stem = p.extension() == ".csv" ? p.stem().string() : p.filename().string();
  return (p.parent_path() / (stem + ".details.csv")).string();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  return f;
}

int train_command(Scheme scheme, const std::string& config, const std::vector<std::string>& sets,
                  const std::string& out_dir, std::ostream& out) {
  SweepConfig sc = load_with_overrides(config, sets);
  ExperimentConfig cfg = sc.base;
  cfg.scheme = scheme;
  cfg.validate();
  const Experiment exp = prepare_experiment(cfg);
  const TrainedSystem sys = train_system(cfg, exp);
  save_system(out_dir, cfg, exp.model.phi(), sys);
  const auto& last = sys.traces.back();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8g", last.distortion.back());
  out << to_string(scheme) << ": final training distortion " << buf << " (" << last.label
      << "), artifacts in " << out_dir << "\n";
  return kExitOk;
}

int eval_command(const std::string& config, const std::string& artifacts,
                 const std::vector<std::string>& sets, const std::string& out_path,
                 std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  std::optional<Experiment> exp;
  TrainedSystem sys;
  if (!artifacts.empty()) {
    LoadedSystem loaded = load_system(artifacts);
    SweepConfig sc;
    sc.base = loaded.config;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      apply_setting(sc, s.substr(0, eq), s.substr(eq + 1));
    }
    cfg = sc.base;
    cfg.validate();
    if (cfg.scheme != loaded.system.scheme) throw ConfigError("--set cannot change the scheme");
    sys = std::move(loaded.system);
    // Evaluation may use a different channel from the one used in training.
    if (is_ssc(cfg.scheme)) {
      sys.ssc_epsilon = cfg.epsilon;
    } else {
      const auto rates = cfg.resolved_stage_rates();
      if (rates != sys.plan.stage_rates) throw ConfigError("--set cannot change the stage rates");
      const auto eps = cfg.resolved_stage_epsilons();
      for (std::size_t l = 0; l < rates.size(); ++l) {
        sys.plan.stage_channels[l] = stage_channel(rates[l], eps[l]);
      }
    }
    exp = prepare_experiment(cfg, loaded.phi);
  } else {
    if (config.empty()) throw ConfigError("eval needs --config or --artifacts");
    cfg = load_with_overrides(config, sets).base;
    cfg.validate();
    exp = prepare_experiment(cfg);
    sys = train_system(cfg, *exp);
  }
  const NmseEstimate est = evaluate_nmse(sys, cfg, *exp);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const SweepPoint point = make_point(cfg, est, seconds);
  if (out_path.empty()) {
    write_record(out, point);
  } else {
    auto f = open_output(out_path);
    write_record(f, point);
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "# nmse %.4f dB +/- %.4f (cs only %.4f dB)\n", est.nmse_db,
                est.stderr_db, to_db(est.d_cs / cfg.k));
  out << buf;
  return kExitOk;
}

int sweep_command(const std::string& config, const std::vector<std::string>& sets,
                  const std::string& out_path, const std::string& artifacts, bool quiet,
                  std::ostream& err) {
  const SweepConfig sc = load_with_overrides(config, sets);
  SweepOptions opts;
  opts.log = quiet ? nullptr : &err;
  opts.keep_systems = !artifacts.empty();
  const std::vector<SweepPoint> points = run_sweep(sc, opts);
  {
    auto f = open_output(out_path);
    write_sweep_csv(f, points);
  }
  {
    auto f = open_output(details_path(out_path));
    write_sweep_details_csv(f, points);
  }
  if (!artifacts.empty()) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      const SweepPoint& p = points[i];
      if (!p.ok()) continue;
      char name[160];
      std::snprintf(name, sizeof name, "%03zu_%s_m%d_r%d_e%g", i, p.record.scheme.c_str(),
                    p.record.m, p.record.rate, p.record.epsilon);
      save_system((std::filesystem::path(artifacts) / name).string(), p.config,
                  experiment_sensing_matrix(p.config.seed, p.config.n, p.config.resolved_m()),
                  p.system);
    }
  }
  int code = kExitOk;
  for (const auto& p : points) {
    if (p.ok()) continue;
    err << "point " << p.record.scheme << " m=" << p.record.m << " R=" << p.record.rate
        << " failed: " << p.error << "\n";
    code = std::max(code, p.config_error ? kExitConfig : kExitNumerical);
  }
  return code;
}

std::vector<double> rate_grid(const std::string& list, double r_min, double r_max, double step) {
  std::vector<double> rates;
  if (!list.empty()) {
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        rates.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("bad rate '" + item + "'");
      }
    }
    return rates;
  }
  if (!(step > 0.0) || r_max < r_min) throw ConfigError("invalid rate range");
  const int count = static_cast<int>(std::floor((r_max - r_min) / step + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) rates.push_back(r_min + i * step);
  return rates;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Channel-optimized vector quantization of compressed-sensing measurements", "csvq"};
  app.require_subcommand(1);

  struct TrainOpts {
    std::string config;
    std::vector<std::string> sets;
    std::string out_dir;
  };
  TrainOpts train_opts;
  const std::vector<std::pair<std::string, Scheme>> train_cmds = {
      {"train-covq", Scheme::kCovq},
      {"train-msvq", Scheme::kComsvq},
      {"train-nnc", Scheme::kNnc},
      {"train-msnnc", Scheme::kMsnnc}};
  std::vector<std::pair<CLI::App*, Scheme>> train_apps;
  for (const auto& [name, scheme] : train_cmds) {
    CLI::App* sub = app.add_subcommand(name, "Train " + to_string(scheme) + " and store it");
    sub->add_option("-c,--config", train_opts.config, "key = value configuration file")->required();
    sub->add_option("-s,--set", train_opts.sets, "override a configuration key (key=value)");
    sub->add_option("-o,--out", train_opts.out_dir, "artifact directory")->required();
    train_apps.emplace_back(sub, scheme);
  }

  std::string eval_config, eval_artifacts, eval_out;
  std::vector<std::string> eval_sets;
  CLI::App* eval = app.add_subcommand("eval", "Monte-Carlo NMSE of a stored or freshly trained system");
  eval->add_option("-c,--config", eval_config, "configuration file (trains before evaluating)");
  eval->add_option("-a,--artifacts", eval_artifacts, "artifact directory written by train-*");
  eval->add_option("-s,--set", eval_sets, "override a configuration key (key=value)");
  eval->add_option("-o,--out", eval_out, "write the CSV record here instead of stdout");

  std::string sweep_config, sweep_out, sweep_artifacts;
  std::vector<std::string> sweep_sets;
  bool sweep_quiet = false;
  CLI::App* sweep = app.add_subcommand("sweep", "Train and evaluate every point of a grid");
  sweep->add_option("-c,--config", sweep_config, "configuration file")->required();
  sweep->add_option("-s,--set", sweep_sets, "override a configuration key (key=value)");
  sweep->add_option("-o,--out", sweep_out, "results CSV")->required();
  sweep->add_option("-a,--artifacts", sweep_artifacts, "also store every trained system here");
  sweep->add_flag("-q,--quiet", sweep_quiet, "no per-point progress lines");

  int b_n = 0, b_k = 0, b_m = 0;
  std::uint64_t b_seed = 1;
  double b_mu = -1.0, b_sigma = 0.0, b_eps = 0.0, b_rmin = 1.0, b_rmax = 16.0, b_step = 1.0;
  std::string b_rates, b_matrix, b_out;
  CLI::App* bound = app.add_subcommand("bound", "Lower bound on the end-to-end MSE versus rate");
  bound->add_option("--n", b_n, "source dimension")->required();
  bound->add_option("--k", b_k, "sparsity")->required();
  bound->add_option("--mu", b_mu, "mutual coherence");
  bound->add_option("--matrix", b_matrix, "sensing matrix CSV (coherence taken from it)");
  bound->add_option("--m", b_m, "measurements (coherence of the seeded Gaussian matrix)");
  bound->add_option("--seed", b_seed, "seed for --m");
  bound->add_option("--sigma-w2", b_sigma, "measurement-noise variance");
  bound->add_option("--epsilon", b_eps, "BSC crossover probability");
  bound->add_option("--rates", b_rates, "comma-separated rates");
  bound->add_option("--r-min", b_rmin, "first rate");
  bound->add_option("--r-max", b_rmax, "last rate");
  bound->add_option("--r-step", b_step, "rate step");
  bound->add_option("-o,--out", b_out, "write CSV here instead of stdout");

  int c_n = 0, c_m = 0;
  std::uint64_t c_seed = 1;
  std::string c_matrix;
  CLI::App* coherence = app.add_subcommand("coherence", "Mutual coherence of a sensing matrix");
  coherence->add_option("--matrix", c_matrix, "matrix CSV, one row per line");
  coherence->add_option("--n", c_n, "columns of a seeded Gaussian matrix");
  coherence->add_option("--m", c_m, "rows of a seeded Gaussian matrix");
  coherence->add_option("--seed", c_seed, "seed of the Gaussian matrix");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& [sub, scheme] : train_apps) {
      if (sub->parsed()) {
        return train_command(scheme, train_opts.config, train_opts.sets, train_opts.out_dir, out);
      }
    }
    if (eval->parsed()) return eval_command(eval_config, eval_artifacts, eval_sets, eval_out, out);
    if (sweep->parsed()) {
      return sweep_command(sweep_config, sweep_sets, sweep_out, sweep_artifacts, sweep_quiet, err);
    }
    if (bound->parsed()) {
      BoundCurveRequest req{b_n, b_k, b_mu, b_sigma, b_eps, rate_grid(b_rates, b_rmin, b_rmax, b_step)};
      if (!b_matrix.empty()) {
        req.mu = mutual_coherence(read_matrix_csv_file(b_matrix));
      } else if (b_m > 0) {
        req.mu = mutual_coherence(experiment_sensing_matrix(b_seed, b_n, b_m));
      } else if (b_mu < 0.0) {
        if (b_sigma > 0.0) throw ConfigError("bound with sigma_w2 > 0 needs --mu, --matrix or --m");
        req.mu = 0.0;
      }
      if (b_out.empty()) {
        write_bound_csv(out, req);
      } else {
        auto f = open_output(b_out);
        write_bound_csv(f, req);
      }
      return kExitOk;
    }
    if (coherence->parsed()) {
      Matrix phi;
      if (!c_matrix.empty()) {
        phi = read_matrix_csv_file(c_matrix);
      } else if (c_n > 0 && c_m > 0) {
        phi = experiment_sensing_matrix(c_seed, c_n, c_m);
      } else {
        throw ConfigError("coherence needs --matrix or --n and --m");
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f\n", mutual_coherence(phi));
      out << buf;
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace csvq
