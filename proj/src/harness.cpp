#include "csvq/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "csvq/bounds.hpp"
#include "csvq/channel.hpp"

namespace csvq {

namespace {

// Stream tags for make_stream.
constexpr std::uint64_t kPhiTag = 0x9f1a0001;
constexpr std::uint64_t kSourceTag = 0x9f1a0002;
constexpr std::uint64_t kNoiseTag = 0x9f1a0003;
constexpr std::uint64_t kChannelTag = 0x9f1a0004;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("'" + key + "': expected an integer, got '" + text + "'");
  }
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
  }
  return value;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_real(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

bool any_noisy(const std::vector<double>& eps) {
  return std::any_of(eps.begin(), eps.end(), [](double e) { return e > 0.0; });
}

struct Moments {
  long double sum = 0.0L;
  long double sum_sq = 0.0L;

  void add(double v) {
    sum += v;
    sum_sq += static_cast<long double>(v) * v;
  }
  double mean(std::size_t n) const { return static_cast<double>(sum / n); }
  double stderr_of_mean(std::size_t n) const {
    if (n < 2) return 0.0;
    const long double m = sum / n;
    const long double var = (sum_sq / n - m * m) * n / (n - 1);
    return std::sqrt(static_cast<double>(std::max<long double>(var, 0.0L)) / n);
  }
};

}  // namespace

Scheme parse_scheme(const std::string& text) {
  if (text == "covq-cs") return Scheme::kCovq;
  if (text == "comsvq-cs") return Scheme::kComsvq;
  if (text == "nnc-cs") return Scheme::kNnc;
  if (text == "msnnc-cs") return Scheme::kMsnnc;
  if (text == "ssc") return Scheme::kSsc;
  if (text == "ssc-ideal-support") return Scheme::kSscIdealSupport;
  throw ConfigError("unknown scheme '" + text + "'");
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kCovq: return "covq-cs";
    case Scheme::kComsvq: return "comsvq-cs";
    case Scheme::kNnc: return "nnc-cs";
    case Scheme::kMsnnc: return "msnnc-cs";
    case Scheme::kSsc: return "ssc";
    case Scheme::kSscIdealSupport: return "ssc-ideal-support";
  }
  return "?";
}

bool is_multistage(Scheme s) { return s == Scheme::kComsvq || s == Scheme::kMsnnc; }
bool is_measurement_domain(Scheme s) { return s == Scheme::kNnc || s == Scheme::kMsnnc; }
bool is_ssc(Scheme s) { return s == Scheme::kSsc || s == Scheme::kSscIdealSupport; }

int ExperimentConfig::resolved_m() const {
  if (alpha) return static_cast<int>(std::lround(*alpha * n));
  return m;
}

std::vector<int> ExperimentConfig::resolved_stage_rates() const {
  if (!is_multistage(scheme)) return {rate};
  if (!stage_rates.empty()) return stage_rates;
  return split_rate(rate, stages);
}

std::vector<double> ExperimentConfig::resolved_stage_epsilons() const {
  const std::size_t count = is_multistage(scheme) ? resolved_stage_rates().size() : 1;
  if (!stage_epsilons.empty()) return stage_epsilons;
  return std::vector<double>(count, epsilon);
}

void ExperimentConfig::validate() const {
  if (n < 1) throw ConfigError("n must be >= 1");
  if (k < 1 || k > n) throw ConfigError("k must satisfy 1 <= k <= n");
  if (alpha && !(*alpha > 0.0 && *alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  const int mm = resolved_m();
  if (mm < 1 || mm > n) {
    throw ConfigError("m = " + std::to_string(mm) + " must satisfy 1 <= m <= n");
  }
  if (!(sigma_w2 >= 0.0) || !std::isfinite(sigma_w2)) throw ConfigError("sigma_w2 must be >= 0");
  if (rate < 0 || rate > 60) throw ConfigError("rate must lie in [0, 60]");
  if (stages < 1) throw ConfigError("stages must be >= 1");
  if (!stage_rates.empty()) {
    int total = 0;
    for (int r : stage_rates) {
      if (r < 0) throw ConfigError("stage rates must be >= 0");
      total += r;
    }
    if (total != rate) throw ConfigError("stage_rates must sum to rate");
  }
  if (!is_ssc(scheme)) {
    for (int r : resolved_stage_rates()) {
      if (r > 24) throw ConfigError("a stage rate above 24 bits is not supported");
    }
  }
  if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw ConfigError("epsilon must lie in [0, 0.5]");
  if (!stage_epsilons.empty()) {
    if (is_ssc(scheme)) throw ConfigError("stage_epsilons does not apply to SSC");
    if (stage_epsilons.size() != resolved_stage_rates().size()) {
      throw ConfigError("stage_epsilons needs one entry per stage");
    }
    for (double e : stage_epsilons) {
      if (!(e >= 0.0 && e <= 0.5)) throw ConfigError("stage epsilons must lie in [0, 0.5]");
    }
  }
  if (n_train < 1 || n_eval < 1) throw ConfigError("n_train and n_eval must be >= 1");
  if (estimator.mode == EstimatorMode::kExact && sigma_w2 <= 0.0) {
    throw ConfigError("exact MMSE needs sigma_w2 > 0");
  }
  if (estimator.enumeration_cap < 1) throw ConfigError("enumeration_cap must be >= 1");
  if (train.max_iters < 1 || train.growth_max_iters < 1) throw ConfigError("iteration limits must be >= 1");
  if (!(train.rel_tol >= 0.0) || !(train.growth_rel_tol >= 0.0)) {
    throw ConfigError("tolerances must be >= 0");
  }
  if (!(train.delta_split > 0.0 && train.delta_split < 1.0)) {
    throw ConfigError("delta_split must lie in (0, 1)");
  }
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "none") return SweepAxis::kNone;
  if (text == "alpha") return SweepAxis::kAlpha;
  if (text == "rate") return SweepAxis::kRate;
  if (text == "epsilon") return SweepAxis::kEpsilon;
  throw ConfigError("unknown sweep axis '" + text + "'");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNone: return "none";
    case SweepAxis::kAlpha: return "alpha";
    case SweepAxis::kRate: return "rate";
    case SweepAxis::kEpsilon: return "epsilon";
  }
  return "?";
}

std::vector<ExperimentConfig> SweepConfig::points() const {
  const std::vector<Scheme> list = schemes.empty() ? std::vector<Scheme>{base.scheme} : schemes;
  if (axis != SweepAxis::kNone && values.empty()) throw ConfigError("sweep_values is empty");
  const std::vector<double> grid = axis == SweepAxis::kNone ? std::vector<double>{0.0} : values;
  std::vector<ExperimentConfig> out;
  for (double v : grid) {
    for (Scheme s : list) {
      ExperimentConfig c = base;
      c.scheme = s;
      switch (axis) {
        case SweepAxis::kNone: break;
        case SweepAxis::kAlpha: c.alpha = v; break;
        case SweepAxis::kRate:
          if (v != std::floor(v)) throw ConfigError("rate sweep values must be integers");
          c.rate = static_cast<int>(v);
          c.stage_rates.clear();
          break;
        case SweepAxis::kEpsilon:
          c.epsilon = v;
          c.stage_epsilons.clear();
          break;
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

void apply_setting(SweepConfig& cfg, const std::string& key, const std::string& value) {
  ExperimentConfig& c = cfg.base;
  if (key == "scheme") {
    c.scheme = parse_scheme(value);
  } else if (key == "n") {
    c.n = parse_integer<int>(key, value);
  } else if (key == "k") {
    c.k = parse_integer<int>(key, value);
  } else if (key == "m") {
    c.m = parse_integer<int>(key, value);
    c.alpha.reset();
  } else if (key == "alpha") {
    c.alpha = parse_real(key, value);
  } else if (key == "sigma_w2") {
    c.sigma_w2 = parse_real(key, value);
  } else if (key == "rate") {
    c.rate = parse_integer<int>(key, value);
  } else if (key == "stages") {
    c.stages = parse_integer<int>(key, value);
  } else if (key == "stage_rates") {
    c.stage_rates.clear();
    for (const auto& s : split_list(value)) c.stage_rates.push_back(parse_integer<int>(key, s));
  } else if (key == "epsilon") {
    c.epsilon = parse_real(key, value);
  } else if (key == "stage_epsilons") {
    c.stage_epsilons.clear();
    for (const auto& s : split_list(value)) c.stage_epsilons.push_back(parse_real(key, s));
  } else if (key == "n_train") {
    c.n_train = parse_integer<std::size_t>(key, value);
    c.train.n_train = c.n_train;
  } else if (key == "n_eval") {
    c.n_eval = parse_integer<std::size_t>(key, value);
  } else if (key == "seed") {
    c.seed = parse_integer<std::uint64_t>(key, value);
  } else if (key == "estimator") {
    try {
      c.estimator.mode = parse_estimator_mode(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "enumeration_cap") {
    c.estimator.enumeration_cap = parse_integer<std::uint64_t>(key, value);
  } else if (key == "exact_max_n") {
    c.estimator.exact_max_n = parse_integer<int>(key, value);
  } else if (key == "max_iters") {
    c.train.max_iters = parse_integer<int>(key, value);
  } else if (key == "rel_tol") {
    c.train.rel_tol = parse_real(key, value);
  } else if (key == "delta_split") {
    c.train.delta_split = parse_real(key, value);
  } else if (key == "growth_max_iters") {
    c.train.growth_max_iters = parse_integer<int>(key, value);
  } else if (key == "growth_rel_tol") {
    c.train.growth_rel_tol = parse_real(key, value);
  } else if (key == "schemes") {
    cfg.schemes.clear();
    for (const auto& s : split_list(value)) cfg.schemes.push_back(parse_scheme(s));
  } else if (key == "sweep_axis") {
    cfg.axis = parse_sweep_axis(value);
  } else if (key == "sweep_values") {
    cfg.values.clear();
    for (const auto& s : split_list(value)) cfg.values.push_back(parse_real(key, s));
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

SweepConfig parse_config(const std::string& text) {
  SweepConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

SweepConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "scheme = " << to_string(c.scheme) << "\n";
  out << "n = " << c.n << "\n";
  out << "k = " << c.k << "\n";
  if (c.alpha) {
    out << "alpha = " << format_real(*c.alpha) << "\n";
  } else {
    out << "m = " << c.m << "\n";
  }
  out << "sigma_w2 = " << format_real(c.sigma_w2) << "\n";
  out << "rate = " << c.rate << "\n";
  out << "stages = " << c.stages << "\n";
  if (!c.stage_rates.empty()) out << "stage_rates = " << join(c.stage_rates) << "\n";
  out << "epsilon = " << format_real(c.epsilon) << "\n";
  if (!c.stage_epsilons.empty()) out << "stage_epsilons = " << join(c.stage_epsilons) << "\n";
  out << "n_train = " << c.n_train << "\n";
  out << "n_eval = " << c.n_eval << "\n";
  out << "seed = " << c.seed << "\n";
  out << "estimator = " << to_string(c.estimator.mode) << "\n";
  out << "enumeration_cap = " << c.estimator.enumeration_cap << "\n";
  out << "exact_max_n = " << c.estimator.exact_max_n << "\n";
  out << "max_iters = " << c.train.max_iters << "\n";
  out << "rel_tol = " << format_real(c.train.rel_tol) << "\n";
  out << "delta_split = " << format_real(c.train.delta_split) << "\n";
  out << "growth_max_iters = " << c.train.growth_max_iters << "\n";
  out << "growth_rel_tol = " << format_real(c.train.growth_rel_tol) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------

Dataset generate_dataset(const SensingModel& model, const SourceSpec& spec,
                         const SparseEstimator& estimator, std::size_t count, std::uint64_t seed,
                         DatasetSplit split) {
  spec.validate();
  if (model.n() != spec.n) throw std::invalid_argument("sensing matrix width differs from N");
  const auto n = static_cast<std::uint64_t>(spec.n);
  const auto k = static_cast<std::uint64_t>(spec.k);
  const auto m = static_cast<std::uint64_t>(model.m());
  const auto tag = static_cast<std::uint64_t>(split);
  const bool oracle = estimator.mode() == EstimatorMode::kOracle;

  Dataset d;
  const auto rows = static_cast<Eigen::Index>(count);
  d.x.resize(rows, spec.n);
  d.y.resize(rows, model.m());
  d.x_tilde.resize(rows, spec.n);
  for (std::size_t start = 0, b = 0; start < count; start += kBatchSize, ++b) {
    Rng src = make_stream(seed, {kSourceTag, tag, n, k, b});
    Rng noise = make_stream(seed, {kNoiseTag, tag, n, k, m, b});
    const std::size_t end = std::min(count, start + kBatchSize);
    for (std::size_t s = start; s < end; ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      const SparseVector x = generate_source(spec, src);
      const Vector y = measure(x.values, model, noise);
      d.x.row(row) = x.values.transpose();
      d.y.row(row) = y.transpose();
      d.x_tilde.row(row) = (oracle ? x.values : estimator.estimate(y)).transpose();
    }
  }
  return d;
}

Matrix experiment_sensing_matrix(std::uint64_t seed, int n, int m) {
  Rng rng = make_stream(seed, {kPhiTag, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(m)});
  return generate_sensing_matrix(n, m, rng);
}

Experiment prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return prepare_experiment(cfg, experiment_sensing_matrix(cfg.seed, cfg.n, cfg.resolved_m()));
}

Experiment prepare_experiment(const ExperimentConfig& cfg, Matrix phi) {
  cfg.validate();
  if (phi.rows() != cfg.resolved_m() || phi.cols() != cfg.n) {
    throw ConfigError("sensing matrix is " + std::to_string(phi.rows()) + "x" +
                      std::to_string(phi.cols()) + ", config expects " +
                      std::to_string(cfg.resolved_m()) + "x" + std::to_string(cfg.n));
  }
  SourceSpec spec{cfg.n, cfg.k};
  SensingModel model(std::move(phi), cfg.sigma_w2);
  SparseEstimator estimator(model, spec, cfg.estimator);
  Experiment exp{spec, model, estimator, 0.0, {}, {}};
  exp.coherence = cfg.n >= 2 ? mutual_coherence(exp.model.phi()) : 0.0;
  exp.train = generate_dataset(exp.model, spec, exp.estimator, cfg.n_train, cfg.seed, DatasetSplit::kTrain);
  exp.eval = generate_dataset(exp.model, spec, exp.estimator, cfg.n_eval, cfg.seed, DatasetSplit::kEval);
  return exp;
}

Vector reconstruct_measurement(const Experiment& exp, const Vector& y_hat) {
  if (exp.estimator.mode() == EstimatorMode::kExact) return exp.estimator.estimate(y_hat);
  return omp(y_hat, exp.model.phi(), exp.spec.k).x;
}

// ---------------------------------------------------------------------------

bool TrainedSystem::trained() const {
  if (is_ssc(scheme)) return ssc.has_value();
  return !plan.stage_rates.empty() && plan.trained();
}

bool TrainedSystem::noiseless() const {
  if (is_ssc(scheme)) return ssc_epsilon == 0.0;
  return std::all_of(plan.stage_channels.begin(), plan.stage_channels.end(),
                     [](const Dmc& d) { return d.is_identity(); });
}

Dmc stage_channel(int rate_bits, double epsilon) {
  return epsilon == 0.0 ? Dmc::noiseless(rate_bits) : Dmc::bsc(rate_bits, epsilon);
}

TrainedSystem train_system(const ExperimentConfig& cfg, const Experiment& exp,
                           const TrainedSystem* noiseless_init) {
  cfg.validate();
  TrainedSystem sys;
  sys.scheme = cfg.scheme;

  if (is_ssc(cfg.scheme)) {
    sys.ssc = SscCodec::create(cfg.n, cfg.k, cfg.rate);
    sys.ssc_epsilon = cfg.epsilon;
    std::vector<int> seen;
    for (int b : sys.ssc->coeff_bits) {
      if (std::find(seen.begin(), seen.end(), b) != seen.end()) continue;
      seen.push_back(b);
      const ScalarTrainResult& st = gaussian_scalar_training(b);
      TrainingTrace t;
      t.label = "scalar-r" + std::to_string(b);
      t.distortion = st.distortion_trace;
      t.splits.assign(t.distortion.size(), 0);
      sys.traces.push_back(std::move(t));
    }
    return sys;
  }

  const std::vector<int> rates = cfg.resolved_stage_rates();
  const std::vector<double> eps = cfg.resolved_stage_epsilons();
  const bool measurement = is_measurement_domain(cfg.scheme);
  const RowMatrix& targets = measurement ? exp.train.y : exp.train.x_tilde;
  const CodebookDomain domain = measurement ? CodebookDomain::kMeasurement : CodebookDomain::kSource;

  std::vector<Dmc> channels;
  for (std::size_t l = 0; l < rates.size(); ++l) channels.push_back(stage_channel(rates[l], eps[l]));

  TrainedSystem base;
  const StagePlan* start = nullptr;
  if (any_noisy(eps)) {
    if (noiseless_init != nullptr) {
      if (noiseless_init->scheme != cfg.scheme || !noiseless_init->trained() ||
          !noiseless_init->noiseless() || noiseless_init->plan.stage_rates != rates) {
        throw std::invalid_argument("initial system does not match the configured scheme");
      }
      start = &noiseless_init->plan;
      sys.traces = noiseless_init->traces;
    } else {
      ExperimentConfig clean = cfg;
      clean.epsilon = 0.0;
      clean.stage_epsilons.clear();
      base = train_system(clean, exp);
      start = &base.plan;
      sys.traces = base.traces;
    }
  }

  if (!is_multistage(cfg.scheme)) {
    VqTrainResult r;
    if (start != nullptr) {
      r = measurement ? train_nnc_from(targets, channels[0], start->stage_codebooks[0], cfg.train)
                      : train_covq_from(targets, channels[0], start->stage_codebooks[0], cfg.train);
    } else {
      r = measurement ? train_nnc(targets, channels[0], cfg.train)
                      : train_covq(targets, channels[0], cfg.train);
    }
    sys.plan.stage_rates = rates;
    sys.plan.stage_channels = channels;
    sys.plan.stage_codebooks = {std::move(r.codebook)};
    for (auto& t : r.traces) sys.traces.push_back(std::move(t));
  } else {
    MsvqTrainResult r = train_msvq(targets, rates, channels, cfg.train, domain, start);
    sys.plan = std::move(r.plan);
    for (std::size_t l = 0; l < r.traces.size(); ++l) {
      for (auto& t : r.traces[l]) {
        t.label = "stage" + std::to_string(l + 1) + "/" + t.label;
        sys.traces.push_back(std::move(t));
      }
    }
  }
  for (const auto& cb : sys.plan.stage_codebooks) {
    if (!cb.vectors.allFinite()) throw NumericalError("training produced non-finite codevectors");
  }
  return sys;
}

NmseEstimate evaluate_nmse(const TrainedSystem& system, const ExperimentConfig& cfg,
                           const Experiment& exp) {
  if (!system.trained()) throw ConfigError("cannot evaluate an untrained system");
  if (system.scheme != cfg.scheme) throw ConfigError("system scheme differs from the config");
  const Dataset& data = exp.eval;
  const std::size_t count = data.size();
  if (count == 0) throw ConfigError("evaluation set is empty");
  const int n = exp.spec.n;

  Moments err, cs, q, cross;
  NmseEstimate est;
  auto accumulate = [&](Eigen::Index s, const Vector& x_hat) {
    const Vector x = data.x.row(s).transpose();
    const Vector xt = data.x_tilde.row(s).transpose();
    err.add((x - x_hat).squaredNorm());
    cs.add((x - xt).squaredNorm());
    q.add((xt - x_hat).squaredNorm());
    cross.add(2.0 * (x - xt).dot(xt - x_hat));
  };

  if (is_ssc(system.scheme)) {
    const SscCodec& codec = *system.ssc;
    if (codec.n != n || codec.k != exp.spec.k) throw ConfigError("SSC codec dimensions differ");
    const SscChannels channels = SscChannels::bsc(codec, system.ssc_epsilon);
    const bool ideal = system.scheme == Scheme::kSscIdealSupport;
    for (std::size_t start = 0, b = 0; start < count; start += kBatchSize, ++b) {
      Rng rng = make_stream(cfg.seed, {kChannelTag, 0, b});
      const std::size_t end = std::min(count, start + kBatchSize);
      for (std::size_t s = start; s < end; ++s) {
        const auto row = static_cast<Eigen::Index>(s);
        const SscMessage sent = ssc_encode(data.x_tilde.row(row).transpose(), codec);
        const SscDecoded dec = ssc_decode(ssc_transmit(sent, channels, rng, ideal), codec);
        if (dec.clamped) ++est.clamped_supports;
        accumulate(row, dec.x);
      }
    }
  } else {
    const StagePlan& plan = system.plan;
    const MsvqEncoder encoder(plan);
    const bool measurement = is_measurement_domain(system.scheme);
    const RowMatrix& targets = measurement ? data.y : data.x_tilde;
    if (targets.cols() != plan.stage_codebooks.front().dim()) {
      throw ConfigError("codebook dimension differs from the evaluation data");
    }
    // Single-stage measurement decoders only ever see 2^R distinct inputs.
    std::vector<Vector> recon_cache;
    if (measurement && plan.stages() == 1) {
      const Codebook& cb = plan.stage_codebooks[0];
      recon_cache.reserve(cb.size());
      for (Eigen::Index j = 0; j < cb.vectors.rows(); ++j) {
        recon_cache.push_back(reconstruct_measurement(exp, cb.vectors.row(j).transpose()));
      }
    }

    const int stages = plan.stages();
    for (std::size_t start = 0, b = 0; start < count; start += kBatchSize, ++b) {
      const std::size_t end = std::min(count, start + kBatchSize);
      const RowMatrix block = targets.middleRows(static_cast<Eigen::Index>(start),
                                                 static_cast<Eigen::Index>(end - start));
      std::vector<IndexVector> sent;
      for (int l = 0; l < stages; ++l) {
        IndexVector idx;
        Vector scores;
        encoder.encode_stage_batch(block, l, sent, idx, scores);
        sent.push_back(std::move(idx));
      }
      std::vector<Rng> rngs;
      for (int l = 0; l < stages; ++l) {
        rngs.push_back(make_stream(cfg.seed, {kChannelTag, static_cast<std::uint64_t>(l), b}));
      }
      for (std::size_t s = start; s < end; ++s) {
        const std::size_t local = s - start;
        Vector out = Vector::Zero(targets.cols());
        std::uint32_t first = 0;
        for (int l = 0; l < stages; ++l) {
          const auto lu = static_cast<std::size_t>(l);
          const std::uint32_t j = plan.stage_channels[lu].transmit(sent[lu][local], rngs[lu]);
          if (l == 0) first = j;
          out += plan.stage_codebooks[lu].vectors.row(j).transpose();
        }
        if (measurement) {
          out = recon_cache.empty() ? reconstruct_measurement(exp, out) : recon_cache[first];
        }
        accumulate(static_cast<Eigen::Index>(s), out);
      }
    }
  }

  const double k = exp.spec.k;
  est.samples = count;
  est.d = err.mean(count);
  est.d_cs = cs.mean(count);
  est.d_q = q.mean(count);
  est.cross = cross.mean(count);
  est.cross_stderr = cross.stderr_of_mean(count);
  est.nmse = est.d / k;
  est.nmse_db = to_db(est.nmse);
  est.stderr_linear = err.stderr_of_mean(count) / k;
  est.stderr_db = est.nmse > 0.0 ? 10.0 / std::log(10.0) * est.stderr_linear / est.nmse : 0.0;
  if (!std::isfinite(est.nmse)) throw NumericalError("non-finite NMSE estimate");
  return est;
}

// ---------------------------------------------------------------------------

namespace {

std::string data_key(const ExperimentConfig& c) {
  std::ostringstream k;
  k << c.n << '/' << c.k << '/' << c.resolved_m() << '/' << format_real(c.sigma_w2) << '/'
    << to_string(c.estimator.mode) << '/' << c.estimator.enumeration_cap << '/'
    << c.estimator.exact_max_n << '/' << c.n_train << '/' << c.n_eval << '/' << c.seed;
  return k.str();
}

std::string system_key(const ExperimentConfig& c) {
  std::ostringstream k;
  k << to_string(c.scheme) << '/' << join(c.resolved_stage_rates()) << '/' << c.train.max_iters
    << '/' << format_real(c.train.rel_tol) << '/' << format_real(c.train.delta_split) << '/'
    << c.train.growth_max_iters << '/' << format_real(c.train.growth_rel_tol);
  return k.str();
}

}  // namespace

std::vector<SweepPoint> run_sweep(const SweepConfig& cfg, const SweepOptions& options) {
  const std::vector<ExperimentConfig> grid = cfg.points();
  std::vector<SweepPoint> out;
  std::optional<Experiment> exp;
  std::string exp_key;
  std::map<std::string, TrainedSystem> noiseless;

  for (const ExperimentConfig& pc : grid) {
    SweepPoint pt;
    pt.config = pc;
    SweepRecord& r = pt.record;
    r.scheme = to_string(pc.scheme);
    r.n = pc.n;
    r.k = pc.k;
    r.m = pc.resolved_m();
    r.rate = pc.rate;
    r.epsilon = pc.epsilon;
    r.sigma_w2 = pc.sigma_w2;
    r.n_eval = pc.n_eval;
    r.seed = pc.seed;

    const auto t0 = std::chrono::steady_clock::now();
    try {
      pc.validate();
      const std::string key = data_key(pc);
      if (!exp || key != exp_key) {
        exp.reset();
        noiseless.clear();
        exp = prepare_experiment(pc);
        exp_key = key;
      }
      TrainedSystem sys;
      if (is_ssc(pc.scheme)) {
        sys = train_system(pc, *exp);
      } else {
        const std::string skey = system_key(pc);
        auto it = noiseless.find(skey);
        if (it == noiseless.end()) {
          ExperimentConfig clean = pc;
          clean.epsilon = 0.0;
          clean.stage_epsilons.clear();
          it = noiseless.emplace(skey, train_system(clean, *exp)).first;
        }
        sys = any_noisy(pc.resolved_stage_epsilons()) ? train_system(pc, *exp, &it->second)
                                                      : it->second;
      }
      pt.estimate = evaluate_nmse(sys, pc, *exp);
      if (!std::isfinite(pt.estimate.nmse_db)) throw NumericalError("NMSE in dB is not finite");
      r.nmse_db = pt.estimate.nmse_db;
      if (options.keep_systems) {
        pt.system = std::move(sys);
      } else {
        pt.system.scheme = sys.scheme;
        pt.system.traces = std::move(sys.traces);
      }
    } catch (const std::exception& e) {
      pt.error = e.what();
      pt.config_error = dynamic_cast<const ConfigError*>(&e) != nullptr;
      r.nmse_db = std::numeric_limits<double>::quiet_NaN();
    }
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (options.log != nullptr) {
      *options.log << r.scheme << " m=" << r.m << " R=" << r.rate << " eps=" << format_real(r.epsilon);
      if (pt.ok()) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " nmse=%.3f dB (+/- %.3f) %.1fs", r.nmse_db,
                      pt.estimate.stderr_db, r.wall_seconds);
        *options.log << buf << "\n";
      } else {
        *options.log << " failed: " << pt.error << "\n";
      }
    }
    out.push_back(std::move(pt));
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << "scheme,n,k,m,rate,epsilon,sigma_w2,nmse_db,n_eval,seed\n";
  char buf[64];
  for (const auto& p : points) {
    if (!p.ok()) continue;
    const SweepRecord& r = p.record;
    std::snprintf(buf, sizeof buf, "%.6f", r.nmse_db);
    out << r.scheme << ',' << r.n << ',' << r.k << ',' << r.m << ',' << r.rate << ','
        << format_real(r.epsilon) << ',' << format_real(r.sigma_w2) << ',' << buf << ','
        << r.n_eval << ',' << r.seed << '\n';
  }
}

void write_sweep_details_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << "scheme,m,rate,epsilon,nmse_linear,stderr_linear,stderr_db,cs_nmse_db,wall_seconds,status\n";
  char buf[256];
  for (const auto& p : points) {
    const SweepRecord& r = p.record;
    std::string status = p.ok() ? "ok" : p.error;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    const NmseEstimate& e = p.estimate;
    const double cs_db = p.ok() ? to_db(e.d_cs / r.k) : std::numeric_limits<double>::quiet_NaN();
    std::snprintf(buf, sizeof buf, "%.10g,%.6g,%.6g,%.6f,%.3f", e.nmse, e.stderr_linear,
                  e.stderr_db, cs_db, r.wall_seconds);
    out << r.scheme << ',' << r.m << ',' << r.rate << ',' << format_real(r.epsilon) << ',' << buf
        << ',' << status << '\n';
  }
}

void write_bound_csv(std::ostream& out, const BoundCurveRequest& req) {
  out << "rate,capacity,bound_mse,bound_nmse_db\n";
  const double capacity = bsc_capacity(req.epsilon);
  char buf[128];
  for (double rate : req.rates) {
    BoundInputs in{req.n, req.k, req.mu, req.sigma_w2, rate, capacity};
    const double d = req.sigma_w2 > 0.0 ? bound_noisy(in) : bound_noiseless(in);
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.6f", rate, capacity, d, to_db(d / req.k));
    out << buf << '\n';
  }
}

}  // namespace csvq
