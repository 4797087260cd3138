#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csvq/core_model.hpp"
#include "csvq/covq.hpp"
#include "csvq/estimators.hpp"
#include "csvq/msvq.hpp"
#include "csvq/ssc.hpp"
#include "csvq/types.hpp"

namespace csvq {

enum class Scheme { kCovq, kComsvq, kNnc, kMsnnc, kSsc, kSscIdealSupport };

/// covq-cs, comsvq-cs, nnc-cs, msnnc-cs, ssc, ssc-ideal-support
Scheme parse_scheme(const std::string& text);
std::string to_string(Scheme scheme);
bool is_multistage(Scheme scheme);
bool is_measurement_domain(Scheme scheme);
bool is_ssc(Scheme scheme);

struct ExperimentConfig {
  Scheme scheme = Scheme::kCovq;
  int n = 12;
  int k = 2;
  int m = 0;                    // used when alpha is unset
  std::optional<double> alpha;  // M = round(alpha N)
  double sigma_w2 = 0.0;
  int rate = 12;
  int stages = 2;               // multi-stage schemes without explicit stage_rates
  std::vector<int> stage_rates;  // multi-stage only; must sum to rate
  double epsilon = 0.0;
  std::vector<double> stage_epsilons;  // overrides epsilon per stage
  std::size_t n_train = 100'000;
  std::size_t n_eval = 100'000;
  std::uint64_t seed = 1;
  MmseConfig estimator;
  TrainConfig train;

  int resolved_m() const;
  /// One entry per stage; single-stage schemes get {rate}.
  std::vector<int> resolved_stage_rates() const;
  std::vector<double> resolved_stage_epsilons() const;
  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

enum class SweepAxis { kNone, kAlpha, kRate, kEpsilon };

SweepAxis parse_sweep_axis(const std::string& text);
std::string to_string(SweepAxis axis);

struct SweepConfig {
  ExperimentConfig base;
  std::vector<Scheme> schemes;  // defaults to {base.scheme}
  SweepAxis axis = SweepAxis::kNone;
  std::vector<double> values;

  /// The grid in evaluation order: values outer, schemes inner.
  std::vector<ExperimentConfig> points() const;
};

/// Parses `key = value` lines; '#' starts a comment. Lists are comma-separated.
/// Unknown keys and malformed values raise ConfigError.
SweepConfig parse_config(const std::string& text);
SweepConfig load_config(const std::string& path);
/// Applies one `key=value` override on top of a parsed configuration.
void apply_setting(SweepConfig& cfg, const std::string& key, const std::string& value);
/// Canonical key=value rendering; parse_config(config_to_text(c)) reproduces c.
std::string config_to_text(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

enum class DatasetSplit : std::uint64_t { kTrain = 0, kEval = 1 };

/// Rows are samples: the source x, the measurement y and the encoder-side
/// reconstruction x~(y) (equal to x in oracle mode).
struct Dataset {
  RowMatrix x;
  RowMatrix y;
  RowMatrix x_tilde;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
};

inline constexpr std::size_t kBatchSize = 4096;

/// Samples are generated in batches of kBatchSize. Source values depend on
/// (seed, split, N, K, batch) and measurement noise on (seed, split, N, K, M,
/// batch), so different rates, crossover probabilities and noise levels see
/// the same source draws.
Dataset generate_dataset(const SensingModel& model, const SourceSpec& spec,
                         const SparseEstimator& estimator, std::size_t count, std::uint64_t seed,
                         DatasetSplit split);

/// The sensing matrix for (seed, N, M).
Matrix experiment_sensing_matrix(std::uint64_t seed, int n, int m);

struct Experiment {
  SourceSpec spec;
  SensingModel model;
  SparseEstimator estimator;
  double coherence = 0.0;
  Dataset train;
  Dataset eval;
};

Experiment prepare_experiment(const ExperimentConfig& cfg);
/// Same, with a given sensing matrix (for evaluating stored artifacts).
Experiment prepare_experiment(const ExperimentConfig& cfg, Matrix phi);

/// Decoder-side reconstruction from a decoded measurement vector: exact MMSE
/// when the estimator is exact, OMP otherwise.
Vector reconstruct_measurement(const Experiment& exp, const Vector& y_hat);

// ---------------------------------------------------------------------------
// Systems
// ---------------------------------------------------------------------------

struct TrainedSystem {
  Scheme scheme = Scheme::kCovq;
  StagePlan plan;             // VQ schemes (one stage for covq-cs / nnc-cs)
  std::optional<SscCodec> ssc;
  double ssc_epsilon = 0.0;
  std::vector<TrainingTrace> traces;

  bool trained() const;
  bool noiseless() const;
};

/// Builds the channel for one stage; epsilon == 0 gives the identity channel.
Dmc stage_channel(int rate_bits, double epsilon);

/// Trains the configured scheme. For a noisy channel the design starts from
/// `noiseless_init` when given (it must be the same scheme trained at
/// epsilon = 0 on the same data) and otherwise trains that system first.
TrainedSystem train_system(const ExperimentConfig& cfg, const Experiment& exp,
                           const TrainedSystem* noiseless_init = nullptr);

struct NmseEstimate {
  double nmse = 0.0;       // mean |X - X^|^2 / K
  double nmse_db = 0.0;
  double stderr_linear = 0.0;
  double stderr_db = 0.0;  // delta method
  std::size_t samples = 0;
  double d = 0.0;          // mean |X - X^|^2
  double d_cs = 0.0;       // mean |X - x~|^2
  double d_q = 0.0;        // mean |x~ - X^|^2
  double cross = 0.0;      // mean 2 (X - x~)^T (x~ - X^)
  double cross_stderr = 0.0;
  std::size_t clamped_supports = 0;  // SSC ranks outside the valid range
};

/// Monte-Carlo end-to-end NMSE on the evaluation set. Channel noise for
/// stage l of batch b is drawn from the stream (seed, channel, l, b).
/// Throws ConfigError for an untrained system.
NmseEstimate evaluate_nmse(const TrainedSystem& system, const ExperimentConfig& cfg,
                           const Experiment& exp);

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepRecord {
  std::string scheme;
  int n = 0;
  int k = 0;
  int m = 0;
  int rate = 0;
  double epsilon = 0.0;
  double sigma_w2 = 0.0;
  double nmse_db = 0.0;
  std::size_t n_eval = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

struct SweepPoint {
  ExperimentConfig config;
  SweepRecord record;
  NmseEstimate estimate;
  TrainedSystem system;
  std::string error;  // empty on success
  bool config_error = false;

  bool ok() const { return error.empty(); }
};

struct SweepOptions {
  std::ostream* log = nullptr;
  bool keep_systems = false;
};

/// Runs every grid point. Data are shared between points with the same
/// (N, K, M, noise, estimator, sample counts, seed); noisy points start from
/// the cached noiseless design of the same scheme. A failing point is
/// recorded with its error and the sweep continues.
std::vector<SweepPoint> run_sweep(const SweepConfig& cfg, const SweepOptions& options = {});

/// scheme,n,k,m,rate,epsilon,sigma_w2,nmse_db,n_eval,seed
/// Successful points only; the content depends on nothing but config and seed.
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);
/// Per-point timing, error bars, D_cs and status (including failed points).
void write_sweep_details_csv(std::ostream& out, const std::vector<SweepPoint>& points);

struct BoundCurveRequest {
  int n = 0;
  int k = 0;
  double mu = 0.0;
  double sigma_w2 = 0.0;
  double epsilon = 0.0;
  std::vector<double> rates;
};

/// rate,capacity,bound_mse,bound_nmse_db. Uses the clean-measurement bound
/// when sigma_w2 == 0.
void write_bound_csv(std::ostream& out, const BoundCurveRequest& request);

}  // namespace csvq
