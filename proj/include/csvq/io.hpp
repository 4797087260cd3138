#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "csvq/covq.hpp"
#include "csvq/harness.hpp"
#include "csvq/types.hpp"

namespace csvq {

/// Comma-separated rows at full double precision. Lines starting with '#'
/// are comments and are skipped on read.
void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in);
Matrix read_matrix_csv_file(const std::string& path);

using Metadata = std::map<std::string, std::string>;

/// One codevector per row under a `# key=value ...` header line.
void write_codebook(std::ostream& out, const Codebook& cb, const Metadata& meta);
Codebook read_codebook(std::istream& in, Metadata* meta = nullptr);

/// label,iteration,distortion,splits
void write_traces_csv(std::ostream& out, const std::vector<TrainingTrace>& traces);

/// Artifact directory layout:
///   config.txt          resolved key=value configuration
///   phi.csv             sensing matrix
///   stage<l>.csv        codebook of stage l, counted from 1 (VQ schemes)
///   trace.csv           training distortion per iteration
void save_system(const std::string& dir, const ExperimentConfig& cfg, const Matrix& phi,
                 const TrainedSystem& system);

struct LoadedSystem {
  ExperimentConfig config;
  Matrix phi;
  TrainedSystem system;
};

/// Rebuilds channels from the stored configuration. Throws ConfigError on
/// missing or inconsistent files.
LoadedSystem load_system(const std::string& dir);

}  // namespace csvq
