#include "csvq/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace csvq {

namespace {

std::string full_precision(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_row(const std::string& line, int lineno) {
  std::vector<double> row;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    if (b == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": empty cell");
    const std::string t = cell.substr(b, e - b + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
      throw ConfigError("line " + std::to_string(lineno) + ": bad number '" + t + "'");
    }
    row.push_back(v);
  }
  return row;
}

template <typename Out>
Out read_rows(std::istream& in, Metadata* meta) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (meta != nullptr) {
        std::istringstream ss(line.substr(1));
        std::string tok;
        while (ss >> tok) {
          const auto eq = tok.find('=');
          if (eq != std::string::npos) (*meta)[tok.substr(0, eq)] = tok.substr(eq + 1);
        }
      }
      continue;
    }
    rows.push_back(parse_row(line, lineno));
    if (rows.back().size() != rows.front().size()) {
      throw ConfigError("line " + std::to_string(lineno) + ": ragged row");
    }
  }
  if (rows.empty()) throw ConfigError("matrix file has no rows");
  Out m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

template <typename M>
void write_rows(std::ostream& out, const M& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << full_precision(m(r, c));
    }
    out << '\n';
  }
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void write_matrix_csv(std::ostream& out, const Matrix& m) { write_rows(out, m); }

Matrix read_matrix_csv(std::istream& in) { return read_rows<Matrix>(in, nullptr); }

Matrix read_matrix_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_matrix_csv(in);
}

void write_codebook(std::ostream& out, const Codebook& cb, const Metadata& meta) {
  out << "# domain=" << to_string(cb.domain) << " dim=" << cb.dim() << " rate=" << cb.rate_bits();
  for (const auto& [k, v] : meta) out << ' ' << k << '=' << v;
  out << '\n';
  write_rows(out, cb.vectors);
}

Codebook read_codebook(std::istream& in, Metadata* meta) {
  Metadata local;
  Codebook cb;
  cb.vectors = read_rows<RowMatrix>(in, &local);
  const auto it = local.find("domain");
  if (it != local.end()) {
    if (it->second == to_string(CodebookDomain::kMeasurement)) {
      cb.domain = CodebookDomain::kMeasurement;
    } else if (it->second != to_string(CodebookDomain::kSource)) {
      throw ConfigError("unknown codebook domain '" + it->second + "'");
    }
  }
  try {
    cb.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("codebook: ") + e.what());
  }
  if (meta != nullptr) *meta = std::move(local);
  return cb;
}

void write_traces_csv(std::ostream& out, const std::vector<TrainingTrace>& traces) {
  out << "label,iteration,distortion,splits\n";
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.distortion.size(); ++i) {
      out << t.label << ',' << i << ',' << full_precision(t.distortion[i]) << ','
          << (i < t.splits.size() ? t.splits[i] : 0) << '\n';
    }
  }
}

void save_system(const std::string& dir, const ExperimentConfig& cfg, const Matrix& phi,
                 const TrainedSystem& system) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  {
    std::ofstream out(root / "config.txt");
    out << config_to_text(cfg);
  }
  {
    std::ofstream out(root / "phi.csv");
    write_matrix_csv(out, phi);
  }
  for (std::size_t l = 0; l < system.plan.stage_codebooks.size(); ++l) {
    std::ofstream out(root / ("stage" + std::to_string(l + 1) + ".csv"));
    const Dmc& ch = system.plan.stage_channels[l];
    Metadata meta{{"scheme", to_string(system.scheme)},
                  {"stage", std::to_string(l + 1)},
                  {"epsilon", full_precision(ch.bsc_epsilon().value_or(0.0))},
                  {"seed", std::to_string(cfg.seed)}};
    write_codebook(out, system.plan.stage_codebooks[l], meta);
  }
  std::ofstream out(root / "trace.csv");
  write_traces_csv(out, system.traces);
  if (!out) throw std::runtime_error("failed writing artifacts to '" + dir + "'");
}

LoadedSystem load_system(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  SweepConfig parsed = parse_config(read_file(root / "config.txt"));
  LoadedSystem out{parsed.base, read_matrix_csv_file((root / "phi.csv").string()), {}};
  const ExperimentConfig& cfg = out.config;
  cfg.validate();
  out.system.scheme = cfg.scheme;
  if (is_ssc(cfg.scheme)) {
    out.system.ssc = SscCodec::create(cfg.n, cfg.k, cfg.rate);
    out.system.ssc_epsilon = cfg.epsilon;
    return out;
  }
  const std::vector<int> rates = cfg.resolved_stage_rates();
  const std::vector<double> eps = cfg.resolved_stage_epsilons();
  StagePlan& plan = out.system.plan;
  plan.stage_rates = rates;
  for (std::size_t l = 0; l < rates.size(); ++l) {
    plan.stage_channels.push_back(stage_channel(rates[l], eps[l]));
    std::ifstream in(root / ("stage" + std::to_string(l + 1) + ".csv"));
    if (!in) throw ConfigError("missing codebook for stage " + std::to_string(l + 1));
    plan.stage_codebooks.push_back(read_codebook(in));
  }
  try {
    plan.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return out;
}

}  // namespace csvq
