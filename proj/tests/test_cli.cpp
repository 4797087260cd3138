#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "csvq/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = csvq::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("csvq_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kSmallConfig =
    "n = 8\n"
    "k = 1\n"
    "m = 4\n"
    "sigma_w2 = 0.01\n"
    "rate = 5\n"
    "n_train = 3000\n"
    "n_eval = 3000\n"
    "seed = 5\n";

}  // namespace

TEST_CASE("coherence") {
  const fs::path dir = scratch("coherence");
  write_file(dir / "phi.csv", "0.9924,0.8961,0.7201\n0.1230,0.4439,0.6939\n");
  const Run r = run({"coherence", "--matrix", (dir / "phi.csv").string()});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("0.953", 0) == 0);
  CHECK(run({"coherence"}).code == 1);
  CHECK(run({"coherence", "--matrix", (dir / "missing.csv").string()}).code == 1);
  const Run seeded = run({"coherence", "--n", "12", "--m", "6", "--seed", "3"});
  CHECK(seeded.code == 0);
  CHECK(seeded.out == run({"coherence", "--n", "12", "--m", "6", "--seed", "3"}).out);
}

TEST_CASE("bound") {
  const Run r = run({"bound", "--n", "2", "--k", "1", "--mu", "0", "--rates", "3,4"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("rate,capacity,bound_mse,bound_nmse_db\n3,1,0.1700", 0) == 0);
  const Run range = run({"bound", "--n", "12", "--k", "2", "--mu", "0.4", "--sigma-w2", "0.01",
                         "--epsilon", "0.01", "--r-min", "8", "--r-max", "12", "--r-step", "2"});
  CHECK(range.code == 0);
  std::istringstream lines(range.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 4);
  CHECK(run({"bound", "--n", "2", "--k", "1", "--mu", "1.5", "--rates", "3"}).code == 1);
  CHECK(run({"bound", "--k", "1"}).code == 1);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"sweep", "-c", "/nonexistent/config.txt", "-o", "x.csv"}).code == 1);
  const fs::path dir = scratch("errors");
  write_file(dir / "bad.cfg", "n = 8\nwidth = 3\n");
  const Run r = run({"train-covq", "-c", (dir / "bad.cfg").string(), "-o", (dir / "a").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("width") != std::string::npos);
}

TEST_CASE("train, store and evaluate") {
  const fs::path dir = scratch("train");
  write_file(dir / "small.cfg", kSmallConfig);
  const fs::path art = dir / "covq";
  const Run t = run({"train-covq", "-c", (dir / "small.cfg").string(), "-s", "epsilon=0.02", "-o",
                     art.string()});
  REQUIRE(t.code == 0);
  CHECK(fs::exists(art / "config.txt"));
  CHECK(fs::exists(art / "phi.csv"));
  CHECK(fs::exists(art / "stage1.csv"));
  CHECK(fs::exists(art / "trace.csv"));

  const Run e1 = run({"eval", "-a", art.string()});
  REQUIRE(e1.code == 0);
  CHECK(e1.out.rfind("scheme,n,k,m,rate,epsilon,sigma_w2,nmse_db,n_eval,seed\ncovq-cs,8,1,4,5,0.02,", 0) == 0);
  CHECK(e1.out == run({"eval", "-a", art.string()}).out);

  // Evaluating the stored system at another crossover probability.
  const Run e2 = run({"eval", "-a", art.string(), "-s", "epsilon=0.1"});
  CHECK(e2.code == 0);
  CHECK(e2.out.find("covq-cs,8,1,4,5,0.1,") != std::string::npos);
  CHECK(run({"eval", "-a", art.string(), "-s", "rate=6"}).code == 1);

  // A training-from-config evaluation of the same point gives the same record.
  const Run e3 = run({"eval", "-c", (dir / "small.cfg").string(), "-s", "epsilon=0.02"});
  CHECK(e3.code == 0);
  CHECK(e3.out == e1.out);

  for (const char* cmd : {"train-msvq", "train-nnc", "train-msnnc"}) {
    CHECK(run({cmd, "-c", (dir / "small.cfg").string(), "-s", "rate=6", "-o",
               (dir / cmd).string()})
              .code == 0);
  }
  CHECK(read_file(dir / "train-msvq" / "config.txt").find("scheme = comsvq-cs") != std::string::npos);
}

TEST_CASE("corrupted artifacts are a numerical failure") {
  const fs::path dir = scratch("nan");
  write_file(dir / "small.cfg", kSmallConfig);
  const fs::path art = dir / "covq";
  REQUIRE(run({"train-covq", "-c", (dir / "small.cfg").string(), "-o", art.string()}).code == 0);
  std::string cb = read_file(art / "stage1.csv");
  const auto line = cb.find('\n') + 1;
  cb.replace(line, cb.find(',', line) - line, "nan");
  write_file(art / "stage1.csv", cb);
  CHECK(run({"eval", "-a", art.string()}).code == 2);
}

TEST_CASE("sweep") {
  const fs::path dir = scratch("sweep");
  write_file(dir / "sweep.cfg", std::string(kSmallConfig) +
                                    "schemes = covq-cs, comsvq-cs\n"
                                    "sweep_axis = epsilon\n"
                                    "sweep_values = 0, 0.05\n");
  const Run r = run({"sweep", "-q", "-c", (dir / "sweep.cfg").string(), "-o", (dir / "r.csv").string()});
  REQUIRE(r.code == 0);
  const std::string csv = read_file(dir / "r.csv");
  CHECK(csv.rfind("scheme,n,k,m,rate,epsilon,sigma_w2,nmse_db,n_eval,seed\n", 0) == 0);
  CHECK(fs::exists(dir / "r.details.csv"));
  REQUIRE(run({"sweep", "-q", "-c", (dir / "sweep.cfg").string(), "-o", (dir / "r2.csv").string()}).code == 0);
  CHECK(read_file(dir / "r2.csv") == csv);

  // A point the scheme cannot realize is a configuration failure.
  write_file(dir / "ssc.cfg", "n = 12\nk = 2\nm = 6\nrate = 8\nn_train = 1000\nn_eval = 1000\nscheme = ssc\n");
  CHECK(run({"sweep", "-q", "-c", (dir / "ssc.cfg").string(), "-o", (dir / "s.csv").string()}).code == 1);
}
