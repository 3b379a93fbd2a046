#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Scratch directory removed on scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("nsca_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run nsca(const TempDir& dir, const std::string& args, const std::string& env = "") {
  const std::string out = dir / "stdout.txt";
  const std::string err = dir / "stderr.txt";
  const std::string cmd = env + " \"" NSCA_CLI_PATH "\" " + args + " > \"" + out + "\" 2> \"" + err + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::map<std::string, double> detector_aucs(const std::string& out) {
  std::map<std::string, double> aucs;
  const std::regex line(R"((\w+)\s+max=.*auc=([0-9.]+))");
  std::istringstream in(out);
  std::string l;
  std::smatch m;
  while (std::getline(in, l))
    if (std::regex_search(l, m, line)) aucs[m[1]] = std::stod(m[2]);
  return aucs;
}

double diagnostic(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  std::string l;
  while (std::getline(in, l))
    if (l.rfind(key + " ", 0) == 0) return std::stod(l.substr(key.size() + 1));
  FAIL("diagnostic '" << key << "' missing");
  return 0.0;
}

}  // namespace

TEST_CASE("synth is deterministic") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 4 --t 10000 --seed 7 --out " + (dir / "a")).code == 0);
  REQUIRE(nsca(dir, "synth --n 4 --t 10000 --seed 7 --out " + (dir / "b")).code == 0);
  for (const char* f : {"record.csv", "sources.csv", "mixing.csv", "mask.csv"}) {
    INFO(f);
    const std::string a = slurp(dir.path / "a" / f);
    CHECK(!a.empty());
    CHECK(a == slurp(dir.path / "b" / f));
  }
  CHECK(slurp(dir.path / "a" / "record.csv").rfind("ch1,ch2,ch3,ch4\n", 0) == 0);
}

TEST_CASE("synth usage errors") {
  TempDir dir;
  const Run r = nsca(dir, "synth --t 100 --out " + (dir / "x"));
  CHECK(r.code == 2);
  CHECK(r.err.find("--n") != std::string::npos);
  CHECK(nsca(dir, "synth --n 3 --t 100 --out " + (dir / "x")).code == 2);
  CHECK(nsca(dir, "bogus").code == 2);
  CHECK(nsca(dir, "").code == 2);
  CHECK(nsca(dir, "--help").code == 0);
}

TEST_CASE("synth with zero burst amplitude keeps the mask") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 3 --t 5000 --seed 2 --burst-amplitude 0 --out " + (dir / "s")).code == 0);
  CHECK(slurp(dir.path / "s" / "mask.csv").find(",1\n") != std::string::npos);
}

TEST_CASE("NSCA_SEED overrides --seed") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 3 --t 3000 --seed 5 --out " + (dir / "a")).code == 0);
  REQUIRE(nsca(dir, "synth --n 3 --t 3000 --seed 1 --out " + (dir / "b"), "NSCA_SEED=5").code == 0);
  REQUIRE(nsca(dir, "synth --n 3 --t 3000 --seed 5 --out " + (dir / "c"), "NSCA_SEED=6").code == 0);
  CHECK(slurp(dir.path / "a" / "record.csv") == slurp(dir.path / "b" / "record.csv"));
  CHECK(slurp(dir.path / "a" / "record.csv") != slurp(dir.path / "c" / "record.csv"));
  CHECK(nsca(dir, "synth --n 3 --t 3000 --out " + (dir / "d"), "NSCA_SEED=abc").code == 2);
}

TEST_CASE("detect on a constant record") {
  TempDir dir;
  {
    std::ofstream rec(dir / "const.csv");
    rec << "ch1,ch2\n";
    for (int k = 0; k < 300; ++k) rec << "1.5,-2\n";
  }
  const Run r = nsca(dir, "detect --record " + (dir / "const.csv") + " --detectors envelope --out " + (dir / "d"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("envelope") != std::string::npos);
  std::istringstream raw(slurp(dir.path / "d" / "envelope.csv"));
  std::istringstream norm(slurp(dir.path / "d" / "envelope_norm.csv"));
  std::string line;
  std::getline(raw, line);
  CHECK(line == "k,value");
  int rows = 0;
  while (std::getline(raw, line)) {
    CHECK(line.substr(line.find(',') + 1) == "2.25");
    ++rows;
  }
  CHECK(rows == 300);
  std::getline(norm, line);
  while (std::getline(norm, line)) CHECK(line.substr(line.find(',') + 1) == "1");
}

TEST_CASE("detect reports malformed input") {
  TempDir dir;
  {
    std::ofstream rec(dir / "bad.csv");
    rec << "ch1,ch2\n1,2\n3,4\nNaN,5\n";
  }
  const Run r = nsca(dir, "detect --record " + (dir / "bad.csv") + " --out " + (dir / "d"));
  CHECK(r.code == 3);
  CHECK(r.err.find("line 4") != std::string::npos);
  CHECK(nsca(dir, "detect --record " + (dir / "missing.csv") + " --out " + (dir / "d")).code == 3);
  {
    std::ofstream rec(dir / "good.csv");
    rec << "ch1,ch2\n";
    for (int k = 0; k < 50; ++k) rec << k << ',' << k % 7 << '\n';
  }
  CHECK(nsca(dir, "detect --record " + (dir / "good.csv") + " --detectors nope --out " + (dir / "d")).code == 2);
}

TEST_CASE("detect ranks the innovation index near the top") {
  TempDir dir;
  for (int seed : {11, 12, 13}) {
    const std::string s = dir / ("s" + std::to_string(seed));
    REQUIRE(nsca(dir, "synth --n 5 --t 10000 --seed " + std::to_string(seed) + " --out " + s).code == 0);
    const Run r = nsca(dir, "detect --record " + s + "/record.csv --mask " + s +
                                "/mask.csv --detectors innovation,anderson_darling,envelope,easi --out " + s + "/d");
    REQUIRE(r.code == 0);
    const auto aucs = detector_aucs(r.out);
    REQUIRE(aucs.size() == 4);
    for (const auto& [name, value] : aucs) {
      INFO(name << " auc " << value << " vs innovation " << aucs.at("innovation"));
      CHECK(aucs.at("innovation") >= value - 0.05);
    }
  }
}

TEST_CASE("detect emits plot data") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 3 --t 6000 --seed 3 --out " + (dir / "s")).code == 0);
  REQUIRE(nsca(dir, "detect --record " + (dir / "s") + "/record.csv --detectors envelope --emit-plot-data "
                    "--plot-points 500 --out " + (dir / "d")).code == 0);
  std::istringstream plot(slurp(dir.path / "d" / "plot_envelope.csv"));
  std::string line;
  std::getline(plot, line);
  CHECK(line == "k,signal,index");
  int rows = 0;
  while (std::getline(plot, line)) ++rows;
  CHECK(rows > 0);
  CHECK(rows <= 500);
}

TEST_CASE("separate with the oracle mask") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 5 --t 10000 --seed 7 --out " + (dir / "s")).code == 0);
  const std::string s = dir / "s";
  const Run r = nsca(dir, "separate --record " + s + "/record.csv --mask " + s + "/mask.csv --truth " + s +
                              "/sources.csv --out " + (dir / "sep"));
  REQUIRE(r.code == 0);
  CHECK(diagnostic(r.out, "first_source_corr") >= 0.95);
  for (const char* f : {"demixer.csv", "sources.csv", "spectra.csv", "partition.csv", "diagnostics.txt"})
    CHECK(fs::exists(dir.path / "sep" / f));
  CHECK(slurp(dir.path / "sep" / "spectra.csv").rfind("class,component,value\n", 0) == 0);
}

TEST_CASE("separate surfaces an empty class as a numeric failure") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 3 --t 3000 --seed 4 --out " + (dir / "s")).code == 0);
  {
    std::ofstream idx(dir / "const_index.csv");
    idx << "k,value\n";
    for (int k = 0; k < 3000; ++k) idx << k << ",0.5\n";
  }
  const Run r = nsca(dir, "separate --record " + (dir / "s") + "/record.csv --index " + (dir / "const_index.csv") +
                              " --theta 1.0 --out " + (dir / "sep"));
  CHECK(r.code == 4);
  CHECK(r.err.find("EmptyClass") != std::string::npos);
}

TEST_CASE("separate with a three-class quantile partition") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 4 --t 8000 --seed 5 --out " + (dir / "s")).code == 0);
  const std::string s = dir / "s";
  REQUIRE(nsca(dir, "detect --record " + s + "/record.csv --detectors envelope --out " + s).code == 0);
  const Run r = nsca(dir, "separate --record " + s + "/record.csv --index " + s + "/envelope.csv --quantiles 3 --out " +
                              (dir / "sep"));
  REQUIRE(r.code == 0);
  CHECK(diagnostic(r.out, "residual") >= 0.0);
  CHECK(r.out.find("method multi-class") != std::string::npos);
}

TEST_CASE("separate usage errors") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 3 --t 3000 --seed 4 --out " + (dir / "s")).code == 0);
  const std::string s = dir / "s";
  CHECK(nsca(dir, "separate --record " + s + "/record.csv --out " + (dir / "sep")).code == 2);
  CHECK(nsca(dir, "separate --record " + s + "/record.csv --mask " + s + "/mask.csv --index " + s +
                      "/mask.csv --out " + (dir / "sep"))
            .code == 2);
  {
    std::ofstream short_mask(dir / "short.csv");
    short_mask << "k,label\n0,0\n1,1\n";
  }
  CHECK(nsca(dir, "separate --record " + s + "/record.csv --mask " + (dir / "short.csv") + " --out " + (dir / "sep"))
            .code == 5);
}

TEST_CASE("eval of the truth against itself") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 3 --t 3000 --seed 8 --out " + (dir / "s")).code == 0);
  const std::string src = (dir / "s") + "/sources.csv";
  const Run r = nsca(dir, "eval --est " + src + " --truth " + src);
  REQUIRE(r.code == 0);
  std::size_t ones = 0;
  for (std::size_t p = r.out.find("1.000"); p != std::string::npos; p = r.out.find("1.000", p + 1)) ++ones;
  CHECK(ones == 3);
  CHECK(r.out.find("metric,estimate,truth,value") != std::string::npos);
}

TEST_CASE("eval shape mismatch") {
  TempDir dir;
  REQUIRE(nsca(dir, "synth --n 3 --t 3000 --seed 8 --out " + (dir / "a")).code == 0);
  REQUIRE(nsca(dir, "synth --n 4 --t 3000 --seed 8 --out " + (dir / "b")).code == 0);
  CHECK(nsca(dir, "eval --est " + (dir / "a") + "/sources.csv --truth " + (dir / "b") + "/sources.csv").code == 5);
  CHECK(nsca(dir, "eval --est-mask " + (dir / "a") + "/mask.csv").code == 2);
}
