#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("selinf_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(SELINF_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_csv(const fs::path& p, int n, int k, bool constant_response, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::ofstream out(p);
  out << "y";
  for (int j = 0; j < k; ++j) out << ",m" << j;
  out << "\n";
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(static_cast<std::size_t>(k));
    for (auto& v : x) v = z(rng);
    const double y = constant_response ? 1.0 : 3.0 * x[0] - 2.5 * x[1] + z(rng);
    out << y;
    for (double v : x) out << "," << v;
    out << "\n";
  }
}

}  // namespace

TEST_CASE("configuration errors exit with 2") {
  const auto dir = scratch("config");
  CHECK(run("simulate --reps 0 --out " + dir.string()) == 2);
  CHECK(run("simulate --loss ridge --out " + dir.string()) == 2);
  CHECK(run("simulate --signal 3 --sparsity 2 --out " + dir.string()) == 2);
  CHECK(run("simulate --bogus") == 2);
  CHECK(run("") == 2);
}

TEST_CASE("malformed CSV exits with 2, constant response with 4") {
  const auto dir = scratch("csv");
  {
    std::ofstream(dir / "ragged.csv") << "y,a,b\n1,2,3\n1,2\n";
    std::ofstream(dir / "text.csv") << "y,a\n1,abc\n";
  }
  CHECK(run("analyze --data " + (dir / "ragged.csv").string() + " --out " + dir.string()) == 2);
  CHECK(run("analyze --data " + (dir / "text.csv").string() + " --out " + dir.string()) == 2);
  CHECK(run("analyze --data " + (dir / "missing.csv").string() + " --out " + dir.string()) == 2);
  write_csv(dir / "const.csv", 50, 4, true, 1);
  CHECK(run("analyze --data " + (dir / "const.csv").string() + " --out " + (dir / "c").string()) == 4);
}

TEST_CASE("simulate is reproducible and its records re-aggregate") {
  const auto dir = scratch("sim");
  const std::string flags =
      "simulate --n 150 --p 30 --c 1.0 --reps 4 --grid-points 101 --grid-width 8 --seed 3 --threads 2";
  REQUIRE(run(flags + " --out " + (dir / "a").string()) == 0);
  REQUIRE(run(flags + " --out " + (dir / "b").string()) == 0);
  for (const char* f : {"records.jsonl", "coverage.csv", "coverage.json", "pivots.csv"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));

  auto ma = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  auto mb = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"));
  const std::string hash = ma["input_hash"];
  CHECK(ma["config"] == mb["config"]);
  CHECK(ma["input_hash"] == mb["input_hash"]);
  CHECK(slurp(dir / "a" / "coverage.csv").find(hash) != std::string::npos);
  CHECK(slurp(dir / "a" / "pivots.csv").find(hash) != std::string::npos);
  std::istringstream lines(slurp(dir / "a" / "records.jsonl"));
  std::string line;
  while (std::getline(lines, line)) CHECK(nlohmann::json::parse(line)["manifest"] == hash);

  // The environment seed applies only when --seed is absent.
  const std::string no_seed =
      "simulate --n 150 --p 30 --c 1.0 --reps 2 --grid-points 101 --grid-width 8 --threads 1";
  REQUIRE(run("--help") == 0);
  REQUIRE(std::system(("SELECTIVE_SEED=3 " + std::string(SELINF_CLI) + " " + no_seed + " --out " +
                       (dir / "env").string() + " > /dev/null 2>&1").c_str()) == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "env" / "manifest.json"))["config"]["seed"] == 3);

  const std::string agg = std::string(SELINF_CLI) + " aggregate --records " +
                          (dir / "a" / "records.jsonl").string() + " --label lasso/gaussian > " +
                          (dir / "agg.csv").string();
  REQUIRE(std::system(agg.c_str()) == 0);
  const std::string cov = slurp(dir / "a" / "coverage.csv");
  const std::string again = slurp(dir / "agg.csv");
  // Same header and row apart from the c column, which the records do not carry.
  const auto strip_c = [](const std::string& row) {
    auto parts = std::vector<std::string>{};
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ',')) parts.push_back(cell);
    parts.erase(parts.begin() + 5);
    std::string out;
    for (const auto& p : parts) out += p + ",";
    return out;
  };
  const auto last_line = [](const std::string& text) {
    const auto end = text.find_last_not_of('\n');
    const auto start = text.rfind('\n', end);
    return text.substr(start + 1, end - start);
  };
  CHECK(strip_c(last_line(cov)) == strip_c(last_line(again)));
}

TEST_CASE("analyze emits records and bar-chart rows") {
  const auto dir = scratch("analyze");
  write_csv(dir / "data.csv", 300, 8, false, 2);
  REQUIRE(run("analyze --data " + (dir / "data.csv").string() + " --c 1 --seed 1 --grid-points 201 --out " +
              (dir / "out").string()) == 0);
  std::istringstream lines(slurp(dir / "out" / "records.jsonl"));
  std::string line;
  int records = 0;
  double sel = 0.0;
  double naive = 0.0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"ci_lo", "ci_hi", "naive_lo", "naive_hi", "mle", "naive_est"})
      CHECK(j.contains(key));
    sel += j["ci_hi"].get<double>() - j["ci_lo"].get<double>();
    naive += j["naive_hi"].get<double>() - j["naive_lo"].get<double>();
    ++records;
  }
  REQUIRE(records >= 2);
  CHECK(sel / naive >= 0.8);
  CHECK(sel / naive <= 1.6);
  const std::string bars = slurp(dir / "out" / "barchart.csv");
  CHECK(bars.find("m0") != std::string::npos);
  CHECK(bars.find("m1") != std::string::npos);
}
