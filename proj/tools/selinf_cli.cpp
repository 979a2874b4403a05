// Command-line front end: coverage simulations, analysis of a CSV dataset,
// and re-aggregation of stored records.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "selinf/experiments.hpp"
#include "selinf/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitEmpty = 4;

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

selinf::LossKind parse_loss(const std::string& s) {
  if (s == "lasso") return selinf::LossKind::SquaredError;
  if (s == "logistic") return selinf::LossKind::Logistic;
  if (s == "fs") return selinf::LossKind::ForwardStepwise;
  throw selinf::Error(selinf::ErrorKind::InvalidArgument, "unknown loss '" + s + "'");
}

selinf::RandomizationKind parse_rand(const std::string& s) {
  if (s == "gaussian") return selinf::RandomizationKind::Gaussian;
  if (s == "laplace") return selinf::RandomizationKind::Laplace;
  throw selinf::Error(selinf::ErrorKind::InvalidArgument, "unknown randomization '" + s + "'");
}

std::pair<double, double> parse_signal(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument("no colon");
    std::size_t used = 0;
    const double lo = std::stod(s.substr(0, colon), &used);
    const double hi = std::stod(s.substr(colon + 1));
    if (!(hi >= lo)) throw std::invalid_argument("hi < lo");
    return {lo, hi};
  } catch (const std::exception&) {
    throw selinf::Error(selinf::ErrorKind::InvalidArgument, "--signal expects lo:hi, got '" + s + "'");
  }
}

// Seed precedence: --seed, then SELECTIVE_SEED, then 0.
std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t value) {
  if (flag->count() > 0) return value;
  if (const char* env = std::getenv("SELECTIVE_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw selinf::Error(selinf::ErrorKind::InvalidArgument, "SELECTIVE_SEED is not an integer");
    }
  }
  return 0;
}

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    written_.push_back(name);
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  std::vector<std::string> written_;
};

void write_manifest(OutputDir& out, const std::string& subcommand, const json& config,
                    const std::string& hash, const std::string& started, const json& summary) {
  json m;
  m["subcommand"] = subcommand;
  m["config"] = config;
  m["input_hash"] = hash;
  m["started_at"] = started;
  m["finished_at"] = utc_now();
  m["outputs"] = out.written();
  m["summary"] = summary;
  out.write("manifest.json", m.dump(2) + "\n");
}

std::string ecdf_csv(const std::vector<selinf::InferenceRecord>& records, const std::string& hash) {
  std::vector<double> sel;
  std::vector<double> naive;
  for (const auto& r : records) {
    if (r.pivot_at_truth) sel.push_back(*r.pivot_at_truth);
    if (r.naive_pivot_at_truth) naive.push_back(*r.naive_pivot_at_truth);
  }
  std::sort(sel.begin(), sel.end());
  std::sort(naive.begin(), naive.end());
  std::ostringstream os;
  os << "# manifest: " << hash << "\n" << "kind,x,ecdf\n";
  const auto emit = [&](const char* kind, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i)
      os << kind << ',' << selinf::io::format_double(v[i]) << ','
         << selinf::io::format_double(static_cast<double>(i + 1) / v.size()) << '\n';
  };
  emit("selective", sel);
  emit("naive", naive);
  return os.str();
}

struct SimulateArgs {
  std::string loss = "lasso";
  std::string rand = "gaussian";
  double tau = 1.0;
  double c = 1.2;
  long n = 1000;
  long p = 500;
  int sparsity = 0;
  std::string signal;
  double alpha = 0.1;
  int reps = 200;
  std::uint64_t seed = 0;
  int grid_points = 801;
  double grid_width = 12.0;
  double sigma_known = 1.0;
  int threads = 0;
  std::string out = "out";
  std::string label;
};

int run_simulate(const SimulateArgs& a, const CLI::Option* seed_flag) {
  const std::string started = utc_now();
  selinf::ExperimentConfig cfg;
  json config;
  try {
    cfg.n = a.n;
    cfg.p = a.p;
    cfg.loss = parse_loss(a.loss);
    cfg.randomization = {parse_rand(a.rand), a.tau, a.p};
    cfg.c = a.c;
    cfg.sparsity = a.sparsity;
    if (!a.signal.empty()) cfg.signal_range = parse_signal(a.signal);
    cfg.alpha = a.alpha;
    cfg.n_reps = a.reps;
    cfg.seed = resolve_seed(seed_flag, a.seed);
    cfg.grid_points = a.grid_points;
    cfg.grid_width = a.grid_width;
    cfg.noise_variance = a.sigma_known;
    cfg.validate();
  } catch (const selinf::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  config = {{"loss", a.loss},       {"rand", a.rand},          {"tau", a.tau},
            {"c", a.c},             {"n", a.n},                {"p", a.p},
            {"sparsity", a.sparsity}, {"signal", a.signal},    {"alpha", a.alpha},
            {"reps", a.reps},       {"seed", cfg.seed},        {"grid_points", a.grid_points},
            {"grid_width", a.grid_width}, {"sigma_known", a.sigma_known},
            {"epsilon", cfg.ridge()}, {"lambda_draws", cfg.lambda_draws}};
  const std::string hash = selinf::io::git_blob_hash(config.dump());
  const std::string label = a.label.empty() ? a.loss + "/" + a.rand : a.label;

  OutputDir out(a.out);
  std::vector<selinf::ReplicationResult> results;
  try {
    const int threads = a.threads > 0 ? a.threads
                                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    results = selinf::run_batch(cfg, threads);
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    write_manifest(out, "simulate", config, hash, started, {{"error", e.what()}});
    return kExitRuntime;
  }

  std::ostringstream jsonl;
  int empty = 0;
  int failed = 0;
  int flagged = 0;
  int points = 0;
  json statuses = json::array();
  for (const auto& r : results) {
    if (r.status == "EmptySelection") ++empty;
    else if (r.status != "ok") ++failed;
    flagged += r.flagged_points;
    points += r.grid_points;
    statuses.push_back({{"rep", r.rep}, {"status", r.status}, {"selected", r.records.size()}});
    for (const auto& rec : r.records)
      jsonl << selinf::io::record_to_json(rec, r.rep, hash).dump() << "\n";
  }
  out.write("records.jsonl", jsonl.str());

  const auto records = selinf::flatten(results);
  const json summary = {{"replications", results.size()},
                        {"empty_selection", empty},
                        {"failed", failed},
                        {"flagged_grid_points", flagged},
                        {"grid_points", points},
                        {"replication_status", statuses}};
  try {
    const auto row = selinf::aggregate(records, label, cfg.loss == selinf::LossKind::ForwardStepwise ? 0.0 : cfg.c);
    out.write("coverage.csv", "# manifest: " + hash + "\n" + selinf::io::coverage_csv_header() + "\n" +
                                  selinf::io::coverage_csv_row(row) + "\n");
    json cov = selinf::io::coverage_to_json(row);
    cov["manifest"] = hash;
    out.write("coverage.json", cov.dump(2) + "\n");
    out.write("pivots.csv", ecdf_csv(records, hash));
    std::cout << selinf::io::coverage_csv_header() << "\n" << selinf::io::coverage_csv_row(row) << "\n";
  } catch (const selinf::Error& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    write_manifest(out, "simulate", config, hash, started, summary);
    return kExitRuntime;
  }
  write_manifest(out, "simulate", config, hash, started, summary);
  return kExitOk;
}

struct AnalyzeArgs {
  std::string data;
  std::string loss = "lasso";
  std::string rand = "gaussian";
  double tau = 1.0;
  double c = 1.0;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  int grid_points = 801;
  double grid_width = 12.0;
  std::optional<double> sigma_known;
  std::string out = "out";
};

int run_analyze(const AnalyzeArgs& a, const CLI::Option* seed_flag) {
  const std::string started = utc_now();
  std::string content;
  selinf::io::CsvTable table;
  selinf::AnalysisOptions opt;
  selinf::LossKind loss{};
  try {
    std::ifstream in(a.data, std::ios::binary);
    if (!in) throw selinf::Error(selinf::ErrorKind::InvalidArgument, "cannot open " + a.data);
    content.assign(std::istreambuf_iterator<char>(in), {});
    std::istringstream parse(content);
    table = selinf::io::read_numeric_csv(parse);
    if (table.header.size() < 2)
      throw selinf::Error(selinf::ErrorKind::MalformedInput, "need a response and at least one predictor");
    loss = parse_loss(a.loss);
    if (loss == selinf::LossKind::ForwardStepwise)
      throw selinf::Error(selinf::ErrorKind::InvalidArgument, "analyze supports lasso and logistic");
    opt.randomization = {parse_rand(a.rand), a.tau, 0};
    opt.c = a.c;
    opt.alpha = a.alpha;
    opt.seed = resolve_seed(seed_flag, a.seed);
    opt.grid_points = a.grid_points;
    opt.grid_width = a.grid_width;
    opt.noise_variance = a.sigma_known;
    if (!(a.c > 0.0) || !(a.alpha > 0.0 && a.alpha < 1.0) || !(a.tau > 0.0) || a.grid_points < 3)
      throw selinf::Error(selinf::ErrorKind::InvalidArgument, "invalid numeric option");
  } catch (const selinf::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  json config = {{"data", a.data}, {"loss", a.loss}, {"rand", a.rand}, {"tau", a.tau},
                 {"c", a.c},       {"alpha", a.alpha}, {"seed", opt.seed},
                 {"grid_points", a.grid_points}, {"grid_width", a.grid_width}};
  if (a.sigma_known) config["sigma_known"] = *a.sigma_known;
  const std::string hash =
      selinf::io::git_blob_hash(config.dump() + "\n" + selinf::io::git_blob_hash(content));

  const auto n = static_cast<selinf::Index>(table.rows.size());
  const auto p = static_cast<selinf::Index>(table.header.size() - 1);
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (selinf::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    y[i] = row[0];
    for (selinf::Index k = 0; k < p; ++k) X(i, k) = row[static_cast<std::size_t>(k + 1)];
  }

  OutputDir out(a.out);
  selinf::AnalysisResult result;
  try {
    if ((y.array() - y.mean()).abs().maxCoeff() == 0.0)
      throw selinf::Error(selinf::ErrorKind::EmptySelection, "response is constant");
    const auto data = selinf::Dataset::normalized(std::move(X), std::move(y), loss);
    result = selinf::analyze_dataset(data, opt);
  } catch (const selinf::Error& e) {
    std::cerr << e.what() << "\n";
    if (e.kind() == selinf::ErrorKind::EmptySelection) {
      write_manifest(out, "analyze", config, hash, started, {{"status", "EmptySelection"}});
      return kExitEmpty;
    }
    const bool input_problem = e.kind() == selinf::ErrorKind::InvalidArgument ||
                               e.kind() == selinf::ErrorKind::DimensionMismatch;
    write_manifest(out, "analyze", config, hash, started, {{"status", std::string(to_string(e.kind()))}});
    return input_problem ? kExitConfig : kExitRuntime;
  }

  std::ostringstream jsonl;
  std::ostringstream bars;
  bars << "# manifest: " << hash << "\n"
       << "variable,name,naive_est,naive_lo,naive_hi,mle,ci_lo,ci_hi\n";
  const auto f = selinf::io::format_double;
  for (const auto& rec : result.records) {
    json j = selinf::io::record_to_json(rec, 0, hash);
    j["name"] = table.header[static_cast<std::size_t>(rec.variable + 1)];
    jsonl << j.dump() << "\n";
    std::string name = table.header[static_cast<std::size_t>(rec.variable + 1)];
    if (name.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : name) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      name = quoted + "\"";
    }
    bars << rec.variable << ',' << name << ',' << f(rec.naive_estimate) << ',' << f(rec.naive_ci.lo)
         << ',' << f(rec.naive_ci.hi) << ',' << f(rec.mle) << ',' << f(rec.ci.lo) << ','
         << f(rec.ci.hi) << "\n";
  }
  out.write("records.jsonl", jsonl.str());
  out.write("barchart.csv", bars.str());
  write_manifest(out, "analyze", config, hash, started,
                 {{"status", "ok"},
                  {"selected", result.records.size()},
                  {"lambda", result.event.lambda},
                  {"noise_variance", result.noise_variance}});
  std::cout << bars.str();
  return kExitOk;
}

int run_aggregate(const std::string& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open " << path << "\n";
    return kExitConfig;
  }
  try {
    const auto records = selinf::io::read_records(in);
    const auto row = selinf::aggregate(records, label);
    std::cout << selinf::io::coverage_csv_header() << "\n" << selinf::io::coverage_csv_row(row) << "\n";
  } catch (const selinf::Error& e) {
    std::cerr << e.what() << "\n";
    return e.kind() == selinf::ErrorKind::MalformedInput ? kExitConfig : kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective inference after randomized l1-penalized selection"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Coverage simulation");
  simulate->add_option("--loss", sim.loss, "lasso | logistic | fs");
  simulate->add_option("--rand", sim.rand, "gaussian | laplace");
  simulate->add_option("--tau", sim.tau, "Randomization scale");
  simulate->add_option("--c", sim.c, "Lambda tuning constant");
  simulate->add_option("--n", sim.n, "Sample size");
  simulate->add_option("--p", sim.p, "Number of predictors");
  simulate->add_option("--sparsity", sim.sparsity, "Number of true signals");
  simulate->add_option("--signal", sim.signal, "Signal magnitude range lo:hi");
  simulate->add_option("--alpha", sim.alpha, "Interval level is 1 - alpha");
  simulate->add_option("--reps", sim.reps, "Replications");
  auto* sim_seed = simulate->add_option("--seed", sim.seed, "Seed (default: $SELECTIVE_SEED or 0)");
  simulate->add_option("--grid-points", sim.grid_points, "Grid size for log h");
  simulate->add_option("--grid-width", sim.grid_width, "Grid half-width in sigmas");
  simulate->add_option("--sigma-known", sim.sigma_known, "Noise variance of the response");
  simulate->add_option("--threads", sim.threads, "Worker threads (0: all cores)");
  simulate->add_option("--label", sim.label, "Row label");
  simulate->add_option("--out", sim.out, "Output directory");

  AnalyzeArgs ana;
  auto* analyze = app.add_subcommand("analyze", "Inference on a CSV dataset (first column = response)");
  analyze->add_option("--data", ana.data, "CSV file")->required();
  analyze->add_option("--loss", ana.loss, "lasso | logistic");
  analyze->add_option("--rand", ana.rand, "gaussian | laplace");
  analyze->add_option("--tau", ana.tau, "Randomization scale");
  analyze->add_option("--c", ana.c, "Lambda tuning constant");
  analyze->add_option("--alpha", ana.alpha, "Interval level is 1 - alpha");
  auto* ana_seed = analyze->add_option("--seed", ana.seed, "Seed (default: $SELECTIVE_SEED or 0)");
  analyze->add_option("--grid-points", ana.grid_points, "Grid size for log h");
  analyze->add_option("--grid-width", ana.grid_width, "Grid half-width in sigmas");
  analyze->add_option("--sigma-known", ana.sigma_known, "Noise variance (default: estimated)");
  analyze->add_option("--out", ana.out, "Output directory");

  std::string records_path;
  std::string agg_label;
  auto* agg = app.add_subcommand("aggregate", "Coverage table from a records.jsonl file");
  agg->add_option("--records", records_path, "JSON-lines records")->required();
  agg->add_option("--label", agg_label, "Row label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return run_simulate(sim, sim_seed);
    if (*analyze) return run_analyze(ana, ana_seed);
    return run_aggregate(records_path, agg_label);
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
