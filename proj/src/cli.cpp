#include "cremid/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cremid/analysis.hpp"
#include "cremid/checks.hpp"
#include "cremid/errors.hpp"
#include "cremid/io.hpp"
#include "cremid/sampler.hpp"
#include "cremid/scenario.hpp"

namespace cremid {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kDefaultSeed = 20120401;

/// --seed beats CREMID_SEED, which beats the configuration file.
std::optional<std::uint64_t> seed_override(const std::optional<std::uint64_t>& flag) {
  if (flag) return flag;
  if (const char* env = std::getenv("CREMID_SEED"); env && *env) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), v);
    if (ec != std::errc() || *ptr != '\0') throw ValidationError("CREMID_SEED must be an unsigned integer");
    return v;
  }
  return std::nullopt;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return rows;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

// A run directory holds either one chain (meta.json at the top) or several
// chain_<i> subdirectories; the fitted data sits next to them as data.csv.
ChainDraws load_run(const fs::path& dir) {
  if (fs::exists(dir / "meta.json")) return load_draws(dir);
  std::vector<ChainDraws> chains;
  for (int c = 1;; ++c) {
    const fs::path sub = dir / ("chain_" + std::to_string(c));
    if (!fs::exists(sub / "meta.json")) break;
    chains.push_back(load_draws(sub));
  }
  if (chains.empty()) throw ValidationError("'" + dir.string() + "' is not a run directory");
  return merge_chains(chains);
}

MultiSampleDataset load_run_data(const fs::path& dir, const ChainDraws& draws) {
  const fs::path path = dir / "data.csv";
  if (!fs::exists(path)) throw ValidationError("run directory lacks data.csv: '" + dir.string() + "'");
  MultiSampleDataset data = read_dataset(path);
  if (dataset_hash(data) != draws.info.data_hash) {
    throw ValidationError(path.string() + ": data hash does not match the run header");
  }
  return data;
}

json diagnostics_json(const SweepDiagnostics& d) {
  json j;
  j["swap_acceptance"] = d.counters.swap.rate();
  j["alpha_acceptance"] = d.counters.alpha.rate();
  j["epsilon_acceptance"] = d.counters.epsilon.rate();
  j["alpha_proposal_a"] = d.alpha_proposal_a;
  j["validation_failures"] = d.validation_failures;
  j["occupied_shared"] = d.occupied_shared.empty() ? 0 : d.occupied_shared.back();
  j["occupied_idiosyncratic"] = d.occupied_idiosyncratic.empty() ? 0 : d.occupied_idiosyncratic.back();
  return j;
}

struct Options {
  // simulate
  std::string kind;
  std::optional<std::uint64_t> seed;
  int n = -1;
  std::string out_path;
  // fit
  std::string data_path;
  std::string config_path;
  bool paper_literal = false;
  int chains = 0;
  // analysis
  std::string run_path;
  std::string test_path;
  std::string stat_kind = "rho-phi";
  int reps = 20;
  std::string statistic = "rho";
  bool quick = false;
};

int cmd_simulate(const Options& o, std::ostream& out) {
  const ScenarioSpec spec = make_scenario(parse_scenario_kind(o.kind), seed_override(o.seed).value_or(kDefaultSeed));
  const GeneratedData gen = o.n >= 0 ? generate(spec, o.n) : generate(spec);
  const fs::path dir(o.out_path);
  fs::create_directories(dir);
  write_dataset(gen.data, dir / "data.csv");

  std::string comps = "sample,index,component\n";
  for (int j = 0; j < gen.data.num_samples(); ++j)
    for (std::size_t i = 0; i < gen.components[j].size(); ++i)
      comps += gen.data.labels[j] + "," + std::to_string(i) + "," + std::to_string(gen.components[j][i] + 1) + "\n";
  write_text(dir / "components.csv", comps);

  json js;
  js["kind"] = to_string(spec.kind);
  js["seed"] = spec.seed;
  js["J"] = spec.J;
  js["p"] = spec.p;
  js["n_per_sample"] = o.n >= 0 ? o.n : spec.n_per_sample;
  js["weights"] = spec.weights;
  json means = json::array();
  for (const auto& per_sample : spec.means) {
    json row = json::array();
    for (const Vector& m : per_sample) row.push_back(vector_json(m));
    means.push_back(row);
  }
  js["means"] = means;
  json covs = json::array();
  for (const SpdMatrix& c : spec.covariances) covs.push_back(matrix_json(c.matrix()));
  js["covariances"] = covs;
  json shifts = json::array();
  for (const Vector& s : spec.shifts) shifts.push_back(vector_json(s));
  js["shifts"] = shifts;
  write_text(dir / "spec.json", js.dump(2) + "\n");
  out << "wrote " << gen.data.total_size() << " observations to " << (dir / "data.csv").string() << "\n";
  return 0;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const MultiSampleDataset data = read_dataset(fs::path(o.data_path));
  std::vector<ConfigEntry> entries;
  if (!o.config_path.empty()) entries = parse_config(fs::path(o.config_path));
  RunConfig cfg = resolve_config(data, entries);
  if (o.paper_literal) cfg.sampler.paper_literal = true;
  if (o.chains > 0) cfg.chains = o.chains;
  if (const auto seed = seed_override(o.seed)) {
    cfg.sampler.seed = *seed;
  } else if (std::none_of(entries.begin(), entries.end(), [](const ConfigEntry& e) { return e.key == "sampler.seed"; })) {
    cfg.sampler.seed = kDefaultSeed;
  }
  const auto described = describe_config(cfg);

  const fs::path dir(o.out_path);
  fs::create_directories(dir);
  write_dataset(data, dir / "data.csv");
  std::string cfg_text;
  for (const auto& [k, v] : described) cfg_text += k + "=" + v + "\n";
  write_text(dir / "config.txt", cfg_text);

  const int C = cfg.chains;
  std::vector<ChainResult> results(static_cast<std::size_t>(C));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(C));
  auto run_one = [&](int c) {
    try {
      SamplerConfig sc = cfg.sampler;
      sc.stream_id = static_cast<std::uint64_t>(c);
      results[c] = run_chain(data, cfg.hp, sc);
      results[c].draws.info.config = described;
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  std::vector<std::thread> threads;
  for (int c = 1; c < C; ++c) threads.emplace_back(run_one, c);
  run_one(0);
  for (auto& t : threads) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (int c = 0; c < C; ++c) {
    const fs::path chain_dir = C == 1 ? dir : dir / ("chain_" + std::to_string(c + 1));
    persist_draws(results[c].draws, chain_dir);
    write_text(chain_dir / "diagnostics.json", diagnostics_json(results[c].diagnostics).dump(2) + "\n");
    const auto& d = results[c].diagnostics;
    out << "chain " << c + 1 << ": " << results[c].draws.size() << " draws, stream " << c
        << ", alpha acceptance " << d.counters.alpha.rate() << ", epsilon acceptance " << d.counters.epsilon.rate()
        << ", swap acceptance " << d.counters.swap.rate() << "\n";
  }
  return 0;
}

int cmd_calibrate(const Options& o, std::ostream& out) {
  const fs::path dir(o.run_path);
  const ChainDraws draws = load_run(dir);
  const MultiSampleDataset data = o.data_path.empty() ? load_run_data(dir, draws) : read_dataset(fs::path(o.data_path));
  if (dataset_hash(data) != draws.info.data_hash) throw ValidationError("data do not match the run");
  write_dataset(calibrate(draws, data), fs::path(o.out_path));
  out << "wrote calibrated data to " << o.out_path << "\n";
  return 0;
}

int cmd_score(const Options& o, std::ostream& out) {
  const ChainDraws draws = load_run(fs::path(o.run_path));
  const MultiSampleDataset test = read_dataset(fs::path(o.test_path));
  out << "log_predictive_score=" << format_double(log_predictive_score(draws, test)) << "\n";
  return 0;
}

int cmd_density(const Options& o, std::ostream& out) {
  const fs::path dir(o.run_path);
  const ChainDraws draws = load_run(dir);
  const MultiSampleDataset data = load_run_data(dir, draws);
  const PredictiveDensity dens = predictive_marginals(draws, data);
  std::ofstream file(o.out_path, std::ios::binary | std::ios::trunc);
  if (!file) throw ValidationError("cannot write '" + o.out_path + "'");
  file << "sample,dim,x,density\n";
  for (int j = 0; j < dens.num_samples(); ++j)
    for (int d = 0; d < dens.dim(); ++d)
      for (Eigen::Index t = 0; t < dens.grid[d].size(); ++t)
        file << data.labels[j] << "," << d + 1 << "," << format_double(dens.grid[d](t)) << ","
             << format_double(dens.density[j][d](t)) << "\n";
  out << "wrote predictive marginals to " << o.out_path << "\n";
  return 0;
}

int cmd_test_stat(const Options& o, std::ostream& out) {
  const ChainDraws draws = load_run(fs::path(o.run_path));
  const StatisticKind kind = parse_statistic_kind(o.stat_kind);
  out << "statistic=" << format_double(test_statistic(draws, kind)) << " kind=" << to_string(kind)
      << " draws=" << draws.size() << " paper_literal=" << (draws.info.paper_literal ? "true" : "false") << "\n";
  return 0;
}

int cmd_roc(const Options& o, std::ostream& out) {
  RocHarnessOptions h;
  h.kind = parse_scenario_kind(o.kind);
  h.n_reps = o.reps;
  if (o.n >= 0) h.n_per_sample = o.n;
  h.seed = seed_override(o.seed).value_or(kDefaultSeed);
  h.statistic = parse_statistic_kind(o.statistic);
  if (!o.config_path.empty()) {
    // Sampler and truncation settings only; priors are re-centred per dataset.
    const auto entries = parse_config(fs::path(o.config_path));
    const GeneratedData probe = generate(make_scenario(h.kind, h.seed), 10);
    const RunConfig cfg = resolve_config(probe.data, entries);
    for (const ConfigEntry& e : entries)
      if (e.key.rfind("prior.", 0) == 0) throw ValidationError(e.where + ": prior settings are not used by roc");
    h.sampler = cfg.sampler;
    h.K0 = cfg.hp.K0;
    h.K1 = cfg.hp.K1;
  }
  h.sampler.seed = h.seed;
  if (o.paper_literal) h.sampler.paper_literal = true;
  const RocHarnessResult r = roc_harness(h);

  std::ofstream file(o.out_path, std::ios::binary | std::ios::trunc);
  if (!file) throw ValidationError("cannot write '" + o.out_path + "'");
  file << "orientation,threshold,false_positive_rate,true_positive_rate\n";
  auto dump = [&file](const std::string& name, const RocCurve& c) {
    for (const RocPoint& p : c.points)
      file << name << "," << format_double(p.threshold) << "," << format_double(p.false_positive_rate) << ","
           << format_double(p.true_positive_rate) << "\n";
  };
  dump("identity", r.identity);
  dump("difference", r.difference);
  std::ofstream stats(o.out_path + ".statistics.csv", std::ios::binary | std::ios::trunc);
  stats << "replicate,null,alternative\n";
  for (int i = 0; i < h.n_reps; ++i)
    stats << i + 1 << "," << format_double(r.null_statistics[i]) << "," << format_double(r.alternative_statistics[i])
          << "\n";
  out << "auc=" << format_double(r.identity.auc) << " statistic=" << to_string(h.statistic)
      << " reps=" << h.n_reps << " paper_literal=" << (r.paper_literal ? "true" : "false") << "\n";
  return 0;
}

int cmd_selfcheck(const Options& o, std::ostream& out) {
  const std::uint64_t seed = seed_override(o.seed).value_or(kDefaultSeed);
  std::vector<CheckResult> all = conjugate_oracle_checks(seed, o.quick ? 20000 : 100000);
  all.push_back(bayes_factor_check(seed));
  all.push_back(swap_ratio_check(seed, o.quick ? 200000 : 1000000));
  const auto geweke = geweke_checks(seed, o.quick ? 5000 : 20000);
  all.insert(all.end(), geweke.begin(), geweke.end());
  int failed = 0;
  for (const CheckResult& r : all) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    failed += r.passed ? 0 : 1;
  }
  out << all.size() - failed << "/" << all.size() << " checks passed\n";
  return failed == 0 ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-sample Gaussian mixture inference", "cremid"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic scenario dataset");
  sim->add_option("--kind", o.kind, "local_shift, global_shift, local_weight, global_weight or calibration_demo")
      ->required();
  sim->add_option("--seed", o.seed, "Scenario seed");
  sim->add_option("--n", o.n, "Observations per sample (scenario default if omitted)");
  sim->add_option("--out", o.out_path, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Run the sampler and persist the draws");
  fit->add_option("--data", o.data_path, "Input CSV")->required();
  fit->add_option("--config", o.config_path, "key=value configuration file");
  fit->add_option("--out", o.out_path, "Run directory")->required();
  fit->add_flag("--paper-literal", o.paper_literal, "Use the conditionals exactly as printed in the paper");
  fit->add_option("--chains", o.chains, "Number of chains")->check(CLI::PositiveNumber);
  fit->add_option("--seed", o.seed, "Sampler seed");

  auto* cal = app.add_subcommand("calibrate", "Remove estimated kernel perturbations from the data");
  cal->add_option("--run", o.run_path, "Run directory")->required();
  cal->add_option("--data", o.data_path, "Data to calibrate (defaults to the fitted data)");
  cal->add_option("--out", o.out_path, "Output CSV")->required();

  auto* score = app.add_subcommand("score", "Log predictive score of held-out data");
  score->add_option("--run", o.run_path, "Run directory")->required();
  score->add_option("--test", o.test_path, "Test CSV")->required();

  auto* dens = app.add_subcommand("density", "Posterior predictive marginal densities on a grid");
  dens->add_option("--run", o.run_path, "Run directory")->required();
  dens->add_option("--out", o.out_path, "Output CSV")->required();

  auto* stat = app.add_subcommand("test-stat", "Posterior test statistic for distributional identity");
  stat->add_option("--run", o.run_path, "Run directory")->required();
  stat->add_option("--kind", o.stat_kind, "rho or rho-phi")->check(CLI::IsMember({"rho", "rho-phi"}));

  auto* roc = app.add_subcommand("roc", "ROC study against label-permuted nulls");
  roc->add_option("--kind", o.kind, "Scenario kind")->required();
  roc->add_option("--reps", o.reps, "Replicates");
  roc->add_option("--n", o.n, "Observations per sample (default 100)");
  roc->add_option("--seed", o.seed, "Base seed");
  roc->add_option("--statistic", o.statistic, "rho or rho-phi")->check(CLI::IsMember({"rho", "rho-phi"}));
  roc->add_option("--config", o.config_path, "Sampler configuration file");
  roc->add_flag("--paper-literal", o.paper_literal, "Use the conditionals exactly as printed in the paper");
  roc->add_option("--out", o.out_path, "Output CSV")->required();

  auto* self = app.add_subcommand("selfcheck", "Run the joint-distribution and conjugate-oracle checks");
  self->add_option("--seed", o.seed, "Seed");
  self->add_flag("--quick", o.quick, "Fewer redraws");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*sim) return cmd_simulate(o, out);
    if (*fit) return cmd_fit(o, out);
    if (*cal) return cmd_calibrate(o, out);
    if (*score) return cmd_score(o, out);
    if (*dens) return cmd_density(o, out);
    if (*stat) return cmd_test_stat(o, out);
    if (*roc) return cmd_roc(o, out);
    if (*self) return cmd_selfcheck(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace cremid
